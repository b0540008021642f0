"""Truncated Fock-space states and the elementary optical channels.

Quadrature convention used throughout the package::

    a = (q + i p) / 2,   q = a + a^dagger,   p = i (a^dagger - a)

so that ``[q, p] = 2i`` and the vacuum has ``Var(q) = Var(p) = 1``.  In the
``hbar = 1`` convention (``x = (a + a^dagger)/sqrt(2)``) every quadrature is
rescaled by ``sqrt(2)``: ``q = sqrt(2) x`` and ``p = sqrt(2) p_hbar``.

States live on a :class:`FockSpace`, a finite set of occupation tuples.  Two
truncations are supported and can be combined:

* a per-mode cutoff ``n_i <= cutoff_i`` (the usual ``(cutoff+1)^m`` tensor);
* a cap on the total photon number ``sum_i n_i <= total``.  Passive
  (number-conserving) unitaries are exact on such a space, which is what makes
  strongly squeezed multimode clusters tractable.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

LEAKAGE_THRESHOLD = 1e-8
NORM_TOLERANCE = 1e-8
NORM_FLOOR = 1e-12
EIG_TOLERANCE = 1e-9
MAX_DENSITY_DIM = 4096
MOMENT_LIMIT = 6


class TruncationError(ValueError):
    """Raised when the Fock cutoff is too small for the requested operation."""


class SubtractionError(ValueError):
    """Raised when a photon subtraction has (numerically) zero probability."""


def db_to_r(s_db: float) -> float:
    """Convert a squeezing level in dB to the natural squeezing parameter.

    ``|r| = ln(10) |s_dB| / 20`` so that the squeezed quadrature variance is
    ``10**(-|s_dB|/10)``.  The sign is carried over: positive values squeeze
    ``q``, negative values squeeze ``p``.
    """
    return math.log(10.0) * s_db / 20.0


def r_to_db(r: float) -> float:
    return 20.0 * r / math.log(10.0)


def _enumerate(cutoffs: tuple[int, ...], total: int | None) -> np.ndarray:
    states = np.zeros((1, 0), dtype=np.int64)
    for c in cutoffs:
        n = np.arange(c + 1, dtype=np.int64)
        rows = np.repeat(states, c + 1, axis=0)
        col = np.tile(n, len(states))
        states = np.column_stack([rows, col])
        if total is not None:
            states = states[states.sum(axis=1) <= total]
    return states


class FockSpace:
    """Finite set of multimode occupation tuples with sparse ladder operators.

    Basis states are ordered lexicographically (mode 0 most significant), so
    without a total cap the flat index coincides with C-order raveling of the
    ``(cutoff+1, ..., cutoff+1)`` amplitude tensor.

    Instances are immutable; operator matrices are built lazily and cached
    behind a lock so a space can be shared between threads.
    """

    def __init__(self, modes: int, cutoff: int | Sequence[int], total: int | None = None):
        if modes < 1:
            raise ValueError("need at least one mode")
        if np.isscalar(cutoff):
            cutoffs = (int(cutoff),) * modes
        else:
            cutoffs = tuple(int(c) for c in cutoff)
        if len(cutoffs) != modes:
            raise ValueError(f"expected {modes} cutoffs, got {len(cutoffs)}")
        if min(cutoffs) < 1:
            raise ValueError("cutoff must be >= 1")
        if total is not None and total < 1:
            raise ValueError("total photon cap must be >= 1")
        self.modes = modes
        self.cutoffs = cutoffs
        self.total = None if total is None else int(total)
        self.states = _enumerate(cutoffs, self.total)
        self.states.setflags(write=False)
        self._radix = np.array(cutoffs) + 1
        self._keys = np.ravel_multi_index(self.states.T, self._radix)
        self._cache: dict = {}
        self._lock = threading.RLock()

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def cutoff(self) -> int:
        return max(self.cutoffs)

    @property
    def is_product(self) -> bool:
        """True when the basis is the full tensor product (no total cap)."""
        return self.dim == int(np.prod(self._radix))

    def __repr__(self) -> str:
        return f"FockSpace(modes={self.modes}, cutoff={self.cutoffs}, total={self.total}, dim={self.dim})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FockSpace)
            and self.modes == other.modes
            and self.cutoffs == other.cutoffs
            and self.total == other.total
        )

    def __hash__(self) -> int:
        return hash((self.modes, self.cutoffs, self.total))

    def index(self, occupations) -> np.ndarray:
        """Flat indices of occupation rows; ``-1`` where a row is not in the basis."""
        occ = np.atleast_2d(np.asarray(occupations, dtype=np.int64))
        inside = np.all((occ >= 0) & (occ < self._radix), axis=1)
        if self.total is not None:
            inside &= occ.sum(axis=1) <= self.total
        out = np.full(len(occ), -1, dtype=np.int64)
        if inside.any():
            keys = np.ravel_multi_index(occ[inside].T, self._radix)
            pos = np.searchsorted(self._keys, keys)
            pos = np.minimum(pos, len(self._keys) - 1)
            found = self._keys[pos] == keys
            sel = np.flatnonzero(inside)
            out[sel[found]] = pos[found]
        return out

    def _cached(self, key, build):
        with self._lock:
            if key not in self._cache:
                self._cache[key] = build()
            return self._cache[key]

    def _lowering(self, mode: int, k: int, weights) -> sp.csr_matrix:
        n = self.states[:, mode]
        src = np.flatnonzero(n >= k)
        tgt_occ = self.states[src].copy()
        tgt_occ[:, mode] -= k
        tgt = self.index(tgt_occ)
        ok = tgt >= 0
        vals = weights(n[src][ok])
        return sp.csr_matrix((vals, (tgt[ok], src[ok])), shape=(self.dim, self.dim))

    def annihilation(self, mode: int) -> sp.csr_matrix:
        return self._cached(
            ("a", mode),
            lambda: self._lowering(mode, 1, lambda n: np.sqrt(n.astype(float))).astype(complex),
        )

    def creation(self, mode: int) -> sp.csr_matrix:
        return self._cached(("ad", mode), lambda: self.annihilation(mode).conj().T.tocsr())

    def number(self, mode: int) -> sp.csr_matrix:
        return self._cached(("n", mode), lambda: sp.diags(self.states[:, mode].astype(complex)).tocsr())

    def q(self, mode: int) -> sp.csr_matrix:
        return self._cached(("q", mode), lambda: (self.annihilation(mode) + self.creation(mode)).tocsr())

    def p(self, mode: int) -> sp.csr_matrix:
        return self._cached(
            ("p", mode), lambda: (1j * (self.creation(mode) - self.annihilation(mode))).tocsr()
        )

    def quadrature(self, index: int) -> sp.csr_matrix:
        """Quadrature ``xi_index`` in the ordering ``(q_1..q_m, p_1..p_m)``."""
        m = self.modes
        return self.q(index) if index < m else self.p(index - m)

    def loss_kraus(self, mode: int, k: int, eta: float) -> sp.csr_matrix:
        """Kraus operator removing ``k`` photons from ``mode`` with efficiency ``eta``.

        Matrix elements ``<n-k|K_k|n> = sqrt(C(n, k) eta^(n-k) (1-eta)^k)``.
        """

        def weights(n):
            c = np.array([math.comb(int(x), k) for x in n], dtype=float)
            return np.sqrt(c * eta ** (n - k).astype(float) * (1.0 - eta) ** k)

        return self._lowering(mode, k, weights)

    def top_layer(self) -> np.ndarray:
        """Boolean mask of basis states on the truncation boundary."""
        mask = np.any(self.states == np.array(self.cutoffs), axis=1)
        if self.total is not None:
            mask |= self.states.sum(axis=1) == self.total
        return mask

    def vacuum_index(self) -> int:
        return 0


def _check_norm(vec: np.ndarray, tol: float) -> float:
    norm = float(np.vdot(vec, vec).real)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"state norm {norm:.12g} deviates from 1 by more than {tol:g}")
    return norm


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized state vector on a :class:`FockSpace`."""

    space: FockSpace
    amplitudes: np.ndarray
    norm_tolerance: float = NORM_TOLERANCE

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape != (self.space.dim,):
            raise ValueError(f"amplitude vector has shape {amps.shape}, space dim is {self.space.dim}")
        _check_norm(amps, self.norm_tolerance)
        amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def modes(self) -> int:
        return self.space.modes

    @property
    def cutoff(self) -> int:
        return self.space.cutoff

    @property
    def leakage(self) -> float:
        """Probability on the truncation boundary (any ``n_i = cutoff_i`` or the total cap)."""
        return float(np.sum(np.abs(self.amplitudes[self.space.top_layer()]) ** 2))

    def tensor(self) -> np.ndarray:
        """Amplitudes as an ``(cutoff_1+1, ..., cutoff_m+1)`` tensor."""
        out = np.zeros(tuple(self.space._radix), dtype=complex)
        out[tuple(self.space.states.T)] = self.amplitudes
        return out

    def amplitude(self, occupation: Sequence[int]) -> complex:
        idx = self.space.index([occupation])[0]
        return 0j if idx < 0 else complex(self.amplitudes[idx])

    def density(self) -> "DensityState":
        return DensityState(self.space, np.outer(self.amplitudes, self.amplitudes.conj()))

    def mean_photons(self) -> float:
        n = self.space.states.sum(axis=1)
        return float(np.sum(n * np.abs(self.amplitudes) ** 2))


@dataclass(frozen=True, eq=False)
class DensityState:
    """Density matrix on a :class:`FockSpace`.

    Hermiticity and unit trace are checked on construction; positivity is
    checked by :func:`spectral_decompose`.
    """

    space: FockSpace
    matrix: np.ndarray
    tolerance: float = NORM_TOLERANCE

    def __post_init__(self):
        rho = np.asarray(self.matrix, dtype=complex)
        d = self.space.dim
        if d > MAX_DENSITY_DIM:
            raise MemoryError(f"density matrix of dimension {d} exceeds the guard {MAX_DENSITY_DIM}")
        if rho.shape != (d, d):
            raise ValueError(f"density matrix has shape {rho.shape}, expected {(d, d)}")
        if not np.allclose(rho, rho.conj().T, atol=1e-10):
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > self.tolerance:
            raise ValueError(f"density matrix trace {tr:.12g} deviates from 1")
        rho = 0.5 * (rho + rho.conj().T)
        rho.setflags(write=False)
        object.__setattr__(self, "matrix", rho)

    @property
    def modes(self) -> int:
        return self.space.modes

    @property
    def cutoff(self) -> int:
        return self.space.cutoff

    @property
    def leakage(self) -> float:
        return float(np.real(np.diag(self.matrix))[self.space.top_layer()].sum())

    def mean_photons(self) -> float:
        n = self.space.states.sum(axis=1)
        return float(np.sum(n * np.real(np.diag(self.matrix))))


State = PureState | DensityState


# ---------------------------------------------------------------------------
# state preparation and channels
# ---------------------------------------------------------------------------


def single_mode_squeezed(r: float, cutoff: int) -> np.ndarray:
    """Amplitudes ``<n|S(r)|0>`` for ``n <= cutoff``.

    ``S(r) = exp((r/2)(a^2 - a^dagger^2))`` is exponentiated on a padded
    workspace so that the truncation does not distort the retained levels.
    """
    work = cutoff + 40 + int(40 * abs(r))
    n = np.arange(1, work + 1)
    a = np.diag(np.sqrt(n), k=1)
    gen = 0.5 * r * (a @ a - a.T @ a.T)
    vac = np.zeros(work + 1)
    vac[0] = 1.0
    vec = scipy.linalg.expm(gen) @ vac
    return vec[: cutoff + 1]


def squeezed_vacuum(
    r: Sequence[float],
    cutoff: int | Sequence[int] | None = None,
    *,
    total: int | None = None,
    leakage_threshold: float = LEAKAGE_THRESHOLD,
    space: FockSpace | None = None,
) -> PureState:
    """Tensor product of single-mode squeezed vacua.

    Args:
        r: squeezing parameter per mode, natural units.  ``r > 0`` squeezes
            ``q`` (``Var(q) = exp(-2r)``), ``r < 0`` squeezes ``p``.
        cutoff: per-mode Fock cutoff.  When omitted the smallest cutoff
            meeting ``leakage_threshold`` is chosen per mode.
        total: optional cap on the total photon number.
        leakage_threshold: maximum probability allowed on and beyond the
            truncation boundary.
        space: use this space instead of building one.

    Raises:
        TruncationError: if the cutoff leaves more than ``leakage_threshold``
            of probability at or beyond the boundary.
    """
    r = [float(x) for x in r]
    m = len(r)
    if space is None:
        if cutoff is None:
            cutoff = [auto_cutoff(x, leakage_threshold) for x in r]
        cut = (int(cutoff),) * m if np.isscalar(cutoff) else tuple(int(c) for c in cutoff)
        if min(cut) < 2:
            raise ValueError("cutoff must be >= 2")
        space = FockSpace(m, cut, total)
    cut = space.cutoffs
    vecs = [single_mode_squeezed(x, c) for x, c in zip(r, cut)]
    for x, c, v in zip(r, cut, vecs):
        edge = 1.0 - float(np.sum(v[:c] ** 2))
        if edge > leakage_threshold:
            raise TruncationError(
                f"cutoff {c} leaves {edge:.2e} probability at the boundary for r={x:g}"
            )
    amps = np.ones(space.dim, dtype=complex)
    for i, v in enumerate(vecs):
        amps *= v[space.states[:, i]]
    kept = float(np.vdot(amps, amps).real)
    if 1.0 - kept > max(leakage_threshold, 1e-14) * max(1, m):
        raise TruncationError(f"total-photon cap discards {1 - kept:.2e} of the probability")
    return PureState(space, amps / math.sqrt(kept))


def auto_cutoff(r: float, leakage_threshold: float = LEAKAGE_THRESHOLD, minimum: int = 2) -> int:
    """Smallest cutoff for which a squeezed vacuum keeps the boundary below threshold."""
    c = minimum
    while True:
        v = single_mode_squeezed(r, c)
        if 1.0 - float(np.sum(v[:c] ** 2)) <= leakage_threshold:
            return c
        c += 1


def fock_state(space: FockSpace, occupation: Sequence[int]) -> PureState:
    idx = space.index([occupation])[0]
    if idx < 0:
        raise ValueError(f"occupation {tuple(occupation)} is outside the truncated space")
    vec = np.zeros(space.dim, dtype=complex)
    vec[idx] = 1.0
    return PureState(space, vec)


def vacuum(modes: int, cutoff: int, total: int | None = None) -> PureState:
    space = FockSpace(modes, cutoff, total)
    return fock_state(space, [0] * modes)


def check_unitary(u: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError("mode transformation must be a square matrix")
    err = np.max(np.abs(u.conj().T @ u - np.eye(len(u))))
    if err > tol:
        raise ValueError(f"mode transformation is not unitary (error {err:.2e})")
    return u


def passive_generator(space: FockSpace, u: np.ndarray) -> sp.csr_matrix:
    """Sparse ``sum_jk h_jk a_j^dagger a_k`` with ``u = exp(i h)``."""
    t, z = scipy.linalg.schur(u, output="complex")
    h = z @ np.diag(np.angle(np.diag(t))) @ z.conj().T
    h = 0.5 * (h + h.conj().T)
    gen = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for j in range(space.modes):
        for k in range(space.modes):
            if abs(h[j, k]) > 1e-15:
                gen = gen + h[j, k] * (space.creation(j) @ space.annihilation(k))
    return gen.tocsr()


def apply_passive_unitary(
    state: State, u_modes: np.ndarray, *, leakage_tol: float = 1e-6
) -> State:
    """Apply the passive unitary whose action on mode operators is ``a -> u a``.

    In the Schroedinger picture a photon in mode ``k`` is sent to
    ``sum_j u[j, k] |1_j>``; e.g. ``u = [[1, -1], [1, 1]]/sqrt(2)`` maps
    ``|1,0>`` to ``(|1,0> + |0,1>)/sqrt(2)``.

    Raises:
        ValueError: if ``u_modes`` is not unitary.
        TruncationError: if the output puts more than ``leakage_tol`` on the
            truncation boundary.
    """
    u = check_unitary(u_modes)
    if u.shape[0] != state.modes:
        raise ValueError("mode transformation size does not match the state")
    space = state.space
    if np.allclose(u, np.eye(len(u)), atol=1e-15):
        return state
    gen = 1j * passive_generator(space, u)
    if isinstance(state, PureState):
        vec = expm_multiply(gen, state.amplitudes)
        vec = vec / np.linalg.norm(vec)
        out: State = PureState(space, vec, state.norm_tolerance)
    else:
        half = expm_multiply(gen, state.matrix)
        rho = expm_multiply(gen, half.conj().T).conj().T
        out = DensityState(space, rho)
    if out.leakage > max(leakage_tol, 2 * state.leakage):
        raise TruncationError(f"passive unitary pushed {out.leakage:.2e} onto the truncation boundary")
    return out


def subtraction_coefficients(angles: Sequence[float] | float, modes: int) -> np.ndarray:
    """Unit vector of mode weights from hyperspherical angles.

    One angle ``Theta`` on two modes gives ``(cos Theta, sin Theta)``; in
    general ``m - 1`` angles are needed.
    """
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if len(angles) != modes - 1:
        raise ValueError(f"{modes} modes need {modes - 1} subtraction angles, got {len(angles)}")
    c = np.ones(modes)
    for i, t in enumerate(angles):
        c[i] *= math.cos(t)
        c[i + 1 :] *= math.sin(t)
    return c


def subtract_photon(
    state: PureState,
    angles: Sequence[float] | float | None = None,
    *,
    coefficients: Sequence[complex] | None = None,
    norm_floor: float = NORM_FLOOR,
    return_norm: bool = False,
):
    """Apply ``sum_k c_k a_k`` and renormalize.

    Exactly one of ``angles`` (hyperspherical, see
    :func:`subtraction_coefficients`) or ``coefficients`` must be given.
    With ``return_norm`` the squared norm before renormalization (the
    heralding probability up to the detector efficiency) is returned as well.
    """
    if (angles is None) == (coefficients is None):
        raise ValueError("give either angles or coefficients")
    m = state.modes
    if coefficients is None:
        c = subtraction_coefficients(angles, m).astype(complex)
    else:
        c = np.asarray(coefficients, dtype=complex)
        if c.shape != (m,):
            raise ValueError("need one coefficient per mode")
        c = c / np.linalg.norm(c)
    vec = np.zeros(state.space.dim, dtype=complex)
    for k in range(m):
        if c[k] != 0:
            vec += c[k] * (state.space.annihilation(k) @ state.amplitudes)
    norm2 = float(np.vdot(vec, vec).real)
    if norm2 < norm_floor:
        raise SubtractionError(f"subtraction probability ~ 0 (norm^2 = {norm2:.2e})")
    out = PureState(state.space, vec / math.sqrt(norm2), state.norm_tolerance)
    return (out, norm2) if return_norm else out


def apply_loss(state: State, eta: float | Sequence[float]) -> DensityState:
    """Independent amplitude-damping channel on every mode.

    ``eta`` is the transmission (1 = lossless, 0 = total loss), either one
    value for all modes or one per mode.
    """
    m = state.modes
    etas = np.broadcast_to(np.asarray(eta, dtype=float), (m,))
    if np.any((etas < 0) | (etas > 1)):
        raise ValueError("efficiency must lie in [0, 1]")
    space = state.space
    rho = state.density().matrix.copy() if isinstance(state, PureState) else state.matrix.copy()
    for mode, e in enumerate(etas):
        if e == 1.0:
            continue
        new = np.zeros_like(rho)
        for k in range(space.cutoffs[mode] + 1):
            kraus = space.loss_kraus(mode, k, float(e))
            if kraus.nnz == 0:
                continue
            new += kraus @ (kraus @ rho).conj().T
        rho = 0.5 * (new + new.conj().T)
    return DensityState(space, rho)


def spectral_decompose(rho: DensityState, p_floor: float = 1e-12, eig_tolerance: float = EIG_TOLERANCE):
    """Eigenpairs of ``rho`` with weight at least ``p_floor``, largest first.

    Returns:
        tuple ``(weights, vectors)`` with ``vectors[:, k]`` the k-th eigenvector.

    Raises:
        ValueError: for non-Hermitian input or eigenvalues below ``-eig_tolerance``.
    """
    mat = rho.matrix if isinstance(rho, DensityState) else np.asarray(rho)
    if not np.allclose(mat, mat.conj().T, atol=1e-10):
        raise ValueError("density matrix is not Hermitian")
    w, v = np.linalg.eigh(mat)
    if w[0] < -eig_tolerance:
        raise ValueError(f"density matrix has a negative eigenvalue {w[0]:.2e}")
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    keep = w >= p_floor
    return w[keep], v[:, keep]


# ---------------------------------------------------------------------------
# symmetrized quadrature monomials
# ---------------------------------------------------------------------------


def _mode_terms(a: int, b: int):
    """Weyl-ordered ``q^a p^b`` as a list of (coefficient, word) pairs.

    McCoy's formula, valid whenever ``[q, p]`` is a c-number:
    ``W(q^a p^b) = 2^-a sum_k C(a, k) q^k p^b q^(a-k)``, or the mirrored form
    in ``p`` when that has fewer terms.
    """
    if a <= b:
        return [(math.comb(a, k) / 2**a, "q" * k + "p" * b + "q" * (a - k)) for k in range(a + 1)]
    return [(math.comb(b, k) / 2**b, "p" * k + "q" * a + "p" * (b - k)) for k in range(b + 1)]


def _apply_word(space: FockSpace, mode: int, word: str, vec: np.ndarray) -> np.ndarray:
    ops = {"q": space.q(mode), "p": space.p(mode)}
    for ch in reversed(word):
        vec = ops[ch] @ vec
    return vec


def apply_monomial(
    space: FockSpace, exponents: Sequence[int], vec: np.ndarray, moment_limit: int = MOMENT_LIMIT
) -> np.ndarray:
    """Act with the symmetrized monomial ``S(q_1^k1 .. q_m^km p_1^k(m+1) .. p_m^k2m)``.

    ``vec`` may be a vector or a matrix whose columns are acted on.
    """
    m = space.modes
    k = tuple(int(x) for x in exponents)
    if len(k) != 2 * m:
        raise ValueError(f"exponent tuple must have length {2 * m}")
    if min(k) < 0:
        raise ValueError("exponents must be non-negative")
    if sum(k) > moment_limit:
        raise ValueError(f"monomial order {sum(k)} exceeds the moment limit {moment_limit}")
    out = np.asarray(vec, dtype=complex)
    for mode in range(m):
        a, b = k[mode], k[m + mode]
        if a == 0 and b == 0:
            continue
        acc = 0
        for coef, word in _mode_terms(a, b):
            acc = acc + coef * _apply_word(space, mode, word, out)
        out = acc
    return out


def expectation(state: State, exponents: Sequence[int], moment_limit: int = MOMENT_LIMIT) -> float:
    """Expectation value of a symmetrized quadrature monomial."""
    if isinstance(state, PureState):
        val = np.vdot(state.amplitudes, apply_monomial(state.space, exponents, state.amplitudes, moment_limit))
    else:
        val = np.trace(apply_monomial(state.space, exponents, state.matrix, moment_limit))
    return float(np.real(val))
