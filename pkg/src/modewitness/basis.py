"""Passive mode-basis changes: Clements mesh, quadrature form, generator lift.

Quadratures are ordered ``xi = (q_1, .., q_m, p_1, .., p_m)``.  A basis change
is a real orthogonal symplectic ``O`` with ``xi' = O xi``.  It corresponds to
the mode transformation ``a' = u a`` with ``u = X + iY`` and
``O = [[X, -Y], [Y, X]]``.

Mesh layout (rectangular, Clements): column ``c = 0..m-1`` holds the pairs
``(k, k+1)`` with ``k = c mod 2, c mod 2 + 2, ...``.  Each mesh element is
``R_k(theta) Ph_k(phi)``, a phase rotation on the upper mode followed by a
real beamsplitter, and the full transformation is the ordered product
``O = T_1 T_2 ... T_K``.  For two modes this is ``O = R(theta) Ph(phi)``.  The
final column of ``m`` output phases is omitted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from ._kernels import lift_block
from .generators import GeneratorSet, Partition

LIFT_MAX_ORDER = 3


def mesh_layout(modes: int) -> list[tuple[int, int]]:
    """Mode pairs of the rectangular mesh in application order."""
    out = []
    for col in range(modes):
        for k in range(col % 2, modes - 1, 2):
            out.append((k, k + 1))
    return out


def n_mesh_params(modes: int) -> int:
    return modes * (modes - 1) // 2


def beamsplitter(theta: float, i: int, j: int, modes: int) -> np.ndarray:
    """Real beamsplitter on modes ``(i, j)`` in quadrature form."""
    c, s = np.cos(theta), np.sin(theta)
    out = np.eye(2 * modes)
    for off in (0, modes):
        out[off + i, off + i] = c
        out[off + i, off + j] = s
        out[off + j, off + i] = -s
        out[off + j, off + j] = c
    return out


def phase(phi: float, i: int, modes: int) -> np.ndarray:
    """Phase rotation of mode ``i``: ``q' = cos q + sin p``, ``p' = -sin q + cos p``."""
    c, s = np.cos(phi), np.sin(phi)
    out = np.eye(2 * modes)
    out[i, i] = c
    out[i, modes + i] = s
    out[modes + i, i] = -s
    out[modes + i, modes + i] = c
    return out


def symplectic_form(modes: int) -> np.ndarray:
    eye = np.eye(modes)
    zero = np.zeros((modes, modes))
    return np.block([[zero, eye], [-eye, zero]])


def orthogonal_to_unitary(o: np.ndarray) -> np.ndarray:
    """Mode matrix ``u`` with ``a -> u a`` for an orthogonal symplectic ``O``."""
    m = len(o) // 2
    return o[:m, :m] + 1j * o[m:, :m]


def unitary_to_orthogonal(u: np.ndarray) -> np.ndarray:
    x, y = u.real, u.imag
    return np.block([[x, -y], [y, x]])


@dataclass(frozen=True, eq=False)
class BasisChange:
    """Clements parameters with their quadrature representation."""

    theta: np.ndarray
    phi: np.ndarray
    modes: int
    O: np.ndarray = field(repr=False)

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([self.theta, self.phi])

    def unitary(self) -> np.ndarray:
        return orthogonal_to_unitary(self.O)

    def to_json(self) -> dict:
        return {"theta": [float(x) for x in self.theta], "phi": [float(x) for x in self.phi]}


def clements_orthogonal(theta, phi, modes: int) -> BasisChange:
    """Quadrature-level mode basis change for the Clements parameters.

    Raises:
        ValueError: if ``theta`` or ``phi`` do not have ``m(m-1)/2`` entries.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    k = n_mesh_params(modes)
    if modes < 1 or theta.shape != (k,) or phi.shape != (k,):
        raise ValueError(f"{modes} modes need {k} theta and {k} phi values")
    o = np.eye(2 * modes)
    for (i, j), t, f in zip(mesh_layout(modes), theta, phi):
        o = o @ _element(t, f, i, j, modes)
    return BasisChange(theta, phi, modes, o)


def _element(theta, phi, i, j, modes):
    # R_{ij}(theta) Ph_i(phi) written out to avoid two dense products
    c, s = np.cos(theta), np.sin(theta)
    cf, sf = np.cos(phi), np.sin(phi)
    out = np.eye(2 * modes)
    qi, qj, pi, pj = i, j, modes + i, modes + j
    out[qi, qi], out[qi, pi], out[qi, qj] = c * cf, c * sf, s
    out[qj, qi], out[qj, pi], out[qj, qj] = -s * cf, -s * sf, c
    out[pi, qi], out[pi, pi], out[pi, pj] = -c * sf, c * cf, s
    out[pj, qi], out[pj, pi], out[pj, pj] = s * sf, -s * cf, c
    return out


def basis_from_params(params, modes: int) -> BasisChange:
    """Split a flat ``(theta..., phi...)`` vector."""
    params = np.asarray(params, dtype=float)
    k = n_mesh_params(modes)
    return clements_orthogonal(params[:k], params[k:], modes)


def mesh_params_for(u: np.ndarray, *, tries: int = 16, seed: int = 0, tol: float = 1e-9) -> np.ndarray:
    """Mesh parameters whose mode matrix equals ``u`` up to output phases.

    Output phases act mode by mode, so they never change which generators are
    local.  The parameters are found by a least-squares fit of the
    off-diagonal part of ``u_mesh u^dagger``.

    Raises:
        ValueError: if ``u`` is not unitary or no fit reaches ``tol``.
    """
    u = np.asarray(u, dtype=complex)
    m = len(u)
    if u.shape != (m, m) or not np.allclose(u @ u.conj().T, np.eye(m), atol=1e-9):
        raise ValueError("expected a unitary matrix")
    k = n_mesh_params(m)
    if k == 0:
        return np.zeros(0)
    off = ~np.eye(m, dtype=bool)

    def resid(x):
        w = orthogonal_to_unitary(basis_from_params(x, m).O) @ u.conj().T
        return np.concatenate([w.real[off], w.imag[off]])

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(tries):
        res = least_squares(resid, rng.uniform(0, 2 * np.pi, 2 * k), xtol=1e-15, ftol=1e-15, gtol=1e-15)
        err = float(np.abs(res.fun).max())
        if best is None or err < best[0]:
            best = (err, np.mod(res.x, 2 * np.pi))
        if err < tol:
            return best[1]
    raise ValueError(f"mesh fit did not converge (residual {best[0]:.2e})")


@dataclass(frozen=True, eq=False)
class LiftedBasisChange:
    U: np.ndarray
    gens: GeneratorSet
    basis: BasisChange | None = None


class Lifter:
    """Precomputed index data for repeatedly lifting ``O`` onto a generator set."""

    def __init__(self, gens: GeneratorSet):
        if gens.order > LIFT_MAX_ORDER:
            raise ValueError(f"lift supports generator order <= {LIFT_MAX_ORDER}")
        self.gens = gens
        self.blocks = []
        for rows in gens.order_blocks():
            idx = np.array([gens[i].index_vector() for i in rows], dtype=np.intp)
            norms = np.array([gens[i].normalization() for i in rows], dtype=float)
            self.blocks.append((rows, idx, norms))

    def __call__(self, o: np.ndarray) -> np.ndarray:
        o = np.asarray(o, dtype=float)
        if o.shape != (2 * self.gens.modes,) * 2:
            raise ValueError("quadrature matrix does not match the generator set")
        u = np.zeros((len(self.gens), len(self.gens)))
        for rows, idx, norms in self.blocks:
            u[np.ix_(rows, rows)] = lift_block(o, idx, norms)
        return u


def lift(bc: BasisChange | np.ndarray, gens: GeneratorSet) -> LiftedBasisChange:
    """Matrix ``U`` with ``H'_i = sum_l U_il H_l`` for every generator of ``gens``.

    Each entry is a permanent of the ``N x N`` submatrix of ``O`` picked out
    by the index vectors of the new (rows) and old (columns) generator,
    divided by the factorial multiplicity of the old one.
    """
    o = bc.O if isinstance(bc, BasisChange) else np.asarray(bc, dtype=float)
    if len(o) != 2 * gens.modes:
        raise ValueError("basis change and generator set disagree on the number of modes")
    return LiftedBasisChange(Lifter(gens)(o), gens, bc if isinstance(bc, BasisChange) else None)


def restrict_local(matrix: np.ndarray, gens: GeneratorSet, partition: Partition):
    """Drop rows and columns of non-local generators.

    Returns:
        ``(reduced, index_map)`` where ``index_map[k]`` is the position in
        ``gens`` of the k-th retained generator.
    """
    matrix = np.asarray(matrix)
    if matrix.shape != (len(gens), len(gens)):
        raise ValueError(f"matrix shape {matrix.shape} does not match {len(gens)} generators")
    keep = gens.local_indices(partition)
    return matrix[np.ix_(keep, keep)], keep
