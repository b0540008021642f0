"""Quantum Fisher information and covariance matrices of generator sets, and
the mode-intrinsic entanglement witness built from them."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import fock
from .basis import Lifter, basis_from_params, n_mesh_params
from .fock import DensityState, PureState, apply_monomial, spectral_decompose
from .generators import GeneratorSet, Partition
from .optimize import OptimizerConfig, OptimizeResult, minimize

P_PAIR_FLOOR = 1e-10
P_FLOOR = 1e-12
# values this close to zero are round-off, not a violation
WITNESS_TOLERANCE = 1e-6


def fingerprint(state) -> str:
    data = state.amplitudes if isinstance(state, PureState) else state.matrix
    return hashlib.sha1(np.ascontiguousarray(data).view(np.uint8)).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class QfiMatrix:
    values: np.ndarray
    gens: GeneratorSet
    fingerprint: str = ""


@dataclass(frozen=True, eq=False)
class CovMatrix:
    values: np.ndarray
    gens: GeneratorSet
    fingerprint: str = ""


@dataclass
class SpectralData:
    """Eigen-decomposition of a state together with generator images.

    ``images[i]`` is the ``dim x K`` matrix with columns ``H_i |psi_k>``.
    """

    weights: np.ndarray
    vectors: np.ndarray
    images: list
    pure: bool

    @classmethod
    def from_state(cls, state, gens: GeneratorSet, p_floor: float = P_FLOOR) -> "SpectralData":
        if isinstance(state, PureState):
            w = np.ones(1)
            v = state.amplitudes[:, None]
            pure = True
        else:
            w, v = spectral_decompose(state, p_floor)
            pure = len(w) == 1 and abs(w[0] - 1.0) < 1e-12
        images = [apply_monomial(state.space, g.exponents, v) for g in gens]
        return cls(w, v, images, pure)


def _means(sd: SpectralData) -> np.ndarray:
    return np.array(
        [np.real(np.einsum("k,dk,dk->", sd.weights, sd.vectors.conj(), img)) for img in sd.images]
    )


def covariance_from_spectral(sd: SpectralData) -> np.ndarray:
    """Symmetrized covariance ``Re<H_i H_j> - <H_i><H_j>``."""
    w = np.sqrt(sd.weights)
    stacked = np.stack([img * w[None, :] for img in sd.images])  # (L, dim, K)
    flat = stacked.reshape(len(sd.images), -1)
    second = np.real(flat.conj() @ flat.T)
    mu = _means(sd)
    cov = second - np.outer(mu, mu)
    return 0.5 * (cov + cov.T)


def qfi_from_spectral(sd: SpectralData, p_pair_floor: float = P_PAIR_FLOOR) -> np.ndarray:
    """QFI matrix ``2 sum_kl (p_k - p_l)^2/(p_k + p_l) <k|H_i|l><l|H_j|k>``.

    Pairs with one index outside the retained support (weight treated as 0)
    are summed in closed form through the projector onto the complement, so
    no eigenvectors of the null space are needed.
    """
    if sd.pure:
        return 4.0 * covariance_from_spectral(sd)
    p = sd.weights
    v = sd.vectors
    n_gen = len(sd.images)
    # matrix elements inside the support, M[i, k, l] = <k|H_i|l>
    inside = np.stack([v.conj().T @ img for img in sd.images])
    pk, pl = p[:, None], p[None, :]
    tot = pk + pl
    w = np.where(tot > p_pair_floor, (pk - pl) ** 2 / np.where(tot > 0, tot, 1.0), 0.0)
    q_in = np.einsum("kl,ikl,jlk->ij", w, inside, inside)
    # complement part: 2 * sum_k p_k 2 Re <H_i k| (1 - P_S) |H_j k>
    full = np.stack([img * np.sqrt(p)[None, :] for img in sd.images]).reshape(n_gen, -1)
    proj = (inside * np.sqrt(p)[None, None, :]).reshape(n_gen, -1)
    q_out = 4.0 * np.real(full.conj() @ full.T - proj.conj() @ proj.T)
    q = np.real(q_in) * 2.0 + q_out
    return 0.5 * (q + q.T)


def qfi_matrix(state, gens: GeneratorSet, p_floor: float = P_FLOOR, p_pair_floor: float = P_PAIR_FLOOR) -> QfiMatrix:
    """Quantum Fisher information matrix of ``state`` over ``gens``.

    Pure states give ``4 Cov``; density matrices use their spectral
    decomposition truncated at ``p_floor``.
    """
    sd = SpectralData.from_state(state, gens, p_floor)
    return QfiMatrix(qfi_from_spectral(sd, p_pair_floor), gens, fingerprint(state))


def covariance_matrix(state, gens: GeneratorSet, p_floor: float = P_FLOOR) -> CovMatrix:
    sd = SpectralData.from_state(state, gens, p_floor)
    return CovMatrix(covariance_from_spectral(sd), gens, fingerprint(state))


def state_matrices(state, gens: GeneratorSet, p_floor: float = P_FLOOR):
    """``(Q, Gamma)`` over the full generator set from one spectral decomposition."""
    sd = SpectralData.from_state(state, gens, p_floor)
    return qfi_from_spectral(sd), covariance_from_spectral(sd)


def block_mask(block_labels: np.ndarray) -> np.ndarray:
    lab = np.asarray(block_labels)
    return (lab[:, None] == lab[None, :]) & (lab[:, None] >= 0)


def product_cov(cov: np.ndarray, gens: GeneratorSet, partition: Partition) -> np.ndarray:
    """Covariance in the product of reduced states: zero every cross-block entry.

    ``cov`` must be indexed by a generator set with only local generators.

    Raises:
        ValueError: if ``gens`` contains a non-local generator.
    """
    labels = gens.block_labels(partition)
    if np.any(labels < 0):
        raise ValueError("product covariance needs local generators only")
    return np.where(block_mask(labels), cov, 0.0)


def local_set(gens: GeneratorSet, partition: Partition) -> GeneratorSet:
    keep = gens.local_indices(partition)
    return GeneratorSet(gens.order, gens.modes, [gens[i] for i in keep])


def witness_value(q_local: np.ndarray, gamma_pi: np.ndarray) -> float:
    """Largest eigenvalue of ``Q - 4 Gamma_Pi``; positive values certify entanglement."""
    q_local = np.asarray(q_local, dtype=float)
    gamma_pi = np.asarray(gamma_pi, dtype=float)
    if q_local.shape != gamma_pi.shape or q_local.shape[0] != q_local.shape[-1]:
        raise ValueError("Q and Gamma_Pi must be square matrices of equal size")
    diff = q_local - 4.0 * gamma_pi
    return float(np.linalg.eigvalsh(0.5 * (diff + diff.T))[-1])


class BasisProbe:
    """Witness ``E(theta)`` in arbitrary mode bases from matrices measured in one.

    ``info`` is the Fisher-type matrix (quantum or classical) and ``cov`` the
    covariance matrix, both over the full (non-local) generator set in the
    reference basis.  Evaluating a basis only lifts, restricts and
    diagonalizes; the state is never touched again.
    """

    def __init__(self, info: np.ndarray, cov: np.ndarray, gens: GeneratorSet, partition: Partition):
        if partition.modes != gens.modes:
            raise ValueError("partition does not match the generator set")
        n = len(gens)
        if info.shape != (n, n) or cov.shape != (n, n):
            raise ValueError("matrices do not match the generator set")
        self.info = np.asarray(info, dtype=float)
        self.cov = np.asarray(cov, dtype=float)
        self.gens = gens
        self.partition = partition
        self.lifter = Lifter(gens)
        self.keep = gens.local_indices(partition)
        self.mask = block_mask(gens.block_labels(partition)[self.keep])
        self.n_params = 2 * n_mesh_params(gens.modes)

    def lifted(self, params) -> np.ndarray:
        return self.lifter(basis_from_params(params, self.gens.modes).O)

    def matrices(self, params):
        """Local ``(info', Gamma_Pi')`` in the basis given by flat Clements parameters."""
        u = self.lifted(params)[self.keep]
        info = u @ self.info @ u.T
        cov = u @ self.cov @ u.T
        return info, np.where(self.mask, cov, 0.0)

    def __call__(self, params) -> float:
        info, cov = self.matrices(params)
        return witness_value(info, cov)


def witness_in_basis(q_full, gamma_full, gens: GeneratorSet, partition: Partition, params) -> float:
    """Witness in the basis ``params = (theta..., phi...)``; see :class:`BasisProbe`."""
    return BasisProbe(np.asarray(q_full), np.asarray(gamma_full), gens, partition)(params)


@dataclass
class WitnessReport:
    partition: str
    order: int
    W_Q: float
    argmin: list
    sampled_min: float
    converged: bool
    witnessed: bool
    restarts: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    evaluations: int = 0

    def to_json(self) -> dict:
        return {
            "partition": self.partition,
            "order": self.order,
            "W_Q": self.W_Q,
            "argmin": self.argmin,
            "sampled_min": self.sampled_min,
            "refined_min": self.W_Q,
            "converged": self.converged,
            "mode_intrinsic_entangled_witnessed": self.witnessed,
            "restarts": self.restarts,
            "evaluations": self.evaluations,
        }


def mode_intrinsic_witness(
    probe: BasisProbe,
    config: OptimizerConfig | None = None,
    threshold: float = WITNESS_TOLERANCE,
    seeds=None,
) -> WitnessReport:
    """Minimize ``E`` over all mode bases.

    ``seeds`` optionally lists flat mesh parameter vectors to start from
    (see :func:`~modewitness.basis.mesh_params_for`).

    The minimum is the best found by the configured heuristic, not a
    certified global minimum; ``witnessed`` is set when it exceeds
    ``threshold``.
    """
    m = probe.gens.modes
    if config is None:
        config = OptimizerConfig.default_for(probe.n_params)
    if probe.n_params == 0:
        val = probe(np.zeros(0))
        return WitnessReport(str(probe.partition), probe.gens.order, val, [], val, True, val > threshold)
    domain = [(0.0, 2.0 * math.pi)] * probe.n_params
    res: OptimizeResult = minimize(probe, domain, config, seeds=seeds)
    k = n_mesh_params(m)
    return WitnessReport(
        partition=str(probe.partition),
        order=probe.gens.order,
        W_Q=float(res.value),
        argmin=[list(map(float, res.x[:k])), list(map(float, res.x[k:]))],
        sampled_min=float(res.sampled_value),
        converged=res.converged,
        witnessed=bool(res.value > threshold),
        restarts=[{"x": list(map(float, r[0])), "value": float(r[1])} for r in res.restarts],
        trace=list(res.trace),
        evaluations=res.evaluations,
    )
