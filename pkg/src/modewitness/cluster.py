"""Continuous-variable cluster states from adjacency matrices.

A cluster with adjacency ``V`` is prepared from single-mode squeezed vacua by
the passive mode transformation ``U_V = (1 + iV)(V^2 + 1)^(-1/2) O`` with a
free real orthogonal ``O``.  ``O`` is chosen to minimize the nullifier
variances ``Var(p_i - sum_k V_ik q_k)``.

Named graphs (node 1 is the subtraction node):

* ``chain3``: the three-node line ``1 - 2 - 3``.
* ``graph4_paper``: four-node line ``1 - 2 - 3 - 4``.
* ``graph5_paper``: five-node line ``1 - 2 - 3 - 4 - 5``.

The four- and five-node edge sets are readings of a drawing and are kept
separate from the code that consumes them, so alternative readings can be
passed as explicit matrices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import fock
from .basis import unitary_to_orthogonal
from .fock import PureState, db_to_r
from .generators import GeneratorSet
from .optimize import OptimizerConfig, minimize
from .witness import covariance_matrix

CLUSTER_LEAKAGE = 1e-4


def _line(m: int) -> np.ndarray:
    v = np.zeros((m, m), dtype=int)
    for i in range(m - 1):
        v[i, i + 1] = v[i + 1, i] = 1
    return v


def _star(m: int) -> np.ndarray:
    v = np.zeros((m, m), dtype=int)
    v[0, 1:] = v[1:, 0] = 1
    return v


def _ring(m: int) -> np.ndarray:
    v = _line(m)
    v[0, m - 1] = v[m - 1, 0] = 1
    return v


NAMED_GRAPHS = {
    "chain3": _line(3),
    "graph4_paper": _line(4),
    "graph5_paper": _line(5),
    "line4": _line(4),
    "line5": _line(5),
    "star4": _star(4),
    "star5": _star(5),
    "ring4": _ring(4),
    "ring5": _ring(5),
}

NAMED_SQUEEZING_DB = {
    3: [-7.0, -4.0, 0.0],
    4: [-7.0, -6.0, -4.0, 0.0],
    5: [-7.0, -6.0, -4.0, -2.0, 0.0],
}


def adjacency(graph: str | Sequence[Sequence[int]]) -> np.ndarray:
    if isinstance(graph, str):
        try:
            return NAMED_GRAPHS[graph].copy()
        except KeyError:
            raise ValueError(f"unknown graph {graph!r}; known: {sorted(NAMED_GRAPHS)}") from None
    v = np.asarray(graph)
    _check_adjacency(v)
    return v.astype(int)


def _check_adjacency(v: np.ndarray):
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError("adjacency matrix must be square")
    if not np.array_equal(v, v.T):
        raise ValueError("adjacency matrix must be symmetric")
    if np.any(np.diag(v) != 0):
        raise ValueError("adjacency matrix must have a zero diagonal")
    if not np.all((v == 0) | (v == 1)):
        raise ValueError("adjacency entries must be 0 or 1")


@dataclass(frozen=True, eq=False)
class ClusterSpec:
    """Graph, squeezing per node (dB, negative squeezes ``p``) and subtraction node(s)."""

    V: np.ndarray
    squeezing_db: tuple[float, ...]
    subtraction_mode: int | tuple[float, ...] = 0
    name: str = ""

    def __post_init__(self):
        _check_adjacency(np.asarray(self.V))
        if len(self.squeezing_db) != len(self.V):
            raise ValueError("one squeezing level per node")
        sub = self.subtraction_mode
        if not isinstance(sub, (int, np.integer)):
            if len(self.V) != 2:
                raise ValueError("superposed subtraction is only supported on two modes")
            if len(sub) != 2:
                raise ValueError("subtraction vector needs one weight per mode")
        elif not 0 <= sub < len(self.V):
            raise ValueError("subtraction node out of range")

    @property
    def modes(self) -> int:
        return len(self.V)

    @property
    def r(self) -> list[float]:
        return [db_to_r(s) for s in self.squeezing_db]

    @classmethod
    def named(cls, graph: str, squeezing_db: Sequence[float] | None = None, subtraction_mode: int = 0) -> "ClusterSpec":
        v = adjacency(graph)
        sq = NAMED_SQUEEZING_DB.get(len(v)) if squeezing_db is None else squeezing_db
        if sq is None:
            raise ValueError(f"no default squeezing levels for {len(v)} modes")
        return cls(v, tuple(float(x) for x in sq), subtraction_mode, graph)

    def to_json(self) -> dict:
        sub = self.subtraction_mode
        return {
            "name": self.name,
            "V": np.asarray(self.V).tolist(),
            "squeezing_db": list(self.squeezing_db),
            "subtraction_mode": int(sub) if isinstance(sub, (int, np.integer)) else list(sub),
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "ClusterSpec":
        if isinstance(data, str):
            data = json.loads(data)
        graph = data.get("V", data.get("graph"))
        v = adjacency(graph)
        sq = data.get("squeezing_db") or NAMED_SQUEEZING_DB[len(v)]
        sub = data.get("subtraction_mode", 0)
        sub = int(sub) if isinstance(sub, (int, float)) else tuple(float(x) for x in sub)
        return cls(v, tuple(float(x) for x in sq), sub, data.get("name", graph if isinstance(graph, str) else ""))


# ---------------------------------------------------------------------------
# transformations
# ---------------------------------------------------------------------------


def givens_orthogonal(angles: Sequence[float], modes: int) -> np.ndarray:
    """Product of Givens rotations over the pairs ``(i, j), i < j`` in lexicographic order."""
    angles = np.asarray(angles, dtype=float)
    pairs = [(i, j) for i in range(modes) for j in range(i + 1, modes)]
    if len(angles) != len(pairs):
        raise ValueError(f"{modes} modes need {len(pairs)} Givens angles")
    o = np.eye(modes)
    for (i, j), t in zip(pairs, angles):
        c, s = math.cos(t), math.sin(t)
        g = np.eye(modes)
        g[i, i] = g[j, j] = c
        g[i, j], g[j, i] = -s, s
        o = o @ g
    return o


def cluster_unitary(V, O_free) -> np.ndarray:
    """``(1 + iV)(V^2 + 1)^(-1/2) O`` as a mode transformation ``a -> U a``."""
    v = np.asarray(V, dtype=float)
    _check_adjacency(np.asarray(V))
    o = np.asarray(O_free, dtype=float)
    if o.shape != v.shape or np.max(np.abs(o.T @ o - np.eye(len(o)))) > 1e-10:
        raise ValueError("O must be a real orthogonal matrix of the graph's size")
    w, vec = np.linalg.eigh(v @ v + np.eye(len(v)))
    inv_sqrt = (vec / np.sqrt(w)) @ vec.T
    return (np.eye(len(v)) + 1j * v) @ inv_sqrt @ o


def nullifier_matrix(V) -> np.ndarray:
    """Rows ``c_i`` with ``delta_i = c_i . (q, p)``."""
    v = np.asarray(V, dtype=float)
    return np.hstack([-v, np.eye(len(v))])


def nullifier_variances(state_or_cov, V) -> np.ndarray:
    """Variance of each nullifier ``p_i - sum_k V_ik q_k``.

    Accepts a Fock state or an order-1 quadrature covariance matrix ordered
    ``(q_1..q_m, p_1..p_m)``.
    """
    v = np.asarray(V)
    if isinstance(state_or_cov, np.ndarray):
        cov = state_or_cov
    else:
        cov = covariance_matrix(state_or_cov, GeneratorSet(1, state_or_cov.modes)).values
    if cov.shape != (2 * len(v),) * 2:
        raise ValueError("state and adjacency disagree on the number of modes")
    c = nullifier_matrix(v)
    return np.einsum("ij,jk,ik->i", c, cov, c)


def squeezed_covariance(r: Sequence[float]) -> np.ndarray:
    """Order-1 covariance of a product of squeezed vacua."""
    r = np.asarray(r, dtype=float)
    return np.diag(np.concatenate([np.exp(-2 * r), np.exp(2 * r)]))


def propagate_covariance(cov: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Covariance after the passive transformation ``a -> u a``."""
    o = unitary_to_orthogonal(np.asarray(u))
    return o @ cov @ o.T


@dataclass
class ClusterResult:
    spec: ClusterSpec
    angles: np.ndarray
    O: np.ndarray
    variances: np.ndarray
    objective: float
    baseline_objective: float
    converged: bool
    evaluations: int = 0
    trace: list = field(default_factory=list, repr=False)

    @property
    def unitary(self) -> np.ndarray:
        return cluster_unitary(self.spec.V, self.O)

    def to_json(self) -> dict:
        return {
            "spec": self.spec.to_json(),
            "angles": [float(x) for x in self.angles],
            "O": self.O.tolist(),
            "nullifier_variances": [float(x) for x in self.variances],
            "objective": self.objective,
            "baseline_objective": self.baseline_objective,
            "converged": self.converged,
            "evaluations": self.evaluations,
        }


def optimize_cluster(
    spec: ClusterSpec,
    config: OptimizerConfig | None = None,
    *,
    aggregate: str = "sum",
    input_cov: np.ndarray | None = None,
) -> ClusterResult:
    """Choose ``O`` minimizing the summed (or maximal) nullifier variance.

    The order-1 covariance of the squeezed inputs is propagated through
    ``U_V`` exactly, so no Fock simulation is needed per candidate.  Pass
    ``input_cov`` to use a covariance measured on a truncated state instead
    of the ideal one.
    """
    if aggregate not in ("sum", "max"):
        raise ValueError("aggregate must be 'sum' or 'max'")
    m = spec.modes
    cov0 = squeezed_covariance(spec.r) if input_cov is None else np.asarray(input_cov)
    reduce = np.sum if aggregate == "sum" else np.max

    def variances(angles):
        u = cluster_unitary(spec.V, givens_orthogonal(angles, m))
        return nullifier_variances(propagate_covariance(cov0, u), spec.V)

    def objective(angles):
        return float(reduce(variances(angles)))

    n = m * (m - 1) // 2
    base = objective(np.zeros(n))
    if n == 0:
        return ClusterResult(spec, np.zeros(0), np.eye(m), variances(np.zeros(0)), base, base, True, 1)
    config = config or OptimizerConfig(strategy="genetic")
    res = minimize(objective, [(0.0, 2 * math.pi)] * n, config)
    x, val = res.x, res.value
    if base <= val:  # identity is also a candidate
        x, val = np.zeros(n), base
    return ClusterResult(spec, x, givens_orthogonal(x, m), variances(x), float(val), base,
                         res.converged, res.evaluations, res.trace)


# ---------------------------------------------------------------------------
# Fock-space states
# ---------------------------------------------------------------------------


def total_photon_distribution(r: Sequence[float], n_max: int) -> np.ndarray:
    """Distribution of the total photon number of a product of squeezed vacua, up to ``n_max``."""
    dist = np.zeros(n_max + 1)
    dist[0] = 1.0
    for x in r:
        amp = fock.single_mode_squeezed(x, n_max)
        dist = np.convolve(dist, np.abs(amp) ** 2)[: n_max + 1]
    return dist


def auto_total(r: Sequence[float], subtractions: int = 1, threshold: float = CLUSTER_LEAKAGE, limit: int = 80) -> int:
    """Smallest total-photon cap whose discarded weight after ``subtractions`` stays below ``threshold``.

    The discarded weight is estimated with the photon-number factor that a
    subtraction puts on each Fock layer.
    """
    dist = total_photon_distribution(r, limit + subtractions + 2)
    n = np.arange(len(dist))
    weight = dist * np.prod([np.clip(n - k, 0, None) for k in range(subtractions)], axis=0) if subtractions else dist
    weight = weight / weight.sum()
    tail = np.cumsum(weight[::-1])[::-1]
    for cap in range(2, limit + 1):
        if tail[cap + 1] < threshold:
            return cap + subtractions
    raise fock.TruncationError(f"no total-photon cap below {limit} reaches {threshold:g}")


def cluster_state(
    spec: ClusterSpec,
    O_free: np.ndarray | None = None,
    *,
    total: int | None = None,
    subtract: bool = True,
    threshold: float = CLUSTER_LEAKAGE,
) -> PureState:
    """Fock-space cluster state, photon-subtracted at ``spec.subtraction_mode`` unless ``subtract`` is false."""
    m = spec.modes
    o = np.eye(m) if O_free is None else np.asarray(O_free)
    if total is None:
        total = auto_total(spec.r, 1 if subtract else 0, threshold)
    state = fock.squeezed_vacuum(spec.r, total, total=total, leakage_threshold=max(threshold, 1.0))
    state = fock.apply_passive_unitary(state, cluster_unitary(spec.V, o), leakage_tol=1.0)
    if not subtract:
        return state
    sub = spec.subtraction_mode
    if isinstance(sub, (int, np.integer)):
        coeffs = np.zeros(m)
        coeffs[int(sub)] = 1.0
        return fock.subtract_photon(state, coefficients=coeffs)
    return fock.subtract_photon(state, coefficients=np.asarray(sub))
