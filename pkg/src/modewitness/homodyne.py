"""Homodyne marginals, classical Fisher matrices and the measurement-based witness.

Quadrature eigenfunctions follow the vacuum-variance-one convention,
``<x|n> = (2 pi)^(-1/4) (2^n n!)^(-1/2) H_n(x / sqrt 2) exp(-x^2 / 4)``, and
the rotated quadrature ``xi_phi = cos(phi) q + sin(phi) p`` has eigenfunctions
``exp(-i n phi) <x|n>``.

Under ``exp(-i kappa H)`` with ``H = p_j`` the outcome ``xi_phi_j`` moves by
``+2 kappa cos(phi_j)``; with ``H = q_j`` it moves by ``-2 kappa sin(phi_j)``.
The factor 2 comes from ``[q, p] = 2i``.

The Hellinger distance is ``d_H^2 = 1/2 sum (sqrt p - sqrt p')^2``, whose
quadratic term is ``kappa^T F kappa / 8``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse.linalg as spla

from ._io import atomic_write_text
from ._kernels import hellinger_shift
from .fock import DensityState, PureState, apply_monomial, spectral_decompose
from .generators import Generator, GeneratorSet, Partition
from .optimize import OptimizerConfig, minimize
from .witness import BasisProbe

DEFAULT_RANGE = (-8.0, 8.0)
DEFAULT_BINS = 256
MAX_MASS_DEFECT = 1e-6
FD_STEP = 1e-3
HELLINGER_SHIFTS = (1, 2, 3, 4, 5, 6)
HELLINGER_POWERS = (2, 3, 4)
BOOTSTRAP_REPS = 100
BIAS_REPS = 10


class GridError(ValueError):
    """The measurement grid misses too much probability mass."""


# ---------------------------------------------------------------------------
# settings and gridded distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeasurementSetting:
    """Homodyne angles per mode and a regular outcome grid ``(lo, hi, bins)`` per mode."""

    phi: tuple[float, ...]
    grid: tuple[tuple[float, float, int], ...]

    def __post_init__(self):
        if len(self.phi) != len(self.grid) or not self.phi:
            raise ValueError("need one angle and one grid per mode")
        for lo, hi, bins in self.grid:
            if not hi > lo or int(bins) < 2:
                raise ValueError(f"invalid grid ({lo}, {hi}, {bins})")

    @classmethod
    def uniform(cls, phi: Sequence[float], lo: float = DEFAULT_RANGE[0], hi: float = DEFAULT_RANGE[1],
                bins: int = DEFAULT_BINS) -> "MeasurementSetting":
        phi = tuple(float(x) for x in phi)
        return cls(phi, tuple((float(lo), float(hi), int(bins)) for _ in phi))

    @property
    def modes(self) -> int:
        return len(self.phi)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(b) for _, _, b in self.grid)

    def width(self, mode: int) -> float:
        lo, hi, bins = self.grid[mode]
        return (hi - lo) / bins

    def centers(self, mode: int) -> np.ndarray:
        lo, hi, bins = self.grid[mode]
        return lo + (np.arange(bins) + 0.5) * (hi - lo) / bins

    def cell_volume(self) -> float:
        return math.prod(self.width(i) for i in range(self.modes))

    def widened(self, factor: float = 1.5) -> "MeasurementSetting":
        """Same bin width on a symmetric grid ``factor`` times larger."""
        grid = []
        for lo, hi, bins in self.grid:
            extra = int(math.ceil(bins * (factor - 1) / 2))
            w = (hi - lo) / bins
            grid.append((lo - extra * w, hi + extra * w, bins + 2 * extra))
        return MeasurementSetting(self.phi, tuple(grid))

    def to_json(self) -> dict:
        return {"phi": list(self.phi), "grid": [list(g) for g in self.grid]}

    @classmethod
    def from_json(cls, data: dict) -> "MeasurementSetting":
        return cls(tuple(float(x) for x in data["phi"]),
                   tuple((float(a), float(b), int(c)) for a, b, c in data["grid"]))


def default_settings(modes: int, bins: int = DEFAULT_BINS) -> list[MeasurementSetting]:
    """All-``q`` and all-``p`` homodyne settings."""
    return [MeasurementSetting.uniform([0.0] * modes, bins=bins),
            MeasurementSetting.uniform([math.pi / 2] * modes, bins=bins)]


@dataclass(frozen=True, eq=False)
class GridPdf:
    """Cell probabilities on a setting's grid (normalized) plus the raw missing mass."""

    setting: MeasurementSetting
    values: np.ndarray
    mass_defect: float


# ---------------------------------------------------------------------------
# marginals
# ---------------------------------------------------------------------------


def hermite_functions(n_max: int, x: np.ndarray) -> np.ndarray:
    """``psi_n(x)`` for ``n = 0..n_max`` by the stable three-term recursion; shape ``(len(x), n_max+1)``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((x.size, n_max + 1))
    out[:, 0] = (2 * math.pi) ** -0.25 * np.exp(-(x**2) / 4)
    if n_max >= 1:
        out[:, 1] = x * out[:, 0]
    for n in range(1, n_max):
        out[:, n + 1] = (x * out[:, n] - math.sqrt(n) * out[:, n - 1]) / math.sqrt(n + 1)
    return out


def _spectral(state, p_floor: float = 1e-12):
    if isinstance(state, PureState):
        return np.ones(1), state.amplitudes[:, None]
    if isinstance(state, DensityState):
        return spectral_decompose(state, p_floor)
    raise TypeError("expected a PureState or DensityState")


def _tensors(space, vectors: np.ndarray) -> np.ndarray:
    """Scatter basis vectors (dim x K) into dense tensors (K, c1+1, ..., cm+1)."""
    shape = tuple(c + 1 for c in space.cutoffs)
    out = np.zeros((vectors.shape[1],) + shape, dtype=complex)
    idx = (slice(None),) + tuple(space.states[:, i] for i in range(space.modes))
    out[idx] = vectors.T
    return out


def _marginal_amplitudes(space, vectors, setting: MeasurementSetting, offset) -> np.ndarray:
    """Wavefunctions of each column of ``vectors`` on the grid, shape (K, bins...)."""
    t = _tensors(space, vectors)
    for mode in range(space.modes):
        n = space.cutoffs[mode]
        h = hermite_functions(n, setting.centers(mode) - offset[mode])
        h = h * np.exp(-1j * np.arange(n + 1) * setting.phi[mode])[None, :]
        # contract the Fock axis of this mode (always axis 1 after rolling)
        t = np.tensordot(t, h, axes=([1], [1]))
    return t


def _pdf_from(space, weights, vectors, setting, offset) -> tuple[np.ndarray, float]:
    amp = _marginal_amplitudes(space, vectors, setting, offset)
    dens = np.tensordot(weights, np.abs(amp) ** 2, axes=(0, 0)) * setting.cell_volume()
    raw = float(dens.sum())
    return dens, abs(1.0 - raw / float(np.sum(weights)))


def marginal_distribution(
    state,
    setting: MeasurementSetting,
    *,
    offset: Sequence[float] | None = None,
    max_defect: float = MAX_MASS_DEFECT,
    auto_widen: bool = True,
) -> GridPdf:
    """Joint homodyne pdf of ``state`` for ``setting``, shifted by ``offset`` along each outcome axis.

    Cell probabilities use the midpoint rule.  If more than ``max_defect`` of
    the mass lies outside the grid, the grid is widened (same bin width) or,
    with ``auto_widen=False``, :class:`GridError` is raised.
    """
    if setting.modes != state.modes:
        raise ValueError("setting and state disagree on the number of modes")
    offset = np.zeros(state.modes) if offset is None else np.asarray(offset, dtype=float)
    w, v = _spectral(state)
    return _gridded(state.space, w, v, setting, offset, max_defect, auto_widen)


def _gridded(space, w, v, setting, offset, max_defect, auto_widen) -> GridPdf:
    for _ in range(8):
        dens, defect = _pdf_from(space, w, v, setting, offset)
        if defect <= max_defect:
            return GridPdf(setting, dens / dens.sum(), defect)
        if not auto_widen:
            raise GridError(f"grid misses {defect:.2e} of the probability")
        setting = setting.widened()
    raise GridError(f"grid still misses {defect:.2e} of the probability after widening")


def displacement_offset(gens: Sequence[Generator], kappa: Sequence[float], phi: Sequence[float]) -> np.ndarray:
    """Outcome shift produced by order-1 generators ``q_j``/``p_j`` with parameters ``kappa``."""
    jac = displacement_jacobian(gens, phi)
    return jac @ np.asarray(kappa, dtype=float)


def displacement_jacobian(gens: Sequence[Generator], phi: Sequence[float]) -> np.ndarray:
    """``d(shift_j)/d(kappa_i)`` for order-1 generators, shape ``(m, len(gens))``."""
    m = len(phi)
    jac = np.zeros((m, len(gens)))
    for col, g in enumerate(gens):
        if g.order != 1:
            raise ValueError(f"{g} is not a displacement generator")
        j = g.exponents.index(1)
        mode = j % m
        c, s = math.cos(phi[mode]), math.sin(phi[mode])
        c = 0.0 if abs(c) < 1e-12 else c
        s = 0.0 if abs(s) < 1e-12 else s
        jac[mode, col] = 2.0 * c if j >= m else -2.0 * s
    return jac


def _generator_matrix(space, gens: Sequence[Generator], kappa) -> np.ndarray:
    eye = np.eye(space.dim, dtype=complex)
    h = np.zeros((space.dim, space.dim), dtype=complex)
    for g, k in zip(gens, kappa):
        if k != 0:
            h += k * apply_monomial(space, g.exponents, eye)
    return 0.5 * (h + h.conj().T)


def parametrized_distribution(
    state,
    generators: Generator | Sequence[Generator],
    kappa: float | Sequence[float],
    setting: MeasurementSetting,
    *,
    path: str = "auto",
) -> GridPdf:
    """Homodyne pdf after ``exp(-i sum_k kappa_k H_k)``.

    ``path="shift"`` moves the outcome axes (order-1 generators only);
    ``path="state"`` exponentiates the generator on the truncated Fock space
    before marginalizing, and is the only option for order-2 generators.

    Raises:
        ValueError: for generators above order 2 or a shift with order 2.
    """
    gens = [generators] if isinstance(generators, Generator) else list(generators)
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    if len(kappa) != len(gens):
        raise ValueError("one parameter per generator")
    order = max(g.order for g in gens)
    if order > 2:
        raise ValueError("homodyne parameter actions are available up to order 2")
    if path == "auto":
        path = "shift" if order == 1 else "state"
    w, v = _spectral(state)
    if path == "shift":
        if order != 1:
            raise ValueError("only displacements can be applied as outcome shifts")
        off = displacement_offset(gens, kappa, setting.phi)
        return _gridded(state.space, w, v, setting, off, MAX_MASS_DEFECT, True)
    if path != "state":
        raise ValueError(f"unknown path {path!r}")
    h = _generator_matrix(state.space, gens, kappa)
    v = spla.expm_multiply(-1j * h, v) if np.any(kappa) else v
    return _gridded(state.space, w, v, setting, np.zeros(state.modes), MAX_MASS_DEFECT, True)


# ---------------------------------------------------------------------------
# sampling and datasets
# ---------------------------------------------------------------------------


def rng_for(seed: int, rep: int = 0) -> np.random.Generator:
    """Independent stream per ``(seed, rep)``, stable under any execution order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(rep)]))


@dataclass(frozen=True, eq=False)
class HomodyneDataset:
    setting: MeasurementSetting
    counts: np.ndarray
    n_samples: int
    seed: int
    rep: int = 0

    def __post_init__(self):
        if self.counts.shape != self.setting.shape:
            raise ValueError("histogram shape does not match the grid")
        if np.any(self.counts < 0) or int(self.counts.sum()) != int(self.n_samples):
            raise ValueError("counts must be non-negative and sum to n_samples")

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.n_samples

    def header(self) -> dict:
        return {**self.setting.to_json(), "n_samples": int(self.n_samples), "seed": int(self.seed), "rep": int(self.rep)}


def sample(pdf: GridPdf, n: int, seed: int, rep: int = 0) -> HomodyneDataset:
    """Multinomial histogram of ``n`` outcomes drawn from ``pdf``."""
    if n <= 0:
        raise ValueError("number of samples must be positive")
    p = np.clip(pdf.values.ravel(), 0.0, None)
    p = p / p.sum()
    counts = rng_for(seed, rep).multinomial(int(n), p).reshape(pdf.values.shape)
    return HomodyneDataset(pdf.setting, counts, int(n), int(seed), int(rep))


def save_dataset(ds: HomodyneDataset, path: str | Path) -> Path:
    """Write a histogram as CSV (``.csv``) or JSON (anything else).

    CSV layout: a first comment line ``# {json header}`` followed by rows
    ``i_1, ..., i_m, count`` for non-empty cells.
    """
    path = Path(path)
    if path.suffix == ".csv":
        buf = io.StringIO()
        buf.write("# " + json.dumps(ds.header(), sort_keys=True) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"i{k + 1}" for k in range(ds.setting.modes)] + ["count"])
        for idx in zip(*np.nonzero(ds.counts)):
            writer.writerow([int(i) for i in idx] + [int(ds.counts[idx])])
        return atomic_write_text(path, buf.getvalue())
    data = {**ds.header(), "counts": ds.counts.tolist()}
    return atomic_write_text(path, json.dumps(data, sort_keys=True) + "\n")


def load_dataset(path: str | Path) -> HomodyneDataset:
    """Read a histogram written by :func:`save_dataset` or produced externally in the same layout."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".csv":
        first, _, rest = text.partition("\n")
        if not first.startswith("#"):
            raise ValueError("CSV histogram needs a '# {header}' first line")
        header = json.loads(first[1:])
        setting = MeasurementSetting.from_json(header)
        counts = np.zeros(setting.shape, dtype=np.int64)
        rows = csv.reader(io.StringIO(rest))
        next(rows)
        for row in rows:
            if row:
                counts[tuple(int(x) for x in row[:-1])] += int(row[-1])
    else:
        header = json.loads(text)
        setting = MeasurementSetting.from_json(header)
        counts = np.asarray(header["counts"], dtype=np.int64)
    n = int(header.get("n_samples", counts.sum()))
    return HomodyneDataset(setting, counts, n, int(header.get("seed", 0)), int(header.get("rep", 0)))


# ---------------------------------------------------------------------------
# Fisher matrices
# ---------------------------------------------------------------------------


@dataclass
class FisherMatrix:
    values: np.ndarray
    gens: GeneratorSet
    setting: MeasurementSetting
    method: str
    errors: np.ndarray | None = None
    condition: float | None = None
    reps: int = 1
    samples: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "generators": self.gens.labels(),
            "setting": self.setting.to_json(),
            "values": self.values.tolist(),
            "errors": None if self.errors is None else self.errors.tolist(),
            "condition": self.condition,
            "reps": self.reps,
        }


def _fisher_from_derivatives(p: np.ndarray, derivs: list[np.ndarray], floor: float) -> np.ndarray:
    mask = p > floor
    inv = np.where(mask, 1.0 / np.where(mask, p, 1.0), 0.0)
    flat = np.stack([d.ravel() for d in derivs])
    f = (flat * inv.ravel()[None, :]) @ flat.T
    return 0.5 * (f + f.T)


def analytic_fisher(
    state,
    gens: GeneratorSet,
    setting: MeasurementSetting,
    *,
    method: str = "finite-difference",
    step: float = FD_STEP,
    floor: float = 1e-300,
) -> FisherMatrix:
    """Fisher matrix of the exact gridded pdf.

    ``method="finite-difference"`` takes central differences of the pdf in
    each parameter with one Richardson step; ``method="exact"`` uses
    ``dp/dkappa_i = 2 Im(conj(psi) (H_i psi))`` on the grid.
    """
    w, v = _spectral(state)
    base = _gridded(state.space, w, v, setting, np.zeros(state.modes), MAX_MASS_DEFECT, True)
    setting = base.setting
    vol = setting.cell_volume()
    derivs = []
    if method == "exact":
        amp0 = _marginal_amplitudes(state.space, v, setting, np.zeros(state.modes))
        for g in gens:
            hv = apply_monomial(state.space, g.exponents, v)
            amp1 = _marginal_amplitudes(state.space, hv, setting, np.zeros(state.modes))
            d = 2.0 * np.tensordot(w, np.imag(amp0.conj() * amp1), axes=(0, 0)) * vol
            derivs.append(d)
        p = np.tensordot(w, np.abs(amp0) ** 2, axes=(0, 0)) * vol
    elif method == "finite-difference":
        p = base.values
        norm = None

        def pdf_at(g, kappa):
            nonlocal norm
            if g.order == 1:
                off = displacement_offset([g], [kappa], setting.phi)
                dens, _ = _pdf_from(state.space, w, v, setting, off)
            else:
                h = _generator_matrix(state.space, [g], [kappa])
                dens, _ = _pdf_from(state.space, w, spla.expm_multiply(-1j * h, v), setting, np.zeros(state.modes))
            return dens

        for g in gens:
            if g.order > 2:
                raise ValueError("homodyne parameter actions are available up to order 2")
            d1 = (pdf_at(g, step) - pdf_at(g, -step)) / (2 * step)
            d2 = (pdf_at(g, step / 2) - pdf_at(g, -step / 2)) / step
            derivs.append((4.0 * d2 - d1) / 3.0)
        p, _ = _pdf_from(state.space, w, v, setting, np.zeros(state.modes))
    else:
        raise ValueError(f"unknown method {method!r}")
    return FisherMatrix(_fisher_from_derivatives(p, derivs, floor), gens, setting, method)


def hellinger_distance(p: np.ndarray, shift: Sequence[int]) -> float:
    """``1/2 sum (sqrt p(x - shift) - sqrt p(x))^2`` for an integer shift in bins."""
    return float(hellinger_shift(np.asarray(p, dtype=float), [int(s) for s in shift]))


def location_fisher(freq: np.ndarray, widths: Sequence[float], shifts: Sequence[int] = HELLINGER_SHIFTS):
    """Fisher matrix of the translation family of a 1- or 2-d histogram.

    Distances are taken at integer-bin shifts ``+-n`` along every axis and
    along every pair diagonal ``e_i +- e_j``.  Each direction is fitted with
    ``d = a + b s^2 + c |s|^3 + e s^4``.  The offset ``a`` absorbs the
    sampling-noise floor; the cubic term absorbs the kink that zeros of the
    density put into ``d``.  Off-diagonal elements follow by polarization.

    Returns:
        ``(F, condition)`` with ``condition`` the condition number of the fit design.
    """
    freq = np.asarray(freq, dtype=float)
    m = freq.ndim
    if m > 2:
        raise ValueError("Hellinger estimation is implemented for one or two modes")
    widths = np.asarray(widths, dtype=float)
    shifts = np.array(sorted(set(int(abs(s)) for s in shifts if s)))
    ns = np.concatenate([-shifts[::-1], shifts])
    if len(shifts) < len(HELLINGER_POWERS):
        raise ValueError(f"need at least {len(HELLINGER_POWERS)} distinct shifts")
    a = np.abs(ns).astype(float)
    design = np.stack([np.ones(len(ns))] + [a**k for k in HELLINGER_POWERS], axis=1)
    pinv = np.linalg.pinv(design)
    cond = float(np.linalg.cond(design))

    def curvature(direction):
        direction = np.asarray(direction)
        d = np.array([hellinger_distance(freq, n * direction) for n in ns])
        b = (pinv @ d)[1]
        s_unit = float(np.sum((direction * widths) ** 2))
        return 8.0 * b / s_unit  # d = u^T F u / 8 along the unit step

    f = np.zeros((m, m))
    for i in range(m):
        e = np.zeros(m, dtype=int)
        e[i] = 1
        f[i, i] = curvature(e)
    for i in range(m):
        for j in range(i + 1, m):
            e = np.zeros(m, dtype=int)
            e[i] = e[j] = 1
            plus = curvature(e) * (widths[i] ** 2 + widths[j] ** 2)
            e[j] = -1
            minus = curvature(e) * (widths[i] ** 2 + widths[j] ** 2)
            f[i, j] = f[j, i] = (plus - minus) / (4.0 * widths[i] * widths[j])
    return f, cond


def hellinger_fisher(
    data: HomodyneDataset | GridPdf | Sequence[HomodyneDataset],
    gens: GeneratorSet | Sequence[Generator],
    *,
    shifts: Sequence[int] = HELLINGER_SHIFTS,
    bootstrap: int = BOOTSTRAP_REPS,
    bias_reps: int = BIAS_REPS,
    seed: int = 0,
) -> FisherMatrix:
    """Classical Fisher matrix of displacement generators from histograms.

    ``data`` is one histogram (errors from ``bootstrap`` multinomial
    resamples), a list of independent histograms (mean and spread across
    them), or an exact :class:`GridPdf` (no errors).  Only order-1
    generators are supported since only displacements act as outcome shifts.

    Finite samples bias the estimate upward.  For sampled data the bias is
    removed with the bootstrap, ``2 F - mean(F_boot)``, using ``bias_reps``
    resamples per histogram (or the error resamples when those are
    drawn).  ``bias_reps=0`` turns this off.
    """
    if not isinstance(gens, GeneratorSet):
        gens = GeneratorSet(1, gens[0].modes, list(gens))
    if not isinstance(data, (GridPdf, HomodyneDataset)):
        data = list(data)
        if not data:
            raise ValueError("no datasets given")
    setting = data.setting if isinstance(data, (GridPdf, HomodyneDataset)) else data[0].setting
    jac = displacement_jacobian(list(gens), setting.phi)
    widths = [setting.width(i) for i in range(setting.modes)]

    def one(freq):
        fx, cond = location_fisher(freq, widths, shifts)
        return jac.T @ fx @ jac, cond

    def resampled(ds, reps, key):
        p = ds.frequencies.ravel()
        out = []
        for b in range(reps):
            counts = rng_for(seed, key * 1_000_003 + b).multinomial(ds.n_samples, p)
            out.append(one(counts.reshape(ds.counts.shape) / ds.n_samples)[0])
        return out

    if isinstance(data, GridPdf):
        values, cond = one(data.values)
        return FisherMatrix(values, gens, setting, "hellinger", None, cond, 1, [values])
    datasets = [data] if isinstance(data, HomodyneDataset) else data
    estimates, conds, boots = [], [], []
    for k, ds in enumerate(datasets):
        est, c = one(ds.frequencies)
        reps = max(bias_reps, bootstrap if len(datasets) == 1 else 0)
        bs = resampled(ds, reps, k) if reps > 0 else []
        if bias_reps > 0:
            est = 2.0 * est - np.mean(bs, axis=0)
        estimates.append(est)
        conds.append(c)
        boots.append(bs)
    cond = max(conds)
    values = np.mean(estimates, axis=0)
    errors = None
    samples = estimates
    if len(datasets) > 1:
        errors = np.std(estimates, axis=0, ddof=1)
    elif len(boots[0]) > 1:
        errors = np.std(boots[0], axis=0, ddof=1)
        samples = boots[0]
    method = "hellinger"
    return FisherMatrix(values, gens, setting, method, errors, cond, len(datasets), samples)


# ---------------------------------------------------------------------------
# witness from classical Fisher matrices
# ---------------------------------------------------------------------------


class HomodyneProbe:
    """``max_settings E_hom(phi, theta | theta_0)`` from Fisher matrices measured in one basis."""

    def __init__(self, fishers: Sequence[np.ndarray], cov: np.ndarray, gens: GeneratorSet, partition: Partition):
        if not fishers:
            raise ValueError("at least one measurement setting is required")
        self.probes = [BasisProbe(np.asarray(f), cov, gens, partition) for f in fishers]
        self.n_params = self.probes[0].n_params

    def per_setting(self, params) -> list[float]:
        return [p(params) for p in self.probes]

    def __call__(self, params) -> float:
        return max(self.per_setting(params))


@dataclass
class HomodyneReport:
    W_hom: float
    argmin: list
    per_setting_at_argmin: list
    converged: bool
    evaluations: int

    def to_json(self) -> dict:
        return {
            "W_hom": self.W_hom,
            "argmin": self.argmin,
            "per_setting_at_argmin": self.per_setting_at_argmin,
            "converged": self.converged,
            "evaluations": self.evaluations,
        }


def homodyne_witness(probe: HomodyneProbe, config: OptimizerConfig | None = None) -> HomodyneReport:
    """``W_hom = min_theta max_settings E_hom``."""
    config = config or OptimizerConfig()
    if probe.n_params == 0:
        val = probe(np.zeros(0))
        return HomodyneReport(val, [], probe.per_setting(np.zeros(0)), True, 1)
    res = minimize(probe, [(0.0, 2 * math.pi)] * probe.n_params, config)
    return HomodyneReport(float(res.value), [float(x) for x in res.x],
                          probe.per_setting(res.x), res.converged, res.evaluations)
