"""Command line entry point: ``modewitness <command> --recipe ... --out ...``.

Every command writes plot-ready CSV/JSON files plus ``manifest.json``.  The
manifest hash covers the inputs only (recipe content, command, parameters,
version and seed), so reruns with the same inputs produce byte-identical
outputs; each output file records that hash.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, fock
from ._io import atomic_write_json, atomic_write_text
from .basis import basis_from_params, n_mesh_params, orthogonal_to_unitary
from .cluster import optimize_cluster
from .generators import GeneratorSet, Partition, canonical_partitions
from .homodyne import (
    DEFAULT_BINS,
    DEFAULT_RANGE,
    HomodyneProbe,
    MeasurementSetting,
    analytic_fisher,
    hellinger_fisher,
    homodyne_witness,
    load_dataset,
    marginal_distribution,
    sample,
    save_dataset,
)
from .optimize import OptimizerConfig
from .recipes import Recipe, RecipeError, angle_grid, cluster_spec, prepare, resolve_recipe
from .witness import BasisProbe, covariance_matrix, mode_intrinsic_witness, state_matrices

log = logging.getLogger("modewitness")

WORKERS_ENV = "MODEWITNESS_WORKERS"
SETTING_ANGLES = {"q": 0.0, "p": math.pi / 2}


# ---------------------------------------------------------------------------
# manifest and output helpers
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    recipe_path: str
    recipe: dict
    command: str
    parameters: dict
    seed: int
    version: str = __version__
    outputs: list = field(default_factory=list)
    wall_clock_s: float = 0.0
    started: str = ""

    @property
    def hash(self) -> str:
        key = {k: getattr(self, k) for k in ("recipe", "command", "parameters", "seed", "version")}
        blob = json.dumps(key, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_json(self) -> dict:
        out = asdict(self)
        out["hash"] = self.hash
        return out


class Outputs:
    """Writes files into the output directory and tags them with the manifest hash."""

    def __init__(self, out_dir: Path, manifest: RunManifest):
        self.dir = Path(out_dir)
        self.manifest = manifest

    def json(self, name: str, data: dict) -> Path:
        data = {"manifest": self.manifest.hash, **data}
        path = atomic_write_json(self.dir / name, _plain(data))
        self.manifest.outputs.append(name)
        return path

    def csv(self, name: str, header: list[str], rows) -> Path:
        buf = io.StringIO()
        buf.write(f"# manifest: {self.manifest.hash}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])
        path = atomic_write_text(self.dir / name, buf.getvalue())
        self.manifest.outputs.append(name)
        return path

    def finish(self, t0: float) -> Path:
        self.manifest.wall_clock_s = round(time.time() - t0, 3)
        return atomic_write_json(self.dir / "manifest.json", self.manifest.to_json())


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise SystemExit(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def pmap(fn, items: list) -> list:
    """Order-preserving map, in worker processes when more than one is configured."""
    n = min(workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------


def _range(text: str, n_default: int | None = None):
    parts = [float(eval_angle(x)) for x in text.split(",")]
    if len(parts) == 2 and n_default is not None:
        parts.append(n_default)
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected lo,hi[,n], got {text!r}")
    return [parts[0], parts[1], int(parts[2])]


def eval_angle(text: str) -> float:
    """Parse a float that may be written with ``pi`` (``pi/4``, ``-0.5pi``)."""
    t = text.strip().replace(" ", "")
    if "pi" not in t:
        return float(t)
    num, _, den = t.partition("/")
    head = num.replace("*", "").replace("pi", "")
    factor = {"": 1.0, "-": -1.0, "+": 1.0}.get(head)
    if factor is None:
        factor = float(head)
    return factor * math.pi / (float(den) if den else 1.0)


def _partitions(specs: list[str] | None, modes: int, default: str) -> list[Partition]:
    specs = specs or [default]
    out: list[Partition] = []
    for s in specs:
        if s == "all":
            out.extend(canonical_partitions(modes))
        elif s == "singletons":
            out.append(Partition.singletons(modes))
        else:
            out.append(Partition.parse(s, modes))
    seen, unique = set(), []
    for p in out:
        if str(p) not in seen:
            seen.add(str(p))
            unique.append(p)
    return unique


def _config(args, **defaults) -> OptimizerConfig:
    data = dict(defaults)
    if args.config:
        data.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    if args.seed is not None:
        data["seed"] = args.seed
    return OptimizerConfig.from_json(data)


def _reference_basis(args, modes: int) -> np.ndarray | None:
    if not getattr(args, "theta0", None):
        return None
    vals = [eval_angle(x) for x in args.theta0.split(",")]
    if len(vals) != 2 * n_mesh_params(modes):
        raise RecipeError(f"--theta0 needs {2 * n_mesh_params(modes)} mesh parameters")
    return orthogonal_to_unitary(basis_from_params(vals, modes).O)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_scan(recipe: Recipe, args, out: Outputs) -> dict:
    if recipe.modes != 2:
        raise RecipeError("grid scans need a two-mode recipe; use 'witness' for more modes")
    prep = prepare(recipe)
    part = _partitions(args.partition, 2, "singletons")
    if len(part) != 1:
        raise RecipeError("scan takes a single partition")
    part = part[0]
    thetas = angle_grid(args.theta)
    phis = angle_grid(args.phi)
    orders = list(range(1, args.order + 1))
    maps = {}
    for n in orders:
        gens = GeneratorSet(n, 2)
        q, c = state_matrices(prep.state, gens)
        probe = BasisProbe(q, c, gens, part)
        maps[n] = np.array([[probe([t, f]) for f in phis] for t in thetas])
        log.info("order %d: min %.6g", n, maps[n].min())
    argmins = {n: np.unravel_index(np.argmin(maps[n]), maps[n].shape) for n in orders}
    header = ["theta", "phi"] + [f"E_N{n}" for n in orders] + [f"argmin_N{n}" for n in orders]
    rows = []
    for i, t in enumerate(thetas):
        for j, f in enumerate(phis):
            rows.append([t, f] + [maps[n][i, j] for n in orders] + [int(argmins[n] == (i, j)) for n in orders])
    out.csv("scan.csv", header, rows)
    summary = {
        "partition": str(part),
        "grid": {"theta": args.theta, "phi": args.phi},
        "minima": {
            f"N{n}": {"E": float(maps[n][argmins[n]]), "theta": float(thetas[argmins[n][0]]),
                      "phi": float(phis[argmins[n][1]])}
            for n in orders
        },
    }
    out.json("scan.json", summary)
    return summary


def _witness_task(task):
    q, c, order, modes, part, cfg, seeds = task
    gens = GeneratorSet(order, modes)
    rep = mode_intrinsic_witness(BasisProbe(q, c, gens, Partition.parse(part, modes)),
                                 OptimizerConfig.from_json(cfg), seeds=seeds)
    return rep.to_json()


def run_witness(prep, order: int, partitions: list[Partition], cfg: OptimizerConfig, seeded: bool = True) -> list[dict]:
    m = prep.recipe.modes
    gens = GeneratorSet(order, m)
    q, c = state_matrices(prep.state, gens)
    seeds = prep.seed_bases() if seeded and m > 1 else None
    tasks = [(q, c, order, m, str(p), cfg.to_json(), seeds) for p in partitions]
    return pmap(_witness_task, tasks)


def cmd_witness(recipe: Recipe, args, out: Outputs) -> dict:
    prep = prepare(recipe)
    parts = _partitions(args.partition, recipe.modes, "all")
    cfg = _config(args, polish=8)
    reports = run_witness(prep, args.order, parts, cfg)
    for r in reports:
        log.info("%s: W_Q = %.6g", r["partition"], r["W_Q"])
    result = {"order": args.order, "optimizer": cfg.to_json(), "reports": reports}
    if prep.cluster is not None:
        result["cluster"] = prep.cluster.to_json()
    out.json("witness.json", result)
    return result


def _sweep_task(task):
    recipe_json, angle, eta, order, part, cfg = task
    recipe = Recipe.from_json(recipe_json)
    m = recipe.modes
    state = prepare(recipe).state
    if eta < 1.0:
        state = fock.apply_loss(state, [eta] * m)
    gens = GeneratorSet(order, m)
    q, c = state_matrices(state, gens)
    rep = mode_intrinsic_witness(BasisProbe(q, c, gens, Partition.parse(part, m)), OptimizerConfig.from_json(cfg))
    return angle, eta, rep.W_Q


def _critical_eta(etas: np.ndarray, values: np.ndarray, tol: float) -> float | None:
    """Smallest efficiency above which the witness stays positive (linear interpolation)."""
    order = np.argsort(etas)[::-1]
    e, v = etas[order], values[order]
    if v[0] <= tol:
        return None
    for k in range(1, len(e)):
        if v[k] <= tol:
            return float(e[k] + (e[k - 1] - e[k]) * (tol - v[k]) / (v[k - 1] - v[k]))
    return float(e[-1])


def cmd_loss_sweep(recipe: Recipe, args, out: Outputs) -> dict:
    sweep = dict(recipe.sweep or {})
    idx = args.subtraction if args.subtraction is not None else sweep.get("subtraction", 0)
    angles = angle_grid(args.angles or sweep.get("angles") or [0.0, math.pi / 2, 13])
    etas = angle_grid(args.eta or sweep.get("eta") or [0.0, 1.0, 21])
    part = _partitions(args.partition, recipe.modes, "singletons")
    if len(part) != 1:
        raise RecipeError("loss-sweep takes a single partition")
    cfg = _config(args)
    base = recipe.replace(loss_eta=None)
    orders = list(range(1, args.order + 1)) if args.all_orders else [args.order]
    tasks = []
    for n in orders:
        for a in angles:
            r = base.with_subtraction_angle(idx, float(a)) if base.subtractions else base
            for e in etas:
                tasks.append((r.to_json(), float(a), float(e), n, str(part[0]), cfg.to_json()))
    values = pmap(_sweep_task, tasks)
    table = {}
    for (rj, a, e, n, _, _), (_, _, w) in zip(tasks, values):
        table[(a, e, n)] = w
    header = ["angle", "eta"] + [f"W_N{n}" for n in orders]
    rows = [[a, e] + [table[(float(a), float(e), n)] for n in orders] for a in angles for e in etas]
    out.csv("loss_sweep.csv", header, rows)
    crit = {}
    for n in orders:
        crit[f"N{n}"] = [
            {"angle": float(a), "critical_eta": _critical_eta(etas, np.array([table[(float(a), float(e), n)] for e in etas]), args.tol)}
            for a in angles
        ]
    summary = {"subtraction": idx, "partition": str(part[0]), "critical_eta": crit,
               "positivity_tolerance": args.tol}
    out.json("loss_sweep.json", summary)
    return summary


def _settings(spec: str, modes: int, bins: int) -> list[MeasurementSetting]:
    out = []
    for token in spec.split(","):
        token = token.strip()
        if token in SETTING_ANGLES:
            phi = [SETTING_ANGLES[token]] * modes
        else:
            phi = [eval_angle(x) for x in token.split(":")]
            if len(phi) != modes:
                raise RecipeError(f"setting {token!r} needs {modes} angles separated by ':'")
        out.append(MeasurementSetting.uniform(phi, DEFAULT_RANGE[0], DEFAULT_RANGE[1], bins))
    return out


def _setting_label(setting: MeasurementSetting) -> str:
    names = {v: k for k, v in SETTING_ANGLES.items()}
    if len(set(setting.phi)) == 1 and setting.phi[0] in names:
        return names[setting.phi[0]] * setting.modes
    return "_".join(f"{x:.4f}" for x in setting.phi)


def cmd_experiment(recipe: Recipe, args, out: Outputs) -> dict:
    """Simulated (or ingested) homodyne histograms -> Fisher matrices -> witness maps."""
    if args.order != 1:
        raise RecipeError("the Hellinger estimate covers displacement generators only (--order 1)")
    m = recipe.modes
    state = _measured_state(recipe, _reference_basis(args, m))
    gens = GeneratorSet(1, m)
    cov = covariance_matrix(state, gens).values
    q_info = state_matrices(state, gens)[0]
    part = _partitions(args.partition, m, "singletons")[0]
    seed = recipe.seed if args.seed is None else args.seed

    if args.datasets:
        datasets = [load_dataset(p) for p in args.datasets]
        groups: dict[tuple, list] = {}
        for ds in datasets:
            groups.setdefault(ds.setting.phi, []).append(ds)
        settings = [g[0].setting for g in groups.values()]
        per_setting = list(groups.values())
    else:
        settings = _settings(args.settings, m, args.bins)
        per_setting = None

    fishers, report = [], {"partition": str(part), "settings": [], "n_samples": args.samples,
                           "reps": args.reps, "seed": seed}
    rep_fishers = []
    for k, setting in enumerate(settings):
        label = _setting_label(setting)
        analytic = analytic_fisher(state, gens, setting, method="exact")
        if per_setting is not None:
            reps = per_setting[k]
        else:
            pdf = marginal_distribution(state, setting)
            reps = [sample(pdf, args.samples, seed + 7919 * k, r) for r in range(args.reps)]
            if args.save_datasets:
                for r, ds in enumerate(reps):
                    save_dataset(ds, out.dir / "datasets" / f"{label}_rep{r:03d}.csv")
        ests = [hellinger_fisher(ds, gens, bootstrap=0, seed=seed + r).values for r, ds in enumerate(reps)]
        mean = np.mean(ests, axis=0)
        err = np.std(ests, axis=0, ddof=1) if len(ests) > 1 else np.full_like(mean, np.nan)
        fishers.append(mean)
        rep_fishers.append(ests)
        out.json(f"fisher_{label}.json", {
            "setting": setting.to_json(),
            "generators": gens.labels(),
            "estimated": mean,
            "std": err,
            "stderr": err / math.sqrt(max(1, len(ests))),
            "analytic": analytic.values,
            "reps": len(ests),
        })
        report["settings"].append({"label": label, "phi": list(setting.phi)})

    thetas = angle_grid(args.theta)
    phis = angle_grid(args.phi)
    probe_q = BasisProbe(q_info, cov, gens, part)
    labels = [s["label"] for s in report["settings"]]
    rows = []
    per_rep_probes = [HomodyneProbe([rf[r] for rf in rep_fishers], cov, gens, part)
                      for r in range(len(rep_fishers[0]))] if len(settings) else []
    for t in thetas:
        for f in phis:
            x = [t, f]
            reps_vals = np.array([p.per_setting(x) for p in per_rep_probes])  # reps x settings
            means = reps_vals.mean(axis=0)
            stds = reps_vals.std(axis=0, ddof=1) if len(reps_vals) > 1 else np.zeros_like(means)
            best = reps_vals.max(axis=1)
            rows.append([t, f] + [v for pair in zip(means, stds) for v in pair]
                        + [best.mean(), best.std(ddof=1) if len(best) > 1 else 0.0, probe_q(x)])
    header = ["theta", "phi"] + [h for lab in labels for h in (f"E_{lab}", f"E_{lab}_std")] \
        + ["E_max", "E_max_std", "E_Q"]
    out.csv("experiment_map.csv", header, rows)

    mean_probe = HomodyneProbe(fishers, cov, gens, part)
    hw = homodyne_witness(mean_probe, _config(args))
    per_rep = [homodyne_witness(p, _config(args)).W_hom for p in per_rep_probes] if args.rep_witness else []
    grid = np.array([r[2:2 + 2 * len(labels)] for r in rows])
    report.update({
        "W_hom": hw.to_json(),
        "W_hom_reps": {"values": per_rep, "mean": float(np.mean(per_rep)) if per_rep else None,
                       "std": float(np.std(per_rep, ddof=1)) if len(per_rep) > 1 else None},
        "positive_fraction": {lab: float(np.mean(grid[:, 2 * i] > 0)) for i, lab in enumerate(labels)},
        "positive_fraction_3sigma": {lab: float(np.mean(grid[:, 2 * i] - 3 * grid[:, 2 * i + 1] > 0))
                                     for i, lab in enumerate(labels)},
    })
    out.json("experiment.json", report)
    return report


def _measured_state(recipe: Recipe, ref: np.ndarray | None):
    """State in the reference measurement basis.

    Uniform loss commutes with passive optics, so the basis change is applied
    to the pure state before the loss channel.
    """
    if ref is None:
        return prepare(recipe).state
    eta = recipe.loss_eta
    if eta is not None and len(set(eta)) > 1:
        raise RecipeError("--theta0 needs the same efficiency on every mode")
    state = fock.apply_passive_unitary(prepare(recipe.replace(loss_eta=None)).state, ref)
    if eta is not None and eta[0] < 1.0:
        state = fock.apply_loss(state, eta)
    return state


def cmd_cluster_opt(recipe: Recipe, args, out: Outputs) -> dict:
    if recipe.interferometer["type"] != "cluster":
        raise RecipeError("cluster-opt needs a recipe with a 'cluster' interferometer")
    spec = cluster_spec(recipe)
    cfg = _config(args, strategy="genetic")
    agg = recipe.interferometer["params"].get("aggregate", "sum")
    res = optimize_cluster(spec, cfg, aggregate=agg)
    data = res.to_json()
    data["aggregate"] = agg
    data["unitary"] = {"real": res.unitary.real, "imag": res.unitary.imag}
    trace = res.trace
    out.json("cluster.json", data)
    out.csv("cluster_trace.csv", ["evaluation", "best"], [[i + 1, v] for i, v in enumerate(trace)])
    return data


COMMANDS = {
    "scan": cmd_scan,
    "witness": cmd_witness,
    "loss-sweep": cmd_loss_sweep,
    "experiment": cmd_experiment,
    "cluster-opt": cmd_cluster_opt,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modewitness", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"modewitness {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, order_default):
        p.add_argument("--recipe", required=True, help="recipe JSON path or shipped fixture name")
        p.add_argument("--order", type=int, default=order_default, help="generator order N")
        p.add_argument("--partition", action="append",
                       help="partition such as '1|2|3' or '12|3'; 'all' for every split (repeatable)")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="root RNG seed (defaults to the recipe's)")
        p.add_argument("--config", help="path to a JSON file with optimizer settings")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("scan", help="witness landscape over (theta, phi) for two modes")
    common(p, 2)
    p.add_argument("--theta", type=lambda s: _range(s, 41), default=[0.0, math.pi / 2, 41])
    p.add_argument("--phi", type=lambda s: _range(s, 41), default=[0.0, math.pi / 2, 41])

    p = sub.add_parser("witness", help="W_Q minimized over all mode bases")
    common(p, 1)

    p = sub.add_parser("loss-sweep", help="W_Q against efficiency and a subtraction angle")
    common(p, 1)
    p.add_argument("--eta", type=lambda s: _range(s, 21), help="lo,hi,n efficiency grid")
    p.add_argument("--angles", type=lambda s: _range(s, 13), help="lo,hi,n subtraction-angle grid")
    p.add_argument("--subtraction", type=int, help="index of the swept subtraction")
    p.add_argument("--all-orders", action="store_true", help="sweep every order from 1 to N")
    p.add_argument("--tol", type=float, default=1e-6, help="positivity tolerance for critical efficiencies")

    p = sub.add_parser("experiment", help="simulated homodyne data, Fisher estimates and W_hom")
    common(p, 1)
    p.add_argument("--settings", default="q,p", help="comma list of 'q', 'p' or per-mode angles 'a:b'")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--datasets", nargs="+", help="histogram files to use instead of simulated data")
    p.add_argument("--save-datasets", action="store_true")
    p.add_argument("--rep-witness", action="store_true", help="also minimize W_hom for every repetition")
    p.add_argument("--theta0", help="reference measurement basis as comma-separated mesh parameters")
    p.add_argument("--theta", type=lambda s: _range(s, 21), default=[0.0, math.pi / 2, 21])
    p.add_argument("--phi", type=lambda s: _range(s, 21), default=[0.0, math.pi, 21])

    p = sub.add_parser("cluster-opt", help="choose the cluster's free orthogonal matrix")
    common(p, 1)
    return parser


def run(argv: list[str] | None = None) -> dict:
    """Parse ``argv``, run the command and return its summary (raises on errors)."""
    args = build_parser().parse_args(argv)
    recipe = resolve_recipe(args.recipe)
    if args.seed is not None:
        recipe = recipe.replace(seed=args.seed)
    params = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
              if k not in ("recipe", "out", "verbose", "command", "seed")}
    if args.config:
        params["config"] = json.loads(Path(args.config).read_text(encoding="utf-8"))
    manifest = RunManifest(str(args.recipe), recipe.to_json(), args.command, params, recipe.seed,
                           started=time.strftime("%Y-%m-%dT%H:%M:%S"))
    out = Outputs(args.out, manifest)
    t0 = time.time()
    result = COMMANDS[args.command](recipe, args, out)
    out.finish(t0)
    return result


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    verbose = "-v" in argv or "--verbose" in argv
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        run(argv)
    except (RecipeError, ValueError, OSError) as exc:
        print(f"modewitness: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
