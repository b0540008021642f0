"""Acceptance checks; each prints one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines appear in
the output and are repeated in the terminal summary.
"""

import csv
import json
import math
import time

import numpy as np
import pytest

from modewitness import cli, fock
from modewitness import homodyne as h
from modewitness.basis import Lifter, basis_from_params, beamsplitter, orthogonal_to_unitary
from modewitness.generators import (
    GeneratorSet,
    Partition,
    canonical_partitions,
    local_count,
)
from modewitness.recipes import load_fixture, prepare
from modewitness.witness import (
    WITNESS_TOLERANCE,
    BasisProbe,
    covariance_matrix,
    mode_intrinsic_witness,
    qfi_matrix,
    state_matrices,
)

pytestmark = pytest.mark.acceptance

P12 = Partition.parse("1|2", 2)
RESULTS: list[str] = []


@pytest.fixture
def report(capsys):
    def emit(tag, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} [{tag}] {detail}"
        RESULTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


def witness(state, order, partition=P12, **kw):
    gens = GeneratorSet(order, state.modes)
    q, c = state_matrices(state, gens)
    return mode_intrinsic_witness(BasisProbe(q, c, gens, partition), **kw)


def critical_eta(pure, order, steps=10):
    """Smallest efficiency with a positive witness, by bisection (the witness only drops with loss)."""
    lo, hi = 0.0, 1.0
    for _ in range(steps):
        mid = (lo + hi) / 2
        if witness(fock.apply_loss(pure, mid), order).W_Q > WITNESS_TOLERANCE:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------


def test_generator_counts(report):
    t0 = time.time()
    gens = GeneratorSet(2, 2)
    expected = {"q1", "p1", "q2", "p2", "q1^2", "q1 p1", "p1^2", "q2^2", "q2 p2", "p2^2",
                "q1 q2", "p1 p2", "q1 p2", "q2 p1"}
    exact = len(gens) == 14 and set(gens.labels()) == expected
    formula = all(
        len(GeneratorSet(n, m).local_indices(Partition.singletons(m))) == local_count(n, m) == m * n * (n + 3) // 2
        for n in (1, 2, 3) for m in (1, 2, 3, 4, 5)
    )
    dt = time.time() - t0
    ok = exact and formula and dt < 1.0
    report("1 generator sets", ok, f"l(2,2)=14 exact={exact}, local-count formula N<=3 m<=5 {formula}, {dt:.2f}s")
    assert ok


def test_lift_worked_example(report):
    lift = Lifter(GeneratorSet(3, 2))
    i, j = lift.gens.index_of("q1^2 p1"), lift.gens.index_of("q1 p1 q2")
    errs = [abs(lift(beamsplitter(t, 0, 1, 2))[i, j] - 2 * math.cos(t) ** 2 * math.sin(t))
            for t in np.random.default_rng(20).uniform(0, 2 * math.pi, 20)]
    ok = max(errs) < 1e-10
    report("2 lift entry 2cos^2 sin", ok, f"max error {max(errs):.1e} over 20 angles (tol 1e-10)")
    assert ok


def test_two_photon_golden_values(report, tmp_path):
    t0 = time.time()
    out = cli.run(["scan", "--recipe", "fig6", "--theta", "0,pi/2,41", "--phi", "0,pi/2,41", "--out", str(tmp_path)])
    s = prepare(load_fixture("fig6")).state
    w1, w2 = witness(s, 1), witness(s, 2)
    dt = time.time() - t0
    n1_border = out["minima"]["N1"]["theta"] == 0.0 and abs(out["minima"]["N1"]["E"]) < 1e-4
    ok = abs(w2.W_Q - 0.98) <= 0.02 and abs(w1.W_Q) <= 1e-4 and n1_border and dt < 300
    report("3 two-photon golden", ok,
           f"N=2 W_Q={w2.W_Q:.4f} (0.98+-0.02), N=1 W_Q={w1.W_Q:.1e} (|.|<=1e-4), "
           f"N=1 grid minimum {out['minima']['N1']['E']:.1e} at theta=0: {n1_border}, {dt:.0f}s")
    assert ok


TABLES = {
    "table1": {"1|2|3": 0.94, "12|3": 0.0},
    "table2": {"1|2|3|4": 0.87, "12|3|4": 0.33, "12|34": 0.33, "123|4": 0.0},
    "table3": {"1|2|3|4|5": 0.92, "12|3|4|5": 0.31, "12|34|5": 0.31, "123|4|5": 0.17, "123|45": 0.17,
               "1234|5": 0.0},
}


@pytest.mark.parametrize("name", sorted(TABLES))
def test_cluster_tables(report, name, tmp_path):
    t0 = time.time()
    out = cli.run(["witness", "--recipe", name, "--partition", "all", "--out", str(tmp_path)])
    got = {r["partition"]: r["W_Q"] for r in out["reports"]}
    ref = TABLES[name]
    assert set(got) == set(ref)
    hard = all((got[p] > WITNESS_TOLERANCE) if v > 0 else (abs(got[p]) < 1e-3) for p, v in ref.items())
    soft = all(abs(got[p] - v) <= 0.05 for p, v in ref.items())
    dt = time.time() - t0
    vals = ", ".join(f"{p}: {got[p]:.3f} (ref {v})" for p, v in ref.items())
    report(f"4 {name} sign/zero structure", hard and dt < 3600, f"{vals}; {dt:.0f}s")
    report(f"4 {name} values +-0.05 (soft)", soft, "numeric agreement" if soft else
           "numeric mismatch; soft because the optimized cluster rotation is not published")
    assert hard and dt < 3600


def test_loss_resilience(report):
    fam = load_fixture("fig7_family")
    lo, hi, n = fam.sweep["angles"]
    angles = np.linspace(lo, hi, n)[1:-1]  # the ends are product states with no sign change at all
    rows = []
    for a in angles:
        pure = prepare(fam.with_subtraction_angle(0, float(a))).state
        rows.append((a, critical_eta(pure, 1), critical_eta(pure, 2)))
    ordered = all(e2 < e1 for _, e1, e2 in rows)
    detail = "; ".join(f"{a:.2f}: N1 {e1:.3f} N2 {e2:.3f}" for a, e1, e2 in rows)
    report("5 one-photon family: N=2 tolerates more loss", ordered, detail)

    fam8 = load_fixture("fig8_family")
    crit = {th: critical_eta(prepare(fam8.with_subtraction_angle(1, th)).state, 2) for th in (-0.3, -0.25, -0.2)}
    ok8 = abs(crit[-0.25] - 0.05) <= 0.05 and crit[-0.25] == min(crit.values())
    report("5 two-photon family: positive to ~95% loss", ok8,
           ", ".join(f"Theta2={k}: critical eta {v:.3f}" for k, v in crit.items()) + " (0.05+-0.05 at -0.25)")
    assert ordered and ok8


def test_property_suite(report):
    rng = np.random.default_rng(6)
    fig5 = prepare(load_fixture("fig5")).state
    two = prepare(load_fixture("fig6")).state

    # (a) information inequality, analytic and estimated
    worst = math.inf
    for state in (fig5, fock.apply_loss(two, 0.8)):
        for phi in ((0, 0), (math.pi / 2, math.pi / 2), (0, math.pi / 2), (0.7, 2.1)):
            st = h.MeasurementSetting.uniform(phi, bins=128)
            for order in (1, 2):
                gens = GeneratorSet(order, 2)
                f = h.analytic_fisher(state, gens, st).values
                worst = min(worst, np.linalg.eigvalsh(qfi_matrix(state, gens).values - f).min() + 1e-6)
    gens = GeneratorSet(1, 2)
    st = h.MeasurementSetting.uniform((0, math.pi / 2), bins=128)
    pdf = h.marginal_distribution(fig5, st)
    est = h.hellinger_fisher([h.sample(pdf, 100_000, seed=2, rep=r) for r in range(20)], gens)
    slack = 1e-6 + 3 * np.linalg.norm(est.errors)
    worst = min(worst, np.linalg.eigvalsh(qfi_matrix(fig5, gens).values - est.values).min() + slack)
    a = worst >= 0

    # (b) pure states
    b = max(np.max(np.abs(qfi_matrix(two, g).values - 4 * covariance_matrix(two, g).values))
            for g in (GeneratorSet(1, 2), GeneratorSet(2, 2)))

    # (c) homomorphism
    lift = Lifter(GeneratorSet(3, 3))
    c = 0.0
    for _ in range(10):
        x, y = (basis_from_params(rng.uniform(0, 2 * math.pi, 6), 3).O for _ in range(2))
        c = max(c, np.max(np.abs(lift(x @ y) - lift(x) @ lift(y))))

    # (d) probing shortcut against re-simulation
    d = 0.0
    base = fock.squeezed_vacuum([0.3, -0.1], 14, total=14, leakage_threshold=1e-6)
    base = fock.apply_loss(fock.subtract_photon(base, [0.6]), 0.8)
    for order in (1, 2):
        g = GeneratorSet(order, 2)
        probe = BasisProbe(*state_matrices(base, g), g, P12)
        for params in rng.uniform(0, 2 * math.pi, (50, 2)):
            u = orthogonal_to_unitary(basis_from_params(params, 2).O)
            moved = fock.apply_passive_unitary(base, u, leakage_tol=1.0)
            d = max(d, abs(probe(params) - BasisProbe(*state_matrices(moved, g), g, P12)(np.zeros(2))))

    # (e) Gaussian states
    e = -math.inf
    tms = fock.squeezed_vacuum([0.35, -0.35], 26, total=26, leakage_threshold=1e-6)
    tms = fock.apply_passive_unitary(tms, np.array([[1, 1], [-1, 1]]) / math.sqrt(2), leakage_tol=1.0)
    for order in (1, 2):
        e = max(e, witness(tms, order).W_Q)
    cluster = prepare(load_fixture("table1"), subtract=False)
    seeds = cluster.seed_bases()
    for part in canonical_partitions(3):
        e = max(e, witness(cluster.state, 1, part, seeds=seeds).W_Q)

    # (f) separable states in random bases
    f_max = -math.inf
    cap = 20
    space = fock.FockSpace(2, cap, total=cap)
    n1, n2 = space.states.T
    for k in range(200):
        order = 1 + k % 2
        g = GeneratorSet(order, 2)
        params = rng.uniform(0, 2 * math.pi, 2)
        ra, rb = rng.uniform(-0.3, 0.3, 2)
        amps = fock.single_mode_squeezed(ra, cap)[n1] * fock.single_mode_squeezed(rb, cap)[n2]
        if k % 3 == 0:
            amps = np.where(n1 == k % 4, 1.0, 0.0) * fock.single_mode_squeezed(rb, cap)[n2]
        prod = fock.PureState(space, amps / np.linalg.norm(amps), norm_tolerance=1e-6)
        u = orthogonal_to_unitary(basis_from_params(params, 2).O)
        state = fock.apply_passive_unitary(prod, u.conj().T, leakage_tol=1.0)
        f_max = max(f_max, BasisProbe(*state_matrices(state, g), g, P12)(params))

    checks = {
        "a Q-F PSD": (a, f"min eig + tolerance {worst:.1e}"),
        "b Q=4Gamma": (b < 1e-7, f"{b:.1e}"),
        "c homomorphism": (c < 1e-9, f"{c:.1e}"),
        "d probe vs resimulation": (d < 1e-6, f"{d:.1e}"),
        "e Gaussian W_Q": (e <= 1e-3, f"max {e:.1e}"),
        "f separable E": (f_max <= 1e-6, f"max {f_max:.1e}"),
    }
    ok = all(v for v, _ in checks.values())
    report("6 property suite", ok, ", ".join(f"{k}: {'ok' if v else 'FAILED'} ({s})" for k, (v, s) in checks.items()))
    assert ok


def test_hellinger_pipeline(report, tmp_path):
    t0 = time.time()
    ideal = tmp_path / "ideal"
    cli.run(["experiment", "--recipe", "fig10", "--samples", "1000000", "--reps", "100", "--out", str(ideal)])
    worst = 0.0
    for lab in ("qq", "pp"):
        d = json.loads((ideal / f"fisher_{lab}.json").read_text())
        est, ana, std = (np.array(d[k]) for k in ("estimated", "analytic", "std"))
        mask = std > 0
        worst = max(worst, float(np.max(np.abs(est - ana)[mask] / std[mask])))
        assert np.all(np.abs(est - ana)[~mask] < 1e-9)
    match = worst <= 3.0

    lossy = load_fixture("fig10").replace(loss_eta=0.9).to_json()
    path = tmp_path / "fig10_lossy.json"
    path.write_text(json.dumps(lossy))
    rep = cli.run(["experiment", "--recipe", str(path), "--samples", "1000000", "--reps", "100",
                   "--out", str(tmp_path / "lossy")])
    lines = (tmp_path / "lossy" / "experiment_map.csv").read_text().splitlines()[1:]
    rows = list(csv.DictReader(lines))
    pp_max = max(float(r["E_pp"]) for r in rows)
    frac_q = rep["positive_fraction"]["qq"]
    sig_p = rep["positive_fraction_3sigma"]["pp"]
    dt = time.time() - t0
    ok = match and frac_q > 0.5 and sig_p == 0.0 and dt < 1800
    report("7 Hellinger pipeline", ok,
           f"max |F_est - F_analytic| = {worst:.2f} sigma (<=3), at eta=0.9 qq positive on {frac_q:.0%} "
           f"of bases, pp positive beyond 3 sigma on {sig_p:.0%} (mean map max {pp_max:.1e}), {dt:.0f}s")
    assert ok


def test_homodyne_thresholds(report):
    gens = GeneratorSet(2, 2)
    settings = h.default_settings(2)

    def w_hom(recipe, loss):
        s = prepare(recipe.replace(loss_eta=1.0 - loss) if loss else recipe).state
        cov = covariance_matrix(s, gens).values
        fs = [h.analytic_fisher(s, gens, st, method="exact").values for st in settings]
        return h.homodyne_witness(h.HomodyneProbe(fs, cov, gens, P12)).W_hom

    diff = load_fixture("fig9_top")
    losses = (0.0, 0.03, 0.06, 0.09, 0.099)
    vals = [w_hom(diff, x) for x in losses]
    ok_diff = all(v > 0 for v in vals)

    same = load_fixture("fig9_bottom")
    lo, hi = 0.0, 0.2
    start = w_hom(same, lo) > 0 and w_hom(same, hi) <= 0
    for _ in range(8):
        mid = (lo + hi) / 2
        if w_hom(same, mid) > 0:
            lo = mid
        else:
            hi = mid
    cross = (lo + hi) / 2
    ok_same = start and abs(cross - 0.08) <= 0.02
    report("8 W_hom different modes positive below 10% loss", ok_diff,
           ", ".join(f"{x:.1%}: {v:.3f}" for x, v in zip(losses, vals)))
    report("8 W_hom same mode crosses zero at 8+-2% loss", ok_same, f"crossing at {cross:.1%}")
    assert ok_diff and ok_same
