import math

import numpy as np
import pytest
from oracles import vacuum_hellinger_sq

from modewitness import fock
from modewitness import homodyne as h
from modewitness.generators import GeneratorSet, Partition
from modewitness.witness import BasisProbe, qfi_matrix, state_matrices

P12 = Partition.parse("1|2", 2)


def fig5_state(cutoff=12):
    return fock.subtract_photon(fock.squeezed_vacuum([0.2, -0.2], cutoff), math.pi / 4)


def gaussian_cells(setting, var, mode=0):
    x = setting.centers(mode)
    g = np.exp(-x**2 / (2 * var))
    return g / g.sum()


def moments(p, x):
    mean = (p * x).sum()
    c = x - mean
    return mean, (p * c**2).sum(), (p * c**4).sum()


# --- marginals ---------------------------------------------------------------


def test_vacuum_marginal_is_product_gaussian():
    st = h.MeasurementSetting.uniform([0.0, 0.0], bins=128)
    pdf = h.marginal_distribution(fock.vacuum(2, 6), st)
    g = gaussian_cells(st, 1.0)
    assert np.allclose(pdf.values, np.outer(g, g), atol=1e-10)
    assert pdf.values.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("phi,sign", [(0.0, -1), (math.pi / 2, 1)])
def test_squeezed_marginal_variance(phi, sign):
    st = h.MeasurementSetting.uniform([phi], bins=512)
    pdf = h.marginal_distribution(fock.squeezed_vacuum([0.2], 30), st)
    _, var, _ = moments(pdf.values, st.centers(0))
    assert var == pytest.approx(math.exp(sign * 0.4), rel=1e-4)


def test_subtracted_state_is_not_gaussian():
    st = h.MeasurementSetting.uniform([0.0, 0.0], bins=256)
    pdf = h.marginal_distribution(fig5_state(), st)
    x = st.centers(0)
    mean, var, m4 = moments(pdf.values.sum(axis=1), x)
    assert abs(m4 / var**2 - 3.0) > 0.1
    # second moment agrees with the Fock-space expectation value
    assert var == pytest.approx(fock.expectation(fig5_state(), [2, 0, 0, 0]) - mean**2, rel=1e-4)


def test_grid_too_small():
    st = h.MeasurementSetting.uniform([0.0], -1.0, 1.0, 32)
    with pytest.raises(h.GridError):
        h.marginal_distribution(fock.vacuum(1, 4), st, auto_widen=False)
    pdf = h.marginal_distribution(fock.vacuum(1, 4), st)
    assert pdf.mass_defect <= h.MAX_MASS_DEFECT
    assert pdf.setting.grid[0][0] < -1.0
    with pytest.raises(ValueError):
        h.MeasurementSetting((0.0,), ((1.0, -1.0, 10),))


# --- parameter actions ---------------------------------------------------------


def test_displacement_shift_direction():
    st = h.MeasurementSetting.uniform([0.3], bins=400)
    gens = GeneratorSet(1, 1)
    q1, p1 = gens[0], gens[1]
    x = st.centers(0)
    vac = fock.vacuum(1, 12)
    kappa = 0.2
    m_p, _, _ = moments(h.parametrized_distribution(vac, p1, kappa, st).values, x)
    m_q, _, _ = moments(h.parametrized_distribution(vac, q1, kappa, st).values, x)
    assert m_p == pytest.approx(2 * kappa * math.cos(0.3), abs=1e-6)
    assert m_q == pytest.approx(-2 * kappa * math.sin(0.3), abs=1e-6)


@pytest.mark.parametrize("index", [0, 1, 2, 3])
def test_shift_path_matches_state_path(index):
    s = fig5_state(16)
    gens = GeneratorSet(1, 2)
    st = h.MeasurementSetting.uniform([0.4, 1.2], bins=128)
    a = h.parametrized_distribution(s, gens[index], 0.05, st, path="shift")
    b = h.parametrized_distribution(s, gens[index], 0.05, st, path="state")
    assert np.max(np.abs(a.values - b.values)) < 1e-6


def test_unmeasured_displacement_has_no_information():
    gens = GeneratorSet(1, 1)
    st = h.MeasurementSetting.uniform([0.0])
    s = fock.squeezed_vacuum([0.3], 30)
    p0 = h.marginal_distribution(s, st).values
    assert np.allclose(h.parametrized_distribution(s, gens[0], 0.3, st).values, p0, atol=1e-14)
    f = h.analytic_fisher(s, gens, st).values
    assert abs(f[0, 0]) < 1e-12 and abs(f[0, 1]) < 1e-12 and f[1, 1] > 0


def test_order_two_generator_rescales_variance():
    st = h.MeasurementSetting.uniform([0.0], bins=400)
    s = fock.squeezed_vacuum([0.2], 30)
    x = st.centers(0)
    qp = [g for g in GeneratorSet(2, 1) if g.exponents == (1, 1)][0]
    _, v0, _ = moments(h.marginal_distribution(s, st).values, x)
    for kappa in (0.01, -0.01):
        _, v, _ = moments(h.parametrized_distribution(s, qp, kappa, st).values, x)
        # q scales by exp(2 kappa) under exp(-i kappa (qp + pq)/2) with [q, p] = 2i
        assert v / v0 == pytest.approx(math.exp(4 * kappa), abs=kappa**2 * 10)
    with pytest.raises(ValueError):
        h.parametrized_distribution(s, qp, 0.01, st, path="shift")
    with pytest.raises(ValueError):
        h.parametrized_distribution(s, GeneratorSet(3, 1)[-1], 0.01, st)


# --- sampling ----------------------------------------------------------------------


def test_sampling():
    st = h.MeasurementSetting.uniform([0.0], bins=256)
    pdf = h.marginal_distribution(fock.vacuum(1, 4), st)
    ds = h.sample(pdf, 1_000_000, seed=3)
    _, var, _ = moments(ds.frequencies, st.centers(0))
    assert abs(var - 1.0) < 0.005
    assert np.array_equal(ds.counts, h.sample(pdf, 1_000_000, seed=3).counts)
    assert not np.array_equal(ds.counts, h.sample(pdf, 1_000_000, seed=3, rep=1).counts)
    one = h.sample(pdf, 1, seed=0)
    assert np.count_nonzero(one.counts) == 1
    with pytest.raises(ValueError):
        h.sample(pdf, 0, seed=0)


@pytest.mark.parametrize("suffix", [".csv", ".json"])
def test_dataset_round_trip(tmp_path, suffix):
    st = h.MeasurementSetting.uniform([0.0, math.pi / 2], bins=64)
    ds = h.sample(h.marginal_distribution(fig5_state(), st), 5000, seed=11, rep=4)
    path = h.save_dataset(ds, tmp_path / f"hist{suffix}")
    back = h.load_dataset(path)
    assert np.array_equal(back.counts, ds.counts)
    assert back.n_samples == 5000 and back.seed == 11 and back.rep == 4
    assert back.setting.to_json() == st.to_json()


def test_external_csv_histogram(tmp_path):
    path = tmp_path / "lab.csv"
    path.write_text('# {"phi": [0.0], "grid": [[-2, 2, 4]], "n_samples": 7, "seed": 0}\ni1,count\n1,3\n2,4\n')
    ds = h.load_dataset(path)
    assert ds.counts.tolist() == [0, 3, 4, 0]
    bad = tmp_path / "bad.csv"
    bad.write_text("i1,count\n1,3\n")
    with pytest.raises(ValueError):
        h.load_dataset(bad)


# --- Fisher matrices ------------------------------------------------------------------


def test_vacuum_hellinger_closed_form():
    st = h.MeasurementSetting.uniform([0.0], bins=512)
    p = h.marginal_distribution(fock.vacuum(1, 4), st).values
    w = st.width(0)
    for n in (1, 5, 20):
        assert h.hellinger_distance(p, [n]) == pytest.approx(vacuum_hellinger_sq(n * w), rel=1e-3)
    assert h.hellinger_distance(p, [0]) == 0.0


def test_vacuum_fisher_is_four():
    gens = GeneratorSet(1, 1)
    st = h.MeasurementSetting.uniform([0.0], bins=512)
    vac = fock.vacuum(1, 4)
    exact = h.hellinger_fisher(h.marginal_distribution(vac, st), gens).values
    assert exact[1, 1] == pytest.approx(4.0, rel=1e-3)
    assert h.analytic_fisher(vac, gens, st).values[1, 1] == pytest.approx(4.0, rel=1e-6)
    assert qfi_matrix(vac, gens).values[1, 1] == pytest.approx(4.0)


def test_analytic_methods_agree():
    s = fig5_state()
    gens = GeneratorSet(1, 2)
    st = h.MeasurementSetting.uniform([0.0, 0.0], bins=128)
    fd = h.analytic_fisher(s, gens, st).values
    ex = h.analytic_fisher(s, gens, st, method="exact").values
    assert np.allclose(fd, ex, atol=1e-6 * np.max(np.abs(ex)))
    with pytest.raises(ValueError):
        h.analytic_fisher(s, gens, st, method="magic")


@pytest.mark.parametrize("phi", [(0.0, 0.0), (math.pi / 2, math.pi / 2), (0.0, math.pi / 2), (0.7, 2.1)])
def test_fisher_below_qfi(phi):
    s = fig5_state()
    for gens in (GeneratorSet(1, 2), GeneratorSet(2, 2)):
        st = h.MeasurementSetting.uniform(phi, bins=128)
        f = h.analytic_fisher(s, gens, st).values
        q = qfi_matrix(s, gens).values
        assert np.linalg.eigvalsh(q - f).min() > -1e-6 * max(1.0, np.abs(q).max())
        assert np.linalg.eigvalsh(f).min() > -1e-8


def test_hellinger_on_exact_pdf_matches_analytic():
    s = fig5_state()
    gens = GeneratorSet(1, 2)
    st = h.MeasurementSetting.uniform([0.0, 0.0], bins=256)
    est = h.hellinger_fisher(h.marginal_distribution(s, st), gens).values
    ref = h.analytic_fisher(s, gens, st).values
    assert np.allclose(est, ref, atol=0.01 * np.abs(ref).max())


def test_estimator_error_halves_when_samples_quadruple():
    # the empty-shift noise floor scales like bins / n; a coarse grid reaches
    # the 1 / sqrt(n) regime at a million samples
    gens = GeneratorSet(1, 1)
    st = h.MeasurementSetting.uniform([0.0], bins=64)
    pdf = h.marginal_distribution(fock.squeezed_vacuum([0.3], 30), st)
    truth = h.hellinger_fisher(pdf, gens).values[1, 1]

    def rms(n):
        vals = [h.hellinger_fisher(h.sample(pdf, n, seed=1, rep=r), gens, bootstrap=0).values[1, 1]
                for r in range(40)]
        return math.sqrt(np.mean((np.array(vals) - truth) ** 2))

    ratio = rms(1_000_000) / rms(4_000_000)
    assert 1.5 < ratio < 2.7


def test_bias_correction_and_errors():
    gens = GeneratorSet(1, 1)
    st = h.MeasurementSetting.uniform([0.0], bins=256)
    pdf = h.marginal_distribution(fock.vacuum(1, 4), st)
    ds = h.sample(pdf, 100_000, seed=5)
    raw = h.hellinger_fisher(ds, gens, bootstrap=0, bias_reps=0).values
    boots = h.hellinger_fisher(ds, gens, bootstrap=10, bias_reps=0).samples
    fixed = h.hellinger_fisher(ds, gens, bootstrap=0, bias_reps=10).values
    assert np.allclose(fixed, 2 * raw - np.mean(boots, axis=0), atol=1e-12)

    data = [h.sample(pdf, 100_000, seed=5, rep=r) for r in range(40)]
    many = h.hellinger_fisher(data, gens)
    assert many.reps == 40 and abs(many.values[1, 1] - 4.0) < 4 * many.errors[1, 1] / math.sqrt(40)
    single = h.hellinger_fisher(data[0], gens, bootstrap=40)
    assert len(single.samples) == 40
    # bootstrap spread of one histogram tracks the spread across independent histograms
    assert 0.5 < single.errors[1, 1] / many.errors[1, 1] < 2.0
    assert single.to_json()["method"] == "hellinger"


def test_hellinger_rejects_bad_input():
    gens = GeneratorSet(1, 1)
    st = h.MeasurementSetting.uniform([0.0], bins=64)
    pdf = h.marginal_distribution(fock.vacuum(1, 4), st)
    with pytest.raises(ValueError):
        h.hellinger_fisher([], gens)
    with pytest.raises(ValueError):
        h.hellinger_fisher(pdf, gens, shifts=[1, 2])
    with pytest.raises(ValueError):
        h.hellinger_fisher(pdf, GeneratorSet(2, 1))


# --- witness ----------------------------------------------------------------------------


def test_homodyne_witness_is_a_lower_bound(rng):
    s = fig5_state()
    gens = GeneratorSet(1, 2)
    q, cov = state_matrices(s, gens)
    settings = h.default_settings(2, bins=128)
    fishers = [h.analytic_fisher(s, gens, st).values for st in settings]
    hom = h.HomodyneProbe(fishers, cov, gens, P12)
    full = BasisProbe(q, cov, gens, P12)
    for _ in range(25):
        x = rng.uniform(0, 2 * math.pi, hom.n_params)
        assert hom(x) <= full(x) + 1e-8
        for f in fishers:
            u = full.lifted(x)
            lifted = u @ f @ u.T
            assert np.allclose(lifted, lifted.T, atol=1e-10)
            assert np.linalg.eigvalsh(lifted).min() > -1e-8
    rep = h.homodyne_witness(hom)
    assert rep.W_hom <= full(np.array(rep.argmin)) + 1e-8
    assert set(rep.to_json()) >= {"W_hom", "argmin", "per_setting_at_argmin"}
    with pytest.raises(ValueError):
        h.HomodyneProbe([], cov, gens, P12)
