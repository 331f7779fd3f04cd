import io

import numpy as np
import pytest

from arselect import mc
from arselect.criteria import AIC, FPE, SN, CORE_CRITERIA
from arselect.errors import ConfigError, NumericalDegeneracyError
from arselect.fit import empirical_R_distance, fit_path, predict_one
from arselect.mc import ExperimentConfig, gamma_opt, run_cell, run_cells, seed_stream
from arselect.process import (
    ProcessSpec,
    ar_coefficients,
    autocovariances,
    conditional_mean_next,
    simulate,
)
from arselect.theory import loss_curve


def test_seed_stream_identity_and_distinctness():
    a = np.random.Generator(np.random.PCG64(seed_stream(1, (60, 7), 0))).standard_normal(4)
    b = np.random.Generator(np.random.PCG64(seed_stream(1, (60, 7), 0))).standard_normal(4)
    c = np.random.Generator(np.random.PCG64(seed_stream(1, (60, 7), 1))).standard_normal(4)
    d = np.random.Generator(np.random.PCG64(seed_stream(2, (60, 7), 0))).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)
    assert seed_stream(1, 3, 0).spawn_key == (3, 0)


def test_config_validation():
    spec = ProcessSpec.ma1(0.5)
    for kw in (dict(cells=[(10, 10)]), dict(reps=0), dict(estimator_mode="x"), dict(criteria=[])):
        with pytest.raises(ConfigError):
            ExperimentConfig(spec, **kw)


def test_replication_matches_single_path_api():
    """The batched pipeline reproduces the one-path functions exactly."""
    spec = ProcessSpec.arma11(0.5, 0.8)
    n, K = 60, 7
    cfg = ExperimentConfig(spec, [(n, K)], reps=3, master_seed=4)
    res = run_cell(cfg, (n, K))
    ar = ar_coefficients(spec)
    gamma = autocovariances(spec, ar.M + 1)
    d2 = np.empty((3, K))
    q = np.empty((3, K))
    for r in range(3):
        path = simulate(spec, n, seed_stream(4, (n, K), r))
        fits = fit_path(path, K)
        cm = conditional_mean_next(spec, path)
        for k in range(1, K + 1):
            d2[r, k - 1] = (cm - predict_one(path, fits.a_hat(k))) ** 2
            q[r, k - 1] = empirical_R_distance(fits.a_hat(k), ar, gamma)
    np.testing.assert_allclose(res.m_hat, d2.mean(axis=0), rtol=1e-9)
    np.testing.assert_allclose(res.m_hat_I, q.mean(axis=0), rtol=1e-9)


def test_white_noise_tracks_theory():
    spec = ProcessSpec.white_noise()
    res = run_cell(ExperimentConfig(spec, [(200, 14)], 4000, 3), (200, 14))
    L = loss_curve(spec, 200, 14).L
    assert np.all(np.abs(res.m_hat / L - 1) < 0.15)
    assert int(np.argmin(res.m_hat)) == 0


def test_cell_invariants():
    cfg = ExperimentConfig(ProcessSpec.ma1(0.8), [(60, 7), (120, 10)], 600, 2, criteria=list(CORE_CRITERIA))
    for res in run_cells(cfg):
        assert res.used + res.dropped == res.reps
        assert np.all(res.m_hat >= 0) and np.all(res.m_hat_I >= 0)
        for crit in CORE_CRITERIA:
            st = res.stats(crit)
            assert st.histogram.sum() == res.used
            assert st.r_star >= 1 and st.r_star_I >= 1
            assert np.isfinite([st.pe_se, st.pei_se, st.r_star_se, st.r_star_I_se]).all()


def test_jobs_and_repeat_invariance():
    spec = ProcessSpec.arma11(-0.7, 0.6)
    cells = [(60, 7), (120, 10)]
    a = run_cells(ExperimentConfig(spec, cells, 1100, 5, jobs=1))
    b = run_cells(ExperimentConfig(spec, cells, 1100, 5, jobs=3))
    c = run_cells(ExperimentConfig(spec, cells, 1100, 5, jobs=1))
    for x, y, z in zip(a, b, c):
        for attr in ("m_hat", "m_hat_se", "m_hat_I", "m_hat_raw"):
            np.testing.assert_array_equal(getattr(x, attr), getattr(y, attr))
            np.testing.assert_array_equal(getattr(x, attr), getattr(z, attr))
        assert x.stats(AIC).pe == y.stats(AIC).pe


def test_subset_of_cells_reproduces_streams():
    spec = ProcessSpec.ma1(0.6)
    full = run_cells(ExperimentConfig(spec, [(60, 7), (120, 10)], 300, 9))
    alone = run_cell(ExperimentConfig(spec, [(120, 10)], 300, 9), (120, 10))
    np.testing.assert_array_equal(full[1].m_hat, alone.m_hat)


@pytest.mark.parametrize("cell", [(60, 7), (200, 14)])
def test_conditional_and_raw_agree(cell):
    res = run_cell(ExperimentConfig(ProcessSpec.ma1(0.8), [cell], 5000, 1), cell)
    z = np.abs(res.m_hat_cond - res.m_hat_raw) / np.hypot(res.m_hat_cond_se, res.m_hat_raw_se)
    assert z.max() < 4
    raw = run_cell(ExperimentConfig(ProcessSpec.ma1(0.8), [cell], 5000, 1, estimator_mode="raw"), cell)
    np.testing.assert_array_equal(raw.m_hat, res.m_hat_raw)
    np.testing.assert_array_equal(raw.m_hat_I, res.m_hat_I)


def test_efficient_criteria_agree_at_large_n():
    cfg = ExperimentConfig(ProcessSpec.ma1(0.8), [(1000, 31)], 4000, 1, criteria=[AIC, FPE, SN])
    res = run_cell(cfg, (1000, 31))
    for a, b in ((AIC, FPE), (AIC, SN), (FPE, SN)):
        sa, sb = res.stats(a), res.stats(b)
        assert abs(sa.pe - sb.pe) < 3 * np.hypot(sa.pe_se, sb.pe_se)


def test_gamma_opt_baseline_and_mismatch():
    cfg = ExperimentConfig(ProcessSpec.arma11(-0.9, 0.8), [(60, 7), (120, 10)], 400, 1)
    res = run_cells(cfg)
    ratios = gamma_opt(res, res[0])
    assert ratios[0] == (1.0, 0.0)
    assert ratios[1][0] == pytest.approx(res[1].min_m_hat / res[0].m_hat[:6].min())
    other = run_cell(ExperimentConfig(ProcessSpec.ma1(0.8), [(120, 10)], 50, 1), (120, 10))
    with pytest.raises(ConfigError):
        gamma_opt([other], res[0])


def _fake_part(B, K, dropped):
    z = np.ones((B, K))
    return dict(cond=z, raw=z, indep=z, khat=np.ones((B, 1), dtype=int), dropped=dropped)


def test_drop_policy():
    cfg = ExperimentConfig(ProcessSpec.ma1(0.5), [(60, 7)], 10_000, 1)
    res = mc._aggregate(cfg, 60, 7, [_fake_part(9990, 7, 10)])
    assert res.dropped == 10 and res.used == 9990
    with pytest.raises(NumericalDegeneracyError):
        mc._aggregate(cfg, 60, 7, [_fake_part(9989, 7, 11)])


def test_ratio_standard_error_matches_bootstrap():
    rng = np.random.default_rng(0)
    num = rng.exponential(2.0, 4000)
    den = num * 0.5 + rng.exponential(0.5, 4000)
    r, se = mc._ratio(num, den)
    boots = []
    for _ in range(400):
        idx = rng.integers(0, 4000, 4000)
        boots.append(num[idx].mean() / den[idx].mean())
    assert se == pytest.approx(np.std(boots), rel=0.2)


def test_tables_and_csv_roundtrip(tmp_path):
    rows = mc.table1(200, 1, phis=[0.5], thetas=[0.8], cells=[(120, 10)])
    assert [r.statistic for r in rows] == ["pe:aic", "gamma_opt"]
    assert rows[0].key == ("0.5", "0.8", 120, 10, "pe:aic")
    ma = mc.ma1_results(150, 1, thetas=[-0.6], cells=[(60, 7)])
    t2 = mc.table2(results=ma)
    t3 = mc.table3(results=ma)
    assert t2[0].statistic == "r_star:aic" and t3[0].statistic == "r_star_I:aic"
    assert t2[0].theta0 == "-0.6" and t2[0].phi0 == "0"
    buf = io.StringIO()
    mc.write_rows(rows + t2, buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == "phi0,theta0,n,K_n,statistic,value,stderr"
    ref = tmp_path / "ref.csv"
    ref.write_text("phi0,theta0,n,K_n,statistic,value,tol\n0.50,0.8,120,10,pe:aic,1.0,1e-9\n0,-0.6,60,7,r_star:aic,%r,\n"
                   % t2[0].value)
    report = mc.diff_rows(rows + t2, mc.load_reference(str(ref)))
    assert [item["ok"] for item in report] == [False, True]


def test_bundled_reference_values():
    ref = mc.load_reference("bundled")
    assert ref[("-0.9", "0.8", 60, 7, "pe:aic")][0] == 1.23
    assert ref[("0", "0.8", 1000, 31, "r_star:aic")][0] == 16.18
    assert ref[("0", "-0.8", 1000, 31, "r_star_I:aic")][0] == 1.41
    assert ref[("0.5", "0.8", 500, 22, "gamma_opt")][0] == 0.22
    assert len(ref) == 6 * 4 * 5 * 2 + 2 * 20


def test_cell_rows_cover_all_statistics():
    res = run_cell(ExperimentConfig(ProcessSpec.explicit([0.5]), [(60, 7)], 50, 1), (60, 7))
    stats = [r.statistic for r in mc.cell_rows(res)]
    assert "min_m_hat" in stats and "m_hat:k=7" in stats and "khat_count:aic:k=1" in stats
    assert mc.spec_columns(res.spec) == ("ar(0.5)", "")
