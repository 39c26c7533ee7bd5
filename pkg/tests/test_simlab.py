import filecmp
import math

import numpy as np
import pytest
from scipy.stats import norm

from dirgof.gof import RegressionTest
from dirgof.kernels import VON_MISES
from dirgof.models import ConstantRegression
from dirgof.simlab import (
    DEFAULT_LADDER,
    FULL_LADDER,
    ConfigError,
    ExperimentConfig,
    UnsupportedSizeError,
    density_of_statistic,
    ks_test_std_normal,
    normality_report,
    parse_rate,
    qq_data,
    rate_label,
    run_experiment,
    run_size_power,
    run_t3_convergence,
    run_t6_convergence,
    shapiro_wilk,
    t3_constants,
    t6_constants,
)
from dirgof.sphere import RngStream, sphere_quadrature

INV_SD = (128 / math.pi) ** 0.25


# -- normality diagnostics ---------------------------------------------------


def test_ks_at_plotting_positions():
    M = 500
    rep = ks_test_std_normal(norm.ppf((np.arange(1, M + 1) - 0.5) / M))
    assert rep.ks_statistic == pytest.approx(1 / (2 * M), abs=1e-12)
    assert rep.ks_p == pytest.approx(1.0)


def test_ks_point_mass():
    rep = ks_test_std_normal(np.zeros(50))
    assert rep.ks_statistic == 0.5 and rep.ks_p < 1e-10


def test_ks_null_behavior():
    ps = [ks_test_std_normal(RngStream(s).generator().standard_normal(10_000)).ks_p for s in range(10)]
    assert min(ps) >= 0.001


def test_ks_matches_scipy(rng):
    from scipy.stats import kstest

    x = rng.generator().standard_normal(300) * 1.1
    rep = ks_test_std_normal(x)
    assert rep.ks_statistic == pytest.approx(kstest(x, "norm").statistic, rel=1e-12)


def test_shapiro_wilk_examples(rng):
    w, _ = shapiro_wilk(norm.ppf((np.arange(1, 201) - 0.5) / 200))
    assert w > 0.999
    _, p = shapiro_wilk(rng.generator().exponential(size=500))
    assert p < 0.001
    for x in (rng.child(1).generator().standard_normal(30), np.array([0.0, 1.0, 10.0])):
        w, p = shapiro_wilk(x)
        assert 0 < w <= 1 and 0 <= p <= 1
    for m in (2, 5001):
        with pytest.raises(UnsupportedSizeError):
            shapiro_wilk(np.arange(m, dtype=float))


def test_normality_report_outside_sw_range():
    rep = normality_report(np.array([0.1, -0.3]))
    assert rep.sw_statistic is None and rep.ks_statistic > 0


def test_qq_examples(rng):
    M = 100
    q = norm.ppf((np.arange(1, M + 1) - 0.5) / M)
    qq = qq_data(q[::-1])
    np.testing.assert_array_equal(qq.empirical, qq.theoretical)
    z = 3.0 + 2.0 * rng.generator().standard_normal(2000)
    qq = qq_data(z)
    slope, icept = np.polyfit(qq.theoretical, qq.empirical, 1)
    assert abs(slope / 2 - 1) < 0.02 and abs(icept - 3) < 0.1
    assert np.all(np.diff(qq.empirical) >= 0)
    qq = qq_data([5.0, -1.0])
    np.testing.assert_allclose(qq.theoretical, [norm.ppf(0.25), norm.ppf(0.75)])
    np.testing.assert_array_equal(qq.empirical, [-1.0, 5.0])


def test_density_of_statistic_integrates(rng):
    x, d = density_of_statistic(rng.generator().standard_normal(500))
    assert np.trapezoid(d, x) == pytest.approx(1.0, abs=1e-3)


# -- configuration -----------------------------------------------------------------


def test_ladders():
    assert FULL_LADDER[0] == 10 and FULL_LADDER[-1] == 500_000 and len(FULL_LADDER) == 10
    assert max(DEFAULT_LADDER) == 10_000


def test_rates():
    assert parse_rate("1/3") == pytest.approx(1 / 3) and parse_rate(0.2) == 0.2
    assert rate_label(1 / 3) == "1-3" and rate_label(0.2) == "1-5"


@pytest.mark.parametrize("bad, name", [
    (dict(M=1), "M"),
    (dict(n=(0, 10)), "n"),
    (dict(coef=-1.0), "coef"),
    (dict(alphas=(0.0,)), "alphas"),
    (dict(B=5), "B"),
    (dict(statistic="t9"), "statistic"),
    (dict(null_sd=0.0), "null_sd"),
])
def test_config_errors_name_field(bad, name):
    with pytest.raises(ConfigError) as err:
        ExperimentConfig("t3-convergence", **bad)
    assert err.value.field == name and name in str(err.value)


def test_config_from_dict():
    cfg = ExperimentConfig.from_dict({"experiment": "t6-convergence", "n": [100], "rates": ["1/3", 0.2]})
    assert cfg.rates == pytest.approx((1 / 3, 0.2)) and cfg.coef == 0.5
    assert cfg.bandwidth(1000, 1 / 3) == pytest.approx(0.05)
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict({"experiment": "t3-convergence", "bogus": 1})
    assert err.value.field == "bogus"
    with pytest.raises(ConfigError):
        ExperimentConfig("unknown")


# -- standardizing constants ---------------------------------------------------


def test_t3_constants_closed_forms():
    c = t3_constants(1.0)
    assert c["nu_d_sq"] == pytest.approx((8 * math.pi) ** -0.5, abs=1e-6)
    # closed form (2 pi)^-1 I0(2) I0(1)^-2 = 0.2263411
    assert c["R_fX"] == pytest.approx(0.2263411, abs=1e-6)


def test_t6_inverse_sd_identity():
    c = t6_constants(0.25, sphere_quadrature(1, 512))
    assert c["inv_sd"] == pytest.approx(INV_SD, abs=1e-10)
    assert c["center_nh"] == pytest.approx(math.sqrt(math.pi) / 4, abs=1e-12)
    test = RegressionTest(0.2, ConstantRegression(1.0, 0.25), VON_MISES)
    assert test.asymptotics(1000, ConstantRegression(1.0, 0.25)).variance ** -0.5 == pytest.approx(INV_SD, abs=1e-10)


# -- experiments ------------------------------------------------------------------


def test_t3_smoke_m2():
    res = run_t3_convergence(ExperimentConfig("t3-convergence", n=(50,), M=2, seed=3))
    cell = res.cell(50)
    assert cell.standardized.shape == (2,) and np.all(np.isfinite(cell.standardized))
    assert cell.h == pytest.approx(2 * 50 ** (-1 / 3))


def test_t6_zero_noise_gives_pure_centering():
    n = 200
    res = run_t6_convergence(ExperimentConfig("t6-convergence", n=(n,), M=3, noise_sd=0.0))
    for r in (1 / 3, 1 / 5):
        cell = res.cell(n, r)
        h = 0.5 * n**-r
        assert np.all(cell.statistic == 0.0)
        expected = -INV_SD * math.sqrt(math.pi) / (4 * n * h) * n * math.sqrt(h)
        np.testing.assert_allclose(cell.standardized, expected, rtol=1e-10)


def test_replicates_uncorrelated():
    M = 300
    res = run_t3_convergence(ExperimentConfig("t3-convergence", n=(100,), M=M, seed=5))
    s = res.cell(100).statistic
    s = s - s.mean()
    lag1 = np.sum(s[1:] * s[:-1]) / np.sum(s * s)
    assert abs(lag1) < 3 / math.sqrt(M)


@pytest.mark.parametrize("experiment", ["t3-convergence", "t6-convergence", "size-power"])
def test_outputs_identical_across_threads(tmp_path, experiment):
    extra = {"B": 19, "statistic": "t3"} if experiment == "size-power" else {}
    dirs = []
    for t in (1, 3):
        cfg = ExperimentConfig(experiment, n=(40, 80), M=6, seed=21, threads=t, **extra)
        _, paths = run_experiment(cfg, tmp_path / f"threads{t}")
        dirs.append(sorted(p.name for p in paths))
    assert dirs[0] == dirs[1]
    for name in dirs[0]:
        assert filecmp.cmp(tmp_path / "threads1" / name, tmp_path / "threads3" / name, shallow=False), name


def test_output_schema(tmp_path):
    cfg = ExperimentConfig("t6-convergence", n=(60,), M=4)
    _, paths = run_experiment(cfg, tmp_path)
    names = {p.name for p in paths}
    assert {"t6-convergence_qq_n60_r1-3.csv", "t6-convergence_qq_n60_r1-5.csv"} <= names
    lines = (tmp_path / "t6-convergence_replicates.csv").read_text().splitlines()
    assert lines[0] == "experiment,n,h,g_or_rate,replicate,statistic,standardized"
    assert len(lines) == 1 + 2 * 4
    diag = (tmp_path / "t6-convergence_diagnostics.csv").read_text().splitlines()
    assert diag[0] == "experiment,n,ks_stat,ks_p,sw_stat,sw_p"
    assert "\r" not in (tmp_path / "t6-convergence_replicates.csv").read_bytes().decode()


def test_size_power_alpha_one():
    res = run_size_power(ExperimentConfig("size-power", n=(30,), M=5, B=19, alphas=(0.05, 1.0), statistic="t6"))
    assert res[0].rejection_rate(1.0)[1] == 1.0


def test_power_exceeds_size():
    base = dict(n=(100,), M=40, B=39, seed=2, statistic="t3")
    null = run_size_power(ExperimentConfig("size-power", process="null", **base))[0]
    alt = run_size_power(ExperimentConfig("size-power", process="alternative", **base))[0]
    assert alt.rejection_rate(0.05)[1] > null.rejection_rate(0.05)[1]
    assert alt.rejection_rate(0.05)[1] > 0.9


@pytest.mark.slow
def test_t3_convergence_direction():
    M = 500
    res = run_t3_convergence(ExperimentConfig("t3-convergence", n=(100, 1000, 10_000), M=M, seed=1))
    d = [res.cell(n).normality.ks_statistic for n in (100, 1000, 10_000)]
    inversions = [b - a for a, b in zip(d, d[1:]) if b > a]
    assert len(inversions) <= 1 and all(v <= 2 / math.sqrt(M) for v in inversions), d
