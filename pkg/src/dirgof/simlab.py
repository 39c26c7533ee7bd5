"""Monte Carlo experiments on the finite-sample law of the statistics.

Two convergence experiments replicate a standardized statistic ``M`` times
per sample size and compare its empirical law with N(0, 1):

* ``t3-convergence``: independence test on the cylinder, data from a von
  Mises (mu=(0,1), kappa=1) direction times an independent N(0,1) scalar,
  ``h = g = 2 n^(-1/3)``;
* ``t6-convergence``: regression test of ``m = c`` for ``Y = 1 + eps``,
  ``eps ~ N(0, 1/4)`` on uniform circular covariates, local constant
  smoother, ``h = n^(-r) / 2`` for several rates ``r``.

A third experiment, ``size-power``, estimates rejection rates of calibrated
tests under null and dependent data-generating processes.

Replicate ``j`` at sample size ``n`` draws from ``RngStream(seed).child(n).child(j)``,
so tables are identical whatever the number of worker threads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import special, stats

from .estimators import DirLinSample, DirSample
from .gof import (
    DirectionalDensityTest,
    DirLinIndependenceTest,
    RegressionTest,
    sphere_rule_for,
    t3_asymptotics,
    t3_statistic,
)
from .kernels import GAUSSIAN, VON_MISES, R_K, nu_l_sq, smoothing_constants
from .models import ConstantRegression, Gaussian, R_functional, VonMisesFisher, default_rule, vmf_sample
from .resampling import parametric_bootstrap, permutation, wild_bootstrap, map_ordered
from .sphere import ProductRule, RngStream, line_quadrature, sample_uniform_sphere, sphere_quadrature

__all__ = [
    "EXPERIMENTS",
    "DEFAULT_LADDER",
    "FULL_LADDER",
    "ConfigError",
    "UnsupportedSizeError",
    "ExperimentConfig",
    "NormalityReport",
    "QQData",
    "ConvergenceCell",
    "ConvergenceResult",
    "SizePowerResult",
    "ks_test_std_normal",
    "shapiro_wilk",
    "qq_data",
    "density_of_statistic",
    "run_t3_convergence",
    "run_t6_convergence",
    "run_size_power",
    "run_experiment",
    "write_csv",
]

EXPERIMENTS = ("t3-convergence", "t6-convergence", "size-power")

# n = 5^k 10^l, k = 0, 1; the desk-scale ladder stops at 10^4
FULL_LADDER = tuple(sorted(5**k * 10**l for k in (0, 1) for l in range(1, 6)))
DEFAULT_LADDER = tuple(n for n in FULL_LADDER if n <= 10_000)

# bandwidth constant and exponent(s) per experiment: h = coef * n^(-rate)
_DEFAULT_POLICY = {
    "t3-convergence": (2.0, (1 / 3,)),
    "t6-convergence": (0.5, (1 / 3, 1 / 5)),
}
_SIZE_POWER_POLICY = {"t1": (1.0, (1 / 5,)), "t3": (2.0, (1 / 3,)), "t6": (0.5, (1 / 3,))}
SW_RANGE = (3, 5000)
CONSTANT_TOL = 1e-6


class ConfigError(ValueError):
    """An experiment configuration field is invalid."""

    def __init__(self, name: str, message: str):
        self.field = name
        super().__init__(f"{name}: {message}")


class UnsupportedSizeError(ValueError):
    """Sample size outside the range of the Shapiro-Wilk approximation."""


def parse_rate(text) -> float:
    """``"1/3"``, ``"0.2"`` or a number, as a float."""
    if isinstance(text, (int, float)):
        return float(text)
    return float(Fraction(str(text).strip()))


def rate_label(rate: float) -> str:
    fr = Fraction(rate).limit_denominator(100)
    return f"{fr.numerator}-{fr.denominator}" if abs(float(fr) - rate) < 1e-12 else repr(rate)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines an experiment's output tables.

    ``coef`` and ``rates`` define the bandwidth policy ``h = coef n^(-rate)``
    (and ``g = h`` for the independence test); ``None`` picks the
    experiment's default. ``noise_sd`` scales the response noise of the
    generating process, ``null_sd`` the noise of the model whose
    asymptotic constants standardize T6.
    """

    experiment: str
    n: tuple[int, ...] = DEFAULT_LADDER
    M: int = 500
    seed: int = 0
    coef: float | None = None
    rates: tuple[float, ...] | None = None
    kappa: float = 1.0
    noise_sd: float = 0.5
    null_sd: float = 0.5
    statistic: str = "t3"
    process: str = "null"
    B: int = 199
    alphas: tuple[float, ...] = (0.01, 0.05, 0.10)
    sphere_nodes: int = 512
    line_nodes: int = 256
    out: str | None = None
    threads: int | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown experiment {self.experiment!r}")
        object.__setattr__(self, "n", tuple(int(v) for v in np.atleast_1d(self.n)))
        if not self.n or min(self.n) < 1:
            raise ConfigError("n", "sample sizes must be positive")
        if self.M < 2:
            raise ConfigError("M", "at least two replicates are needed")
        coef, rates = self.policy
        if not coef > 0:
            raise ConfigError("coef", "bandwidth constant must be positive")
        object.__setattr__(self, "rates", tuple(parse_rate(r) for r in rates))
        object.__setattr__(self, "coef", float(coef))
        if not all(math.isfinite(coef * n ** -r) and coef * n ** -r > 0 for n in self.n for r in self.rates):
            raise ConfigError("rates", "bandwidth policy must be positive for every n")
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if not all(0.0 < a <= 1.0 for a in self.alphas):
            raise ConfigError("alphas", "levels must lie in (0, 1]")
        if self.statistic not in _SIZE_POWER_POLICY:
            raise ConfigError("statistic", f"unknown statistic {self.statistic!r}")
        if self.process not in ("null", "alternative"):
            raise ConfigError("process", "must be 'null' or 'alternative'")
        if self.B < 19:
            raise ConfigError("B", "at least 19 resamples are needed")
        if self.noise_sd < 0 or not self.null_sd > 0 or not self.kappa >= 0:
            raise ConfigError("noise_sd" if self.noise_sd < 0 else "null_sd" if not self.null_sd > 0 else "kappa",
                              "invalid model parameter")
        if self.sphere_nodes < 8 or self.line_nodes < 8:
            raise ConfigError("sphere_nodes" if self.sphere_nodes < 8 else "line_nodes", "need at least 8 nodes")

    @property
    def policy(self) -> tuple[float, tuple]:
        if self.experiment == "size-power":
            coef, rates = _SIZE_POWER_POLICY[self.statistic]
        else:
            coef, rates = _DEFAULT_POLICY[self.experiment]
        return (self.coef if self.coef is not None else coef,
                self.rates if self.rates is not None else rates)

    def bandwidth(self, n: int, rate: float | None = None) -> float:
        return self.coef * n ** -(self.rates[0] if rate is None else rate)

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        for key in d:
            if key not in known:
                raise ConfigError(key, "unknown configuration field")
        d = dict(d)
        for key in ("n", "rates", "alphas"):
            if key in d and d[key] is not None:
                d[key] = tuple(np.atleast_1d(d[key]).tolist())
        return cls(**d)

    def updated(self, **changes) -> ExperimentConfig:
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def asdict(self) -> dict:
        d = asdict(self)
        for key in ("n", "rates", "alphas"):
            d[key] = list(d[key])
        return d


# -- normality diagnostics ---------------------------------------------------


@dataclass(frozen=True)
class NormalityReport:
    size: int
    ks_statistic: float
    ks_p: float
    sw_statistic: float | None = None
    sw_p: float | None = None


def ks_test_std_normal(values) -> NormalityReport:
    """One-sample Kolmogorov-Smirnov test against the fixed N(0, 1).

    The p-value is the asymptotic Kolmogorov tail ``Q(sqrt(M) D)``.
    """
    x = np.sort(np.asarray(values, dtype=float).ravel())
    M = x.size
    if M < 2:
        raise ValueError("need at least two values")
    cdf = stats.norm.cdf(x)
    i = np.arange(1, M + 1)
    D = float(max(np.max(i / M - cdf), np.max(cdf - (i - 1) / M)))
    p = float(special.kolmogorov(math.sqrt(M) * D))
    return NormalityReport(M, D, min(max(p, 0.0), 1.0))


def shapiro_wilk(values) -> tuple[float, float]:
    """Shapiro-Wilk W and p-value (Royston's approximation)."""
    x = np.asarray(values, dtype=float).ravel()
    lo, hi = SW_RANGE
    if not lo <= x.size <= hi:
        raise UnsupportedSizeError(f"Shapiro-Wilk needs {lo} <= M <= {hi}, got {x.size}")
    if np.ptp(x) == 0.0:
        # constant sample: W is undefined; report total departure
        return 1.0, 1.0
    res = stats.shapiro(x)
    return float(res.statistic), float(res.pvalue)


def normality_report(values) -> NormalityReport:
    ks = ks_test_std_normal(values)
    try:
        w, p = shapiro_wilk(values)
    except UnsupportedSizeError:
        return ks
    return replace(ks, sw_statistic=w, sw_p=p)


@dataclass(frozen=True)
class QQData:
    theoretical: np.ndarray
    empirical: np.ndarray


def qq_data(values) -> QQData:
    x = np.sort(np.asarray(values, dtype=float).ravel())
    M = x.size
    if M < 2:
        raise ValueError("need at least two values")
    return QQData(stats.norm.ppf((np.arange(1, M + 1) - 0.5) / M), x)


def density_of_statistic(values, n_grid: int = 201) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian KDE of a replicate sample with normal-reference bandwidth."""
    x = np.asarray(values, dtype=float).ravel()
    x = x[np.isfinite(x)]
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    bw = (4.0 / (3.0 * x.size)) ** 0.2 * sd if sd > 0 else 1.0
    grid = np.linspace(min(x.min(), -4.0) - 3 * bw, max(x.max(), 4.0) + 3 * bw, n_grid)
    dens = stats.norm.pdf((grid[:, None] - x[None, :]) / bw).mean(axis=1) / bw
    return grid, dens


# -- results -----------------------------------------------------------------


@dataclass
class ConvergenceCell:
    """Replicates at one sample size (and, for T6, one bandwidth rate)."""

    n: int
    rate: float
    h: float
    g: float | None
    statistic: np.ndarray
    standardized: np.ndarray
    normality: NormalityReport
    qq: QQData

    @property
    def g_or_rate(self) -> float:
        return self.g if self.g is not None else self.rate


@dataclass
class ConvergenceResult:
    config: ExperimentConfig
    cells: list[ConvergenceCell]
    constants: dict = field(default_factory=dict)

    def cell(self, n: int, rate: float | None = None) -> ConvergenceCell:
        for c in self.cells:
            if c.n == n and (rate is None or abs(c.rate - rate) < 1e-12):
                return c
        raise KeyError((n, rate))

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        tag = self.config.experiment
        paths = []
        rows = [(tag, c.n, c.h, c.g_or_rate, j, s, z)
                for c in self.cells for j, (s, z) in enumerate(zip(c.statistic, c.standardized))]
        paths.append(write_csv(out / f"{tag}_replicates.csv",
                               ("experiment", "n", "h", "g_or_rate", "replicate", "statistic", "standardized"),
                               rows))
        multi_rate = len({c.rate for c in self.cells}) > 1 or tag == "t6-convergence"
        # the diagnostics schema has no rate column: multi-rate runs tag it onto the experiment
        rows = [(f"{tag}:r{rate_label(c.rate)}" if multi_rate else tag, c.n, c.normality.ks_statistic,
                 c.normality.ks_p, c.normality.sw_statistic, c.normality.sw_p) for c in self.cells]
        paths.append(write_csv(out / f"{tag}_diagnostics.csv",
                               ("experiment", "n", "ks_stat", "ks_p", "sw_stat", "sw_p"), rows))
        dens_rows = []
        for c in self.cells:
            suffix = f"_r{rate_label(c.rate)}" if multi_rate else ""
            paths.append(write_csv(out / f"{tag}_qq_n{c.n}{suffix}.csv", ("theoretical_q", "empirical_q"),
                                   zip(c.qq.theoretical, c.qq.empirical)))
            grid, dens = density_of_statistic(c.standardized)
            dens_rows += [(tag, c.n, c.g_or_rate, x, d, stats.norm.pdf(x)) for x, d in zip(grid, dens)]
        paths.append(write_csv(out / f"{tag}_density.csv",
                               ("experiment", "n", "g_or_rate", "x", "density", "normal_density"), dens_rows))
        path = out / f"{tag}_summary.txt"
        path.write_text(self.summary(), encoding="utf-8", newline="\n")
        paths.append(path)
        return paths

    def summary(self) -> str:
        cfg = self.config
        lines = [f"experiment {cfg.experiment}  M={cfg.M}  seed={cfg.seed}",
                 f"bandwidth h = {cfg.coef!r} n^(-r), r in {[rate_label(r) for r in cfg.rates]}"]
        for k, v in self.constants.items():
            lines.append(f"  {k} = {v!r}")
        lines.append(f"{'n':>8} {'rate':>6} {'h':>10} {'mean':>9} {'sd':>8} {'KS D':>8} {'KS p':>9} {'SW p':>9}")
        for c in self.cells:
            z = c.standardized
            sw = "-" if c.normality.sw_p is None else f"{c.normality.sw_p:9.3g}"
            lines.append(f"{c.n:>8} {rate_label(c.rate):>6} {c.h:>10.4g} {np.mean(z):>9.4f} "
                         f"{np.std(z, ddof=1):>8.4f} {c.normality.ks_statistic:>8.4f} "
                         f"{c.normality.ks_p:>9.3g} {sw:>9}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> Path:
    """Comma-separated, LF line endings, shortest round-trip floats."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _cell(n, rate, h, g, stat, z) -> ConvergenceCell:
    stat, z = np.asarray(stat, dtype=float), np.asarray(z, dtype=float)
    return ConvergenceCell(n, rate, h, g, stat, z, normality_report(z), qq_data(z))


def _check_constants(computed: dict, closed: dict):
    for key, ref in closed.items():
        if abs(computed[key] - ref) > CONSTANT_TOL * max(1.0, abs(ref)):
            raise RuntimeError(f"standardizing constant {key} = {computed[key]!r} "
                               f"disagrees with its closed form {ref!r}")


# -- experiment 1: independence test ------------------------------------------


def t3_constants(kappa: float = 1.0) -> dict:
    """Constants standardizing T3 for the vMF(kappa) x N(0,1) null on the circle."""
    fX = VonMisesFisher(np.array([0.0, 1.0]), kappa)
    fY = Gaussian()
    c = smoothing_constants(VON_MISES, 1)
    computed = {
        "nu_d_sq": float(c.nu_d_sq),
        "nu_l_sq": nu_l_sq(GAUSSIAN),
        "R_K": R_K(GAUSSIAN),
        "bias_ratio": c.bias_ratio,
        "R_fX": R_functional(fX.pdf, default_rule(fX)),
        "R_fY": R_functional(fY.pdf, default_rule(fY)),
    }
    closed = {
        "nu_d_sq": (8 * math.pi) ** -0.5,
        "nu_l_sq": (8 * math.pi) ** -0.5,
        "R_K": 1 / (2 * math.sqrt(math.pi)),
        "bias_ratio": 1 / (2 * math.sqrt(math.pi)),
        "R_fX": special.iv(0, 2 * kappa) / (2 * math.pi * special.iv(0, kappa) ** 2),
        "R_fY": 1 / (2 * math.sqrt(math.pi)),
    }
    _check_constants(computed, closed)
    return computed


def _t3_rule(n: int, h: float, g: float, cfg: ExperimentConfig) -> ProductRule:
    half = 8.0 + 6.0 * g
    n_line = max(cfg.line_nodes, math.ceil(math.pi * 2 * half / g))
    return ProductRule(sphere_quadrature(1, max(cfg.sphere_nodes, math.ceil(8 * math.pi / h))),
                       line_quadrature(-half, half, n_line))


def run_t3_convergence(config: ExperimentConfig) -> ConvergenceResult:
    """Replicated standardized T3 under a vMF x N(0,1) independence null."""
    if config.experiment != "t3-convergence":
        config = replace(config, experiment="t3-convergence")
    const = t3_constants(config.kappa)
    mu = np.array([0.0, 1.0])
    root = RngStream(config.seed)
    cells = []
    for n in config.n:
        h = g = config.bandwidth(n)
        rule = _t3_rule(n, h, g, config)
        asym = t3_asymptotics(n, h, g, 1, smoothing_constants(VON_MISES, 1), const["R_K"],
                              const["nu_l_sq"], const["R_fX"], const["R_fY"])
        stream = root.child(n)

        def one(j: int, n=n, h=h, g=g, rule=rule, stream=stream) -> float:
            s = stream.child(j)
            sample = DirLinSample(vmf_sample(mu, config.kappa, n, s.child(0)),
                                  s.child(1).generator().standard_normal(n))
            return t3_statistic(sample, h, g, VON_MISES, GAUSSIAN, rule)

        stat = np.array(map_ordered(one, range(config.M), config.threads))
        cells.append(_cell(n, config.rates[0], h, g, stat, asym.standardize(stat)))
    return ConvergenceResult(config, cells, const)


# -- experiment 2: regression test --------------------------------------------


def t6_constants(sigma2: float, rule) -> dict:
    """Closed forms for the constant-regression null on the circle with w = 1."""
    c = smoothing_constants(VON_MISES, 1)
    s2 = np.full(len(rule), sigma2)
    computed = {"nu_d_sq": float(c.nu_d_sq), "bias_ratio": c.bias_ratio,
                "int_sigma2_w": rule.integrate(s2), "R_sigma2_w": rule.integrate(s2**2)}
    closed = {"nu_d_sq": (8 * math.pi) ** -0.5, "bias_ratio": 1 / (2 * math.sqrt(math.pi)),
              "int_sigma2_w": 2 * math.pi * sigma2, "R_sigma2_w": 2 * math.pi * sigma2**2}
    _check_constants(computed, closed)
    # for sigma^2 = 1/4 these are (128/pi)^(1/4) and sqrt(pi)/4
    computed["inv_sd"] = 1.0 / math.sqrt(2 * computed["nu_d_sq"] * computed["R_sigma2_w"])
    computed["center_nh"] = computed["bias_ratio"] * computed["int_sigma2_w"]
    return computed


def run_t6_convergence(config: ExperimentConfig) -> ConvergenceResult:
    """Replicated standardized T6 for ``Y = 1 + eps`` against ``m = c``.

    Both rates are evaluated on the same simulated samples.
    """
    if config.experiment != "t6-convergence":
        config = replace(config, experiment="t6-convergence")
    null = ConstantRegression(1.0, config.null_sd**2)
    const = t6_constants(null.sigma2, sphere_quadrature(1, config.sphere_nodes))
    root = RngStream(config.seed)
    cells = []
    for n in config.n:
        tests = []
        for r in config.rates:
            h = config.bandwidth(n, r)
            rule = sphere_quadrature(1, max(config.sphere_nodes, math.ceil(8 * math.pi / h)))
            tests.append(RegressionTest(h, null, VON_MISES, p=0, composite=True, rule=rule))
        stream = root.child(n)

        def one(j: int, n=n, tests=tests, stream=stream) -> list[float]:
            s = stream.child(j)
            x = sample_uniform_sphere(1, n, s.child(0))
            y = 1.0 + config.noise_sd * s.child(1).generator().standard_normal(n)
            data = DirLinSample(x, y)
            return [t.statistic(data) for t in tests]

        stat = np.array(map_ordered(one, range(config.M), config.threads)).reshape(config.M, len(tests))
        for k, (r, test) in enumerate(zip(config.rates, tests)):
            asym = test.asymptotics(n, null)
            cells.append(_cell(n, r, test.h, None, stat[:, k], asym.standardize(stat[:, k])))
    return ConvergenceResult(config, cells, const)


# -- size and power -------------------------------------------------------------


@dataclass
class SizePowerResult:
    config: ExperimentConfig
    n: int
    p_values: np.ndarray
    statistics: np.ndarray

    def rejection_rate(self, alpha: float) -> tuple[int, float, float]:
        """``(rejections, rate, binomial standard error)`` at level ``alpha``."""
        k = int(np.count_nonzero(self.p_values <= alpha))
        M = self.p_values.size
        rate = k / M
        return k, rate, math.sqrt(rate * (1 - rate) / M)

    def table(self) -> list[tuple]:
        cfg = self.config
        return [(cfg.experiment, cfg.statistic, cfg.process, self.n, a, *self.rejection_rate(a), cfg.M)
                for a in cfg.alphas]


def _size_power_case(cfg: ExperimentConfig, n: int):
    """Test object, data generator and calibration for one configuration."""
    mu = np.array([0.0, 1.0])
    h = cfg.bandwidth(n)
    if cfg.statistic == "t1":
        test = DirectionalDensityTest(h, VonMisesFisher(mu, cfg.kappa), composite=True)

        def gen(s: RngStream):
            x = vmf_sample(mu, cfg.kappa, n, s)
            if cfg.process == "alternative":
                # equal mixture of two antipodal vMF components
                flip = s.child(1).generator().random(n) < 0.5
                x[flip] = -x[flip]
            return DirSample(x)

        return test, gen, lambda t, d, r: parametric_bootstrap(t, d, cfg.B, r, threads=1)
    if cfg.statistic == "t3":
        test = DirLinIndependenceTest(h, h)

        def gen(s: RngStream):
            x = vmf_sample(mu, cfg.kappa, n, s.child(0))
            e = s.child(1).generator().standard_normal(n)
            if cfg.process == "null":
                return DirLinSample(x, e)
            return DirLinSample(x, x[:, 1] + cfg.noise_sd * e)  # sin of the angle

        return test, gen, lambda t, d, r: permutation(t, d, cfg.B, r, threads=1)
    null = ConstantRegression(1.0, cfg.null_sd**2)

    def gen(s: RngStream):
        x = sample_uniform_sphere(1, n, s.child(0))
        y = 1.0 + cfg.noise_sd * s.child(1).generator().standard_normal(n)
        if cfg.process == "alternative":
            y = y + 0.5 * x[:, 0]
        return DirLinSample(x, y)

    return (RegressionTest(h, null, rule=sphere_rule_for(1, h)), gen,
            lambda t, d, r: wild_bootstrap(t, d, cfg.B, r, threads=1))


def run_size_power(config: ExperimentConfig) -> list[SizePowerResult]:
    """Rejection rates of a calibrated test over ``M`` simulated data sets."""
    if config.experiment != "size-power":
        config = replace(config, experiment="size-power")
    root = RngStream(config.seed)
    out = []
    for n in config.n:
        test, gen, calib = _size_power_case(config, n)
        stream = root.child(n)

        def one(j: int, test=test, gen=gen, calib=calib, stream=stream):
            s = stream.child(j)
            res = calib(test, gen(s.child(0)), s.child(1))
            return res.p_resampled, res.base.statistic

        pairs = np.array(map_ordered(one, range(config.M), config.threads), dtype=float)
        out.append(SizePowerResult(config, n, pairs[:, 0], pairs[:, 1]))
    return out


def write_size_power(results: list[SizePowerResult], out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = results[0].config
    rows = [row for r in results for row in r.table()]
    paths = [write_csv(out / "size-power_rates.csv",
                       ("experiment", "statistic", "process", "n", "alpha", "rejections", "rate", "se", "M"),
                       rows)]
    rows = [(cfg.experiment, r.n, j, t, p) for r in results for j, (t, p) in enumerate(zip(r.statistics, r.p_values))]
    paths.append(write_csv(out / "size-power_replicates.csv",
                           ("experiment", "n", "replicate", "statistic", "p_resampled"), rows))
    lines = [f"experiment size-power  statistic={cfg.statistic}  process={cfg.process}  "
             f"M={cfg.M}  B={cfg.B}  seed={cfg.seed}"]
    for r in results:
        for a in cfg.alphas:
            k, rate, se = r.rejection_rate(a)
            lines.append(f"  n={r.n:<7} alpha={a:<5} rejections={k:<5} rate={rate:.4f}  se={se:.4f}")
    path = out / "size-power_summary.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return paths + [path]


def run_experiment(config: ExperimentConfig, out_dir=None):
    """Run the configured experiment; write its files if an output directory is set."""
    out_dir = out_dir or config.out
    if config.experiment == "size-power":
        res = run_size_power(config)
        paths = write_size_power(res, out_dir) if out_dir else []
    else:
        runner = run_t3_convergence if config.experiment == "t3-convergence" else run_t6_convergence
        res = runner(config)
        paths = res.write(out_dir) if out_dir else []
    return res, paths
