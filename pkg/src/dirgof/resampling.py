"""Resampling calibration of the test statistics.

Parametric bootstrap for the density tests (T1, T2, T4), wild bootstrap for
the regression test (T6), and permutation for the independence tests (T3,
T5). Replicate ``b`` always draws from ``rng.child(b)``, so the replicate
list is reproducible and independent of how many worker threads run.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .estimators import DirDirSample, DirLinSample
from .gof import (
    DirDirDensityTest,
    DirDirIndependenceTest,
    DirectionalDensityTest,
    DirLinDensityTest,
    DirLinIndependenceTest,
    RegressionTest,
    PermutationKernel,
    TestOutcome,
    _independence_from_grids,
    _t6_from_weights,
)
from .sphere import RngStream

__all__ = [
    "CalibrationPlan",
    "CalibratedOutcome",
    "ResamplingError",
    "resampled_pvalue",
    "mammen_multipliers",
    "rademacher_multipliers",
    "parametric_bootstrap",
    "wild_bootstrap",
    "permutation",
    "calibrate",
    "default_threads",
    "map_ordered",
]

METHODS = ("parametric-bootstrap", "wild-bootstrap", "permutation")
MAX_FAILURE_RATE = 0.05
GRAM_MAX_N = 2000

_COMPATIBLE = {
    "parametric-bootstrap": (DirectionalDensityTest, DirLinDensityTest, DirDirDensityTest),
    "wild-bootstrap": (RegressionTest,),
    "permutation": (DirLinIndependenceTest, DirDirIndependenceTest),
}


class ResamplingError(RuntimeError):
    """Too many resampling replicates failed."""


def default_threads() -> int:
    """``DIRGOF_THREADS`` if set, else the CPUs available to this process."""
    env = os.environ.get("DIRGOF_THREADS")
    if env:
        return max(1, int(env))
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return os.cpu_count() or 1


def map_ordered(fn, items, threads: int | None = None) -> list:
    """``[fn(i) for i in items]``, optionally on a thread pool; order preserved."""
    threads = threads or default_threads()
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class CalibrationPlan:
    method: str
    B: int
    rng: RngStream
    refit: bool = True
    multipliers: str = "mammen"
    threads: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown calibration method {self.method!r}")
        if self.B < 19:
            raise ValueError("B must be at least 19")
        if self.multipliers not in ("mammen", "rademacher"):
            raise ValueError(f"unknown multipliers {self.multipliers!r}")

    def check(self, test) -> None:
        if not isinstance(test, _COMPATIBLE[self.method]):
            raise ValueError(f"{self.method} does not calibrate {type(test).__name__}")


@dataclass(frozen=True)
class CalibratedOutcome:
    base: TestOutcome
    resampled: np.ndarray
    p_resampled: float
    method: str
    B: int
    failures: int = 0
    metadata: dict = field(default_factory=dict)

    def reject(self, alpha: float) -> bool:
        return self.p_resampled <= alpha


def resampled_pvalue(statistic: float, replicates) -> float:
    """``(1 + #{T*_b >= T}) / (B + 1)`` over the finite replicates."""
    r = np.asarray(replicates, dtype=float)
    r = r[np.isfinite(r)]
    return (1.0 + np.count_nonzero(r >= statistic)) / (r.size + 1.0)


_SQ5 = np.sqrt(5.0)
_MAMMEN_LOW, _MAMMEN_HIGH = (1.0 - _SQ5) / 2.0, (1.0 + _SQ5) / 2.0
_MAMMEN_P_LOW = (_SQ5 + 1.0) / (2.0 * _SQ5)


def mammen_multipliers(n: int, gen: np.random.Generator) -> np.ndarray:
    """Two-point multipliers with mean 0, variance 1 and third moment 1."""
    return np.where(gen.random(n) < _MAMMEN_P_LOW, _MAMMEN_LOW, _MAMMEN_HIGH)


def rademacher_multipliers(n: int, gen: np.random.Generator) -> np.ndarray:
    return np.where(gen.random(n) < 0.5, -1.0, 1.0)


def _collect(values: list, B: int, method: str):
    reps = np.array(values, dtype=float)
    failures = int(np.count_nonzero(~np.isfinite(reps)))
    if failures > MAX_FAILURE_RATE * B:
        raise ResamplingError(f"{failures} of {B} {method} replicates failed")
    return reps, failures


_FIT_ERRORS = (ValueError, ArithmeticError, np.linalg.LinAlgError)


def parametric_bootstrap(test, data, B: int, rng: RngStream, refit: bool | None = None,
                         threads: int | None = None) -> CalibratedOutcome:
    """Calibrate T1, T2 or T4 by resampling from the fitted null.

    Each replicate draws ``n`` points from the null model fitted to ``data``,
    refits it (composite nulls) and recomputes the statistic with the same
    bandwidths. A failed fit is retried once on a fresh draw.
    """
    refit = test.composite if refit is None else refit
    base = test.run(data)
    model = test.fit_null(data)
    stat = base.statistic
    n = data.n if hasattr(data, "n") else len(data)

    def one(b: int) -> float:
        stream = rng.child(b)
        for attempt in range(2):
            sample = test.simulate(model, n, stream if attempt == 0 else stream.child(1))
            try:
                m = test.fit_null(sample) if refit else model
                return test.statistic(sample, m)
            except _FIT_ERRORS:
                continue
        return np.nan

    reps, failures = _collect(map_ordered(one, range(B), threads), B, "parametric-bootstrap")
    return CalibratedOutcome(base, reps, resampled_pvalue(stat, reps), "parametric-bootstrap", B,
                             failures, {"refit": refit, "seed": rng.seed})


def wild_bootstrap(test: RegressionTest, data: DirLinSample, B: int, rng: RngStream,
                   multipliers: str = "mammen", threads: int | None = None) -> CalibratedOutcome:
    """Calibrate T6 by perturbing the parametric residuals.

    ``Y*_i = m(X_i) + e_i V_i`` with i.i.d. multipliers ``V_i``; directions
    stay fixed, the null is refitted on ``Y*`` and the statistic recomputed.
    """
    draw = mammen_multipliers if multipliers == "mammen" else rademacher_multipliers
    base = test.run(data)
    model = test.fit_null(data)
    fitted = model.mean(data.directions)
    resid = data.responses - fitted
    W, kde = test.design(data.directions)
    refit = test.composite

    def one(b: int) -> float:
        v = draw(data.n, rng.child(b).generator())
        star = data.with_responses(fitted + resid * v)
        try:
            m = test.fit_null(star) if refit else model
        except _FIT_ERRORS:
            return np.nan
        return _t6_from_weights(W, kde, star.responses - m.mean(star.directions), test.rule, test._w)

    reps, failures = _collect(map_ordered(one, range(B), threads), B, "wild-bootstrap")
    return CalibratedOutcome(base, reps, resampled_pvalue(base.statistic, reps), "wild-bootstrap", B,
                             failures, {"multipliers": multipliers, "seed": rng.seed})


def permutation(test, data, B: int, rng: RngStream, threads: int | None = None) -> CalibratedOutcome:
    """Calibrate T3 or T5 by permuting the second component against the first.

    Permutations are uniform over all ``n!`` orderings, identity included.
    Permuting the data only permutes the columns of the second kernel matrix,
    so the matrices are computed once.
    """
    base = test.run(data)
    A, Bm, rule = test.grids(data)
    n = A.shape[1]
    if n <= GRAM_MAX_N:
        kern = PermutationKernel(A, Bm, rule)
        # observed value through the same formula, so the identity permutation ties exactly
        observed = kern()
        stat_of = kern
    else:
        observed = base.statistic
        stat_of = lambda perm: _independence_from_grids(A, Bm[:, perm], rule)  # noqa: E731

    def one(b: int) -> float:
        return stat_of(rng.child(b).generator().permutation(n))

    reps = np.array(map_ordered(one, range(B), threads), dtype=float)
    return CalibratedOutcome(base, reps, resampled_pvalue(observed, reps), "permutation", B, 0,
                             {"seed": rng.seed})


def calibrate(test, data, plan: CalibrationPlan) -> CalibratedOutcome:
    plan.check(test)
    if plan.method == "parametric-bootstrap":
        return parametric_bootstrap(test, data, plan.B, plan.rng, plan.refit, plan.threads)
    if plan.method == "wild-bootstrap":
        return wild_bootstrap(test, data, plan.B, plan.rng, plan.multipliers, plan.threads)
    return permutation(test, data, plan.B, plan.rng, plan.threads)
