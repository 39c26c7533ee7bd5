"""Command-line interface: ``dirgof test``, ``dirgof sim`` and ``dirgof constants``.

Exit codes: 0 success, 1 runtime or numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .estimators import DirDirSample, DirLinSample, DirSample, check_bandwidths
from .gof import (
    DirDirDensityTest,
    DirDirIndependenceTest,
    DirectionalDensityTest,
    DirLinDensityTest,
    DirLinIndependenceTest,
    RegressionTest,
)
from .kernels import (
    R_K,
    directional_kernel,
    lambda_q,
    linear_kernel,
    nu_d_sq,
    nu_l_sq,
)
from .models import ConstantRegression, Gaussian, LinearRegression, ProductDensity, UniformSphere, VonMisesFisher
from .resampling import ResamplingError, default_threads, parametric_bootstrap, permutation, wild_bootstrap
from .simlab import FULL_LADDER, ConfigError, ExperimentConfig, parse_rate, run_experiment
from .sphere import RngStream, angles_to_circle, as_directions, surface_area

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
SCHEMA = 1

TESTS = ("density", "dirlin-density", "indep", "dirdir-density", "dirdir-indep", "regression")
_BANDWIDTHS = {"density": ("h",), "dirlin-density": ("h", "g"), "indep": ("h", "g"),
               "dirdir-density": ("h", "h2"), "dirdir-indep": ("h", "h2"), "regression": ("h",)}


class UsageError(Exception):
    pass


class DataError(ValueError):
    pass


# -- input ---------------------------------------------------------------------


def _row_floats(row: dict, cols: list[str], rowno: int) -> list[float]:
    out = []
    for c in cols:
        raw = row.get(c)
        try:
            v = float(raw)
        except (TypeError, ValueError):
            raise DataError(f"row {rowno}: column {c!r} has non-numeric value {raw!r}") from None
        if not math.isfinite(v):
            raise DataError(f"row {rowno}: column {c!r} is not finite")
        out.append(v)
    return out


def _block(header: list[str], prefix: str, q: int | None) -> list[str]:
    found = sorted((int(m.group(1)) for h in header if (m := re.fullmatch(prefix + r"(\d+)", h))))
    if q is None:
        if not found:
            return []
        q = len(found) - 1
    cols = [f"{prefix}{i}" for i in range(q + 1)]
    missing = [c for c in cols if c not in header]
    if missing:
        raise DataError(f"missing column(s) {', '.join(missing)}")
    return cols


def read_data(path, *, q=None, q2=None, angles=False, need=("x",)) -> dict:
    """Read a CSV with header into arrays.

    Directional blocks are columns ``x0..xq`` and ``u0..uq2`` (or ``theta``
    and ``phi`` in radians with ``angles``); the scalar is column ``y``.
    Row numbers in error messages count data rows from 1.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        if not header:
            raise DataError("empty file or missing header row")
        reader.fieldnames = header
        blocks = {}
        if "x" in need:
            blocks["x"] = ["theta"] if angles else _block(header, "x", q)
        if "u" in need:
            blocks["u"] = ["phi"] if angles else _block(header, "u", q2)
        if "y" in need:
            blocks["y"] = ["y"]
        for key, cols in blocks.items():
            if not cols or any(c not in header for c in cols):
                raise DataError(f"missing column(s) for block {key!r}: expected {cols or key + '0..'}")
        values = {k: [] for k in blocks}
        for rowno, row in enumerate(reader, start=1):
            if None in row or any(v is None for v in row.values()):
                raise DataError(f"row {rowno}: wrong number of fields")
            for k, cols in blocks.items():
                values[k].append(_row_floats(row, cols, rowno))
    if not values[next(iter(values))]:
        raise DataError("no data rows")
    out = {}
    for k, rows in values.items():
        arr = np.array(rows, dtype=float)
        if k == "y":
            out[k] = arr[:, 0]
            continue
        if angles:
            out[k] = angles_to_circle(arr[:, 0])
            continue
        try:
            out[k] = as_directions(arr)
        except ValueError as exc:
            # as_directions names the offending 0-based row; report it 1-based
            m = re.search(r"row (\d+)", str(exc))
            msg = f"row {int(m.group(1)) + 1}: not a unit vector" if m else str(exc)
            raise DataError(f"block {k!r}: {msg}") from None
    return out


# -- report --------------------------------------------------------------------


def _clean(v):
    """JSON-safe copy: NaN/inf become null, numpy scalars become Python."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def dumps_report(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def read_report(path) -> dict:
    """Load a report; every field is kept, including ones this version does not know."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("schema") != SCHEMA:
        raise DataError(f"unsupported report schema {data.get('schema')!r}")
    return data


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbelow(2**32)
        print(f"seed: {args.seed}")
    return args.seed


def _threads(args) -> int:
    return args.threads if args.threads else default_threads()


# -- test ------------------------------------------------------------------------


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"test {args.test} requires --{name.replace('_', '-')}")


def _build_test(args):
    """Test object, data and calibration method for ``dirgof test``."""
    try:
        L = directional_kernel(args.kernel)
        K = linear_kernel(args.linear_kernel)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    kind = args.test
    allowed = {"density": ("vmf", "uniform"), "regression": ("constant", "linear"),
               "dirlin-density": ("vmf",), "dirdir-density": ("vmf",)}.get(kind, ())
    if args.null is not None and args.null not in allowed:
        raise UsageError(f"--null {args.null} is not available for test {kind}")
    if args.null is None and allowed:
        args.null = allowed[0]
    read = dict(q=args.q, q2=args.q2, angles=args.angles)
    if kind == "density":
        _require(args, "h")
        d = read_data(args.data, need=("x",), **read)
        data = DirSample(d["x"])
        null = VonMisesFisher(np.eye(data.q + 1)[0], 1.0) if args.null == "vmf" else UniformSphere(data.q)
        return DirectionalDensityTest(args.h, null, L, composite=args.null == "vmf"), data, "parametric-bootstrap"
    if kind in ("dirlin-density", "indep"):
        _require(args, "h", "g")
        d = read_data(args.data, need=("x", "y"), **read)
        data = DirLinSample(d["x"], d["y"])
        if kind == "indep":
            return DirLinIndependenceTest(args.h, args.g, L, K, q=data.q), data, "permutation"
        null = ProductDensity(VonMisesFisher(np.eye(data.q + 1)[0], 1.0), Gaussian())
        return DirLinDensityTest(args.h, args.g, null, L, K), data, "parametric-bootstrap"
    if kind in ("dirdir-density", "dirdir-indep"):
        _require(args, "h", "h2")
        d = read_data(args.data, need=("x", "u"), **read)
        data = DirDirSample(d["x"], d["u"])
        if kind == "dirdir-indep":
            return DirDirIndependenceTest(args.h, args.h2, L, data.q1, data.q2), data, "permutation"
        null = ProductDensity(VonMisesFisher(np.eye(data.q1 + 1)[0], 1.0),
                              VonMisesFisher(np.eye(data.q2 + 1)[0], 1.0))
        return DirDirDensityTest(args.h, args.h2, null, L), data, "parametric-bootstrap"
    _require(args, "h")
    d = read_data(args.data, need=("x", "y"), **read)
    data = DirLinSample(d["x"], d["y"])
    null = ConstantRegression(0.0) if args.null == "constant" else LinearRegression(0.0, np.zeros(data.q + 1))
    return RegressionTest(args.h, null, L, p=args.p, q=data.q), data, "wild-bootstrap"


def cmd_test(args) -> int:
    if args.alpha is not None and not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    for name in ("h", "g", "h2"):
        v = getattr(args, name)
        if v is not None and not v > 0:
            raise UsageError(f"--{name} must be positive")
    if args.B and args.B < 19:
        raise UsageError("--B must be 0 (no resampling) or at least 19")
    test, data, method = _build_test(args)
    seed = _seed(args)
    q = data.q if hasattr(data, "q") else data.q1
    check_bandwidths(data.n, args.h, q, args.g if args.test in ("dirlin-density", "indep") else None)
    rng = RngStream(seed)
    threads = _threads(args)
    calibrated = None
    if args.B:
        if method == "parametric-bootstrap":
            calibrated = parametric_bootstrap(test, data, args.B, rng, threads=threads)
        elif method == "wild-bootstrap":
            calibrated = wild_bootstrap(test, data, args.B, rng, args.multipliers, threads=threads)
        else:
            calibrated = permutation(test, data, args.B, rng, threads=threads)
        base = calibrated.base
    else:
        base = test.run(data)
    p_res = calibrated.p_resampled if calibrated else None
    p_used = p_res if p_res is not None else base.p_asymptotic
    reject = bool(p_used <= args.alpha) if p_used is not None and math.isfinite(p_used) else None
    meta = dict(base.metadata)
    report = {
        "schema": SCHEMA,
        "version": __version__,
        "test": args.test,
        "statistic_name": meta.pop("test", None),
        "n": data.n,
        "statistic": base.statistic,
        "center": base.center,
        "scale": base.scale,
        "rate": base.rate,
        "rate_label": base.rate_label,
        "standardized": base.standardized,
        "p_asymptotic": base.p_asymptotic,
        "p_resampled": p_res,
        "calibration": method if calibrated else None,
        "B": args.B,
        "failures": calibrated.failures if calibrated else 0,
        "seed": seed,
        "alpha": args.alpha,
        "reject": reject,
        "theta": meta.pop("theta", None),
        "bandwidths": {k: getattr(args, k) for k in _BANDWIDTHS[args.test]},
        "details": meta,
        "config": {"data": str(args.data), "kernel": args.kernel, "linear_kernel": args.linear_kernel,
                   "null": args.null, "p": args.p, "angles": args.angles, "multipliers": args.multipliers},
    }
    text = dumps_report(report)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    label = "p_resampled" if p_res is not None else "p_asymptotic"
    verdict = "reject H0" if reject else "do not reject H0" if reject is not None else "undetermined"
    print(f"{report['statistic_name']} ({args.test}): statistic={base.statistic:.6g} "
          f"{label}={p_used:.4g} alpha={args.alpha} -> {verdict}")
    return EXIT_OK


# -- sim -----------------------------------------------------------------------------


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(float(t)) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _rate_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(parse_rate(t) for t in text.split(",") if t.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected comma-separated rates like 1/3,1/5, got {text!r}") from None


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


_SIM_FLAGS = ("n", "M", "coef", "rates", "kappa", "noise_sd", "null_sd", "statistic", "process", "B",
              "alphas", "sphere_nodes", "line_nodes")


def sim_config(args) -> ExperimentConfig:
    """Effective configuration: defaults, then the config file, then flags."""
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}") from None
        if not isinstance(base, dict):
            raise UsageError("config file must hold a JSON object")
        base.pop("experiment", None)
        base.pop("threads", None)
    if args.full and args.n is None:
        base["n"] = list(FULL_LADDER)
    for name in _SIM_FLAGS:
        v = getattr(args, name)
        if v is not None:
            base[name] = v
    base["seed"] = args.seed
    base["out"] = args.out
    return ExperimentConfig.from_dict({"experiment": args.experiment, **base})


def cmd_sim(args) -> int:
    _seed(args)
    try:
        cfg = sim_config(args)
    except ConfigError as exc:
        raise UsageError(f"invalid configuration field {exc}") from None
    echo = cfg.asdict()
    echo.pop("threads")
    echo.pop("out")
    if args.dry_run:
        print(json.dumps(echo, sort_keys=True))
        return EXIT_OK
    cfg = cfg.updated(threads=_threads(args))
    _, paths = run_experiment(cfg, args.out)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{cfg.experiment}_config.json").write_text(
        json.dumps({"schema": SCHEMA, **echo}, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n")
    for p in paths:
        print(p)
    return EXIT_OK


# -- constants ----------------------------------------------------------------------


def _directional_closed_forms(label: str, q: int) -> dict:
    if label == "vonmises":
        return {"lambda_q(L)": (2 * math.pi) ** (q / 2), "lambda_q(L^2)": math.pi ** (q / 2),
                "ratio": (4 * math.pi) ** (-q / 2), "nu_d^2": (8 * math.pi) ** (-q / 2)}
    if label == "epanechnikov":
        a = q / 2
        pre = 2 ** (a - 1) * surface_area(q - 1)
        l1, l2 = pre / (a * (a + 1)), pre * 2 / (a * (a + 1) * (a + 2))
        return {"lambda_q(L)": l1, "lambda_q(L^2)": l2, "ratio": l2 / l1**2}
    return {}


_LINEAR_CLOSED = {
    "gaussian": {"R(K)": 1 / (2 * math.sqrt(math.pi)), "nu_l^2": (8 * math.pi) ** -0.5},
    "uniform": {"R(K)": 1.0, "nu_l^2": 2 / 3},
}


def constants_table(kernel: str, q: int = 1) -> list[tuple[str, float, float | None, bool]]:
    """Rows ``(name, value, closed form or None, approximate)``."""
    if kernel in _LINEAR_CLOSED:
        K = linear_kernel(kernel)
        closed = _LINEAR_CLOSED[kernel]
        return [("R(K)", R_K(K), closed["R(K)"], False), ("nu_l^2", nu_l_sq(K), closed["nu_l^2"], False)]
    L = directional_kernel(kernel)
    if q < 1:
        raise ValueError("q must be at least 1")
    closed = _directional_closed_forms(kernel, q)
    l1, l2 = lambda_q(L, q), lambda_q(L, q, squared=True)
    nu, approx = nu_d_sq(L, q, with_flag=True)
    rows = [("lambda_q(L)", l1, False), ("lambda_q(L^2)", l2, False), ("ratio", l2 / l1**2, False),
            ("nu_d^2", float(nu), approx)]
    return [(name, v, closed.get(name), a) for name, v, a in rows]


def cmd_constants(args) -> int:
    try:
        rows = constants_table(args.kernel, args.q)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    head = f"kernel {args.kernel}" + ("" if args.kernel in _LINEAR_CLOSED else f"  q={args.q}")
    print(head)
    for name, v, ref, approx in rows:
        line = f"{name:<16}{v:.6f}  ({v!r})"
        if ref is not None:
            line += f"  closed={ref:.6f}  delta={abs(v - ref):.2e}"
        if approx:
            line += "  [approximate: Monte Carlo]"
        print(line)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dirgof", description="Smoothing-based tests for directional data.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run a test on a CSV data set")
    t.add_argument("test", choices=TESTS)
    t.add_argument("--data", required=True, help="CSV file with header")
    t.add_argument("--q", type=int, help="dimension of the first sphere (default: from header)")
    t.add_argument("--q2", type=int, help="dimension of the second sphere")
    t.add_argument("--angles", action="store_true", help="circular data as angles: columns theta (and phi)")
    t.add_argument("--h", type=float, help="directional bandwidth")
    t.add_argument("--g", type=float, help="linear bandwidth")
    t.add_argument("--h2", type=float, help="bandwidth on the second sphere")
    t.add_argument("--kernel", default="vonmises", help="directional kernel")
    t.add_argument("--linear-kernel", default="gaussian", help="linear kernel")
    t.add_argument("--null", choices=("vmf", "uniform", "constant", "linear"),
                   help="null family: vmf (default) or uniform for densities, "
                        "constant (default) or linear for regression")
    t.add_argument("--p", type=int, default=0, choices=(0, 1), help="local polynomial degree")
    t.add_argument("--multipliers", default="mammen", choices=("mammen", "rademacher"))
    t.add_argument("--B", type=int, default=199, help="resamples (0: asymptotic calibration only)")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--seed", type=int)
    t.add_argument("--threads", type=int)
    t.add_argument("--out", help="JSON report path")
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("sim", help="run a Monte Carlo experiment")
    s.add_argument("experiment", choices=("t3-convergence", "t6-convergence", "size-power"))
    s.add_argument("--n", type=_int_list, help="sample sizes, comma separated")
    s.add_argument("--M", type=int, help="replicates per sample size")
    s.add_argument("--rates", type=_rate_list, help="bandwidth exponents, e.g. 1/3,1/5")
    s.add_argument("--coef", type=float, help="bandwidth constant in h = coef n^(-rate)")
    s.add_argument("--kappa", type=float)
    s.add_argument("--noise-sd", type=float)
    s.add_argument("--null-sd", type=float)
    s.add_argument("--statistic", choices=("t1", "t3", "t6"))
    s.add_argument("--process", choices=("null", "alternative"))
    s.add_argument("--B", type=int)
    s.add_argument("--alphas", type=_float_list)
    s.add_argument("--sphere-nodes", type=int)
    s.add_argument("--line-nodes", type=int)
    s.add_argument("--full", action="store_true", help="use the ladder up to n = 5e5")
    s.add_argument("--config", help="JSON file with configuration fields (flags override)")
    s.add_argument("--seed", type=int)
    s.add_argument("--threads", type=int)
    s.add_argument("--out", default="runs", help="output directory")
    s.add_argument("--dry-run", action="store_true", help="print the effective configuration and stop")
    s.set_defaults(func=cmd_sim)

    c = sub.add_parser("constants", help="print kernel constants")
    c.add_argument("--kernel", required=True)
    c.add_argument("--q", type=int, default=1)
    c.set_defaults(func=cmd_constants)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("dirgof: error: --threads must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"dirgof: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ResamplingError, ValueError, ArithmeticError, np.linalg.LinAlgError, OSError) as exc:
        print(f"dirgof: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
