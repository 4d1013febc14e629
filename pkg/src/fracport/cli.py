"""Command-line interface: ``fracport {solve,backtest,selftest,plot-data}``.

Runs are driven by a flat ``key = value`` config file; command-line flags
override it. The effective configuration is written next to the outputs so
a run can be repeated from it.
"""

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import backtest as bt
from .baselines import l1_for_sparsity, l1_penalized, markowitz_equality
from .data import (
    Window,
    YearMonth,
    compute_beta,
    default_plan,
    drop_incomplete_assets,
    parse_returns_csv,
    rolling_plan,
    slice_window,
)
from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    FracportError,
    NumericDomainError,
    SolverError,
)
from .ifpt import (
    FixedLambda,
    SolverConfig,
    TargetSparsity,
    check_bounds,
    check_first_order,
    ifpt_solve,
    lambda_bar,
    objective_params,
)
from .infpt import infpt_solve
from .problem import build_problem, constraint_violation, tracking_error

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3
PAPER_KS = (6, 8, 10, 12, 14, 16, 18, 20)
SYNTHETIC_PREFIX = "synthetic:"


@dataclass
class RunConfig:
    data: str = ""
    plan: str = "paper-default"
    window: str = ""
    methods: tuple = ("ifpt",)
    k: tuple = PAPER_KS
    lam: float = None
    a: float = 1.0
    eta: float = 1.0
    epsilon: float = 0.01
    max_iters: int = 50_000
    tol_x: float = None
    tol_obj: float = 1e-12
    out: str = "fracport-out"
    seed: int = 0
    fixed_estimation: bool = False
    drop_missing: bool = False
    compound: bool = False
    conventional_sharpe: bool = False
    plot_a: tuple = (0.5, 1.0, 2.0, 5.0, 10.0)
    plot_t_min: float = -5.0
    plot_t_max: float = 5.0
    plot_samples: int = 201

    def validate(self):
        for m in self.methods:
            try:
                bt.Method(m)
            except ValueError:
                raise ConfigError(f"unknown method {m!r}") from None
        if not self.methods:
            raise ConfigError("at least one method is required")
        if self.lam is not None and self.k:
            raise ConfigError("set either k or lambda, not both")
        if self.lam is None and not self.k:
            raise ConfigError("set k (target sparsity) or lambda (fixed weight)")
        if any(k < 1 for k in self.k):
            raise ConfigError("k values must be positive")
        if self.plan != "paper-default" and not self.plan.startswith("rolling:"):
            raise ConfigError(f"plan must be 'paper-default' or 'rolling:...', got {self.plan!r}")
        if self.plot_samples < 2:
            raise ConfigError("plot_samples must be at least 2")
        # builds and checks the numeric parameters
        self.solver_config()
        return self

    def solver_config(self):
        mode = FixedLambda(self.lam) if self.lam is not None else TargetSparsity(self.k[0])
        return SolverConfig(mode=mode, a=self.a, eta=self.eta, epsilon=self.epsilon,
                            max_iters=self.max_iters, tol_x=self.tol_x, tol_obj=self.tol_obj)

    def window_plan(self):
        if self.plan == "paper-default":
            return default_plan(self.fixed_estimation)
        parts = self.plan.split(":")
        if len(parts) != 5:
            raise ConfigError("rolling plan is 'rolling:YYYYMM:periods:months:estimation_months'")
        try:
            start = YearMonth.parse(parts[1])
            periods, months, est = (int(v) for v in parts[2:])
        except (ValueError, DataError) as exc:
            raise ConfigError(f"bad plan {self.plan!r}: {exc}") from None
        return rolling_plan(start, periods, months, est, self.fixed_estimation)


_TYPES = {f.name: f for f in fields(RunConfig)}
_LIST_ITEM = {"methods": str, "k": int, "plot_a": float}
_KEY_ALIASES = {"lambda": "lam", "method": "methods"}


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _coerce(key, text):
    text = text.strip()
    if key in _LIST_ITEM:
        if not text:
            return ()
        try:
            return tuple(_LIST_ITEM[key](v.strip()) for v in text.split(",") if v.strip())
        except ValueError:
            raise ConfigError(f"bad list for {key}: {text!r}") from None
    default = _TYPES[key].default
    if key in ("lam", "tol_x"):
        return None if text.lower() in ("", "none") else _float(key, text)
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {text!r}") from None
    if isinstance(default, float):
        return _float(key, text)
    return text


def _float(key, text):
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {text!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{key} must be finite")
    return v


def parse_config_text(text, base=None):
    """Apply ``key = value`` lines to ``base`` (defaults when omitted)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _KEY_ALIASES.get(key, key)
        if key not in _TYPES:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    if values.get("lam") is not None and "k" not in values:
        values["k"] = ()
    return replace(base or RunConfig(), **values)


def render_config(cfg):
    """Inverse of :func:`parse_config_text`."""
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        key = "lambda" if f.name == "lam" else f.name
        if isinstance(v, tuple):
            text = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        elif v is None:
            text = "none"
        elif isinstance(v, bool):
            text = "true" if v else "false"
        elif isinstance(v, float):
            text = repr(v)
        else:
            text = str(v)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def _build_parser():
    parser = argparse.ArgumentParser(prog="fracport", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "backtest", "selftest", "plot-data"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--data", help="returns CSV, or synthetic:N for a seeded panel")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--method", action="append", choices=[m.value for m in bt.Method],
                        help="repeat for several methods")
        sp.add_argument("--k", help="target sparsity, or a comma-separated list")
        sp.add_argument("--lambda", dest="lam", type=float, help="fixed regularization weight")
        sp.add_argument("--a", type=float)
        sp.add_argument("--eta", type=float)
        sp.add_argument("--epsilon", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--fixed-estimation", action="store_true", default=None,
                        help="estimate every sub-period on the first window")
    return parser


def resolve_config(args):
    cfg = RunConfig()
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        cfg = parse_config_text(path.read_text(encoding="utf-8"), cfg)
    overrides = {}
    for key in ("data", "out", "a", "eta", "epsilon", "seed", "fixed_estimation"):
        v = getattr(args, key)
        if v is not None:
            overrides[key] = v
    if args.method:
        overrides["methods"] = tuple(args.method)
    if args.lam is not None:
        overrides["lam"] = args.lam
        overrides["k"] = ()
    if args.k is not None:
        overrides["k"] = _coerce("k", args.k)
        overrides.setdefault("lam", None)
        if args.lam is not None:
            raise ConfigError("set either --k or --lambda, not both")
    return replace(cfg, **overrides).validate()


def load_panel(cfg):
    if not cfg.data:
        raise DataError("no data file given (--data or 'data =' in the config)")
    if cfg.data.startswith(SYNTHETIC_PREFIX):
        from .synthetic import factor_panel

        try:
            n = int(cfg.data[len(SYNTHETIC_PREFIX):])
        except ValueError:
            raise ConfigError(f"synthetic data is 'synthetic:N', got {cfg.data!r}") from None
        return factor_panel(n, "197101", "200612", seed=cfg.seed)
    return parse_returns_csv(cfg.data, allow_missing=cfg.drop_missing)


def _write(out, name, data):
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_bytes(data if isinstance(data, bytes) else data.encode("utf-8"))
    return path


def _solve_window(cfg, panel):
    if cfg.window:
        try:
            start, end = cfg.window.split("-")
            return Window(YearMonth.parse(start), YearMonth.parse(end))
        except ValueError:
            raise ConfigError("window is 'YYYYMM-YYYYMM'") from None
    return Window(panel.dates[0], panel.dates[-1])


def _floats(v):
    return [float(x) for x in np.asarray(v).ravel()]


def cmd_solve(cfg):
    panel = load_panel(cfg)
    w = _solve_window(cfg, panel)
    if cfg.drop_missing:
        panel, _ = drop_incomplete_assets(panel, [w])
    p = build_problem(slice_window(panel, w), compute_beta(panel, w))
    solver_cfg = cfg.solver_config()
    out = Path(cfg.out)
    _write(out, "config.txt", render_config(cfg))
    for name in cfg.methods:
        method = bt.Method(name)
        doc = {"method": name, "window": [w.start.stamp, w.end.stamp], "beta": p.beta,
               "assets": list(panel.assets), "a": cfg.a, "eta": cfg.eta,
               "lambda_bar": lambda_bar(p, cfg.a, cfg.eta)}
        if method in (bt.Method.IFPT, bt.Method.INFPT):
            res = (ifpt_solve if method is bt.Method.IFPT else infpt_solve)(p, solver_cfg)
            x = res.x
            params = objective_params(solver_cfg, res.lam)
            first = check_first_order(p, params, x, tol=1e-6)
            bounds = check_bounds(p, params, x)
            doc.update({
                "termination": res.termination.value,
                "iterations": res.iterations,
                "lambda": res.lam,
                "phi": res.phi,
                "last_step": res.last_step,
                "objective_trace": res.objective_trace,
                "lambda_trace": res.lambda_trace,
                "diagnostics": {
                    "first_order_max_residual": first.max_residual,
                    "lower_bound_holds": bounds.lower_holds,
                    "upper_bound_applicable": bounds.upper_applicable,
                    "upper_bound_holds": bounds.upper_holds,
                },
            })
        elif method is bt.Method.MARKOWITZ:
            x = markowitz_equality(p).x
            doc["termination"] = "kkt"
        else:
            if cfg.lam is not None:
                res = l1_penalized(p, cfg.lam, cfg.eta, max_iters=cfg.max_iters,
                                   epsilon=cfg.epsilon)
            else:
                res = l1_for_sparsity(p, cfg.k[0], cfg.eta, epsilon=cfg.epsilon)
            x = res.x
            doc.update({"termination": "converged" if res.converged else "max_iters",
                        "lambda": res.lam, "objective_trace": res.objective_trace})
        support = np.flatnonzero(x)
        doc.update({
            "weights": _floats(x),
            "support": [panel.assets[i] for i in support],
            "support_size": int(support.size),
            "tracking_error": tracking_error(p, x),
            "constraint_violation": constraint_violation(p, x),
        })
        _write(out, f"solution_{name}.json",
               json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n")
        print(f"{name}: support {support.size}, termination {doc['termination']}, "
              f"written to {out / f'solution_{name}.json'}")
    return EXIT_OK


def cmd_backtest(cfg):
    panel = load_panel(cfg)
    plan = cfg.window_plan()
    report = bt.run_backtest(panel, plan, cfg.methods, cfg.k, cfg.solver_config(),
                             compound=cfg.compound,
                             conventional_sharpe=cfg.conventional_sharpe,
                             drop_missing=cfg.drop_missing)
    out = Path(cfg.out)
    _write(out, "config.txt", render_config(cfg))
    _write(out, "report.csv", bt.emit_report(report, "csv"))
    _write(out, "report.json", bt.emit_report(report, "json"))
    _write(out, "report.md", bt.emit_report(report, "markdown"))
    print(bt.emit_report(report, "markdown").decode("utf-8"))
    failures = report.failures()
    if failures:
        print(f"{len(failures)} cell(s) failed; see report.md", file=sys.stderr)
    return EXIT_OK


def cmd_plot_data(cfg):
    rows = bt.emit_penalty_plot_data(cfg.plot_a, (cfg.plot_t_min, cfg.plot_t_max),
                                     cfg.plot_samples)
    out = Path(cfg.out)
    _write(out, "config.txt", render_config(cfg))
    path = _write(out, "penalty_plot.tsv", bt.plot_data_tsv(rows))
    print(f"{len(rows)} rows written to {path}")
    return EXIT_OK


def cmd_selftest(cfg):
    from .selftest import run_selftest

    rows = run_selftest(seed=cfg.seed)
    width = max(len(name) for name, _, _ in rows)
    for name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    return EXIT_OK if all(ok for _, ok, _ in rows) else EXIT_SOLVER


COMMANDS = {"solve": cmd_solve, "backtest": cmd_backtest, "selftest": cmd_selftest,
            "plot-data": cmd_plot_data}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        start = time.perf_counter()
        code = COMMANDS[args.command](cfg)
        print(f"{args.command} finished in {time.perf_counter() - start:.1f} s", file=sys.stderr)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DimensionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SolverError, NumericDomainError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FracportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
