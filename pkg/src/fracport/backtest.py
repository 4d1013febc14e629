"""Out-of-sample backtest over consecutive sub-periods.

For each sub-period the problem is built from its estimation window, every
(method, k) cell is solved once, and the holdings are kept fixed over the
evaluation months. Per cell the report holds the total return ``m`` (sum of
monthly portfolio returns), the sample variance ``sigma`` of those returns
and the ratio ``S = m / sigma``.
"""

import csv
import enum
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .baselines import l1_for_sparsity, l1_penalized, markowitz_equality
from .data import compute_beta, drop_incomplete_assets, slice_window
from .errors import ConfigError, FracportError, MissingDataError
from .ifpt import FixedLambda, SolverConfig, TargetSparsity, ifpt_solve
from .infpt import infpt_solve
from .penalty import PenaltyParams, rho
from .problem import build_problem

logger = logging.getLogger(__name__)

# S for a zero-variance cell, signed like m
ZERO_VARIANCE_SHARPE = math.inf
AGGREGATE = "aggregate"


class Method(enum.Enum):
    IFPT = "ifpt"
    INFPT = "infpt"
    MARKOWITZ = "markowitz"
    L1 = "l1"

    @property
    def uses_k(self):
        return self is not Method.MARKOWITZ

    @property
    def label(self):
        return {"ifpt": "IFPT", "infpt": "INFPT", "markowitz": "Markowitz",
                "l1": "L1(prox-grad)"}[self.value]


class ReportFormat(enum.Enum):
    CSV = "csv"
    JSON = "json"
    MARKDOWN = "markdown"


@dataclass
class CellResult:
    method: str
    k: int
    period: str
    start: str
    end: str
    m: float = math.nan
    sigma: float = math.nan
    sharpe: float = math.nan
    sharpe_stddev: float = math.nan
    support_size: int = None
    support_violation: bool = False
    termination: str = ""
    error: str = ""
    holdings: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.error


@dataclass
class BacktestReport:
    assets: list
    periods: list
    methods: list
    ks: list
    cells: list
    compound: bool = False
    conventional_sharpe: bool = False
    dropped_assets: list = field(default_factory=list)

    def cell(self, method, k, period):
        for c in self.cells:
            if c.method == method and c.k == k and c.period == period:
                return c
        raise KeyError((method, k, period))

    def failures(self):
        return [c for c in self.cells if not c.ok]


def evaluate_holdings(returns, x, compound=False):
    """``(m, sigma, S, S_stddev)`` for fixed holdings over a block of monthly returns."""
    port = np.asarray(returns, dtype=float) @ np.asarray(x, dtype=float)
    m = float(np.prod(1.0 + port) - 1.0) if compound else float(port.sum())
    sigma = _variance(port)
    return (m, sigma) + _ratios(m, sigma)


def _variance(port):
    if port.size < 2:
        return math.nan
    sigma = float(np.var(port, ddof=1))
    # a constant series leaves only rounding residue
    if sigma <= 1e-24 * float(np.mean(port**2)):
        return 0.0
    return sigma


def _ratios(m, sigma):
    if math.isnan(sigma):
        return math.nan, math.nan
    if sigma == 0.0:
        s = math.copysign(ZERO_VARIANCE_SHARPE, m) if m else ZERO_VARIANCE_SHARPE
        return s, s
    return m / sigma, m / math.sqrt(sigma)


def _solve_cell(p, method, k, cfg):
    """Holdings and termination label for one cell."""
    if method is Method.MARKOWITZ:
        return markowitz_equality(p).x, "kkt"
    if method is Method.L1:
        if k is None:
            res = l1_penalized(p, cfg.mode.lam, cfg.eta, max_iters=cfg.max_iters,
                               epsilon=cfg.epsilon)
        else:
            res = l1_for_sparsity(p, k, cfg.eta, epsilon=cfg.epsilon)
        return res.x, "converged" if res.converged else "max_iters"
    run_cfg = cfg if k is None else replace(cfg, mode=TargetSparsity(k))
    solver = ifpt_solve if method is Method.IFPT else infpt_solve
    res = solver(p, run_cfg)
    return res.x, res.termination.value


def run_backtest(panel, plan, methods, ks, solver_cfg=None, compound=False,
                 conventional_sharpe=False, drop_missing=False):
    """Solve every (method, k) cell per sub-period and evaluate it out of sample.

    Methods that take a sparsity target are run once per ``k`` in ``ks``; an
    empty ``ks`` runs them with the fixed ``lam`` of ``solver_cfg`` instead.
    Solver failures are recorded in the cell and the run carries on.
    """
    methods = [Method(m) for m in methods]
    ks = sorted({int(k) for k in ks})
    solver_cfg = solver_cfg or SolverConfig()
    if not ks and any(m.uses_k for m in methods) and not isinstance(solver_cfg.mode, FixedLambda):
        raise ConfigError("no sparsity targets given and the solver mode has no fixed lambda")
    dropped = ()
    if drop_missing:
        panel, dropped = drop_incomplete_assets(panel, plan.windows)
    elif panel.has_missing:
        # only the windows we use need to be complete
        for w in plan.windows:
            if np.isnan(slice_window(panel, w)).any():
                raise MissingDataError(f"missing values in window {w.label}")

    grid = [(m, k) for m in methods for k in (ks if m.uses_k and ks else [None])]
    cells = []
    pooled = {key: [] for key in grid}
    for est, ev in zip(plan.estimation, plan.evaluation):
        p = build_problem(slice_window(panel, est), compute_beta(panel, est))
        block = slice_window(panel, ev)
        for method, k in grid:
            cell = CellResult(method.value, k, ev.label, ev.start.stamp, ev.end.stamp)
            try:
                x, term = _solve_cell(p, method, k, solver_cfg)
            except FracportError as exc:
                cell.error = f"{type(exc).__name__}: {exc}"
                logger.warning("%s k=%s %s failed: %s", method.value, k, ev.label, exc)
                pooled[(method, k)] = None
                cells.append(cell)
                continue
            cell.m, cell.sigma, cell.sharpe, cell.sharpe_stddev = evaluate_holdings(
                block, x, compound)
            cell.support_size = int(np.count_nonzero(x))
            cell.support_violation = k is not None and cell.support_size > k
            cell.termination = term
            cell.holdings = [float(v) for v in x]
            if pooled[(method, k)] is not None:
                pooled[(method, k)].append(block @ x)
            cells.append(cell)

    whole = plan.whole
    for method, k in grid:
        cell = CellResult(method.value, k, whole.label, whole.start.stamp, whole.end.stamp)
        cell.termination = AGGREGATE
        series = pooled[(method, k)]
        if series is None:
            cell.error = "a sub-period failed"
        else:
            port = np.concatenate(series)
            m = float(np.prod(1.0 + port) - 1.0) if compound else float(port.sum())
            sigma = _variance(port)
            cell.m, cell.sigma = m, sigma
            cell.sharpe, cell.sharpe_stddev = _ratios(m, sigma)
        cells.append(cell)

    periods = [ev.label for ev in plan.evaluation] + [whole.label]
    return BacktestReport(list(panel.assets), periods, [m.value for m in methods], ks,
                          cells, compound, conventional_sharpe, list(dropped))


# ---------------------------------------------------------------- rendering

_CSV_FIELDS = ["method", "k", "period", "start", "end", "m", "sigma", "sharpe",
               "support_size", "support_violation", "termination", "error"]


def _num(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return "" if v is None else str(v)


def _to_json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return _num(v)
    return v


def _from_json_value(v):
    if v in ("nan", "inf", "-inf"):
        return float(v)
    return v


def _cell_dict(c):
    return {key: _to_json_value(val) for key, val in asdict(c).items()}


def emit_report(report, fmt):
    """Serialize ``report`` as UTF-8 bytes in ``fmt`` (csv, json or markdown)."""
    fmt = ReportFormat(fmt)
    if fmt is ReportFormat.CSV:
        return _emit_csv(report).encode("utf-8")
    if fmt is ReportFormat.JSON:
        doc = {
            "assets": report.assets,
            "periods": report.periods,
            "methods": report.methods,
            "ks": report.ks,
            "compound": report.compound,
            "conventional_sharpe": report.conventional_sharpe,
            "dropped_assets": report.dropped_assets,
            "cells": [_cell_dict(c) for c in report.cells],
        }
        return (json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n").encode("utf-8")
    return _emit_markdown(report).encode("utf-8")


def parse_report_json(data):
    """Inverse of the JSON rendering of :func:`emit_report`."""
    doc = json.loads(data)
    cells = [CellResult(**{k: _from_json_value(v) for k, v in c.items()}) for c in doc["cells"]]
    return BacktestReport(doc["assets"], doc["periods"], doc["methods"], doc["ks"], cells,
                          doc["compound"], doc["conventional_sharpe"], doc["dropped_assets"])


def _emit_csv(report):
    fields = list(_CSV_FIELDS)
    if report.conventional_sharpe:
        fields.insert(fields.index("sharpe") + 1, "sharpe_stddev")
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(fields)
    for c in report.cells:
        row = asdict(c)
        writer.writerow([_num(row[f]) for f in fields])
    return out.getvalue()


def _fmt_sharpe(c):
    if not c.ok:
        return "fail"
    if math.isinf(c.sharpe):
        return "inf" if c.sharpe > 0 else "-inf"
    return f"{c.sharpe:.2f}"


def _emit_markdown(report, ks_per_table=4):
    """Sharpe tables with periods as rows and one column group per ``k``."""
    lines = []
    k_methods = [m for m in report.methods if Method(m).uses_k]
    other = [m for m in report.methods if not Method(m).uses_k]
    ks = report.ks if report.ks else [None]
    if k_methods:
        for lo in range(0, len(ks), ks_per_table):
            chunk = ks[lo:lo + ks_per_table]
            cols = [(k, m) for k in chunk for m in k_methods]
            lines.append("| Period | " + " | ".join(
                f"{'k=' + str(k) if k is not None else 'fixed lambda'} {Method(m).label}"
                for k, m in cols) + " |")
            lines.append("|---|" + "---:|" * len(cols))
            for period in report.periods:
                lines.append(f"| {period} | " + " | ".join(
                    _fmt_sharpe(report.cell(m, k, period)) for k, m in cols) + " |")
            lines.append("")
    if other:
        lines.append("| Period | " + " | ".join(Method(m).label for m in other) + " |")
        lines.append("|---|" + "---:|" * len(other))
        for period in report.periods:
            lines.append(f"| {period} | " + " | ".join(
                _fmt_sharpe(report.cell(m, None, period)) for m in other) + " |")
        lines.append("")
    if not lines:
        lines = ["| Period |", "|---|", ""]
    failures = report.failures()
    if failures:
        lines.append("Failed cells:")
        lines.append("")
        for c in failures:
            lines.append(f"- {c.method} k={c.k} {c.period}: {c.error}")
        lines.append("")
    return "\n".join(lines)


def emit_penalty_plot_data(a_values, t_range, samples):
    """Rows ``(a, t, rho_a(t))`` on ``samples`` evenly spaced points of ``t_range`` per ``a``."""
    if samples < 2:
        raise ConfigError("samples must be at least 2")
    lo, hi = t_range
    t = np.linspace(lo, hi, samples)
    rows = []
    for a in a_values:
        values = rho(PenaltyParams(a), t)
        rows.extend((float(a), float(ti), float(v)) for ti, v in zip(t, values))
    return rows


def plot_data_tsv(rows):
    out = ["a\tt\trho"]
    out.extend(f"{a!r}\t{t!r}\t{v!r}" for a, t, v in rows)
    return "\n".join(out) + "\n"
