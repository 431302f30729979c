"""Run orchestration and on-disk artifacts (records CSV, config echo, summary)."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, echo_config
from .diagnostics import (
    CSV_COLUMNS,
    XAccumulator,
    compute_record,
    fit_decay_exponent,
)
from .initial_data import generate_initial_data
from .linear_oracle import evolve_linear_exact
from .state_model import PerturbationState
from .time_integrator import IntegrationError, dt_from_speeds, integrate, scan_state


@dataclass
class RunReport:
    cfg: ExperimentConfig
    records: list = field(default_factory=list)
    final_state: PerturbationState | None = None
    initial_state: PerturbationState | None = None
    fits: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    error: str | None = None
    t_last_valid: float | None = None
    wall_time: float = 0.0
    out_dir: Path | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def series(self, key: str):
        """(t, values) for a CSV column or a panel label."""
        t = np.array([r.t for r in self.records])
        if key in CSV_COLUMNS:
            v = [r.row()[key] for r in self.records]
        elif key == "l2_phi_u":
            v = [r.l2_phi + r.l2_u for r in self.records]
        else:
            v = [r.besov_panel[key] for r in self.records]
        return t, np.array(v, dtype=float)


def format_value(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            row = r.row()
            w.writerow([format_value(row[c]) for c in CSV_COLUMNS])


def read_csv(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    head, body = rows[0], rows[1:]
    return {h: np.array([float(r[i]) for r in body]) for i, h in enumerate(head)}


def _mode_evolution(cfg: ExperimentConfig, state0: PerturbationState):
    """Records for the closed-form modes (linear oracle or pure heat flow).

    Output times follow the spacing the nonlinear run would use at t = 0:
    ``stride`` initial CFL steps, plus t_end.
    """
    params = cfg.physical_params()
    g = state0.grid
    umax, cmax, _ = scan_state(g, state0.stacked(), params)
    spacing = cfg.output_stride * dt_from_speeds(g, umax, cmax, cfg.step_control())
    t_end = cfg.time_t_end
    times = list(np.arange(0.0, t_end, spacing)) if t_end > 0 else []
    if not times or times[-1] < t_end:
        times.append(t_end)
    heat = np.exp(-params.mu * g.kmag ** 2)
    for t in times:
        if cfg.run_mode == "linear_oracle":
            yield evolve_linear_exact(state0, float(t), params)
        else:
            Y = state0.stacked() * heat ** t
            yield PerturbationState.from_stacked(g, Y, float(t))


def run_experiment(cfg: ExperimentConfig, write: bool = True, keep_records: bool = True,
                   progress=None) -> RunReport:
    """Execute ``cfg`` and optionally write artifacts under ``cfg.output_path``."""
    t_start = time.perf_counter()
    report = RunReport(cfg)
    params = cfg.physical_params()
    diag = cfg.diagnostics_config()
    data = generate_initial_data(cfg)
    state0 = data.state()
    report.initial_state = state0

    out_dir = None
    if write:
        out_dir = Path(cfg.output_path)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as err:
            raise OSError(f"cannot create output directory {out_dir}: {err}") from err
        report.out_dir = out_dir
        (out_dir / "config.echo").write_text(echo_config(cfg), encoding="utf-8")

    last_state = state0
    try:
        if cfg.run_mode == "nonlinear":
            stream = integrate(state0, params, cfg.step_control(), cfg.output_stride, diag)
            for st, rec in stream:
                last_state = st
                report.records.append(rec)
                if progress:
                    progress(rec)
        else:
            acc = XAccumulator()
            for st in _mode_evolution(cfg, state0):
                rec = compute_record(st, params, diag)
                acc.update(rec)
                last_state = st
                report.records.append(rec)
                if progress:
                    progress(rec)
    except IntegrationError as err:
        report.error = str(err)
        report.t_last_valid = err.t_last_valid
    report.final_state = last_state
    report.wall_time = time.perf_counter() - t_start

    totals0 = report.records[0].totals
    totals1 = report.records[-1].totals
    scale = max(1.0, cfg.grid_box_length ** 2)
    report.checks["mass_drift"] = abs(totals1["a"] - totals0["a"]) / scale
    report.checks["b_drift"] = abs(totals1["b"] - totals0["b"]) / scale
    report.checks["X_max_over_X0"] = (max(r.X_t for r in report.records) / report.records[0].X_t
                                      if report.records[0].X_t > 0 else float("nan"))
    t0, t1 = cfg.output_fit_window
    for key, pred in (("l2_phi_u", -cfg.lp_sigma / 2.0),
                      ("lambda_gamma1_phi_u", -(cfg.lp_gamma1 + cfg.lp_sigma) / 2.0)):
        t, v = report.series(key)
        try:
            report.fits[key] = fit_decay_exponent(t, v, (t0, t1), key, pred)
        except ValueError as err:
            report.fits[key] = str(err)

    if write:
        write_csv(out_dir / "records.csv", report.records)
        (out_dir / "summary.json").write_text(json.dumps(summary_dict(report), indent=2) + "\n",
                                              encoding="utf-8")
    if not keep_records:
        report.records = report.records[:1] + report.records[-1:]
    return report


def summary_dict(report: RunReport) -> dict:
    def clean(x):
        if isinstance(x, float) and not math.isfinite(x):
            return str(x)
        return x

    fits = {}
    for k, f in report.fits.items():
        if isinstance(f, str):
            fits[k] = {"error": f}
        else:
            fits[k] = {"window": list(f.window), "exponent": f.exponent, "r_squared": f.r_squared,
                       "predicted": f.predicted, "n_samples": f.n_samples}
    return {
        "mode": report.cfg.run_mode,
        "status": "ok" if report.ok else "validity_gate_tripped",
        "error": report.error,
        "t_last_valid": report.t_last_valid,
        "t_final": report.records[-1].t if report.records else None,
        "n_records": len(report.records),
        "X0": report.records[0].X_t if report.records else None,
        "X_final": report.records[-1].X_t if report.records else None,
        "checks": {k: clean(v) for k, v in report.checks.items()},
        "fits": fits,
        "wall_time_s": report.wall_time,
    }
