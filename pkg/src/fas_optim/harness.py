"""Experiment front-end: sweeps, baselines, validation, result export.

A sweep varies one scenario axis (user count, array size, Rician factor
in dB, or region size in wavelengths), redraws user geometries per
repeat, runs the requested algorithms on every point, and writes
`results.csv` (one row per run), `summary.csv` (mean and SE per point),
and one SVG plot per sweep into the output directory.

Seed discipline: user geometries depend on (master seed, repeat) only,
so every sweep point at a given repeat sees the same users and paired
comparisons across points are meaningful.  Optimizer streams are split
off as (master seed, axis index, repeat, algorithm index).  Timing
(`wall_ms`) is the one column exempt from byte-reproducibility;
`summary.csv` is byte-identical for identical invocations.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import opt_ga, opt_grad, rate, svgplot
from .scenario import (
    Scenario,
    ScenarioError,
    db_to_linear,
    load_scenario,
    redraw_users,
    upa_layout,
)

AXES = ("k_users", "m_antennas", "rician_db", "region_over_lambda", "none")
ALGORITHMS = ("ga", "grad", "fpa")
RESULT_FIELDS = (
    "axis",
    "axis_value",
    "repeat",
    "algorithm",
    "scenario_seed",
    "min_rate",
    "iterations",
    "wall_ms",
    "mc_min_rate",
)


@dataclass(frozen=True)
class SweepSpec:
    """One swept axis with its values, repeat count, and algorithms."""

    axis: str
    values: tuple
    repeats: int = 1
    algorithms: tuple = ALGORITHMS


def validate_sweep(spec: SweepSpec) -> SweepSpec:
    if spec.axis not in AXES:
        raise ScenarioError(f"unknown sweep axis {spec.axis!r}, want one of {AXES}")
    if len(spec.values) == 0:
        raise ScenarioError("sweep values must be non-empty")
    if list(spec.values) != sorted(spec.values):
        raise ScenarioError(f"sweep values must be sorted, got {spec.values}")
    if spec.repeats < 1:
        raise ScenarioError(f"repeats must be >= 1, got {spec.repeats}")
    if len(spec.algorithms) == 0:
        raise ScenarioError("at least one algorithm required")
    for algo in spec.algorithms:
        if algo not in ALGORITHMS:
            raise ScenarioError(f"unknown algorithm {algo!r}, want one of {ALGORITHMS}")
    return spec


@dataclass(frozen=True)
class ResultRow:
    axis: str
    axis_value: float
    repeat: int
    algorithm: str
    scenario_seed: int
    min_rate: float
    iterations: int
    wall_ms: float
    mc_min_rate: float | None = None


def seed_for(master: int, *key: int) -> int:
    """Documented seed split: child seed from the master and an index key."""
    return int(np.random.SeedSequence(master, spawn_key=key).generate_state(1)[0])


def scenario_point(scn: Scenario, axis: str, value, user_seed: int) -> Scenario:
    """Scenario at one sweep point with users redrawn from `user_seed`."""
    if axis == "none":
        return scn if scn.user_model is None else redraw_users(scn, user_seed)
    if axis == "k_users":
        return redraw_users(scn, user_seed, count=int(value))
    if axis == "m_antennas":
        return redraw_users(
            dataclasses.replace(scn, m_antennas=int(value)), user_seed
        )
    if axis == "rician_db":
        if scn.user_model is None:
            raise ScenarioError("rician_db sweep needs a generated-users scenario")
        model = dataclasses.replace(scn.user_model, rician=db_to_linear(value))
        return redraw_users(
            dataclasses.replace(scn, user_model=model), user_seed
        )
    if axis == "region_over_lambda":
        return redraw_users(
            dataclasses.replace(scn, region_size=value * scn.wavelength), user_seed
        )
    raise ScenarioError(f"unknown sweep axis {axis!r}")


def fpa_layout(scn: Scenario) -> np.ndarray:
    """Half-wavelength grid benchmark, no optimization."""
    try:
        return upa_layout(scn.m_antennas, scn.wavelength / 2.0, scn.region_size)
    except ScenarioError as exc:
        raise ScenarioError(f"UPA does not fit: {exc}") from None


def fpa_baseline(scn: Scenario) -> ResultRow:
    """Closed-form min rate of the half-wavelength grid as a ResultRow."""
    start = time.perf_counter()
    layout = fpa_layout(scn)
    value = rate.min_rate(layout, scn)
    wall_ms = (time.perf_counter() - start) * 1e3
    return ResultRow(
        axis="none",
        axis_value=0.0,
        repeat=0,
        algorithm="fpa",
        scenario_seed=scn.hyper.seed,
        min_rate=value,
        iterations=0,
        wall_ms=wall_ms,
    )


def _run_task(task) -> ResultRow:
    (scn, axis, value, repeat, algorithm, scn_seed, opt_seed, mc_trials, mc_seed) = task
    start = time.perf_counter()
    if algorithm == "fpa":
        layout = fpa_layout(scn)
        iterations = 0
    elif algorithm == "ga":
        layout, history = opt_ga.run_ga(scn, seed=opt_seed)
        iterations = len(history) - 1
    elif algorithm == "grad":
        layout, histories = opt_grad.run_multistart(scn, seed=opt_seed)
        iterations = sum(len(h) - 1 for h in histories)
    else:
        raise ScenarioError(f"unknown algorithm {algorithm!r}")
    value_rate = rate.min_rate(layout, scn)
    wall_ms = (time.perf_counter() - start) * 1e3
    mc_min = None
    if mc_trials:
        est = rate.mc_uatf_sinr(layout, scn, mc_trials, seed=mc_seed)
        mc_min = float(rate.mc_rates(est, scn).min())
    return ResultRow(
        axis=axis,
        axis_value=float(value),
        repeat=repeat,
        algorithm=algorithm,
        scenario_seed=scn_seed,
        min_rate=value_rate,
        iterations=iterations,
        wall_ms=wall_ms,
        mc_min_rate=mc_min,
    )


def worker_count() -> int:
    raw = os.environ.get("FAS_OPTIM_THREADS", "")
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ScenarioError(f"FAS_OPTIM_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise ScenarioError(f"FAS_OPTIM_THREADS must be >= 1, got {n}")
    return n


def run_experiment(
    scenario,
    sweep: SweepSpec,
    out_dir,
    seed: int | None = None,
    mc_trials: int = 0,
) -> list[ResultRow]:
    """Run the sweep, write results.csv, summary.csv, and the plot.

    `scenario` is a `Scenario` or a path to one.  Returns the rows in
    (axis value, repeat, algorithm) order.  Identical inputs give
    identical rows apart from `wall_ms`.
    """
    scn = scenario if isinstance(scenario, Scenario) else load_scenario(scenario)
    validate_sweep(sweep)
    master = scn.hyper.seed if seed is None else seed
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    tasks = []
    for ai, value in enumerate(sweep.values):
        for repeat in range(sweep.repeats):
            scn_seed = seed_for(master, repeat)
            point = scenario_point(scn, sweep.axis, value, scn_seed)
            for algo in sweep.algorithms:
                algo_idx = ALGORITHMS.index(algo)
                opt_seed = seed_for(master, ai, repeat, algo_idx)
                mc_seed = seed_for(master, ai, repeat, algo_idx, 1)
                tasks.append(
                    (point, sweep.axis, value, repeat, algo, scn_seed,
                     opt_seed, mc_trials, mc_seed)
                )

    workers = worker_count()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_task, tasks))
    else:
        rows = [_run_task(t) for t in tasks]

    order = {a: i for i, a in enumerate(ALGORITHMS)}
    rows.sort(key=lambda r: (r.axis_value, r.repeat, order[r.algorithm]))
    write_results(out / "results.csv", rows)
    summary = summarize(rows, sweep)
    write_summary(out / "summary.csv", summary)
    render_sweep_plot(out / f"sweep_{sweep.axis}.svg", sweep, summary)
    return rows


def write_results(path, rows: list[ResultRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_FIELDS)
        for r in rows:
            writer.writerow(
                [
                    r.axis,
                    r.axis_value,
                    r.repeat,
                    r.algorithm,
                    r.scenario_seed,
                    repr(r.min_rate),
                    r.iterations,
                    f"{r.wall_ms:.3f}",
                    "" if r.mc_min_rate is None else repr(r.mc_min_rate),
                ]
            )


def summarize(rows: list[ResultRow], sweep: SweepSpec) -> list[dict]:
    """Mean and standard error of min_rate per (axis value, algorithm)."""
    summary = []
    for value in sweep.values:
        for algo in sweep.algorithms:
            got = [
                r.min_rate
                for r in rows
                if r.algorithm == algo and r.axis_value == float(value)
            ]
            if not got:
                continue
            mean = statistics.fmean(got)
            se = statistics.stdev(got) / len(got) ** 0.5 if len(got) > 1 else 0.0
            summary.append(
                {
                    "axis": sweep.axis,
                    "axis_value": float(value),
                    "algorithm": algo,
                    "n": len(got),
                    "mean_min_rate": mean,
                    "se_min_rate": se,
                }
            )
    return summary


def write_summary(path, summary: list[dict]) -> None:
    fields = ("axis", "axis_value", "algorithm", "n", "mean_min_rate", "se_min_rate")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in summary:
            writer.writerow(
                [
                    row["axis"],
                    row["axis_value"],
                    row["algorithm"],
                    row["n"],
                    repr(row["mean_min_rate"]),
                    repr(row["se_min_rate"]),
                ]
            )


def render_sweep_plot(path, sweep: SweepSpec, summary: list[dict]) -> None:
    series = []
    for algo in sweep.algorithms:
        pts = [s for s in summary if s["algorithm"] == algo]
        if not pts:
            continue
        series.append(
            svgplot.Series(
                name=algo,
                x=tuple(s["axis_value"] for s in pts),
                y=tuple(s["mean_min_rate"] for s in pts),
                err=tuple(s["se_min_rate"] for s in pts),
            )
        )
    svgplot.line_plot(
        path,
        series,
        title=f"min user rate vs {sweep.axis}",
        x_label=sweep.axis,
        y_label="min user rate (bit/s/Hz)",
    )


@dataclass(frozen=True)
class TermCheck:
    user: int
    term: str
    closed: float
    mc: float
    se: float
    rel_err: float
    sigmas: float


@dataclass(frozen=True)
class ValidationReport:
    rows: list[TermCheck]
    sinr_closed: np.ndarray
    sinr_mc: np.ndarray
    sinr_rel_err: np.ndarray
    trials: int
    ok: bool


def validate_closed_form(
    scenario, trials: int, seed: int | None = None, layout: np.ndarray | None = None
) -> ValidationReport:
    """Compare every closed-form SINR term against the simulation oracle.

    Runs on the half-wavelength grid unless `layout` is given.  A term
    passes when it lies within 4 standard errors of its Monte Carlo
    estimate; `ok` requires every term of every user to pass.
    """
    scn = scenario if isinstance(scenario, Scenario) else load_scenario(scenario)
    if trials < 10_000:
        raise ScenarioError(f"validation needs at least 10000 trials, got {trials}")
    if layout is None:
        layout = fpa_layout(scn)
    report = rate.rate_report(layout, scn)
    est = rate.mc_uatf_sinr(layout, scn, trials, seed=seed)
    closed = {
        "desired": report.e_signal,
        "leak": report.e_leak,
        "interf": report.interference.sum(axis=-1),
        "noise": report.e_noise,
    }
    mc = {
        "desired": est.desired,
        "leak": est.leak,
        "interf": est.interf,
        "noise": est.noise,
    }
    rows = []
    for term in ("desired", "leak", "interf", "noise"):
        for k in range(scn.k_users):
            cf, sim, se = closed[term][k], mc[term][k], est.se[term][k]
            diff = abs(cf - sim)
            if cf != 0.0:
                rel = diff / abs(cf)
            else:
                rel = 0.0 if sim == 0.0 else float("inf")
            if se > 0.0:
                sig = diff / se
            else:
                sig = 0.0 if diff == 0.0 else float("inf")
            rows.append(TermCheck(k, term, float(cf), float(sim), float(se), rel, sig))
    sinr_mc = rate.mc_sinr(est, scn)
    sinr_closed = report.sinr
    rel_err = np.abs(sinr_closed - sinr_mc) / sinr_closed
    ok = all(r.sigmas <= 4.0 for r in rows)
    return ValidationReport(
        rows=rows,
        sinr_closed=sinr_closed,
        sinr_mc=sinr_mc,
        sinr_rel_err=rel_err,
        trials=trials,
        ok=ok,
    )


def format_validation(report: ValidationReport) -> str:
    buf = io.StringIO()
    buf.write(
        f"{'user':>4} {'term':>8} {'closed':>13} {'simulated':>13} "
        f"{'rel_err':>9} {'sigmas':>7}\n"
    )
    for r in report.rows:
        buf.write(
            f"{r.user:>4} {r.term:>8} {r.closed:>13.6e} {r.mc:>13.6e} "
            f"{r.rel_err:>9.2e} {r.sigmas:>7.2f}\n"
        )
    for k, (cf, sim, rel) in enumerate(
        zip(report.sinr_closed, report.sinr_mc, report.sinr_rel_err)
    ):
        buf.write(
            f"{k:>4} {'sinr':>8} {cf:>13.6e} {sim:>13.6e} {rel:>9.2e} {'-':>7}\n"
        )
    verdict = "PASS" if report.ok else "FAIL"
    buf.write(f"{report.trials} trials: {verdict} (every term within 4 SE)\n")
    return buf.getvalue()
