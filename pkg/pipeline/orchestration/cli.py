"""Command-line front end: generate instances, solve, trace frontiers, simulate.

Exit codes: 0 success, 2 input or usage error, 3 infeasible solve.
"""
import json
import logging
import sys
from dataclasses import asdict
from typing import Any, Dict, List, Optional

import click
import numpy as np
import pandas as pd

from lib import __version__
from lib.config import get_settings
from lib.errors import (
    DomainError,
    GermanParseError,
    InstanceValidationError,
    StructuralError,
    SweepSizeError,
    TargetRangeError,
)
from lib.evaluator import exact_evaluate, monte_carlo_evaluate
from lib.model import ConstraintMode, DiversityConstraint, ProblemInstance, SolveResult
from lib.monitoring import RunManifest, RunMonitor
from lib.optimizer import SweepConfig, alpha_grid_from_step, no_screening_baseline, pareto_frontier, sweep_solve
from lib.quality import validate_instance
from lib.schema import (
    dumps,
    instance_to_dict,
    load_instance,
    load_json,
    policy_from_dict,
    report_to_dict,
    result_to_dict,
)
from lib.storage import ResultStore
from pipeline.ingestion.german_credit import check_canonical, load_german
from pipeline.ingestion.synthetic import REGIMES, config_for_regime, gen_synthetic, stylized_instance
from pipeline.transformation.instances import build_german_instance
from pipeline.transformation.scoring import fit_logistic

logger = logging.getLogger(__name__)

EXIT_INPUT = 2
EXIT_INFEASIBLE = 3

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
FRONTIER_COLUMNS = ["lambda", "utility_screen", "cost_screen", "utility_noscreen", "cost_noscreen",
                    "status_screen", "status_noscreen"]

# Errors caused by bad inputs rather than bugs
INPUT_ERRORS = (InstanceValidationError, StructuralError, DomainError, GermanParseError, SweepSizeError,
                TargetRangeError, OSError, json.JSONDecodeError)


def _fail(ctx: click.Context, error: Exception) -> None:
    click.echo(f"error: {error}", err=True)
    for violation in getattr(error, "violations", []):
        click.echo(f"  {violation}", err=True)
    ctx.exit(EXIT_INPUT)


def _load_valid_instance(path: str) -> ProblemInstance:
    instance = load_instance(path)
    violations = validate_instance(instance)
    if violations:
        raise InstanceValidationError(f"{path} has {len(violations)} invariant violations", violations)
    return instance


def _emit(store: ResultStore, out: Optional[str], text: str, manifest: RunManifest) -> None:
    """Write to ``out`` with a manifest, or to stdout when no path is given."""
    if out:
        store.store(out, text, manifest)
    else:
        click.echo(text, nl=False)


def _sweep_config(alpha_step: float, max_candidates: Optional[int]) -> SweepConfig:
    return SweepConfig(
        alpha_grid=alpha_grid_from_step(alpha_step),
        max_candidates=max_candidates,
        cap=get_settings().sweep_cap,
    )


@click.group()
@click.version_option(__version__)
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False), default=None,
              help="Logging level (default: SCREENING_LOG_LEVEL or WARNING).")
@click.pass_context
def main(ctx: click.Context, log_level: Optional[str]) -> None:
    """Optimal screening and allocation under a budget."""
    level = (log_level or get_settings().log_level).upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    ctx.obj = ResultStore()


@main.command()
@click.option("--regime", type=click.Choice(sorted(REGIMES)), required=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--n", "n", type=click.IntRange(min=0), default=500, show_default=True)
@click.option("--bins", type=click.IntRange(min=2), default=101, show_default=True)
@click.option("--budget", type=click.FloatRange(min=0), default=50000.0, show_default=True)
@click.pass_context
def gen(ctx: click.Context, regime: str, seed: int, out: str, n: int, bins: int, budget: float) -> None:
    """Generate a synthetic two-group instance for one value/cost regime."""
    config = config_for_regime(regime, seed=seed, n=n, bins=bins, budget=budget)
    manifest = RunManifest("gen", {"regime": regime, **asdict(config)}, seed=seed)
    try:
        with RunMonitor(manifest):
            text = dumps(instance_to_dict(gen_synthetic(config)))
        _emit(ctx.obj, out, text, manifest)
    except INPUT_ERRORS as e:
        _fail(ctx, e)


@main.command()
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def stylized(ctx: click.Context, out: str) -> None:
    """Write the 13-applicant worked example."""
    manifest = RunManifest("stylized", {})
    with RunMonitor(manifest):
        text = dumps(instance_to_dict(stylized_instance()))
    _emit(ctx.obj, out, text, manifest)


@main.command("gen-german")
@click.option("--data", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Path to german.data (default: GERMAN_CREDIT_PATH).")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--screen-cost", type=click.FloatRange(min=0), default=100.0, show_default=True)
@click.option("--alloc-cost", type=click.FloatRange(min=0, min_open=True), default=1000.0, show_default=True)
@click.option("--budget", type=click.FloatRange(min=0), default=150000.0, show_default=True)
@click.option("--strict/--no-strict", default=True, show_default=True,
              help="Reject files that are not the canonical 1000-row dataset.")
@click.pass_context
def gen_german(ctx: click.Context, data: Optional[str], out: str, screen_cost: float, alloc_cost: float,
               budget: float, strict: bool) -> None:
    """Fit the credit model on German Credit data and write the lending instance."""
    data = data or get_settings().german_credit_path
    if not data:
        raise click.UsageError("--data is required when GERMAN_CREDIT_PATH is not set")
    manifest = RunManifest("gen-german", {"screen_cost": screen_cost, "alloc_cost": alloc_cost,
                                          "budget": budget, "strict": strict})
    try:
        with RunMonitor(manifest) as monitor:
            manifest.add_input("data", data)
            records = load_german(data)
            problems = check_canonical(records)
            for problem in problems:
                logger.warning(f"German Credit file is not canonical: {problem}")
            if problems and strict:
                raise StructuralError("; ".join(problems))
            model, probabilities = fit_logistic(records)
            monitor.record_metric("irls_iterations", model.iterations)
            instance = build_german_instance(records, probabilities, screen_cost=screen_cost,
                                             alloc_cost=alloc_cost, budget=budget)
            text = dumps(instance_to_dict(instance))
        _emit(ctx.obj, out, text, manifest)
    except INPUT_ERRORS as e:
        _fail(ctx, e)


@main.command()
@click.option("--instance", "instance_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--lambda", "lambda_target", type=float, default=None,
              help="Targeted-group utility; replaces the instance's own constraints.")
@click.option("--mode", type=click.Choice(["screen", "noscreen"]), default="screen", show_default=True)
@click.option("--constraint-mode", type=click.Choice([m.value for m in ConstraintMode]),
              default=ConstraintMode.AT_LEAST.value, show_default=True)
@click.option("--alpha-step", type=click.FloatRange(min=0, max=1, min_open=True), default=0.05, show_default=True)
@click.option("--max-candidates", type=click.IntRange(min=2), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def solve(ctx: click.Context, instance_path: str, lambda_target: Optional[float], mode: str, constraint_mode: str,
          alpha_step: float, max_candidates: Optional[int], out: Optional[str]) -> None:
    """Solve for the best screening and allocation policies."""
    manifest = RunManifest("solve", {
        "lambda": lambda_target, "mode": mode, "constraint_mode": constraint_mode,
        "alpha_step": alpha_step, "max_candidates": max_candidates,
    })
    try:
        with RunMonitor(manifest) as monitor:
            manifest.add_input("instance", instance_path)
            instance = _load_valid_instance(instance_path)
            if mode == "noscreen":
                result = no_screening_baseline(instance, 0.0 if lambda_target is None else lambda_target)
            else:
                if lambda_target is not None:
                    instance = instance.with_constraints([DiversityConstraint(0, lambda_target, constraint_mode)])
                result = sweep_solve(instance, _sweep_config(alpha_step, max_candidates))
            monitor.record_metric("lp_solves", result.lp_solves)
            if not result.is_optimal:
                monitor.mark_infeasible()
        _emit(ctx.obj, out, dumps(result_to_dict(result, {"mode": mode})), manifest)
    except INPUT_ERRORS as e:
        _fail(ctx, e)
    if not result.is_optimal:
        click.echo("infeasible", err=True)
        ctx.exit(EXIT_INFEASIBLE)


def frontier_frame(screen: List[SolveResult], noscreen: List[SolveResult], grid: List[float]) -> pd.DataFrame:
    """One row per λ; utility and cost cells are empty where a side is infeasible."""
    rows: List[Dict[str, Any]] = []
    for lam, s, b in zip(grid, screen, noscreen):
        rows.append({
            "lambda": lam,
            "utility_screen": s.expected_utility if s.is_optimal else np.nan,
            "cost_screen": s.expected_cost if s.is_optimal else np.nan,
            "utility_noscreen": b.expected_utility if b.is_optimal else np.nan,
            "cost_noscreen": b.expected_cost if b.is_optimal else np.nan,
            "status_screen": s.status.value,
            "status_noscreen": b.status.value,
        })
    return pd.DataFrame(rows, columns=FRONTIER_COLUMNS)


def frontier_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format="%.6f", na_rep="", lineterminator="\r\n")


@main.command()
@click.option("--instance", "instance_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--lambda-min", type=float, default=0.0, show_default=True)
@click.option("--lambda-max", type=float, required=True)
@click.option("--lambda-steps", type=click.IntRange(min=1), default=11, show_default=True)
@click.option("--alpha-step", type=click.FloatRange(min=0, max=1, min_open=True), default=0.05, show_default=True)
@click.option("--max-candidates", type=click.IntRange(min=2), default=None)
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Default: SCREENING_WORKERS.")
@click.option("--progress/--no-progress", default=False)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def frontier(ctx: click.Context, instance_path: str, lambda_min: float, lambda_max: float, lambda_steps: int,
             alpha_step: float, max_candidates: Optional[int], workers: Optional[int], progress: bool,
             out: Optional[str]) -> None:
    """Trace screening and no-screening utility over a grid of targeted-group utilities."""
    if lambda_max < lambda_min:
        raise click.UsageError("--lambda-max must not be below --lambda-min")
    workers = workers or get_settings().workers
    grid = [float(v) for v in np.linspace(lambda_min, lambda_max, lambda_steps)]
    manifest = RunManifest("frontier", {
        "lambda_min": lambda_min, "lambda_max": lambda_max, "lambda_steps": lambda_steps,
        "alpha_step": alpha_step, "max_candidates": max_candidates, "workers": workers,
    })
    try:
        with RunMonitor(manifest) as monitor:
            manifest.add_input("instance", instance_path)
            instance = _load_valid_instance(instance_path)
            config = SweepConfig(
                alpha_grid=alpha_grid_from_step(alpha_step),
                lambda_grid=tuple(grid),
                max_candidates=max_candidates,
                cap=get_settings().sweep_cap,
            )
            screen = [r for _, r in pareto_frontier(instance, config, True, workers, progress)]
            noscreen = [r for _, r in pareto_frontier(instance, config, False, workers, progress)]
            monitor.record_metric("lp_solves", sum(r.lp_solves for r in screen))
            monitor.record_metric("feasible_screen", sum(r.is_optimal for r in screen))
            monitor.record_metric("feasible_noscreen", sum(r.is_optimal for r in noscreen))
            text = frontier_csv(frontier_frame(screen, noscreen, grid))
        _emit(ctx.obj, out, text, manifest)
    except INPUT_ERRORS as e:
        _fail(ctx, e)


@main.command()
@click.option("--instance", "instance_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--policy", "policy_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Policy JSON or a solve result.")
@click.option("--draws", type=click.IntRange(min=1), default=100000, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Default: SCREENING_WORKERS.")
@click.option("--progress/--no-progress", default=False)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def simulate(ctx: click.Context, instance_path: str, policy_path: str, draws: int, seed: int,
             workers: Optional[int], progress: bool, out: Optional[str]) -> None:
    """Monte Carlo estimate of a policy's utility and cost, with the exact values."""
    settings = get_settings()
    workers = workers or settings.workers
    manifest = RunManifest("simulate", {"draws": draws, "workers": workers,
                                        "chunk_size": settings.mc_chunk_size}, seed=seed)
    try:
        with RunMonitor(manifest):
            manifest.add_input("instance", instance_path)
            manifest.add_input("policy", policy_path)
            instance = _load_valid_instance(instance_path)
            screening, policy = policy_from_dict(load_json(policy_path))
            report = monte_carlo_evaluate(instance, screening, policy, draws, seed, workers=workers,
                                          chunk_size=settings.mc_chunk_size, progress=progress)
            exact = exact_evaluate(instance, screening, policy)
            document = report_to_dict(report)
            document["seed"] = seed
            document["exact"] = report_to_dict(exact)
        _emit(ctx.obj, out, dumps(document), manifest)
    except INPUT_ERRORS as e:
        _fail(ctx, e)


if __name__ == "__main__":
    main()
