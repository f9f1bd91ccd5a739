"""
Benchmark suites: several experiments side by side, plus gamma sweeps.

Output directory layout (all deterministic, no timestamps):

    results.csv / results.json     one row per experiment
    results.parquet                with parquet=True
    traces/<name>.json             per-epoch loss breakdown
    pr_curves/<name>.csv           pooled precision-recall curve
"""

from pathlib import Path
from typing import List, Optional, Sequence, Union

import pandas as pd

from src.config.config_objects import ExperimentSpec, SuiteConfig
from src.core.exceptions import ConfigError
from src.core.logger import get_logger
from src.core.utils import ensure_directory_exists, write_json, write_table
from src.simulator.trainer import ExperimentResult, run_experiment

logger = get_logger(__name__, module_name="simulator")

RESULT_COLUMNS = ["name", "mode", "gamma", "ap50", "precision_at_recall_50", "final_loss", "epochs"]


def results_frame(results: Sequence[ExperimentResult]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in results], columns=RESULT_COLUMNS)


def write_suite_outputs(results: Sequence[ExperimentResult],
                        out_dir: Union[str, Path],
                        parquet: bool = False,
                        pretty: bool = True) -> pd.DataFrame:
    """Write the comparison table, traces and PR curves of finished experiments."""
    out = ensure_directory_exists(out_dir)
    table = results_frame(results)
    write_table(table, out / "results.csv", "csv")
    write_json(out / "results.json", table.to_dict(orient="records"), pretty)
    if parquet:
        write_table(table, out / "results.parquet", "parquet")

    traces = ensure_directory_exists(out / "traces")
    curves = ensure_directory_exists(out / "pr_curves")
    for result in results:
        name = result.spec.name
        write_json(traces / f"{name}.json", {
            "name": name,
            "spec": result.spec.to_dict(),
            "trace": result.training.trace_records(),
        }, pretty)
        write_table(result.report.pr_curve_frame(), curves / f"{name}.csv", "csv")
        if parquet:
            write_table(result.training.trace_frame(), traces / f"{name}.parquet", "parquet")
    logger.info("Wrote %d experiment results to %s", len(results), out)
    return table


def run_benchmark_suite(specs: Union[SuiteConfig, Sequence[ExperimentSpec]],
                        out_dir: Optional[Union[str, Path]] = None,
                        parquet: bool = False) -> pd.DataFrame:
    """
    Train and evaluate every experiment and tabulate AP50 per mode.

    Args:
        specs: A suite (its gamma sweep is not run here) or a list of experiments
        out_dir: Directory for CSV/JSON artifacts; nothing is written when None
        parquet: Also write Parquet copies of the tables

    Returns:
        DataFrame with RESULT_COLUMNS, one row per experiment in input order
    """
    experiments = list(specs.experiments if isinstance(specs, SuiteConfig) else specs)
    names = [spec.name for spec in experiments]
    if len(set(names)) != len(names):
        raise ConfigError(f"Experiment names must be unique: {names}")
    results = []
    for k, spec in enumerate(experiments, start=1):
        logger.info("Experiment %d/%d: %s", k, len(experiments), spec.name)
        results.append(run_experiment(spec))
    if out_dir is not None:
        return write_suite_outputs(results, out_dir, parquet)
    return results_frame(results)


def sweep_specs(spec: ExperimentSpec, gammas: Sequence[float]) -> List[ExperimentSpec]:
    """Copies of ``spec`` named '<name>_gamma<g>' for each gamma."""
    return [spec.with_overrides(name=f"{spec.name}_gamma{gamma:g}", gamma=float(gamma)) for gamma in gammas]


def run_gamma_sweep(spec: ExperimentSpec,
                    gammas: Sequence[float],
                    out_dir: Optional[Union[str, Path]] = None,
                    parquet: bool = False) -> pd.DataFrame:
    """AP50 of one experiment at several enlargement factors."""
    return run_benchmark_suite(sweep_specs(spec, gammas), out_dir, parquet)
