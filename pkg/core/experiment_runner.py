#!/usr/bin/env python3
"""
Experiment Runner for the FOSI optimizer lab
Runs the optimizers declared in an experiment spec, writes traces, summary tables
and learning-rate sweep grids
"""

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from core.base_optimizers import BaseOptimizer, create_base_optimizer
from core.config_manager import ConfigManager
from core.exceptions import FosiError, InvalidArgumentsError
from core.fosi_optimizer import base_optimize, fosi_optimize
from core.plotting import emit_plot
from core.problem_generator import ProblemModelManager
from core.run_trace import FLOAT_FORMAT, STATUS_ERROR, RunTrace
from models.experiment_models import ExperimentSpec, OptimizerSpec
from models.objective import BatchSchedule, ObjectiveProblem
from models.problem_models import QuadraticProblem
from utils.logger import ContextLogger

DEFAULT_MAX_WORKERS = 4
SUMMARY_COLUMNS = ["optimizer_id", "final_f", "best_f", "iters_to_threshold", "ratio_to_baseline", "status"]
SWEEP_COLUMNS = ["optimizer_id", "kind", "fosi", "learning_rate", "momentum", "final_f", "best_f", "status"]


class ExperimentRunner:
    """Executes one experiment spec"""

    def __init__(self, spec: ExperimentSpec, max_workers: Optional[int] = None):
        self.spec = spec
        self.max_workers = spec.output.max_workers or max_workers or DEFAULT_MAX_WORKERS
        self.output_dir = Path(spec.output.directory)
        self.problem_manager = ProblemModelManager()
        self.logger = logging.getLogger("bench")
        self._problem: Optional[ObjectiveProblem] = None
        self._problem_lock = threading.Lock()

    @classmethod
    def from_file(cls, spec_file: Union[str, Path], max_workers: Optional[int] = None) -> "ExperimentRunner":
        return cls(ConfigManager(spec_file).to_experiment_spec(), max_workers=max_workers)

    @property
    def problem(self) -> ObjectiveProblem:
        with self._problem_lock:
            if self._problem is None:
                problem_spec = self.spec.problem
                self._problem = self.problem_manager.build(problem_spec.family, problem_spec.params,
                                                           seed=problem_spec.seed)
        return self._problem

    def build_schedule(self) -> Optional[BatchSchedule]:
        """Fresh batch schedule; every run sees the same batch sequence"""
        problem_spec = self.spec.problem
        if not problem_spec.is_stochastic:
            return None
        if self.problem.dataset_size is None:
            raise InvalidArgumentsError(f"Problem family '{problem_spec.family}' has no batch mode")
        seed = problem_spec.batch_seed if problem_spec.batch_seed is not None else problem_spec.seed
        return BatchSchedule(self.problem.dataset_size, problem_spec.batch_size, seed,
                             ese_batch_size=problem_spec.ese_batch_size)

    def resolve_learning_rate(self, opt_spec: OptimizerSpec) -> float:
        """Numeric learning rate; 'optimal' means 2/(l1+ln) for GD and 2/(sqrt(l1)+sqrt(ln))^2 for HB"""
        if opt_spec.lr != "optimal":
            return float(opt_spec.lr)
        problem = self.problem
        if not isinstance(problem, QuadraticProblem):
            raise InvalidArgumentsError("lr 'optimal' needs a quadratic problem with a known spectrum")
        lam_max, lam_min = float(problem.spectrum[0]), float(problem.spectrum[-1])
        if opt_spec.kind == "gd":
            return 2.0 / (lam_max + lam_min)
        return 2.0 / (math.sqrt(lam_max) + math.sqrt(lam_min)) ** 2

    def build_base(self, opt_spec: OptimizerSpec, learning_rate: Optional[float] = None,
                   momentum: Optional[float] = None) -> BaseOptimizer:
        lr = self.resolve_learning_rate(opt_spec) if learning_rate is None else learning_rate
        beta = opt_spec.momentum if momentum is None else momentum
        return create_base_optimizer(opt_spec.kind, lr, momentum=beta, beta2=opt_spec.beta2, eps=opt_spec.eps)

    def run_single(self, opt_spec: OptimizerSpec, learning_rate: Optional[float] = None,
                   momentum: Optional[float] = None) -> RunTrace:
        """Run one optimizer; harness failures come back as a trace with status 'error'"""
        run_id = opt_spec.run_id
        try:
            problem = self.problem
            base = self.build_base(opt_spec, learning_rate, momentum)
            schedule = self.build_schedule()
            if opt_spec.is_fosi:
                return fosi_optimize(problem, problem.initial_point, opt_spec.fosi, base, self.spec.budget,
                                     schedule=schedule, optimizer_id=run_id)
            return base_optimize(problem, problem.initial_point, base, self.spec.budget,
                                 schedule=schedule, optimizer_id=run_id)
        except FosiError as e:
            self.logger.error(f"Error running {run_id}: {e}")
            return RunTrace(optimizer_id=run_id, status=STATUS_ERROR, message=str(e))

    def _run_and_write(self, opt_spec: OptimizerSpec) -> Tuple[RunTrace, Optional[Path]]:
        trace = self.run_single(opt_spec)
        if not trace.rows:
            return trace, None
        path = trace.write_csv(self.output_dir / f"{opt_spec.run_id}.csv",
                               record_timing=self.spec.output.record_timing,
                               record_every=self.spec.output.record_every)
        return trace, path

    def _baseline_for(self, opt_spec: OptimizerSpec) -> Optional[str]:
        if self.spec.summary.baseline is not None:
            return self.spec.summary.baseline
        if not opt_spec.is_fosi:
            return opt_spec.run_id
        for other in self.spec.optimizers:
            if not other.is_fosi and other.kind == opt_spec.kind:
                return other.run_id
        return None

    def summarize(self, traces: Sequence[RunTrace]) -> pd.DataFrame:
        """Summary table in spec order"""
        by_id = {trace.optimizer_id: trace for trace in traces}
        threshold = self.spec.summary.threshold
        rows = []

        for opt_spec in self.spec.optimizers:
            trace = by_id[opt_spec.run_id]
            baseline_id = self._baseline_for(opt_spec)
            baseline = by_id.get(baseline_id) if baseline_id is not None else None

            if threshold == "baseline_best":
                target = baseline.best_f if baseline is not None else math.nan
            elif threshold is None:
                target = math.nan
            else:
                target = float(threshold)
            iters = trace.iterations_to_threshold(target) if not math.isnan(target) else None

            ratio = math.nan
            if opt_spec.is_fosi and baseline is not None and baseline is not trace:
                if baseline.rows and baseline.final_f > 0 and math.isfinite(baseline.final_f):
                    ratio = trace.final_f / baseline.final_f

            rows.append({
                "optimizer_id": opt_spec.run_id,
                "final_f": trace.final_f,
                "best_f": trace.best_f,
                "iters_to_threshold": iters,
                "ratio_to_baseline": ratio,
                "status": trace.status,
            })

        df = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
        df["iters_to_threshold"] = df["iters_to_threshold"].astype("Int64")
        return df

    def run_experiment(self) -> Dict[str, Any]:
        """Run every optimizer of the spec, write one trace per run and the summary table"""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        with ContextLogger(f"Experiment '{self.spec.name}' on {self.spec.problem.family}", "bench"):
            with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
                results = list(pool.map(self._run_and_write, self.spec.optimizers))

        traces = [trace for trace, _ in results]
        trace_paths = [path for _, path in results if path is not None]

        summary = self.summarize(traces)
        summary_path = self.output_dir / "summary.csv"
        summary.to_csv(summary_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        self.logger.info(f"Summary written: {summary_path}")

        plot_path = None
        if self.spec.output.plot and trace_paths:
            statuses = [trace.status for trace, path in results if path is not None]
            plot_path = emit_plot(trace_paths, self.output_dir / "curves.svg", statuses=statuses)

        failed = [trace.optimizer_id for trace in traces if trace.status == STATUS_ERROR]
        return {
            'status': 'error' if failed else 'success',
            'failed_runs': failed,
            'traces': {trace.optimizer_id: trace for trace in traces},
            'trace_paths': trace_paths,
            'summary': summary,
            'summary_path': summary_path,
            'plot_path': plot_path,
        }

    def sweep_learning_rates(self, learning_rates: Optional[Sequence[float]] = None,
                             momenta: Optional[Sequence[float]] = None) -> pd.DataFrame:
        """Final loss of every (optimizer, learning rate, momentum) cell, written as a grid CSV"""
        sweep = self.spec.sweep
        rates = list(learning_rates) if learning_rates is not None else (list(sweep.learning_rates) if sweep else [])
        if momenta is None and sweep is not None and sweep.momenta:
            momenta = list(sweep.momenta)
        if not rates:
            raise InvalidArgumentsError("empty sweep: no learning rates given")

        cells = []
        for opt_spec in self.spec.optimizers:
            betas = list(momenta) if momenta and opt_spec.kind in ("hb", "adam") else [None]
            for rate in rates:
                for beta in betas:
                    cells.append((opt_spec, rate, beta))

        self.output_dir.mkdir(parents=True, exist_ok=True)
        with ContextLogger(f"Sweep '{self.spec.name}' over {len(cells)} cells", "bench"):
            with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
                traces = list(pool.map(lambda cell: self.run_single(*cell), cells))

        rows = []
        for (opt_spec, rate, beta), trace in zip(cells, traces):
            if beta is None:
                beta = opt_spec.momentum
            rows.append({
                "optimizer_id": opt_spec.run_id,
                "kind": opt_spec.kind,
                "fosi": opt_spec.is_fosi,
                "learning_rate": rate,
                "momentum": np.nan if beta is None else beta,
                "final_f": trace.final_f,
                "best_f": trace.best_f,
                "status": trace.status,
            })

        grid = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
        grid_path = self.output_dir / "sweep.csv"
        grid.to_csv(grid_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        self.logger.info(f"Sweep grid written: {grid_path}")

        best = best_momentum_per_rate(grid)
        best_path = self.output_dir / "sweep_best.csv"
        best.to_csv(best_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        self.logger.info(f"Best momentum per learning rate written: {best_path}")
        return grid


def best_momentum_per_rate(grid: pd.DataFrame) -> pd.DataFrame:
    """Lowest-final-loss row of every (optimizer, learning rate) pair

    Non-finite losses rank last; ties keep the first momentum in grid order.
    """
    score = grid["final_f"].where(np.isfinite(grid["final_f"].astype(np.float64)), np.inf)
    best = score.groupby([grid["optimizer_id"], grid["learning_rate"]], sort=False).idxmin()
    return grid.loc[best.to_numpy()].reset_index(drop=True)


def run_experiment(spec: Union[ExperimentSpec, str, Path], max_workers: Optional[int] = None) -> Dict[str, Any]:
    """Run an experiment from a validated spec or a spec file"""
    runner = ExperimentRunner(spec, max_workers) if isinstance(spec, ExperimentSpec) \
        else ExperimentRunner.from_file(spec, max_workers)
    return runner.run_experiment()


def sweep_learning_rates(spec: Union[ExperimentSpec, str, Path], learning_rates: Optional[Sequence[float]] = None,
                         momenta: Optional[Sequence[float]] = None,
                         max_workers: Optional[int] = None) -> pd.DataFrame:
    """Learning-rate sweep from a validated spec or a spec file"""
    runner = ExperimentRunner(spec, max_workers) if isinstance(spec, ExperimentSpec) \
        else ExperimentRunner.from_file(spec, max_workers)
    return runner.sweep_learning_rates(learning_rates, momenta)
