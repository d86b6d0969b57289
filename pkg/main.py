#!/usr/bin/env python3
"""
FOSI Optimizer Lab - Command Line Entry Point
Runs experiment specs, learning-rate sweeps, plots, preconditioner checks and derivative checks
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

# Add project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

import pandas as pd
from dotenv import load_dotenv
from pydantic import ValidationError

from core.derivative_checker import check_derivatives
from core.exceptions import FosiError
from core.experiment_runner import ExperimentRunner
from core.plotting import emit_plot
from core.preconditioner_analysis import verify_lemmas
from core.problem_generator import ProblemModelManager
from core.run_trace import FLOAT_FORMAT
from models.experiment_models import ProblemSpec
from utils.logger import setup_logging

APP_NAME = "FOSI Optimizer Lab"
APP_VERSION = "1.0.0"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fosi-lab", description=APP_NAME)
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR (env FOSI_LOG_LEVEL)")
    parser.add_argument("--log-dir", default=None, help="Write rotating log files here (env FOSI_LOG_DIR)")
    parser.add_argument("--version", action="version", version=f"%(prog)s {APP_VERSION}")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run every optimizer of an experiment spec")
    run.add_argument("spec", help="Experiment spec (JSON)")
    run.add_argument("--max-workers", type=int, default=None)

    sweep = commands.add_parser("sweep", help="Learning-rate sweep over the spec's optimizers")
    sweep.add_argument("spec", help="Experiment spec (JSON)")
    sweep.add_argument("--lr", type=float, nargs="+", default=None, help="Override the spec's learning-rate grid")
    sweep.add_argument("--momentum", type=float, nargs="+", default=None, help="Override the momentum grid")
    sweep.add_argument("--max-workers", type=int, default=None)

    plot = commands.add_parser("plot", help="Plot trace CSVs as learning curves")
    plot.add_argument("traces", nargs="+", help="Trace CSV files")
    plot.add_argument("-o", "--output", required=True, help="Output SVG file")
    plot.add_argument("--title", default=None)

    lemmas = commands.add_parser("verify-lemmas", help="Check effective-preconditioner spectra on random SPD matrices")
    lemmas.add_argument("--n", type=int, default=50)
    lemmas.add_argument("--seed", type=int, default=0)
    lemmas.add_argument("--trials", type=int, default=20)
    lemmas.add_argument("-o", "--output", default=None, help="Write the reports as CSV")

    check = commands.add_parser("check", help="Finite-difference check of a problem's gradient and HVP")
    check.add_argument("problem", help="Problem spec (JSON with family, params, seed)")
    check.add_argument("--trials", type=int, default=5)
    check.add_argument("--seed", type=int, default=0)

    return parser


class FosiLabApp:
    """Main application class"""

    def __init__(self):
        self.args = None
        self.logger = logging.getLogger("bench")
        self.max_workers: Optional[int] = None

    def initialize(self, argv: Optional[List[str]] = None) -> bool:
        """Parse arguments and set up logging from flags or environment"""
        load_dotenv()
        self.args = build_parser().parse_args(argv)

        log_level = self.args.log_level or os.getenv("FOSI_LOG_LEVEL", "INFO")
        log_dir = self.args.log_dir or os.getenv("FOSI_LOG_DIR") or None
        setup_logging(log_level, log_dir)

        workers = getattr(self.args, "max_workers", None)
        if workers is None and os.getenv("FOSI_MAX_WORKERS"):
            try:
                workers = int(os.environ["FOSI_MAX_WORKERS"])
            except ValueError:
                self.logger.warning(f"Ignoring FOSI_MAX_WORKERS={os.environ['FOSI_MAX_WORKERS']!r}")
        self.max_workers = workers

        logging.info(f"Starting {APP_NAME} v{APP_VERSION}: {self.args.command}")
        return True

    def cmd_run(self) -> int:
        runner = ExperimentRunner.from_file(self.args.spec, max_workers=self.max_workers)
        result = runner.run_experiment()
        print(result['summary'].to_string(index=False))
        if result['status'] != 'success':
            self.logger.error(f"Runs failed: {', '.join(result['failed_runs'])}")
            return 1
        return 0

    def cmd_sweep(self) -> int:
        runner = ExperimentRunner.from_file(self.args.spec, max_workers=self.max_workers)
        grid = runner.sweep_learning_rates(self.args.lr, self.args.momentum)
        print(grid.to_string(index=False))
        return 1 if (grid["status"] == "error").any() else 0

    def cmd_plot(self) -> int:
        path = emit_plot(self.args.traces, self.args.output, title=self.args.title)
        print(path)
        return 0

    def cmd_verify_lemmas(self) -> int:
        reports = verify_lemmas(n=self.args.n, seed=self.args.seed, trials=self.args.trials)
        for report in reports:
            print(report.to_text())
        if self.args.output:
            output = Path(self.args.output)
            output.parent.mkdir(parents=True, exist_ok=True)
            pd.DataFrame([report.to_row() for report in reports]).to_csv(
                output, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
            self.logger.info(f"Lemma report written: {output}")
        return 0 if all(report.passed for report in reports) else 1

    def cmd_check(self) -> int:
        try:
            with open(self.args.problem, 'r', encoding='utf-8') as f:
                spec = ProblemSpec.model_validate(json.load(f))
        except (OSError, json.JSONDecodeError, ValidationError) as e:
            self.logger.error(f"Error reading problem spec {self.args.problem}: {e}")
            return 1

        problem = ProblemModelManager().build(spec.family, spec.params, seed=spec.seed)
        report = check_derivatives(problem, problem.initial_point, trials=self.args.trials, seed=self.args.seed)
        for key, value in report.to_dict().items():
            print(f"{key:<16}: {value}")
        return 0 if report.passed else 1

    def run(self, argv: Optional[List[str]] = None) -> int:
        """Main application run method"""
        if not self.initialize(argv):
            return 1

        handlers = {
            "run": self.cmd_run,
            "sweep": self.cmd_sweep,
            "plot": self.cmd_plot,
            "verify-lemmas": self.cmd_verify_lemmas,
            "check": self.cmd_check,
        }
        try:
            return handlers[self.args.command]()
        except FosiError as e:
            self.logger.error(f"Error in '{self.args.command}': {e}")
            return 1


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    try:
        app = FosiLabApp()
        return app.run(argv)

    except KeyboardInterrupt:
        print("\nInterrupted by user")
        return 130


if __name__ == "__main__":
    sys.exit(main())
