#!/usr/bin/env python3
"""
Run traces for the FOSI optimizer lab
Per-iteration records of an optimization run and their CSV serialization
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from core.exceptions import TraceFileError

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["iteration", "f_value", "grad_norm", "eta_effective", "ese_call", "elapsed_seconds"]
FLOAT_FORMAT = "%.17g"

STATUS_COMPLETED = "completed"
STATUS_CONVERGED = "converged"
STATUS_DIVERGED = "diverged"
STATUS_ESE_FAILED = "ese_failed"
STATUS_ERROR = "error"

DIVERGENCE_FACTOR = 1e6


def is_divergent(f_value: float, f_initial: float) -> bool:
    """True when f is non-finite or exceeds DIVERGENCE_FACTOR times its initial magnitude"""
    if not math.isfinite(f_value):
        return True
    return f_value > DIVERGENCE_FACTOR * max(abs(f_initial), np.finfo(np.float64).tiny)


@dataclass
class RunTrace:
    """Rows of (iteration, f_value, grad_norm, eta_effective, ese_call, elapsed_seconds)"""

    optimizer_id: str = ""
    rows: List[Dict[str, Any]] = field(default_factory=list)
    status: str = STATUS_COMPLETED
    message: str = ""
    notes: List[str] = field(default_factory=list)

    def append(self, iteration: int, f_value: float, grad_norm: float, eta_effective: float,
               ese_call: bool, elapsed_seconds: float):
        if self.rows and iteration <= self.rows[-1]["iteration"]:
            raise ValueError(f"Trace iterations must increase: {iteration} after {self.rows[-1]['iteration']}")
        self.rows.append({
            "iteration": int(iteration),
            "f_value": float(f_value),
            "grad_norm": float(grad_norm),
            "eta_effective": float(eta_effective),
            "ese_call": int(bool(ese_call)),
            "elapsed_seconds": float(elapsed_seconds),
        })

    def note(self, message: str):
        """Attach a flag to the run; repeated flags are stored once"""
        if message not in self.notes:
            self.notes.append(message)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def f_values(self) -> np.ndarray:
        return np.array([row["f_value"] for row in self.rows], dtype=np.float64)

    @property
    def final_f(self) -> float:
        return self.rows[-1]["f_value"] if self.rows else math.nan

    @property
    def best_f(self) -> float:
        values = self.f_values
        finite = values[np.isfinite(values)]
        return float(finite.min()) if finite.size else math.nan

    @property
    def ese_iterations(self) -> List[int]:
        return [row["iteration"] for row in self.rows if row["ese_call"]]

    def iterations_to_threshold(self, threshold: float) -> Optional[int]:
        """First iteration whose f_value is at or below threshold"""
        for row in self.rows:
            if row["f_value"] <= threshold:
                return row["iteration"]
        return None

    def to_dataframe(self, record_timing: bool = False, record_every: int = 1) -> pd.DataFrame:
        df = pd.DataFrame(self.rows, columns=TRACE_COLUMNS)
        if record_every > 1 and not df.empty:
            keep = (df["iteration"] % record_every == 0)
            keep.iloc[-1] = True
            df = df[keep]
        if not record_timing:
            df = df.assign(elapsed_seconds=0.0)
        return df.reset_index(drop=True)

    def write_csv(self, path: Union[str, Path], record_timing: bool = False,
                  record_every: int = 1) -> Path:
        """Write the trace with 17 significant digits"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        df = self.to_dataframe(record_timing=record_timing, record_every=record_every)
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        logger.debug(f"Trace written: {path} ({len(df)} rows)")
        return path

    @classmethod
    def read_csv(cls, path: Union[str, Path], optimizer_id: Optional[str] = None) -> "RunTrace":
        path = Path(path)
        try:
            df = pd.read_csv(path, float_precision="round_trip")
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise TraceFileError(f"Cannot read trace file {path}: {e}") from e

        missing = [col for col in TRACE_COLUMNS if col not in df.columns]
        if missing:
            raise TraceFileError(f"Trace file {path} is missing columns {missing}")
        if df.empty:
            raise TraceFileError(f"Trace file {path} has no rows")

        trace = cls(optimizer_id=optimizer_id or path.stem)
        for record in df[TRACE_COLUMNS].to_dict("records"):
            trace.append(record["iteration"], record["f_value"], record["grad_norm"],
                         record["eta_effective"], record["ese_call"], record["elapsed_seconds"])
        if is_divergent(trace.rows[-1]["f_value"], trace.rows[0]["f_value"]):
            trace.status = STATUS_DIVERGED
        return trace

    def divergence_index(self) -> Optional[int]:
        """Row index of the first divergent value, None when the run stayed bounded"""
        if not self.rows:
            return None
        f0 = self.rows[0]["f_value"]
        for idx, row in enumerate(self.rows):
            if is_divergent(row["f_value"], f0):
                return idx
        return None
