#!/usr/bin/env python3
"""
Learning-curve plots for the FOSI optimizer lab
Renders run traces as a log-scale f vs iteration chart in SVG
"""

import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from core.exceptions import InvalidArgumentsError
from core.run_trace import STATUS_DIVERGED, RunTrace

logger = logging.getLogger("bench")


def emit_plot(trace_files: Sequence[Union[str, Path]], output_path: Union[str, Path],
              labels: Optional[Sequence[str]] = None, title: Optional[str] = None,
              statuses: Optional[Sequence[Optional[str]]] = None) -> Path:
    """
    Plot one series per trace file; a diverged run is cut at its first divergent
    row and marked with an annotation

    ``statuses`` carries each run's final status. A run that stopped on a non-finite
    step ends on a finite value, so only its status tells that it diverged.
    """
    if not trace_files:
        raise InvalidArgumentsError("emit_plot needs at least one trace file")
    if labels is not None and len(labels) != len(trace_files):
        raise InvalidArgumentsError(f"Got {len(labels)} labels for {len(trace_files)} traces")
    if statuses is not None and len(statuses) != len(trace_files):
        raise InvalidArgumentsError(f"Got {len(statuses)} statuses for {len(trace_files)} traces")

    traces = [RunTrace.read_csv(path) for path in trace_files]
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(8, 5))
    try:
        for idx, trace in enumerate(traces):
            label = labels[idx] if labels is not None else trace.optimizer_id
            iterations = np.array([row["iteration"] for row in trace.rows])
            values = trace.f_values

            cut = trace.divergence_index()
            if cut is not None:
                iterations, values = iterations[:cut], values[:cut]
            if statuses is not None and statuses[idx]:
                trace.status = statuses[idx]
            diverged = cut is not None or trace.status == STATUS_DIVERGED
            if diverged:
                label = f"{label} (diverged)"

            # log axis cannot show exact zeros
            values = np.maximum(values, np.finfo(np.float64).tiny)
            if iterations.size == 0:
                line, = ax.plot([], [], label=label)
            else:
                line, = ax.plot(iterations, values, label=label, linewidth=1.5)
            if diverged and iterations.size > 0:
                ax.annotate("diverged", xy=(iterations[-1], values[-1]), xytext=(5, 5),
                            textcoords="offset points", color=line.get_color(), fontsize=8)

        ax.set_yscale("log")
        ax.set_xlabel("Iteration")
        ax.set_ylabel("f")
        if title:
            ax.set_title(title)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        # labels stay text in the SVG
        with plt.rc_context({"svg.fonttype": "none"}):
            fig.savefig(output_path, format="svg")
    finally:
        plt.close(fig)

    logger.info(f"Plot written: {output_path}")
    return output_path
