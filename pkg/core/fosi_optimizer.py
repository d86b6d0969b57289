#!/usr/bin/env python3
"""
FOSI meta-optimizer for the FOSI optimizer lab
Splits every step into a scaled Newton step on the extreme Hessian eigenvectors
and a base-optimizer step on the orthogonal complement
"""

import copy
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from core.base_optimizers import BaseOptimizer, OptimalLrForm
from core.exceptions import (
    ConvergenceError,
    InvalidArgumentsError,
    LanczosError,
    NonFiniteError,
    OverheadTargetError,
)
from core.run_trace import (
    STATUS_COMPLETED,
    STATUS_CONVERGED,
    STATUS_DIVERGED,
    STATUS_ESE_FAILED,
    RunTrace,
    is_divergent,
)
from core.spectral import SpectrumEstimate, ese, heuristic_m
from models.experiment_models import FosiConfig, StoppingRule
from models.objective import BatchSchedule, ObjectiveProblem

logger = logging.getLogger("optimizer")

DENSE_ANALYSIS_MAX_N = 200


@dataclass
class FosiState:
    """Evolving FOSI state

    ``momentum`` is the full-space moving average of raw gradients that feeds the
    Newton branch; the base optimizer keeps its own buffers for the complement.
    """

    base: BaseOptimizer
    spectrum: SpectrumEstimate
    alpha: float
    eta: float
    eta_scaled: float
    t: int = 0
    momentum: Optional[np.ndarray] = None
    momentum_steps: int = 0
    lr_fallback: bool = False
    ese_calls: int = 0

    @classmethod
    def initial(cls, n: int, k: int, l: int, base: BaseOptimizer, alpha: float) -> "FosiState":
        return cls(
            base=base,
            spectrum=SpectrumEstimate.empty(n, k, l),
            alpha=alpha,
            eta=base.learning_rate,
            eta_scaled=base.learning_rate,
        )

    def advance_momentum(self, g: np.ndarray) -> np.ndarray:
        """Fold g into the Newton-branch momentum with the base optimizer's coefficient"""
        beta = self.base.momentum_coefficient
        if beta == 0.0:
            return g
        if self.momentum is None:
            self.momentum = np.zeros_like(g)
        if self.base.bias_corrected:
            self.momentum = beta * self.momentum + (1.0 - beta) * g
            self.momentum_steps += 1
            return self.momentum / (1.0 - beta ** self.momentum_steps)
        self.momentum = beta * self.momentum + g
        return self.momentum


@dataclass
class LearningRateScaling:
    eta2: float
    ratio: Optional[float]
    fallback: bool
    notes: List[str] = field(default_factory=list)


@dataclass
class OverheadTimings:
    """Seconds per base step (tau1), per FOSI step without ESE (tau2) and per ESE call (tau3)"""

    tau1: float
    tau2: float
    tau3: float


def learning_rate_ratio(form: OptimalLrForm, lam_max: float, lam_min: float,
                        head_edge: float, tail_edge: float) -> Optional[float]:
    """eta*_2 / eta*, or None when the estimates cannot feed the closed form"""
    if form is OptimalLrForm.NONE:
        return None
    lam_min = max(lam_min, 0.0)
    tail_edge = max(tail_edge, 0.0)
    if not lam_max > 0 or not head_edge > 0:
        return None
    return form.evaluate(head_edge, tail_edge) / form.evaluate(lam_max, lam_min)


def compute_learning_rate_scaling(eta: float, form: OptimalLrForm, spectrum: SpectrumEstimate,
                                  c: float) -> LearningRateScaling:
    """eta2 = eta * min(eta*_2 / eta*, c), never below eta"""
    if form is OptimalLrForm.NONE or c == 1.0:
        return LearningRateScaling(eta2=eta, ratio=None, fallback=False)

    notes = []
    if spectrum.l == 0:
        notes.append("lambda_min proxy taken from the lowest Ritz value")
    if spectrum.lambda_min() < 0:
        notes.append(f"lambda_min estimate {spectrum.lambda_min():.3e} clipped to 0")

    ratio = learning_rate_ratio(form, spectrum.lambda_max(), spectrum.lambda_min(),
                                spectrum.head_edge(), spectrum.tail_edge())
    if ratio is None or not math.isfinite(ratio):
        notes.append("learning-rate scaling fell back to eta (nonpositive eigenvalue estimates)")
        return LearningRateScaling(eta2=eta, ratio=ratio, fallback=True, notes=notes)

    factor = max(1.0, min(ratio, c))
    return LearningRateScaling(eta2=eta * factor, ratio=ratio, fallback=False, notes=notes)


def scale_learning_rate(eta: float, form: OptimalLrForm, spectrum: SpectrumEstimate, c: float) -> float:
    """Learning rate for the base optimizer on the complement subspace"""
    return compute_learning_rate_scaling(eta, form, spectrum, c).eta2


def _round_interval(value: float) -> int:
    nearest = round(value)
    if math.isclose(value, nearest, rel_tol=1e-9):
        return max(int(nearest), 1)
    return max(math.ceil(value), 1)


def interval_T_heuristic(m: int, rho: float) -> int:
    """ceil(2m / (rho - 1))"""
    if not rho > 1:
        raise InvalidArgumentsError(f"Overhead factor rho must exceed 1, got {rho}")
    if m < 1:
        raise InvalidArgumentsError(f"Lanczos iteration count must be positive, got {m}")
    return _round_interval(2.0 * m / (rho - 1.0))


def interval_T_measured(tau1: float, tau2: float, tau3: float, rho: float) -> int:
    """ceil(tau3 / (rho tau1 - tau2)), at least 1"""
    if not tau2 > 0 or tau3 < 0 or not tau1 > 0:
        raise InvalidArgumentsError(f"Invalid timings tau1={tau1}, tau2={tau2}, tau3={tau3}")
    if rho * tau1 <= tau2:
        raise OverheadTargetError(
            f"Overhead target unattainable: rho * tau1 = {rho * tau1:.3e} <= tau2 = {tau2:.3e}")
    return _round_interval(tau3 / (rho * tau1 - tau2))


class FosiOptimizer:
    """FOSI wrapped around a base optimizer"""

    def __init__(self, base: BaseOptimizer, cfg: FosiConfig, stochastic: bool = False):
        self.base = base
        self.cfg = cfg
        self.stochastic = stochastic
        if cfg.alpha is not None:
            self.alpha = cfg.alpha
        else:
            self.alpha = 0.01 if stochastic else 1.0
        self.logger = logger

    def init_state(self, n: int) -> FosiState:
        if self.cfg.k + self.cfg.l > n:
            raise InvalidArgumentsError(f"k + l = {self.cfg.k + self.cfg.l} exceeds dimension {n}")
        return FosiState.initial(n, self.cfg.k, self.cfg.l, self.base, self.alpha)

    def resolve_interval(self, problem: ObjectiveProblem, theta: np.ndarray) -> int:
        if isinstance(self.cfg.T, int):
            return self.cfg.T
        if self.cfg.T == "auto":
            return interval_T_heuristic(heuristic_m(problem.n, self.cfg.k, self.cfg.l), self.cfg.rho)
        timings = measure_overhead_timings(problem, theta, self.cfg, self.base,
                                           self.cfg.timing_iterations)
        self.logger.info(f"Measured overhead: tau1={timings.tau1:.3e}s, tau2={timings.tau2:.3e}s, "
                         f"tau3={timings.tau3:.3e}s")
        return interval_T_measured(timings.tau1, timings.tau2, timings.tau3, self.cfg.rho)

    def resolve_warmup(self, interval: int, schedule: Optional[BatchSchedule]) -> int:
        if isinstance(self.cfg.W, int):
            return self.cfg.W
        if self.cfg.W == "T":
            return interval
        if schedule is None:
            raise InvalidArgumentsError("Warmup 'epoch' requires a stochastic problem with a batch size")
        return schedule.steps_per_epoch

    def refresh(self, state: FosiState, problem: ObjectiveProblem, theta: np.ndarray) -> LearningRateScaling:
        """Run ESE at theta and rescale the base learning rate"""
        state.spectrum = ese(problem, theta, self.cfg.k, self.cfg.l, seed=self.cfg.seed + state.t)
        state.ese_calls += 1
        scaling = compute_learning_rate_scaling(state.eta, self.base.optimal_lr_form,
                                                state.spectrum, self.cfg.c)
        state.eta_scaled = scaling.eta2
        state.lr_fallback = scaling.fallback
        if state.spectrum.breakdown:
            self.logger.warning(f"ESE at t={state.t} used a truncated Krylov space "
                                f"(m'={state.spectrum.krylov_dim})")
        if scaling.fallback:
            self.logger.warning(f"Learning-rate scaling fallback at t={state.t}")
        self.logger.info(f"ESE refresh at t={state.t}: lambda_max={state.spectrum.lambda_max():.4e}, "
                         f"eta2={state.eta_scaled:.4e}")
        return scaling

    def effective_inverse_preconditioner(self, state: FosiState, g: np.ndarray,
                                         scaled: bool = True) -> np.ndarray:
        """Dense P^-1 = alpha V diag(u) V^T + eta2 (I - VV^T) diag(q) (I - VV^T)

        With ``scaled=False`` both alpha and eta2 are taken as 1.
        """
        V = state.spectrum.v_hat
        n = V.shape[0]
        if n > DENSE_ANALYSIS_MAX_N:
            raise InvalidArgumentsError(f"Dense preconditioner limited to n <= {DENSE_ANALYSIS_MAX_N}, got {n}")
        g = np.asarray(g, dtype=np.float64)
        g2 = g - V @ (V.T @ g)
        q = state.base.inverse_preconditioner_diag(g2)
        alpha, eta = (state.alpha, state.eta_scaled) if scaled else (1.0, 1.0)
        complement = np.eye(n) - V @ V.T
        return alpha * (V * state.spectrum.u) @ V.T + eta * complement @ (q[:, None] * complement)

    def optimize(self, problem: ObjectiveProblem, theta0: np.ndarray, stop: StoppingRule,
                 schedule: Optional[BatchSchedule] = None,
                 on_step: Optional[Callable[[int, FosiState, np.ndarray], None]] = None,
                 optimizer_id: str = "fosi") -> RunTrace:
        theta0 = np.array(theta0, dtype=np.float64)
        state = self.init_state(problem.n)
        interval = self.resolve_interval(problem, theta0)
        warmup = self.resolve_warmup(interval, schedule)
        self.logger.info(f"FOSI-{self.base.kind} on {problem.name}: k={self.cfg.k}, l={self.cfg.l}, "
                         f"alpha={self.alpha}, T={interval}, W={warmup}, c={self.cfg.c}")

        def refresh_due(t: int) -> bool:
            return t >= warmup and (t - warmup) % interval == 0

        return _run_loop(problem, theta0, stop, schedule, optimizer_id,
                         base=self.base, fosi=self, state=state,
                         refresh_due=refresh_due, on_step=on_step)


def fosi_update_step(theta: np.ndarray, g: np.ndarray, state: FosiState) -> Tuple[np.ndarray, FosiState]:
    """
    One FOSI update: Newton step on span(V) plus base step on its complement

    Products are evaluated as matrix-vector chains.
    """
    g = np.asarray(g, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise NonFiniteError(f"Non-finite gradient at iteration {state.t}", where="gradient")

    V = state.spectrum.v_hat
    u = state.spectrum.u

    g1 = V @ (V.T @ g)
    g2 = g - g1

    g_bar = state.advance_momentum(g)
    g_bar1 = V @ (V.T @ g_bar)
    d1 = -state.alpha * (V @ ((V.T @ g_bar1) * u))
    if not np.all(np.isfinite(d1)):
        raise NonFiniteError(f"Non-finite Newton direction at iteration {state.t}", where="newton")

    try:
        d_base = state.base.step(g2, learning_rate=state.eta_scaled)
    except NonFiniteError as e:
        raise NonFiniteError(f"Base branch failed at iteration {state.t}: {e}", where="base") from e
    d2 = d_base - V @ (V.T @ d_base)
    if not np.all(np.isfinite(d2)):
        raise NonFiniteError(f"Non-finite base direction at iteration {state.t}", where="base")

    state.t += 1
    return theta + d1 + d2, state


def fosi_optimize(problem: ObjectiveProblem, theta0: np.ndarray, cfg: FosiConfig, base: BaseOptimizer,
                  stop: StoppingRule, schedule: Optional[BatchSchedule] = None,
                  on_step: Optional[Callable[[int, FosiState, np.ndarray], None]] = None,
                  optimizer_id: Optional[str] = None) -> RunTrace:
    """Run FOSI around ``base`` until the stopping rule fires"""
    fosi = FosiOptimizer(base, cfg, stochastic=schedule is not None)
    return fosi.optimize(problem, theta0, stop, schedule=schedule, on_step=on_step,
                         optimizer_id=optimizer_id or f"fosi-{base.kind}")


def base_optimize(problem: ObjectiveProblem, theta0: np.ndarray, base: BaseOptimizer,
                  stop: StoppingRule, schedule: Optional[BatchSchedule] = None,
                  optimizer_id: Optional[str] = None) -> RunTrace:
    """Run the base optimizer alone"""
    logger.info(f"{base.kind} on {problem.name}: lr={base.learning_rate}")
    return _run_loop(problem, np.array(theta0, dtype=np.float64), stop, schedule,
                     optimizer_id or base.kind, base=base)


def _run_loop(problem: ObjectiveProblem, theta: np.ndarray, stop: StoppingRule,
              schedule: Optional[BatchSchedule], optimizer_id: str, base: BaseOptimizer,
              fosi: Optional[FosiOptimizer] = None, state: Optional[FosiState] = None,
              refresh_due: Optional[Callable[[int], bool]] = None,
              on_step: Optional[Callable] = None) -> RunTrace:
    trace = RunTrace(optimizer_id=optimizer_id)
    budget = stop.iterations(schedule.steps_per_epoch if schedule is not None else None)
    start = time.perf_counter()
    f_initial = None

    for t in range(budget + 1):
        f_value = problem.value(theta)
        full_gradient = problem.gradient(theta)
        grad_norm = float(np.linalg.norm(full_gradient))
        if f_initial is None:
            f_initial = f_value
        eta_effective = state.eta_scaled if state is not None else base.learning_rate

        if is_divergent(f_value, f_initial):
            trace.append(t, f_value, grad_norm, eta_effective, False, time.perf_counter() - start)
            trace.status = STATUS_DIVERGED
            trace.message = f"f = {f_value:.3e} at iteration {t}"
            logger.error(f"Run {optimizer_id} diverged at iteration {t}: f = {f_value:.3e}")
            break

        converged = stop.grad_tol is not None and grad_norm <= stop.grad_tol
        if t == budget or converged:
            trace.append(t, f_value, grad_norm, eta_effective, False, time.perf_counter() - start)
            trace.status = STATUS_CONVERGED if converged else STATUS_COMPLETED
            break

        batch_problem = problem.with_batch(schedule.next_batch()) if schedule is not None else problem

        ese_call = fosi is not None and refresh_due(t)
        if ese_call:
            ese_batch = schedule.next_ese_batch() if schedule is not None else None
            ese_problem = problem.with_batch(ese_batch) if ese_batch is not None else batch_problem
            try:
                scaling = fosi.refresh(state, ese_problem, theta)
            except (LanczosError, ConvergenceError, NonFiniteError) as e:
                trace.status = STATUS_ESE_FAILED
                trace.message = str(e)
                logger.error(f"ESE failed for {optimizer_id} at iteration {t}: {e}")
                break
            for note in scaling.notes:
                trace.note(note)
            eta_effective = state.eta_scaled

        gradient = batch_problem.gradient(theta) if schedule is not None else full_gradient
        trace.append(t, f_value, grad_norm, eta_effective, ese_call, time.perf_counter() - start)

        try:
            if fosi is not None:
                theta, state = fosi_update_step(theta, gradient, state)
            else:
                theta = theta + base.step(gradient)
        except NonFiniteError as e:
            trace.status = STATUS_DIVERGED
            trace.message = str(e)
            logger.error(f"Run {optimizer_id} diverged at iteration {t}: {e}")
            break

        if on_step is not None:
            on_step(t, state, theta)

    logger.info(f"Run {optimizer_id} finished: status={trace.status}, iterations={len(trace) - 1}, "
                f"final f={trace.final_f:.6e}")
    return trace


def measure_overhead_timings(problem: ObjectiveProblem, theta: np.ndarray, cfg: FosiConfig,
                             base: BaseOptimizer, timing_iterations: int = 5) -> OverheadTimings:
    """Time a few iterations of the base optimizer, of FOSI without ESE, and one ESE call"""
    if timing_iterations < 1:
        raise InvalidArgumentsError("timing_iterations must be at least 1")
    theta = np.array(theta, dtype=np.float64)

    timed = copy.deepcopy(base)
    x = theta.copy()
    start = time.perf_counter()
    for _ in range(timing_iterations):
        x = x + timed.step(problem.gradient(x))
    tau1 = (time.perf_counter() - start) / timing_iterations

    start = time.perf_counter()
    spectrum = ese(problem, theta, cfg.k, cfg.l, seed=cfg.seed)
    tau3 = time.perf_counter() - start

    state = FosiState.initial(problem.n, cfg.k, cfg.l, copy.deepcopy(base),
                              cfg.alpha if cfg.alpha is not None else 1.0)
    state.spectrum = spectrum
    x = theta.copy()
    start = time.perf_counter()
    for _ in range(timing_iterations):
        x, state = fosi_update_step(x, problem.gradient(x), state)
    tau2 = (time.perf_counter() - start) / timing_iterations

    return OverheadTimings(tau1=tau1, tau2=tau2, tau3=tau3)
