"""Restarted GMRES with hot-swappable SpMV configuration.

The solver iterates with whatever kernel binding it currently holds and polls
a mailbox between Arnoldi steps. A concurrent advisor extracts features, runs
the cascaded prediction, converts the matrix into each predicted format on a
shadow copy, and publishes ready-to-run (config, matrix) updates. Updates
take effect at the next iteration boundary only; the first iteration always
runs under the default configuration. On convergence the solver raises a
cancellation flag that the advisor observes between feature chunks and model
stages.

Swap accounting: boundaries follow each completed iteration, so an update
that arrives after iteration d first applies to iteration max(d, 1) + 1, and
the timeline records the iteration that first ran under the new
configuration together with the advisor-side preparation cost.
"""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SolverNumericalError, SpmvTuneError, StagnationError
from .features import extract_features
from .formats import (AnyMatrix, CsrMatrix, FormatTag, convert, format_of,
                      spmv_reference)
from .inference import CascadeModelSet, cascade_predict
from .kernels import DEFAULT_CONFIG, SpmvConfig, default_workers, execute_spmv

ADVISOR_COMPLETED = "completed"
ADVISOR_CANCELLED = "cancelled"
ADVISOR_UNUSED = "unused"


@dataclass
class GmresParams:
    """Restart length, stopping rule, and right-hand-side policy."""

    restart_m: int = 30
    tol: float = 1e-8
    max_iters: int = 1000
    rhs: str = "ones"  # b = A·1 when b is not supplied; "random" uses seed
    seed: int = 0

    def __post_init__(self):
        if self.restart_m < 1:
            raise ValueError("restart_m must be >= 1")
        if not 0.0 < self.tol < 1.0:
            raise ValueError("tol must lie in (0, 1)")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.rhs not in ("ones", "random"):
            raise ValueError("rhs must be 'ones' or 'random'")


@dataclass
class ConfigSwap:
    iteration: int
    config: SpmvConfig
    swap_cost_seconds: float

    def to_dict(self) -> dict:
        return {"iteration": self.iteration, "config": self.config.token(),
                "swap_cost_seconds": self.swap_cost_seconds}


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_history: list[float]
    config_timeline: list[ConfigSwap]
    advisor_outcome: str
    solution: np.ndarray | None = None
    final_residual: float | None = None
    wall_seconds: float = 0.0
    phases: dict[str, float] = field(default_factory=dict)
    advisor_error: str | None = None
    advisor_join_seconds: float | None = None
    matrix_id: str | None = None
    mode: str | None = None

    def to_dict(self) -> dict:
        doc = {"converged": self.converged,
               "iterations": self.iterations,
               "residual_history": self.residual_history,
               "config_timeline": [s.to_dict() for s in self.config_timeline],
               "advisor_outcome": self.advisor_outcome,
               "final_residual": self.final_residual,
               "wall_seconds": self.wall_seconds}
        if self.phases:
            doc["phases"] = self.phases
        if self.advisor_error is not None:
            doc["advisor_error"] = self.advisor_error
        if self.matrix_id is not None:
            doc["matrix_id"] = self.matrix_id
        if self.mode is not None:
            doc["mode"] = self.mode
        return doc


class SpmvExecutor:
    """A configuration bound to a matrix representation in that format."""

    def __init__(self, config: SpmvConfig, matrix: AnyMatrix,
                 workers: int | None = None):
        if format_of(matrix) is not config.format:
            raise ValueError("matrix representation does not match the config")
        self.config = config
        self.matrix = matrix
        self.workers = workers if workers is not None else default_workers()

    @classmethod
    def for_matrix(cls, m: AnyMatrix, config: SpmvConfig,
                   workers: int | None = None) -> "SpmvExecutor":
        rep = m if format_of(m) is config.format else convert(m, config.format)
        return cls(config, rep, workers)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return execute_spmv(self.config, self.matrix, x, workers=self.workers)


@dataclass
class _Update:
    """One mailbox message: a ready-to-run configuration, or a tombstone."""

    config: SpmvConfig | None
    matrix: AnyMatrix | None
    prep_seconds: float


class ConfigMailbox:
    """Single-producer single-consumer slot with last-writer-wins visibility.

    ``expected_gates`` makes swap timing deterministic for tests: the i-th
    published update becomes visible only once the solver has completed
    ``expected_gates[i]`` iterations, and the solver waits at a boundary for
    any update whose gate has already passed. Without gates, polling never
    blocks. The converged flag doubles as the advisor's cancellation signal.
    """

    def __init__(self, expected_gates: list[int] | None = None):
        self._cond = threading.Condition()
        self._entries: list[tuple[int, int, _Update]] = []  # (seq, gate, update)
        self._published = 0
        self._gates = list(expected_gates) if expected_gates is not None else None
        self.converged = threading.Event()

    def publish(self, update: _Update) -> None:
        with self._cond:
            gate = 0
            if self._gates is not None and self._published < len(self._gates):
                gate = self._gates[self._published]
            self._entries.append((self._published, gate, update))
            self._published += 1
            self._cond.notify_all()

    def _outstanding(self, completed: int) -> bool:
        if self._gates is None:
            return False
        return any(g <= completed for g in self._gates[self._published:])

    def poll(self, completed_iterations: int, timeout: float = 60.0) -> _Update | None:
        """Newest visible update, or None. Consumes everything visible."""
        with self._cond:
            deadline = time.monotonic() + timeout
            while self._outstanding(completed_iterations):
                remaining = deadline - time.monotonic()
                if remaining <= 0 or not self._cond.wait(remaining):
                    raise RuntimeError("gated mailbox update never arrived")
            visible = [e for e in self._entries if e[1] <= completed_iterations]
            if not visible:
                return None
            self._entries = [e for e in self._entries
                             if e[1] > completed_iterations]
            newest = max(visible, key=lambda e: e[0])[2]
            return newest if newest.config is not None else None

    def set_converged(self) -> None:
        self.converged.set()
        with self._cond:
            self._cond.notify_all()


def default_rhs(m: AnyMatrix, params: GmresParams) -> np.ndarray:
    """b = A·1 for a guaranteed-consistent system, or a seeded random vector."""
    if params.rhs == "random":
        return np.random.default_rng(params.seed).standard_normal(m.nrows)
    csr = m if isinstance(m, CsrMatrix) else convert(m, FormatTag.CSR)
    return spmv_reference(csr, np.ones(m.ncols))


def _as_rhs(m: AnyMatrix, b, params: GmresParams) -> np.ndarray:
    if b is None:
        return default_rhs(m, params)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if b.shape != (m.nrows,):
        raise ValueError(f"b must have length {m.nrows}, got {b.shape}")
    return b


def _check_finite(value: float, what: str, iteration: int):
    if not np.isfinite(value):
        raise SolverNumericalError(
            f"non-finite {what} at iteration {iteration}; aborting")


def _solve_y(H, g, j, V) -> np.ndarray:
    """Back-substitute the rotated triangular system, expand into x-space."""
    y = np.zeros(j + 1)
    for i in range(j, -1, -1):
        y[i] = (g[i] - np.dot(H[i, i + 1:j + 1], y[i + 1:j + 1])) / H[i, i]
    return V[:j + 1].T @ y


def _gmres_core(executor: SpmvExecutor, b: np.ndarray, params: GmresParams,
                mailbox: ConfigMailbox | None,
                matvec_probe: Callable[[int, SpmvConfig], None] | None,
                ) -> tuple[SolveReport, bool]:
    """Shared GMRES loop. Returns (report, any_swap_applied).

    Restarted GMRES with modified Gram-Schmidt Arnoldi and Givens-rotation
    least squares. Exactly one kernel call per Arnoldi step; restarts and
    convergence confirmation each add one explicit-residual call. The mailbox
    is polled only between steps, never inside one, and never again after the
    convergence check succeeds.
    """
    n = b.shape[0]
    if executor.matrix.nrows != n or executor.matrix.ncols != n:
        raise ValueError("GMRES requires a square matrix matching b")
    m = params.restart_m
    timeline = [ConfigSwap(1, executor.config, 0.0)]
    history: list[float] = []
    completed = 0
    swapped = False
    x = np.zeros(n, dtype=np.float64)
    bnorm = float(np.linalg.norm(b))

    def matvec(v: np.ndarray, iteration: int) -> np.ndarray:
        # `iteration` labels which step's configuration this call runs under,
        # for the boundary-only swap probe.
        if matvec_probe is not None:
            matvec_probe(iteration, executor.config)
        return executor.matvec(v)

    def poll_mailbox():
        nonlocal executor, swapped
        if mailbox is None:
            return
        update = mailbox.poll(completed)
        if update is not None and update.config != executor.config:
            executor = SpmvExecutor(update.config, update.matrix,
                                    executor.workers)
            timeline.append(ConfigSwap(completed + 1, update.config,
                                       update.prep_seconds))
            swapped = True

    def finish(converged: bool, final_res: float | None) -> SolveReport:
        return SolveReport(converged=converged, iterations=completed,
                           residual_history=history, config_timeline=timeline,
                           advisor_outcome=ADVISOR_UNUSED, solution=x,
                           final_residual=final_res)

    if bnorm == 0.0:
        if params.max_iters >= 1:
            history.append(0.0)  # x = 0 solves the system exactly
        return finish(True, 0.0), swapped
    if params.max_iters == 0:
        return finish(False, None), swapped

    while completed < params.max_iters:
        r = b - matvec(x, completed + 1)
        beta = float(np.linalg.norm(r))
        _check_finite(beta, "residual norm", completed)
        if beta / bnorm <= params.tol:
            return finish(True, beta / bnorm), swapped
        V = np.empty((m + 1, n), dtype=np.float64)
        V[0] = r / beta
        H = np.zeros((m + 1, m), dtype=np.float64)
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        applied = False  # x already advanced for this cycle
        j = -1
        for j in range(m):
            if completed >= params.max_iters:
                j -= 1  # this column was never built
                break
            w = matvec(V[j], completed + 1)
            for i in range(j + 1):  # modified Gram-Schmidt
                H[i, j] = float(np.dot(V[i], w))
                w -= H[i, j] * V[i]
            hnext = float(np.linalg.norm(w))
            _check_finite(hnext, "Arnoldi norm", completed + 1)
            for i in range(j):  # apply accumulated Givens rotations
                hi = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = hi
            denom = float(np.hypot(H[j, j], hnext))
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = H[j, j] / denom, hnext / denom
            H[j, j] = cs[j] * H[j, j] + sn[j] * hnext
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            completed += 1
            estimate = abs(g[j + 1]) / bnorm
            _check_finite(estimate, "residual estimate", completed)
            history.append(estimate)

            if hnext == 0.0:
                # Arnoldi breakdown: the Krylov space became invariant, so the
                # least-squares solution is exact up to rounding. A zero pivot
                # means even that solution is undefined (zero column).
                if H[j, j] != 0.0:
                    x = x + _solve_y(H, g, j, V)
                final = float(np.linalg.norm(b - matvec(x, completed))) / bnorm
                if final <= params.tol:
                    return finish(True, final), swapped
                raise StagnationError(
                    f"Arnoldi breakdown at iteration {completed} with relative "
                    f"residual {final:.3e} above tol {params.tol:.3e}")
            if estimate <= params.tol:
                x = x + _solve_y(H, g, j, V)
                final = float(np.linalg.norm(b - matvec(x, completed))) / bnorm
                if final <= params.tol:
                    return finish(True, final), swapped
                # Estimate drifted from the true residual: restart from x.
                applied = True
                poll_mailbox()
                break
            poll_mailbox()
            V[j + 1] = w / hnext
        if j >= 0 and not applied:
            x = x + _solve_y(H, g, j, V)
    final = float(np.linalg.norm(b - matvec(x, completed))) / bnorm
    return finish(final <= params.tol, final), swapped


def gmres_solve(m: AnyMatrix, b=None, params: GmresParams | None = None,
                executor: SpmvExecutor | None = None, *,
                workers: int | None = None,
                matvec_probe=None) -> SolveReport:
    """Solve A x = b with a fixed SpMV configuration (default config if unset).

    Breakdown with the residual still above tolerance raises StagnationError;
    non-finite values raise SolverNumericalError.
    """
    params = params or GmresParams()
    b = _as_rhs(m, b, params)
    if executor is None:
        executor = SpmvExecutor.for_matrix(m, DEFAULT_CONFIG, workers)
    t0 = time.perf_counter()
    report, _ = _gmres_core(executor, b, params, None, matvec_probe)
    report.wall_seconds = time.perf_counter() - t0
    report.mode = "fixed"
    return report


class _AdvisorCancelled(Exception):
    pass


class _Advisor:
    """Concurrent feature-extraction and cascade-prediction task."""

    def __init__(self, matrix: AnyMatrix, models: CascadeModelSet,
                 mailbox: ConfigMailbox, workers: int | None,
                 expected_publishes: int | None):
        self.matrix = matrix
        self.models = models
        self.mailbox = mailbox
        self.workers = workers
        self.expected = expected_publishes
        self.outcome = ADVISOR_CANCELLED
        self.error: str | None = None
        self.published = 0
        self.final_config: SpmvConfig | None = None
        self.finished_at: float | None = None
        self.thread = threading.Thread(target=self._run, name="spmv-advisor",
                                       daemon=True)

    def start(self):
        self.thread.start()

    def join(self):
        self.thread.join()

    def _publish(self, config, rep, prep_seconds):
        self.mailbox.publish(_Update(config, rep, prep_seconds))
        self.published += 1

    def _run(self):
        cancel = self.mailbox.converged
        try:
            self._pipeline(cancel)
        except _AdvisorCancelled:
            self.outcome = ADVISOR_CANCELLED
        except Exception as exc:  # prediction must never break the solve
            self.error = f"{type(exc).__name__}: {exc}"
            self.outcome = ADVISOR_CANCELLED
        finally:
            # Fill any injected-delay slots so a gated solver never blocks on
            # a publish that will no longer happen.
            if self.expected is not None:
                while self.published < self.expected:
                    self._publish(None, None, 0.0)
            self.finished_at = time.perf_counter()

    def _pipeline(self, cancel: threading.Event):
        if cancel.is_set():
            return
        reps: dict[FormatTag, AnyMatrix] = {format_of(self.matrix): self.matrix}
        t0 = time.perf_counter()
        csr = self.matrix if isinstance(self.matrix, CsrMatrix) \
            else convert(self.matrix, FormatTag.CSR)
        reps[FormatTag.CSR] = csr
        csr_prep = time.perf_counter() - t0
        fv = extract_features(csr, cancel)
        if fv is None:
            return

        def on_decision(decision):
            if cancel.is_set():
                raise _AdvisorCancelled()
            cfg = decision.implied_config()
            if cfg.format in reps:
                rep = reps[cfg.format]
                # The CSR copy was built for feature extraction; its cost is
                # still charged to the first swap that uses it.
                prep = csr_prep if cfg.format is FormatTag.CSR else 0.0
            else:
                t = time.perf_counter()
                try:
                    rep = convert(self.matrix, cfg.format)
                except (SpmvTuneError, MemoryError) as exc:
                    self.error = str(exc) or type(exc).__name__
                    return  # skip this stage; the solver keeps its config
                prep = time.perf_counter() - t
                reps[cfg.format] = rep
            self._publish(cfg, rep, prep)

        self.final_config = cascade_predict(self.models, fv, on_decision)
        self.outcome = ADVISOR_COMPLETED


def async_solve(m: AnyMatrix, b=None, params: GmresParams | None = None,
                models: CascadeModelSet | None = None, *,
                workers: int | None = None,
                delay_injection: list[int] | None = None,
                matvec_probe=None) -> SolveReport:
    """Solve while a concurrent advisor predicts and hot-swaps the SpMV config.

    The solver starts under the default configuration; the advisor publishes
    one ready-to-run update per cascade stage and the solver applies the
    newest visible update at each iteration boundary. ``delay_injection``
    gates the i-th published update until the solver has completed the given
    iteration count, making swap timing deterministic for tests. Advisor
    failures are swallowed: the solve continues on its current configuration
    and the failure is recorded on the report.
    """
    if models is None:
        raise ValueError("async_solve requires a CascadeModelSet")
    params = params or GmresParams()
    b = _as_rhs(m, b, params)
    t0 = time.perf_counter()
    executor = SpmvExecutor.for_matrix(m, DEFAULT_CONFIG, workers)
    mailbox = ConfigMailbox(expected_gates=delay_injection)
    advisor = _Advisor(executor.matrix, models, mailbox, workers,
                       expected_publishes=(len(delay_injection)
                                           if delay_injection else None))
    advisor.start()
    try:
        report, swapped = _gmres_core(executor, b, params, mailbox, matvec_probe)
    finally:
        cancel_at = time.perf_counter()
        mailbox.set_converged()
        advisor.join()
    report.wall_seconds = time.perf_counter() - t0
    report.advisor_join_seconds = max(0.0, (advisor.finished_at or cancel_at)
                                      - cancel_at)
    if advisor.outcome == ADVISOR_COMPLETED:
        report.advisor_outcome = ADVISOR_COMPLETED if swapped else ADVISOR_UNUSED
    else:
        report.advisor_outcome = advisor.outcome
    report.advisor_error = advisor.error
    report.mode = "async"
    return report


def sequential_predict_solve(m: AnyMatrix, b=None,
                             params: GmresParams | None = None,
                             models: CascadeModelSet | None = None, *,
                             workers: int | None = None) -> SolveReport:
    """Predict first, then solve: features, full cascade, conversion, GMRES.

    Per-phase wall times land in ``report.phases`` so the overlap benefit of
    :func:`async_solve` can be compared honestly.
    """
    if models is None:
        raise ValueError("sequential_predict_solve requires a CascadeModelSet")
    params = params or GmresParams()
    b = _as_rhs(m, b, params)
    phases: dict[str, float] = {}
    t_start = time.perf_counter()

    t = time.perf_counter()
    csr = m if isinstance(m, CsrMatrix) else convert(m, FormatTag.CSR)
    fv = extract_features(csr)
    phases["features"] = time.perf_counter() - t

    t = time.perf_counter()
    final_cfg = cascade_predict(models, fv)
    phases["inference"] = time.perf_counter() - t

    t = time.perf_counter()
    if final_cfg.format is FormatTag.CSR:
        rep = csr
    elif final_cfg.format is format_of(m):
        rep = m
    else:
        rep = convert(m, final_cfg.format)
    conversion = time.perf_counter() - t
    phases["conversion"] = conversion

    t = time.perf_counter()
    executor = SpmvExecutor(final_cfg, rep, workers)
    report, _ = _gmres_core(executor, b, params, None, None)
    phases["solve"] = time.perf_counter() - t

    report.config_timeline = [ConfigSwap(1, final_cfg, conversion)]
    report.wall_seconds = time.perf_counter() - t_start
    report.phases = phases
    report.mode = "sequential"
    return report
