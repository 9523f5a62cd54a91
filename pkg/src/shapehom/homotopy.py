"""Predictor-corrector continuation for convex homotopies ``H = G + t (F - G)``.

The engine is problem-agnostic.  A problem supplies a corrector, the
derivative data at an accepted state (a :class:`DerivativeContext`), a way to
apply a weighted sum of path derivatives, and a norm.  Path derivatives of
any order come from differentiating ``E(x(t), t) + t D(x(t)) = 0`` with
``E = G + t D`` and ``D = F - G``; the n-th total derivative is

    sum_{pi in P(n)} E^{(|pi|)}[x^{[|B|]} : B in pi]
      + n * sum_{pi in P(n-1)} D^{(|pi|)}[x^{[|B|]} : B in pi] = 0

where ``P(n)`` is the set of set partitions of ``{1..n}``.  The partition
with a single block contributes ``E_x x^{[n]}``; every other term is known.
Since the forms are symmetric, partitions are grouped by their multiset of
block sizes.
"""

from __future__ import annotations

import csv
import functools
import io
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

DT_MIN = 1e-8


class HomotopyError(RuntimeError):
    pass


# ---------------------------------------------------------------- partitions

@functools.lru_cache(maxsize=None)
def integer_partitions(n: int) -> tuple:
    """Partitions of n as non-increasing tuples."""
    out = []

    def rec(rem, maxpart, cur):
        if rem == 0:
            out.append(tuple(cur))
            return
        for p in range(min(rem, maxpart), 0, -1):
            rec(rem - p, p, cur + [p])

    rec(n, n, [])
    return tuple(out)


def set_partition_count(sizes) -> int:
    """Number of set partitions of {1..n} whose block sizes are ``sizes``."""
    n = sum(sizes)
    c = math.factorial(n)
    for s in sizes:
        c //= math.factorial(s)
    for s in set(sizes):
        c //= math.factorial(sizes.count(s))
    return c


def path_derivative_rhs(n: int, lifted: list, chain_E: Callable, chain_D: Callable):
    """Known part of the n-th differentiated equation.

    ``lifted[i-1]`` is the i-th path derivative in the form the multilinear
    maps accept.  ``chain_E(blocks)`` returns the ``len(blocks)``-th derivative
    of the equation map ``E`` applied to the blocks, likewise ``chain_D``.
    For a stationarity equation ``dJ[.] = 0`` this is ``d^{m+1} J[blocks, .]``.
    """
    rhs = None

    def acc(v, c):
        nonlocal rhs
        rhs = c * v if rhs is None else rhs + c * v

    # E_x x^{[n]} is the single-block term; the remaining E terms have >= 2 blocks
    for sizes in integer_partitions(n):
        if len(sizes) == 1:
            continue
        acc(chain_E([lifted[s - 1] for s in sizes]), set_partition_count(list(sizes)))
    if n == 1:
        acc(chain_D([]), 1)
    else:
        for sizes in integer_partitions(n - 1):
            acc(chain_D([lifted[s - 1] for s in sizes]), n * set_partition_count(list(sizes)))
    return rhs


class DerivativeContext:
    """Derivative data of a problem at a fixed accepted state.

    Subclasses implement ``solve`` (returns ``x`` with ``E_x x = -rhs``),
    ``chain_E``, ``chain_D`` and ``lift``.  ``derivatives(n)`` caches results,
    so re-weighting after a failed step costs no further solves.
    """

    def __init__(self):
        self.derivs: list = []
        self.lifted: list = []
        self.n_solves = 0

    def solve(self, rhs):
        raise NotImplementedError

    def chain_E(self, blocks):
        raise NotImplementedError

    def chain_D(self, blocks):
        raise NotImplementedError

    def lift(self, d):
        return d

    def derivatives(self, n: int) -> list:
        while len(self.derivs) < n:
            k = len(self.derivs) + 1
            rhs = path_derivative_rhs(k, self.lifted, self.chain_E, self.chain_D)
            d = self.solve(rhs)
            self.n_solves += 1
            self.derivs.append(d)
            self.lifted.append(self.lift(d))
        return self.derivs[:n]


@dataclass
class CorrectorResult:
    state: Any
    success: bool
    iterations: int = 0
    residual: float = 0.0
    reason: str | None = None


class HomotopyProblem:
    """Interface for continuation problems."""

    def correct(self, state, t: float, tol: float) -> CorrectorResult:
        raise NotImplementedError

    def derivative_context(self, state, t: float) -> DerivativeContext:
        raise NotImplementedError

    def apply_predictor(self, state, terms):
        """``state + sum w_i d_i``; may return None if the result is invalid."""
        raise NotImplementedError

    def derivative_norm(self, state, d) -> float:
        raise NotImplementedError

    def secant(self, state, prev_state, t, t_prev, dt):
        raise NotImplementedError("secant predictor not available for this problem")


# ---------------------------------------------------------------- step sizes

@dataclass(frozen=True)
class Fixed:
    dt0: float = 1.0
    gamma_down: float = 0.5
    gamma_up: float = 1.75

    def __post_init__(self):
        if not (self.dt0 > 0 and 0 < self.gamma_down < 1 and self.gamma_up > 1):
            raise ValueError("Fixed needs dt0 > 0, 0 < gamma_down < 1 < gamma_up")


@dataclass(frozen=True)
class Agile:
    alpha: float = 0.02

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("Agile needs alpha > 0")


@dataclass(frozen=True)
class AgileAdaptive:
    alpha0: float = 0.02
    alpha_down: float = 0.5
    alpha_up: float = 1.1

    def __post_init__(self):
        if not (self.alpha0 > 0 and 0 < self.alpha_down < 1 and self.alpha_up > 1):
            raise ValueError("AgileAdaptive needs alpha0 > 0, 0 < alpha_down < 1 < alpha_up")


def is_agile(strategy) -> bool:
    return isinstance(strategy, (Agile, AgileAdaptive))


def agile_step(q: int, alpha: float, norm: float, cap: float = 1.0) -> float:
    """Step whose leading Taylor remainder of the order-q predictor equals alpha."""
    if norm == 0.0:
        return cap
    dt = (math.factorial(q + 1) * alpha) ** (1.0 / (q + 1)) * norm ** (-1.0 / (q + 1))
    return min(dt, cap)


class StepController:
    """Stateful step-size rule.

    ``first(norm)`` gives the step for a fresh accepted state, ``after_failure``
    the step for a retry from the same state.
    """

    def __init__(self, strategy, q: int):
        self.strategy = strategy
        self.q = q
        self.alpha = strategy.alpha0 if isinstance(strategy, AgileAdaptive) else getattr(strategy, "alpha", None)
        self.alphas = [self.alpha]
        self.dt = None

    def first(self, norm: float | None, succeeded_before: bool) -> float:
        s = self.strategy
        if isinstance(s, Fixed):
            self.dt = s.dt0 if self.dt is None else self.dt * s.gamma_up
        else:
            if isinstance(s, AgileAdaptive) and succeeded_before:
                self.alpha *= s.alpha_up
                self.alphas.append(self.alpha)
            self.dt = agile_step(self.q, self.alpha, norm)
        return self.dt

    def after_failure(self, norm: float | None) -> float:
        s = self.strategy
        if isinstance(s, Fixed):
            self.dt *= s.gamma_down
        elif isinstance(s, AgileAdaptive):
            self.alpha *= s.alpha_down
            self.alphas.append(self.alpha)
            self.dt = agile_step(self.q, self.alpha, norm)
        else:
            self.dt *= 0.5
        return self.dt

    def record_used(self, dt: float) -> None:
        self.dt = dt


@dataclass(frozen=True)
class ToleranceRamp:
    start: float = 1e-4
    end: float = 1e-10

    def __call__(self, t: float) -> float:
        # exact at the end points and for a constant ramp (also when infinite)
        if self.start == self.end or t == 0.0:
            return self.start
        if t == 1.0:
            return self.end
        return (1.0 - t) * self.start + t * self.end


# ---------------------------------------------------------------- trace

TRACE_COLUMNS = ("attempt", "t_target", "dt", "order", "accepted", "newton_iters",
                 "residual", "n_pred_solves", "t_pred_ms", "t_corr_ms")


@dataclass
class TraceRecord:
    attempt: int
    t_target: float
    dt: float
    order: Any
    accepted: int          # 1 accepted, 0 failed, -1 rejected for spacing
    newton_iters: int
    residual: float
    n_pred_solves: int
    t_pred_ms: float
    t_corr_ms: float
    reason: str | None = None


@dataclass
class HomotopyTrace:
    records: list = field(default_factory=list)

    def accepted_t(self) -> list:
        return [r.t_target for r in self.records if r.accepted == 1]

    @property
    def n_attempts(self) -> int:
        return len(self.records)

    @property
    def n_accepted(self) -> int:
        return sum(r.accepted == 1 for r in self.records)

    @property
    def visited(self) -> int:
        """Homotopy values at which a corrector was attempted or a prediction made."""
        return len(self.records)

    def to_csv(self, deterministic: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.records:
            tp, tc = (0.0, 0.0) if deterministic else (r.t_pred_ms, r.t_corr_ms)
            w.writerow([r.attempt, repr(float(r.t_target)), repr(float(r.dt)), r.order, r.accepted,
                        r.newton_iters, repr(float(r.residual)), r.n_pred_solves,
                        f"{tp:.3f}", f"{tc:.3f}"])
        return buf.getvalue()

    def write_csv(self, path, deterministic: bool = False) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv(deterministic))


@dataclass
class HomotopyResult:
    state: Any
    t: float
    success: bool
    trace: HomotopyTrace
    reason: str | None = None
    initial: CorrectorResult | None = None


# ---------------------------------------------------------------- engine

def predict(problem: HomotopyProblem, state, derivs: list, dt: float, order):
    """Taylor predictor ``x + sum_{i<=q} dt^i / i! x^{[i]}`` (order 0: identity)."""
    if order == 0 or dt == 0:
        return problem.apply_predictor(state, [])
    terms = [(d, dt ** i / math.factorial(i)) for i, d in enumerate(derivs[:order], start=1)]
    return problem.apply_predictor(state, terms)


def run(problem: HomotopyProblem, x0, q, strategy, ramp: ToleranceRamp = ToleranceRamp(),
        correct_initial: bool = True, accept_hook: Callable | None = None,
        on_accept: Callable | None = None, dt_min: float = DT_MIN,
        max_attempts: int = 100000, t0: float = 0.0, t_end: float = 1.0) -> HomotopyResult:
    """Follow the homotopy path from ``t0`` to ``t_end``.

    ``q`` is a predictor order (0..K) or ``"secant"``.  ``accept_hook(prev,
    new, t)`` may veto a corrector-accepted state, which is then retried with
    a smaller step and logged with ``accepted = -1``.  ``on_accept(k, t,
    state, record)`` runs after every accepted step.
    """
    trace = HomotopyTrace()
    secant = q == "secant"
    order_q = 1 if secant else int(q)
    if secant and is_agile(strategy):
        raise ValueError("agile step sizes need a Taylor predictor")
    init = None
    state = x0
    if correct_initial:
        init = problem.correct(x0, t0, ramp(t0))
        if not init.success:
            return HomotopyResult(x0, t0, False, trace, f"initial corrector: {init.reason}", init)
        state = init.state
    ctrl = StepController(strategy, order_q)
    t = t0
    prev = None             # (state, t) of the previous accepted point, for the secant
    succeeded = False
    attempt = 0
    if is_agile(strategy):
        n_derivs = order_q + 1
    else:
        n_derivs = 0 if secant else order_q
    while t < t_end:
        tp0 = time.perf_counter()
        solves_before = 0
        ctx = None
        derivs = []
        if n_derivs:
            ctx = problem.derivative_context(state, t)
            solves_before = ctx.n_solves
            derivs = ctx.derivatives(n_derivs)
        norm = problem.derivative_norm(state, derivs[order_q]) if is_agile(strategy) else None
        dt = ctrl.first(norm, succeeded)
        t_pred_first = (time.perf_counter() - tp0) * 1e3
        new_solves = (ctx.n_solves - solves_before) if ctx else 0
        first_try = True
        while True:
            if attempt >= max_attempts:
                return HomotopyResult(state, t, False, trace, "max_attempts", init)
            dt = min(dt, t_end - t)
            if dt < dt_min:
                return HomotopyResult(state, t, False, trace, "dt_min", init)
            ctrl.record_used(dt)
            t_next = t_end if dt >= t_end - t else t + dt
            tp = time.perf_counter()
            if secant:
                if prev is None:
                    pred, order_used = problem.apply_predictor(state, []), 0
                else:
                    pred, order_used = problem.secant(state, prev[0], t, prev[1], dt), "secant"
            else:
                pred, order_used = predict(problem, state, derivs, dt, order_q), order_q
            t_pred = (time.perf_counter() - tp) * 1e3 + (t_pred_first if first_try else 0.0)
            attempt += 1
            rec = TraceRecord(attempt, t_next, dt, order_used, 0, 0, math.nan,
                              new_solves if first_try else 0, t_pred, 0.0)
            first_try = False
            trace.records.append(rec)
            if pred is None:
                rec.reason = "predictor"
                dt = ctrl.after_failure(norm)
                continue
            tc = time.perf_counter()
            res = problem.correct(pred, t_next, ramp(t_next))
            rec.t_corr_ms = (time.perf_counter() - tc) * 1e3
            rec.newton_iters = res.iterations
            rec.residual = res.residual
            if not res.success:
                rec.reason = res.reason
                dt = ctrl.after_failure(norm)
                continue
            if accept_hook is not None and not accept_hook(state, res.state, t_next):
                rec.accepted = -1
                rec.reason = "spacing"
                dt = ctrl.after_failure(norm)
                continue
            rec.accepted = 1
            prev = (state, t)
            state, t = res.state, t_next
            succeeded = True
            if on_accept is not None:
                on_accept(trace.n_accepted, t, state, rec)
            break
    return HomotopyResult(state, t, True, trace, None, init)


# ---------------------------------------------------------------- scalar demo

def _F_derivative(x: float, m: int) -> float:
    """m-th derivative of F(x) = x^5 + x - exp(-x)."""
    if m == 0:
        return x ** 5 + x - math.exp(-x)
    poly = math.factorial(5) // math.factorial(5 - m) * x ** (5 - m) if m <= 5 else 0.0
    lin = 1.0 if m == 1 else 0.0
    return poly + lin - (-1) ** m * math.exp(-x)


def _G_derivative(x: float, m: int) -> float:
    """m-th derivative of G(x) = x."""
    return x if m == 0 else (1.0 if m == 1 else 0.0)


class _ScalarContext(DerivativeContext):
    def __init__(self, problem: "ScalarProblem", x: float, t: float):
        super().__init__()
        self.p, self.x, self.t = problem, x, t
        self.Ex = problem.E(x, t, 1)
        if self.Ex == 0:
            raise HomotopyError("singular path derivative system")

    def solve(self, rhs):
        return -rhs / self.Ex

    def chain_E(self, blocks):
        return self.p.E(self.x, self.t, len(blocks)) * math.prod(blocks)

    def chain_D(self, blocks):
        return self.p.D(self.x, len(blocks)) * math.prod(blocks)


@dataclass
class ScalarProblem(HomotopyProblem):
    """Root-finding homotopy ``t F(x) + (1 - t) G(x) = 0`` for F(x) = x^5 + x - e^{-x}, G(x) = x."""

    iter_max: int = 10
    divergence_factor: float = 10.0
    F: Callable = _F_derivative
    G: Callable = _G_derivative

    def D(self, x, m):
        return self.F(x, m) - self.G(x, m)

    def E(self, x, t, m):
        return self.G(x, m) + t * self.D(x, m)

    def H(self, x, t):
        return self.E(x, t, 0)

    def correct(self, state, t, tol):
        if math.isinf(tol):
            return CorrectorResult(state, True, 0, 0.0)
        x = float(state)
        first = None
        for j in range(self.iter_max):
            dx = -self.H(x, t) / self.E(x, t, 1)
            r = abs(dx)
            if not math.isfinite(r):
                return CorrectorResult(x, False, j + 1, r, "divergence")
            first = r if first is None else first
            if r > self.divergence_factor * first:
                return CorrectorResult(x, False, j + 1, r, "divergence")
            x += dx
            if r < tol:
                return CorrectorResult(x, True, j + 1, r)
        return CorrectorResult(x, False, self.iter_max, r, "iter_max")

    def derivative_context(self, state, t):
        return _ScalarContext(self, float(state), t)

    def apply_predictor(self, state, terms):
        return float(state) + sum(w * d for d, w in terms)

    def derivative_norm(self, state, d):
        return abs(d)

    def secant(self, state, prev_state, t, t_prev, dt):
        return state + dt * (state - prev_state) / (t - t_prev)


def scalar_F(x: float) -> float:
    return _F_derivative(x, 0)


def bisect_root(f: Callable, lo: float, hi: float, tol: float = 1e-15) -> float:
    """Plain bisection; used as an independent oracle."""
    flo = f(lo)
    if flo * f(hi) > 0:
        raise ValueError("root not bracketed")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def scalar_path_point(t: float, x_guess: float = 0.0, tol: float = 1e-15) -> float:
    """Tightly corrected point on the scalar path at t."""
    p = ScalarProblem(iter_max=50)
    res = p.correct(x_guess, t, tol)
    if not res.success:
        # Newton stagnates at round-off; accept when the update is tiny
        if res.residual < 1e-13:
            return res.state
        raise HomotopyError(f"scalar corrector failed at t={t}")
    return res.state


def predictor_errors(problem: HomotopyProblem, state, t: float, q: int, dts, reference: Callable):
    """Distance between the order-q prediction and ``reference(pred, t + dt)``."""
    ctx = problem.derivative_context(state, t)
    derivs = ctx.derivatives(q)
    out = []
    for dt in dts:
        pred = predict(problem, state, derivs, dt, q)
        out.append(reference(pred, t + dt))
    return np.array(out)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x)), np.log(np.asarray(y)), 1)[0])
