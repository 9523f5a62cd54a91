import math

import numpy as np
import pytest

from shapehom.homotopy import (Agile, AgileAdaptive, CorrectorResult, DerivativeContext, Fixed,
                               HomotopyProblem, ScalarProblem, StepController, ToleranceRamp,
                               agile_step, bisect_root, integer_partitions, loglog_slope,
                               path_derivative_rhs, predict, predictor_errors, run, scalar_F,
                               scalar_path_point, set_partition_count)

from conftest import fd_convergence

SCALAR_ROOT = 0.538420519974006


# ---------------------------------------------------------------- toy problems

class _PolyContext(DerivativeContext):
    def __init__(self, coeffs, t):
        super().__init__()
        self.coeffs, self.t = coeffs, t

    def derivatives(self, n):
        # x(t) = sum c_i t^i, differentiated exactly
        p = np.polynomial.Polynomial(self.coeffs)
        out = [float(p.deriv(k)(self.t)) for k in range(1, n + 1)]
        self.n_solves += n - len(self.derivs)
        self.derivs = out
        return out


class PolyPath(HomotopyProblem):
    """H(x, t) = x - p(t); the path is x = p(t)."""

    def __init__(self, coeffs):
        self.coeffs = coeffs

    def path(self, t):
        return float(np.polynomial.Polynomial(self.coeffs)(t))

    def correct(self, state, t, tol):
        dx = self.path(t) - state
        return CorrectorResult(state + dx, True, 1, abs(dx))

    def derivative_context(self, state, t):
        return _PolyContext(self.coeffs, t)

    def apply_predictor(self, state, terms):
        return state + sum(w * d for d, w in terms)

    def derivative_norm(self, state, d):
        return abs(d)


# ---------------------------------------------------------------- combinatorics

def test_integer_partitions_enumeration():
    assert integer_partitions(4) == ((4,), (3, 1), (2, 2), (2, 1, 1), (1, 1, 1, 1))
    # partition numbers p(n)
    assert [len(integer_partitions(n)) for n in range(1, 9)] == [1, 2, 3, 5, 7, 11, 15, 22]


def test_set_partition_counts_sum_to_bell_numbers():
    bell = [1, 2, 5, 15, 52, 203, 877]
    for n, b in enumerate(bell, start=1):
        assert sum(set_partition_count(list(s)) for s in integer_partitions(n)) == b
    assert set_partition_count([2, 1]) == 3
    assert set_partition_count([2, 2]) == 3
    assert set_partition_count([2, 1, 1]) == 6


def _record_rhs(n, lifted, e_vals, d_vals):
    """Evaluate the RHS with scalar derivatives e_vals[m], d_vals[m] of E and D."""
    return path_derivative_rhs(n, lifted, lambda b: e_vals[len(b)] * math.prod(b),
                               lambda b: d_vals[len(b)] * math.prod(b))


def test_path_rhs_matches_hand_expansion():
    e = {2: 0.7, 3: -1.3, 4: 2.9}
    d = {0: 0.4, 1: 1.1, 2: -0.6, 3: 0.25}
    x1, x2, x3 = 0.9, -0.35, 1.7
    assert _record_rhs(1, [], e, d) == pytest.approx(d[0], rel=1e-15)
    assert _record_rhs(2, [x1], e, d) == pytest.approx(e[2] * x1 ** 2 + 2 * d[1] * x1, rel=1e-14)
    hand3 = e[3] * x1 ** 3 + 3 * e[2] * x1 * x2 + 3 * d[2] * x1 ** 2 + 3 * d[1] * x2
    assert _record_rhs(3, [x1, x2], e, d) == pytest.approx(hand3, rel=1e-14)
    hand4 = (e[4] * x1 ** 4 + 6 * e[3] * x1 ** 2 * x2 + 3 * e[2] * x2 ** 2 + 4 * e[2] * x1 * x3
             + 4 * (d[3] * x1 ** 3 + 3 * d[2] * x1 * x2 + d[1] * x3))
    assert _record_rhs(4, [x1, x2, x3], e, d) == pytest.approx(hand4, rel=1e-14)


# ---------------------------------------------------------------- step sizes

def test_strategy_validation():
    with pytest.raises(ValueError):
        Fixed(dt0=0)
    with pytest.raises(ValueError):
        Fixed(gamma_up=1.0)
    with pytest.raises(ValueError):
        Agile(alpha=0)
    with pytest.raises(ValueError):
        AgileAdaptive(alpha_down=1.0)


def test_agile_formula_examples():
    assert agile_step(1, 0.02, 1.0) == pytest.approx(0.2, rel=1e-14)
    assert agile_step(2, 0.02, 8.0) == pytest.approx(0.12 ** (1 / 3) / 2, rel=1e-14)
    assert agile_step(2, 0.02, 8.0) == pytest.approx(0.24662120743304702, rel=1e-14)
    assert agile_step(1, 0.02, 0.0) == 1.0
    assert agile_step(1, 0.02, 1e-12) == 1.0


def test_fixed_sequence_after_failure_and_success():
    c = StepController(Fixed(), 1)
    assert c.first(None, False) == 1.0
    assert c.after_failure(None) == 0.5
    c.record_used(0.5)
    assert c.first(None, True) == pytest.approx(0.875, rel=1e-15)


def test_agile_adaptive_alpha_sequence():
    c = StepController(AgileAdaptive(0.02, 0.5, 1.1), 1)
    c.first(1.0, False)
    c.after_failure(1.0)
    c.first(1.0, True)
    c.first(1.0, True)
    assert c.alphas == pytest.approx([0.02, 0.01, 0.011, 0.0121], rel=1e-14)
    assert c.dt == pytest.approx(agile_step(1, 0.0121, 1.0), rel=1e-15)


def test_agile_failure_halves_step():
    c = StepController(Agile(0.02), 1)
    dt = c.first(1.0, False)
    assert c.after_failure(1.0) == pytest.approx(dt / 2, rel=1e-15)


def test_tolerance_ramp_endpoints():
    r = ToleranceRamp()
    assert r(0.0) == 1e-4 and r(1.0) == 1e-10
    assert r(0.5) == pytest.approx(0.5 * (1e-4 + 1e-10), rel=1e-15)
    assert ToleranceRamp(1e-10, 1e-10)(0.37) == pytest.approx(1e-10, rel=1e-15)


# ---------------------------------------------------------------- predictor

def test_linear_path_first_order_prediction_is_exact():
    p = PolyPath([0.0, 2.5])
    ctx = p.derivative_context(0.75, 0.3)
    for dt in (0.01, 0.3, 0.7):
        assert predict(p, 0.75, ctx.derivatives(1), dt, 1) == pytest.approx(p.path(0.3 + dt), abs=1e-14)


def test_quadratic_path_second_order_prediction_is_exact():
    p = PolyPath([0.0, 0.0, 1.0])
    ctx = p.derivative_context(0.09, 0.3)
    d = ctx.derivatives(2)
    for dt in (0.05, 0.4, 0.7):
        assert abs(predict(p, 0.09, d, dt, 2) - (0.3 + dt) ** 2) <= 1e-14
    # order 1 leaves exactly the quadratic remainder
    assert predict(p, 0.09, d, 0.4, 1) == pytest.approx(0.49 - 0.16, abs=1e-14)


def test_order_zero_and_zero_step_are_identity():
    p = PolyPath([0.0, 1.0])
    assert predict(p, 0.2, [1.0], 0.5, 0) == 0.2
    assert predict(p, 0.2, [1.0], 0.0, 1) == 0.2


def test_exact_predictor_needs_no_correction():
    p = PolyPath([0.0, 0.0, 1.0])
    res = run(p, 0.0, 2, Fixed(0.25), ToleranceRamp(1e-12, 1e-12))
    assert res.success and res.t == 1.0
    assert max(r.residual for r in res.trace.records) <= 1e-14


def test_single_step_run():
    p = PolyPath([0.0, 3.0])
    res = run(p, 0.0, 1, Fixed(1.0))
    assert res.success and res.trace.n_attempts == 1 and res.trace.n_accepted == 1
    rec = res.trace.records[0]
    assert rec.t_target == 1.0 and rec.dt == 1.0 and rec.order == 1 and rec.n_pred_solves == 1
    assert res.state == pytest.approx(3.0, abs=1e-15)


def test_order_zero_uses_no_solves():
    res = run(PolyPath([0.0, 1.0]), 0.0, 0, Fixed(0.5))
    assert res.success and all(r.n_pred_solves == 0 and r.order == 0 for r in res.trace.records)


# ---------------------------------------------------------------- scalar problem

def test_scalar_root_oracle():
    root = bisect_root(scalar_F, 0.0, 1.0)
    assert root == pytest.approx(SCALAR_ROOT, abs=1e-14)
    assert scalar_path_point(1.0, 0.5) == pytest.approx(root, abs=1e-14)
    with pytest.raises(ValueError):
        bisect_root(scalar_F, 0.0, 0.1)


def test_scalar_initial_slope_and_first_order_prediction():
    p = ScalarProblem()
    ctx = p.derivative_context(0.0, 0.0)
    assert ctx.derivatives(1)[0] == pytest.approx(1.0, abs=1e-15)
    for dt in (0.1, 0.37):
        assert predict(p, 0.0, ctx.derivatives(1), dt, 1) == pytest.approx(dt, abs=1e-15)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_scalar_path_derivatives_match_finite_differences(n):
    t0 = 0.4
    x0 = scalar_path_point(t0, 0.3)
    exact = ScalarProblem().derivative_context(x0, t0).derivatives(n)[-1]

    def path(s):
        return scalar_path_point(t0 + s, x0)

    order = fd_convergence(path, exact, n, ladder=[0.08 * 2.0 ** -i for i in range(6)])
    assert order > 1.7


@pytest.mark.parametrize("q", [1, 2, 3])
def test_scalar_predictor_local_order(q):
    p = ScalarProblem()
    x0 = scalar_path_point(0.2, 0.1)
    dts = [0.04, 0.02, 0.01]
    errs = predictor_errors(p, x0, 0.2, q, dts, lambda x, t: abs(x - scalar_path_point(t, x)))
    assert loglog_slope(dts, errs) == pytest.approx(q + 1, abs=0.15)


@pytest.mark.parametrize("q", [0, 1, 2, 3, "secant"])
def test_scalar_runs_reach_the_root(q):
    res = run(ScalarProblem(), 0.0, q, Fixed())
    assert res.success and res.t == 1.0
    assert res.state == pytest.approx(SCALAR_ROOT, abs=1e-9)
    ts = res.trace.accepted_t()
    assert all(a < b for a, b in zip(ts, ts[1:])) and ts[-1] == 1.0
    assert res.trace.n_attempts == len(res.trace.records)
    assert res.trace.n_accepted == len(ts)


def test_secant_first_step_is_order_zero():
    res = run(ScalarProblem(), 0.0, "secant", Fixed(0.25))
    orders = [r.order for r in res.trace.records if r.accepted == 1]
    assert orders[0] == 0 and set(orders[1:]) == {"secant"}
    with pytest.raises(ValueError):
        run(ScalarProblem(), 0.0, "secant", Agile())


def test_infinite_tolerance_accepts_prediction():
    res = run(ScalarProblem(), 0.0, 1, Fixed(1.0), ToleranceRamp(math.inf, math.inf))
    assert res.success
    assert res.state == pytest.approx(1.0, abs=1e-15)
    assert all(r.newton_iters == 0 for r in res.trace.records)


def test_failures_are_traced_and_retried():
    # dt = 1 from x = 0 overshoots; the step must be halved at least once
    res = run(ScalarProblem(iter_max=3), 0.0, 0, Fixed(1.0), ToleranceRamp(1e-12, 1e-12))
    assert res.success
    recs = res.trace.records
    assert recs[0].accepted == 0 and recs[0].reason is not None
    assert recs[1].dt == pytest.approx(0.5, rel=1e-15)
    assert res.trace.n_attempts > res.trace.n_accepted


def test_accept_hook_rejection_is_logged():
    calls = []

    def hook(prev, new, t):
        calls.append(t)
        return len(calls) > 1

    res = run(PolyPath([0.0, 1.0]), 0.0, 1, Fixed(1.0), accept_hook=hook)
    assert res.success
    assert [r.accepted for r in res.trace.records][:2] == [-1, 1]
    assert res.trace.records[0].reason == "spacing"


def test_deterministic_csv_zeroes_timings():
    res = run(ScalarProblem(), 0.0, 2, Agile(0.02))
    a = res.trace.to_csv(deterministic=True)
    rows = [line.split(",") for line in a.strip().splitlines()]
    assert rows[0][-2:] == ["t_pred_ms", "t_corr_ms"]
    assert all(r[-2:] == ["0.000", "0.000"] for r in rows[1:])
    assert run(ScalarProblem(), 0.0, 2, Agile(0.02)).trace.to_csv(deterministic=True) == a
