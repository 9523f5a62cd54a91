"""Scalar predictor-corrector continuation.

The root of F(x) = x^5 + x - exp(-x) is found by following
t F(x) + (1 - t) x = 0 from x = 0 at t = 0.  Each predictor is run with the
fixed step rule starting at dt = 1, which this mild path allows in one
step; the agile rule then shows how fewer steps suffice as q grows.
Then the local error of the order-q predictor is measured for shrinking
steps, which should fall like dt^(q+1).
"""

from shapehom.homotopy import (Agile, Fixed, ScalarProblem, bisect_root, loglog_slope, predictor_errors,
                               run, scalar_F, scalar_path_point)

root = bisect_root(scalar_F, 0.0, 1.0)
print(f"bisection root: {root:.15f}")

for q in (0, "secant", 1, 2, 3):
    res = run(ScalarProblem(), 0.0, q, Fixed())
    print(f"predictor {q!s:>6}: attempts {res.trace.n_attempts:2d}, "
          f"accepted {res.trace.n_accepted:2d}, |x - root| = {abs(res.state - root):.1e}")

for q in (1, 2, 3):
    res = run(ScalarProblem(), 0.0, q, Agile(1e-6))
    print(f"agile alpha=1e-6, order {q}: accepted steps {res.trace.n_accepted}")

x5 = scalar_path_point(0.5)
dts = [0.08, 0.04, 0.02]
for q in (1, 2, 3):
    errs = predictor_errors(ScalarProblem(), x5, 0.5, q, dts,
                            lambda x, t: abs(x - scalar_path_point(t, x)))
    print(f"order {q}: errors {errs}, slope {loglog_slope(dts, errs):.2f}")
