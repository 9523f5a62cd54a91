"""Globalizing Newton by shape homotopy.

Direct Newton from the unit disk towards the level set of a p-ellipse
(p = 4, a = 2, b = 0.5) tangles the mesh.  The convex homotopy from the
disk functional succeeds, and higher predictor orders need fewer steps.
"""

from shapehom.homotopy import Agile, Fixed, run
from shapehom.integrands import disk_levelset, large_p_ellipse
from shapehom.mesh import generate_disk
from shapehom.newton import NewtonConfig, newton_solve
from shapehom.shape_homotopy import ShapeHomotopy, levelset_error

mesh = generate_disk(1.0, 1 / 11)
F, G = large_p_ellipse(), disk_levelset(1.0)

_, rep = newton_solve(mesh, F, NewtonConfig(iter_max=50))
print(f"direct Newton: converged={rep.converged} reason={rep.reason}")

for strategy in (Fixed(), Agile(0.02)):
    for q in (1, 2, 3, 5):
        res = run(ShapeHomotopy(F, G), mesh, q, strategy)
        err, bound = levelset_error(res.state, F)
        print(f"{type(strategy).__name__:>5} q={q}: success={res.success} "
              f"attempts={res.trace.n_attempts} accepted={res.trace.n_accepted} "
              f"max|f|={err:.1f} (bound {bound:.0f})")
