"""Command line driver: ``shapehom {demo-scalar,newton,homotopy,pareto}``.

Settings come from defaults, then an optional JSON ``--config`` file, then
flags (flags win).  Exit codes: 0 success, 2 invalid input, 3 numerical
failure, 4 file system error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .homotopy import (Agile, AgileAdaptive, Fixed, HomotopyError, ScalarProblem, ToleranceRamp,
                       agile_step, bisect_root, predictor_errors, run, scalar_F,
                       scalar_path_point)
from .integrands import parse_integrand
from .mesh import MeshError, TriangleMesh, generate_disk, read_mesh, write_mesh
from .newton import METHODS, NewtonConfig, newton_solve
from .output import SvgPlot, write_rows

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
MAX_ORDER = 5
COMMANDS = ("demo-scalar", "newton", "homotopy", "pareto")
STRATEGIES = ("fixed", "agile", "agile-adaptive")

# per-command defaults that differ from the RunConfig field defaults
COMMAND_DEFAULTS = {
    "demo-scalar": {"order": None},   # None: every predictor in turn
    "newton": {"mesh": "disk:1:0.04", "f_target": "ellipse{a=1.25}", "iter_max": 50},
    "homotopy": {},
    "pareto": {"mesh": "disk:2.5:0.25", "strategy": "agile", "alpha": 0.1, "tol_start": 1e-10},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = "homotopy"
    out: str = "out"
    order: int | str | None = 2
    strategy: str = "fixed"
    dt0: float = 1.0
    gamma_down: float = 0.5
    gamma_up: float = 1.75
    alpha: float = 0.02
    alpha_down: float = 0.5
    alpha_up: float = 1.1
    tol_start: float = 1e-4
    tol_end: float = 1e-10
    mu: float = 1.0
    lam: float = 0.0
    mesh: str = "disk:1:0.0909090909090909"
    btau: str = "lumped"
    method: str = "unregularized"
    iter_max: int = 10
    f_target: str = "p_ellipse"
    f_start: str = "disk{r=1}"
    deltas: list = field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3])
    dmax: float = 0.5
    deterministic: bool = False

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.order is None and self.command != "demo-scalar":
            raise ConfigError("order is required")
        if self.order is not None and self.order != "secant":
            if not isinstance(self.order, int) or not 0 <= self.order <= MAX_ORDER:
                raise ConfigError(f"order must be 0..{MAX_ORDER} or 'secant', got {self.order!r}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        if self.strategy != "fixed" and self.order in (0, "secant"):
            raise ConfigError("agile step sizes need a Taylor predictor of order >= 1")
        if self.btau not in ("lumped", "consistent"):
            raise ConfigError("btau must be 'lumped' or 'consistent'")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if not (self.tol_start > 0 and self.tol_end > 0):
            raise ConfigError("tolerances must be positive")
        if not (self.alpha > 0 and self.dt0 > 0):
            raise ConfigError("alpha and dt0 must be positive")
        if not self.dmax > 0:
            raise ConfigError("dmax must be positive")
        for d in self.deltas:
            if not 0 <= d <= 1 / 3 + 1e-15:
                raise ConfigError(f"delta {d} outside [0, 1/3]")
        try:
            self.step_strategy()
            self.newton_config()
            parse_integrand(self.f_target)
            parse_integrand(self.f_start)
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    def step_strategy(self):
        if self.strategy == "fixed":
            return Fixed(self.dt0, self.gamma_down, self.gamma_up)
        if self.strategy == "agile":
            return Agile(self.alpha)
        return AgileAdaptive(self.alpha, self.alpha_down, self.alpha_up)

    def ramp(self) -> ToleranceRamp:
        return ToleranceRamp(self.tol_start, self.tol_end)

    def newton_config(self, **kw) -> NewtonConfig:
        base = dict(method=self.method, iter_max=self.iter_max, mu=self.mu, lam=self.lam,
                    consistent_btau=self.btau == "consistent")
        base.update(kw)
        return NewtonConfig(**base)


def load_mesh(spec: str) -> TriangleMesh:
    """``disk:R:H`` or a mesh file path."""
    if spec.startswith("disk:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"mesh spec must be disk:R:H, got {spec!r}")
        try:
            return generate_disk(float(parts[1]), float(parts[2]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return read_mesh(spec)


def parse_order(text: str):
    if text == "secant":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"order must be an integer or 'secant', got {text!r}")


FLAG_FIELDS = {
    "out": "out", "order": "order", "strategy": "strategy", "dt0": "dt0",
    "gamma_up": "gamma_up", "gamma_down": "gamma_down", "alpha": "alpha",
    "alpha_up": "alpha_up", "alpha_down": "alpha_down", "tol_start": "tol_start",
    "tol_end": "tol_end", "mu": "mu", "lambda_": "lam", "mesh": "mesh", "btau": "btau",
    "method": "method", "iter_max": "iter_max", "f_target": "f_target", "f_start": "f_start",
    "deltas": "deltas", "dmax": "dmax", "deterministic": "deterministic",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shapehom", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with RunConfig fields")
        p.add_argument("--out", help="output directory")
        p.add_argument("--order", type=parse_order, help="predictor order 0..5 (or 'secant')")
        p.add_argument("--strategy", choices=STRATEGIES)
        for flag in ("dt0", "gamma-up", "gamma-down", "alpha", "alpha-up", "alpha-down",
                     "tol-start", "tol-end", "mu", "dmax"):
            p.add_argument(f"--{flag}", type=float)
        p.add_argument("--lambda", dest="lambda_", type=float, help="second Lame parameter")
        p.add_argument("--mesh", help="disk:R:H or a mesh file")
        p.add_argument("--btau", choices=("lumped", "consistent"))
        p.add_argument("--method", choices=METHODS, help="corrector / baseline method")
        p.add_argument("--iter-max", type=int)
        p.add_argument("--f-target", help="integrand, e.g. 'ellipse{a=1.25}'")
        p.add_argument("--f-start", help="start level set, e.g. 'disk{r=1}'")
        p.add_argument("--deltas", type=lambda s: [float(x) for x in s.split(",")],
                       help="comma separated delta grid (pareto)")
        p.add_argument("--deterministic", action="store_true", default=None,
                       help="zero the timing columns so repeated runs give identical files")
    return ap


def config_from_args(args) -> RunConfig:
    base = {"command": args.command, **COMMAND_DEFAULTS[args.command]}
    if args.config:
        base.update(json.loads(Path(args.config).read_text()))
        base["command"] = args.command
    for flag, name in FLAG_FIELDS.items():
        v = getattr(args, flag, None)
        if v is not None:
            base[name] = v
    cfg = RunConfig.from_dict(base)
    cfg.validate()
    return cfg


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    return out


def _say(msg: str) -> None:
    print(msg, flush=True)


# ---------------------------------------------------------------- commands

def cmd_demo_scalar(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    root = bisect_root(scalar_F, 0.0, 1.0)
    orders = [0, "secant", 1, 2] if cfg.order is None else [cfg.order]
    ok = True
    problem = ScalarProblem()
    ts = np.linspace(0, 1, 101)
    curve = [scalar_path_point(t) for t in ts]
    plot = SvgPlot(title="scalar homotopy path", xlabel="t", ylabel="x")
    plot.line(ts, curve)
    colors = {0: "#1f77b4", "secant": "#ff7f0e", 1: "#2ca02c", 2: "#d62728"}
    for q in orders:
        strategy = cfg.step_strategy()
        if q in (0, "secant") and cfg.strategy != "fixed":
            strategy = Fixed(cfg.dt0, cfg.gamma_down, cfg.gamma_up)
        res = run(problem, 0.0, q, strategy, cfg.ramp())
        res.trace.write_csv(out / f"trace_{q}.csv", cfg.deterministic)
        fx = abs(scalar_F(res.state)) if res.success else math.nan
        good = res.success and fx <= 1e-12 and abs(res.state - root) <= 1e-10
        ok &= good
        _say(f"predictor {q}: {'ok' if good else 'FAILED'} x={res.state!r} |F|={fx:.2e} "
             f"attempts={res.trace.n_attempts} accepted={res.trace.n_accepted}")
        acc = [(r.t_target, r.order) for r in res.trace.records]
        if acc:
            plot.points([t for t, _ in acc], [scalar_path_point(t) for t, _ in acc],
                        colors.get(q, "black"))
    # one long step from the middle of the path: higher orders land closer to x(1)
    x_mid = scalar_path_point(0.5)
    errs = [abs(x_mid - root)] + [
        float(predictor_errors(problem, x_mid, 0.5, k, [0.5],
                               lambda pred, t: abs(pred - scalar_path_point(t)))[0]) for k in (1, 2)]
    ordered = errs[2] < errs[1] < errs[0]
    ok &= ordered
    _say("long step from t=0.5: |error| order 0/1/2 = " + " ".join(f"{e:.3e}" for e in errs)
         + ("" if ordered else "  NOT DECREASING"))
    plot.save(out / "scalar.svg")
    _say(f"bisection root {root!r}")
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_newton(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    mesh = load_mesh(cfg.mesh)
    f = parse_integrand(cfg.f_target)
    ncfg = cfg.newton_config(tol=cfg.tol_end)
    write_mesh(mesh, out / "before.mesh")
    final, rep = newton_solve(mesh, f, ncfg)
    write_mesh(final, out / "after.mesh")
    rows = list(zip(range(1, rep.iterations + 1), rep.residuals, rep.normal_residuals,
                    [0.0] * rep.iterations if cfg.deterministic else rep.times, rep.objective))
    write_rows(out / "residuals.csv", ("iteration", "update_norm", "normal_residual", "time_s", "objective"),
               rows)
    plot = SvgPlot(title=f"{cfg.method} residual", xlabel="iteration", ylabel="residual", logy=True)
    plot.line([r[0] for r in rows], [r[2] for r in rows])
    plot.save(out / "residuals.svg")
    _say(f"{cfg.method}: converged={rep.converged} reason={rep.reason} iterations={rep.iterations} "
         f"final normal residual={rep.final_normal_residual:.3e}")
    if rep.reason in ("divergence", "mesh_tangled", "solver", "domain", "line_search"):
        return EXIT_NUMERIC
    if cfg.method == "unregularized" and not rep.converged:
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_homotopy(cfg: RunConfig) -> int:
    from .shape_homotopy import ShapeHomotopy, levelset_error, start_matches_mesh

    out = _outdir(cfg)
    mesh = load_mesh(cfg.mesh)
    target = parse_integrand(cfg.f_target)
    start = parse_integrand(cfg.f_start)
    if not start_matches_mesh(mesh, start):
        err, bound = levelset_error(mesh, start)
        print(f"warning: start level set does not match the mesh boundary "
              f"(max |f_start| = {err:.3g} > {bound:.3g})", file=sys.stderr)
        return EXIT_INVALID
    q = cfg.order
    problem = ShapeHomotopy(target, start, cfg.newton_config())
    rows = []

    def on_accept(k, t, state, rec):
        write_mesh(state, out / f"step_{k}_t_{t:.10f}.mesh")
        if isinstance(q, int) and q >= 1:
            # derivative norms up to q + 1 and the agile step each order would pick
            ctx = problem.derivative_context(state, t)
            norms = [problem.derivative_norm(state, d) for d in ctx.derivatives(q + 1)]
            steps = [agile_step(p, cfg.alpha, norms[p]) for p in range(1, q + 1)]
            rows.append([k, t, *norms, *steps])

    res = run(problem, mesh, q, cfg.step_strategy(), cfg.ramp(), on_accept=on_accept)
    res.trace.write_csv(out / "trace.csv", cfg.deterministic)
    write_mesh(res.state, out / "final.mesh")
    recs = res.trace.records
    write_rows(out / "path.csv", ("attempt", "t_target", "accepted"),
               [(r.attempt, r.t_target, r.accepted) for r in recs])
    if isinstance(q, int) and q >= 1:
        header = (["step", "t"] + [f"norm_{n}" for n in range(1, q + 2)]
                  + [f"dt_order_{p}" for p in range(1, q + 1)])
        write_rows(out / "derivatives.csv", header, rows)
    plot = SvgPlot(title="homotopy path", xlabel="attempt", ylabel="t")
    plot.line([r.attempt for r in recs], [r.t_target for r in recs], "#888")
    plot.points([r.attempt for r in recs if r.accepted == 1],
                [r.t_target for r in recs if r.accepted == 1], "green")
    plot.points([r.attempt for r in recs if r.accepted != 1],
                [r.t_target for r in recs if r.accepted != 1], "red")
    plot.save(out / "path.svg")
    err, bound = levelset_error(res.state, target)
    _say(f"success={res.success} reason={res.reason} attempts={res.trace.n_attempts} "
         f"accepted={res.trace.n_accepted} max|f|={err:.3e} bound={bound:.3e}")
    return EXIT_OK if res.success else EXIT_NUMERIC


def cmd_pareto(cfg: RunConfig) -> int:
    from .pareto import (ParetoSpec, export_front, residual_bound, trace_front)

    out = _outdir(cfg)
    mesh = load_mesh(cfg.mesh)
    radius = float(np.max(np.linalg.norm(mesh.vertices[mesh.boundary_loop], axis=1)))
    spec = ParetoSpec(deltas=tuple(cfg.deltas), q=cfg.order, strategy=cfg.step_strategy(),
                      d_max=cfg.dmax, tol=cfg.tol_start, disk_radius=radius,
                      newton=cfg.newton_config())
    points, runs = trace_front(spec, mesh, out_dir=out / "meshes")
    for r in runs:
        r.trace.write_csv(out / f"trace_d{r.delta:.4f}_b{r.branch}.csv", cfg.deterministic)
    for p in points:
        p.mesh_file = f"meshes/{p.mesh_file}"
    export_front(points, out / "pareto.csv")
    J = np.array([p.J for p in points])
    for a, b in ((0, 1), (1, 2), (2, 0)):
        plot = SvgPlot(title=f"J{a + 1} vs J{b + 1}", xlabel=f"J{a + 1}", ylabel=f"J{b + 1}")
        for d in sorted(set(p.delta for p in points)):
            sel = [i for i, p in enumerate(points) if p.delta == d]
            plot.line(J[sel, a], J[sel, b], "#555", 1.0)
        plot.points(J[:, a], J[:, b], "#d62728", 2.0)
        plot.save(out / f"pareto_J{a + 1}J{b + 1}.svg")
    bad = [p for p in points if not p.residual <= residual_bound(p.mesh, spec.tol)]
    _say(f"points={len(points)} branches={len(runs)} residual violations={len(bad)}")
    return EXIT_OK if not bad else EXIT_NUMERIC


HANDLERS = {"demo-scalar": cmd_demo_scalar, "newton": cmd_newton,
            "homotopy": cmd_homotopy, "pareto": cmd_pareto}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if os.environ.get("SHAPEHOM_THREADS") is not None:
        try:
            if int(os.environ["SHAPEHOM_THREADS"]) < 1:
                raise ValueError
        except ValueError:
            print("error: SHAPEHOM_THREADS must be a positive integer", file=sys.stderr)
            return EXIT_INVALID
    try:
        cfg = config_from_args(args)
        return HANDLERS[args.command](cfg)
    except (ConfigError, MeshError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (HomotopyError, ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
