"""Built-in level-set integrands ``f`` for functionals ``J(Omega) = int_Omega f dx``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jets import Jet2, jet_sqrt

KINDS = ("ellipse", "ellipse_rot", "p_ellipse", "clover", "disk", "constant", "zero")

_DEFAULTS = {
    "ellipse": {"a": 1.25, "r": 1.0},
    "ellipse_rot": {"a": 1.3, "r": 2.0},
    "p_ellipse": {"p": 4, "a": 2.0, "b": 0.5, "R": 4.0},
    "clover": {"a": 0.8, "b": 2.0, "eps": 0.01},
    "disk": {"r": 1.0, "cx": 0.0, "cy": 0.0},
    "constant": {"value": 1.0},
    "zero": {},
}


@dataclass(frozen=True)
class Integrand:
    """A named integrand with its parameters.

    ``params`` is stored as a sorted tuple of pairs so instances are hashable
    and can key the per-mesh jet cache.
    """

    kind: str
    params: tuple = ()

    @classmethod
    def make(cls, kind: str, **params) -> "Integrand":
        if kind not in KINDS:
            raise ValueError(f"unknown integrand {kind!r}; choose from {KINDS}")
        merged = dict(_DEFAULTS[kind])
        unknown = set(params) - set(merged) - {"b"}
        if unknown:
            raise ValueError(f"unknown parameters {sorted(unknown)} for {kind}")
        merged.update(params)
        if kind in ("ellipse", "ellipse_rot") and "b" not in merged:
            merged["b"] = 1.0 / merged["a"]
        return cls(kind, tuple(sorted((k, float(v)) for k, v in merged.items())))

    @property
    def p(self) -> dict:
        return dict(self.params)

    def label(self) -> str:
        inner = ",".join(f"{k}={v:g}" for k, v in self.params)
        return f"{self.kind}{{{inner}}}"

    def jet(self, points, order: int) -> Jet2:
        """Taylor jet of f of the given order at each of ``points`` (shape (..., 2))."""
        pts = np.asarray(points, dtype=float)
        x = Jet2.variable(pts[..., 0], 0, order)
        y = Jet2.variable(pts[..., 1], 1, order)
        p = self.p
        k = self.kind
        if k == "ellipse":
            return x * x * (1 / p["a"] ** 2) + y * y * (1 / p["b"] ** 2) - p["r"] ** 2
        if k == "ellipse_rot":
            return x * x * (1 / p["b"] ** 2) + y * y * (1 / p["a"] ** 2) - p["r"] ** 2
        if k == "p_ellipse":
            n = int(round(p["p"]))
            return (x * (1 / p["a"])) ** n + (y * (1 / p["b"])) ** n - p["R"] ** n
        if k == "clover":
            a, b, eps = p["a"], p["b"], p["eps"]
            f1 = jet_sqrt((x - a) * (x - a) + y * y * b) - 1.0
            f2 = jet_sqrt((x + a) * (x + a) + y * y * b) - 1.0
            f3 = jet_sqrt(x * x * b + (y - a) * (y - a)) - 1.0
            f4 = jet_sqrt(x * x * b + (y + a) * (y + a)) - 1.0
            return f1 * f2 * f3 * f4 - eps
        if k == "disk":
            dx = x - p["cx"]
            dy = y - p["cy"]
            return dx * dx + dy * dy - p["r"] ** 2
        if k == "constant":
            return Jet2.constant(np.full(pts.shape[:-1], p["value"]), order)
        if k == "zero":
            return Jet2.constant(np.zeros(pts.shape[:-1]), order)
        raise ValueError(k)

    def __call__(self, points) -> np.ndarray:
        return self.jet(points, 0).value

    def gradient(self, points) -> np.ndarray:
        j = self.jet(points, 1)
        return np.stack([j.partial(1, 0), j.partial(0, 1)], axis=-1)


def eval_jet(f: Integrand, point, order: int) -> Jet2:
    return f.jet(point, order)


def parse_integrand(spec: str) -> Integrand:
    """Parse ``kind`` or ``kind{key=value,...}`` (also accepts ``kind:key=value,...``)."""
    s = spec.strip()
    params = {}
    if "{" in s:
        kind, rest = s.split("{", 1)
        body = rest.rstrip("}")
    elif ":" in s:
        kind, body = s.split(":", 1)
    else:
        kind, body = s, ""
    for item in filter(None, (t.strip() for t in body.split(","))):
        key, val = item.split("=")
        params[key.strip()] = float(val)
    return Integrand.make(kind.strip(), **params)


# level sets used by the experiments
def newton_ellipse() -> Integrand:
    return Integrand.make("ellipse", a=1.25, r=1.0)


def large_p_ellipse() -> Integrand:
    return Integrand.make("p_ellipse", p=4, a=2.0, b=0.5, R=4.0)


def pareto_objectives() -> tuple[Integrand, Integrand, Integrand]:
    return (
        Integrand.make("ellipse", a=1.3, r=2.0),
        Integrand.make("clover", a=0.8, b=2.0, eps=0.01),
        Integrand.make("ellipse_rot", a=1.3, r=2.0),
    )


def disk_levelset(r: float) -> Integrand:
    return Integrand.make("disk", r=r)


def max_gradient_norm(f: Integrand, points) -> float:
    return float(np.max(np.linalg.norm(f.gradient(points), axis=-1)))

