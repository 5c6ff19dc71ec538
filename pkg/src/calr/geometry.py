"""Smooth closed interface curves and their periodic trapezoidal discretizations.

All curves are 2pi-periodic analytic maps ``t -> x(t)`` traversed
counterclockwise.  The outward normal is the unit tangent rotated by -pi/2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

BOUNDARY_TOL = 1e-12
NESTING_CLEARANCE = 1e-6


class GeometryError(ValueError):
    """Invalid curve parameters or an invalid inner/outer configuration."""


@dataclass(frozen=True)
class BoundaryCurve:
    """Base class for analytic closed curves.

    Subclasses provide the parametrization and its first two derivatives;
    everything else (normals, curvature, speed) is derived here.
    """

    center: tuple[float, float] = (0.0, 0.0)

    kind = "curve"

    def _xy(self, t):
        raise NotImplementedError

    def _dxy(self, t):
        raise NotImplementedError

    def _ddxy(self, t):
        raise NotImplementedError

    def position(self, t):
        t = np.asarray(t, dtype=float)
        x, y = self._xy(t)
        return np.stack([x + self.center[0], y + self.center[1]], axis=-1)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack(self._dxy(t), axis=-1)

    def second_derivative(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack(self._ddxy(t), axis=-1)

    def speed(self, t):
        return np.linalg.norm(self.derivative(t), axis=-1)

    def tangent(self, t):
        d = self.derivative(t)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def normal(self, t):
        tau = self.tangent(t)
        return np.stack([tau[..., 1], -tau[..., 0]], axis=-1)

    def curvature(self, t):
        d = self.derivative(t)
        dd = self.second_derivative(t)
        cross = d[..., 0] * dd[..., 1] - d[..., 1] * dd[..., 0]
        return cross / np.linalg.norm(d, axis=-1) ** 3

    def max_radius(self):
        """Upper bound on |x(t) - center|."""
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Circle(BoundaryCurve):
    radius: float = 1.0

    kind = "circle"

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError(f"circle radius must be positive, got {self.radius}")

    def _xy(self, t):
        return self.radius * np.cos(t), self.radius * np.sin(t)

    def _dxy(self, t):
        return -self.radius * np.sin(t), self.radius * np.cos(t)

    def _ddxy(self, t):
        return -self.radius * np.cos(t), -self.radius * np.sin(t)

    def max_radius(self):
        return self.radius

    def to_dict(self):
        return {"kind": "circle", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Ellipse(BoundaryCurve):
    a: float = 1.0
    b: float = 1.0

    kind = "ellipse"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise GeometryError(f"ellipse semi-axes must be positive, got {(self.a, self.b)}")

    def _xy(self, t):
        return self.a * np.cos(t), self.b * np.sin(t)

    def _dxy(self, t):
        return -self.a * np.sin(t), self.b * np.cos(t)

    def _ddxy(self, t):
        return -self.a * np.cos(t), -self.b * np.sin(t)

    def max_radius(self):
        return max(self.a, self.b)

    def to_dict(self):
        return {"kind": "ellipse", "center": list(self.center), "a": self.a, "b": self.b}


@dataclass(frozen=True)
class PerturbedCircle(BoundaryCurve):
    """Star-shaped curve r(t) = r0 (1 + eps cos(k t))."""

    base_radius: float = 1.0
    amplitude: float = 0.0
    wavenumber: int = 0

    kind = "perturbed-circle"

    def __post_init__(self):
        if not self.base_radius > 0:
            raise GeometryError(f"base radius must be positive, got {self.base_radius}")
        if int(self.wavenumber) != self.wavenumber or self.wavenumber < 0:
            raise GeometryError(f"wavenumber must be a non-negative integer, got {self.wavenumber}")
        if abs(self.amplitude) * (1 + self.wavenumber) >= 1:
            raise GeometryError(
                f"perturbation violates simplicity bound: |eps|(1+k) = "
                f"{abs(self.amplitude) * (1 + self.wavenumber):g} >= 1"
            )

    def _radial(self, t):
        r0, eps, k = self.base_radius, self.amplitude, self.wavenumber
        r = r0 * (1 + eps * np.cos(k * t))
        dr = -r0 * eps * k * np.sin(k * t)
        ddr = -r0 * eps * k * k * np.cos(k * t)
        return r, dr, ddr

    def _xy(self, t):
        r, _, _ = self._radial(t)
        return r * np.cos(t), r * np.sin(t)

    def _dxy(self, t):
        r, dr, _ = self._radial(t)
        c, s = np.cos(t), np.sin(t)
        return dr * c - r * s, dr * s + r * c

    def _ddxy(self, t):
        r, dr, ddr = self._radial(t)
        c, s = np.cos(t), np.sin(t)
        return ddr * c - 2 * dr * s - r * c, ddr * s + 2 * dr * c - r * s

    def max_radius(self):
        return self.base_radius * (1 + abs(self.amplitude))

    def to_dict(self):
        return {
            "kind": "perturbed-circle",
            "center": list(self.center),
            "r0": self.base_radius,
            "eps": self.amplitude,
            "k": self.wavenumber,
        }


_CURVE_PARAMS = {
    "circle": ("radius",),
    "ellipse": ("a", "b"),
    "perturbed-circle": ("r0", "eps", "k"),
}


def make_curve(kind, **params):
    """Build a curve from a kind name and keyword parameters.

    >>> make_curve("circle", radius=2.0).position(0.0)
    array([2., 0.])
    """
    if kind not in _CURVE_PARAMS:
        raise GeometryError(f"unknown curve kind {kind!r}")
    center = tuple(float(c) for c in params.pop("center", (0.0, 0.0)))
    if len(center) != 2:
        raise GeometryError("center must have two coordinates")
    expected = _CURVE_PARAMS[kind]
    missing = [p for p in expected if p not in params]
    if missing:
        raise GeometryError(f"missing parameters for {kind}: {missing}")
    extra = sorted(set(params) - set(expected))
    if extra:
        raise GeometryError(f"unknown parameters for {kind}: {extra}")
    if kind == "circle":
        return Circle(center=center, radius=float(params["radius"]))
    if kind == "ellipse":
        return Ellipse(center=center, a=float(params["a"]), b=float(params["b"]))
    k = params["k"]
    if int(k) != k:
        raise GeometryError(f"wavenumber must be an integer, got {k}")
    return PerturbedCircle(
        center=center,
        base_radius=float(params["r0"]),
        amplitude=float(params["eps"]),
        wavenumber=int(k),
    )


@dataclass(frozen=True, eq=False)
class DiscreteBoundary:
    """Equispaced-in-parameter nodes with trapezoidal arclength weights."""

    curve: BoundaryCurve
    t: np.ndarray
    nodes: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    speeds: np.ndarray
    weights: np.ndarray
    curvatures: np.ndarray

    @property
    def n(self):
        return self.t.size

    @property
    def perimeter(self):
        return float(self.weights.sum())

    @cached_property
    def diameter(self):
        c = self.nodes.mean(axis=0)
        return 2.0 * float(np.max(np.linalg.norm(self.nodes - c, axis=1)))


def discretize(curve, n):
    if int(n) != n or n % 2:
        raise GeometryError(f"node count must be an even integer, got {n}")
    n = int(n)
    if n < 16:
        raise GeometryError(f"node count must be at least 16, got {n}")
    t = 2 * np.pi * np.arange(n) / n
    speeds = curve.speed(t)
    return DiscreteBoundary(
        curve=curve,
        t=t,
        nodes=curve.position(t),
        tangents=curve.tangent(t),
        normals=curve.normal(t),
        speeds=speeds,
        weights=speeds * (2 * np.pi / n),
        curvatures=curve.curvature(t),
    )


def distance_to_curve(curve, points, n_samples=2048, newton_steps=8):
    """Distance from each point to the curve plus the closest parameter.

    Dense sampling followed by Newton iterations on <x(t) - p, x'(t)> = 0.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    ts = 2 * np.pi * np.arange(n_samples) / n_samples
    xs = curve.position(ts)
    P = p[:, 0] + 1j * p[:, 1]
    Z = xs[:, 0] + 1j * xs[:, 1]
    t = np.empty(P.size)
    for start in range(0, P.size, 4096):
        blk = slice(start, start + 4096)
        t[blk] = ts[np.argmin(np.abs(P[blk, None] - Z[None, :]), axis=1)]
    for _ in range(newton_steps):
        diff = curve.position(t) - p
        d1 = curve.derivative(t)
        d2v = curve.second_derivative(t)
        f = (diff * d1).sum(-1)
        fp = (d1 * d1).sum(-1) + (diff * d2v).sum(-1)
        step = np.where(fp > 0, f / np.where(fp > 0, fp, 1.0), 0.0)
        t = t - np.clip(step, -np.pi / n_samples * 4, np.pi / n_samples * 4)
    dist = np.linalg.norm(curve.position(t) - p, axis=1)
    return dist, np.mod(t, 2 * np.pi)


def locate(curve, points, tol=BOUNDARY_TOL, n_samples=2048):
    """Classify points as inside (+1), on the boundary (0) or outside (-1).

    Uses the winding number of a dense polygon; points close to the curve are
    decided by the side of the normal at the closest curve point instead.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    dist, tstar = distance_to_curve(curve, p, n_samples=n_samples)
    ts = 2 * np.pi * np.arange(n_samples) / n_samples
    xs = curve.position(ts)
    rel = xs[None, :, :] - p[:, None, :]
    ang = np.arctan2(rel[..., 1], rel[..., 0])
    dang = np.diff(np.concatenate([ang, ang[:, :1]], axis=1), axis=1)
    dang = (dang + np.pi) % (2 * np.pi) - np.pi
    winding = np.rint(dang.sum(axis=1) / (2 * np.pi))
    out = np.where(winding != 0, 1, -1)

    scale = curve.max_radius()
    near = dist < 1e-3 * scale
    if near.any():
        side = ((p[near] - curve.position(tstar[near])) * curve.normal(tstar[near])).sum(-1)
        out[near] = np.where(side < 0, 1, -1)
    out[dist <= tol * max(scale, 1.0)] = 0
    return out


def contains(curve, point):
    """True iff ``point`` lies strictly inside ``curve`` (boundary points excluded)."""
    res = locate(curve, point)
    return bool(res[0] == 1) if np.ndim(point) == 1 else res == 1


@dataclass(frozen=True, eq=False)
class ProblemGeometry:
    """Core D (bounded by ``inner``) nested inside Omega (bounded by ``outer``)."""

    inner: BoundaryCurve
    outer: BoundaryCurve
    n_inner: int = 256
    n_outer: int = 256
    inner_bnd: DiscreteBoundary = field(init=False, repr=False)
    outer_bnd: DiscreteBoundary = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "inner_bnd", discretize(self.inner, self.n_inner))
        object.__setattr__(self, "outer_bnd", discretize(self.outer, self.n_outer))
        loc = locate(self.outer, self.inner_bnd.nodes)
        if np.any(loc != 1):
            raise GeometryError("inner curve is not contained in the outer curve")
        dist, _ = distance_to_curve(self.outer, self.inner_bnd.nodes)
        clearance = NESTING_CLEARANCE * self.outer_bnd.diameter
        if dist.min() < clearance:
            raise GeometryError(
                f"inner curve comes within {dist.min():.3g} of the outer curve "
                f"(required clearance {clearance:.3g})"
            )

    @classmethod
    def annulus(cls, r_i, r_e, n=256):
        if not 0 < r_i < r_e:
            raise GeometryError(f"annulus needs 0 < r_i < r_e, got {(r_i, r_e)}")
        return cls(Circle(radius=r_i), Circle(radius=r_e), n, n)

    @property
    def sizes(self):
        return self.inner_bnd.n, self.outer_bnd.n

    @property
    def weights(self):
        return np.concatenate([self.inner_bnd.weights, self.outer_bnd.weights])

    def split(self, vec):
        """Split a stacked (inner, outer) vector into its two blocks."""
        ni = self.inner_bnd.n
        return vec[:ni], vec[ni:]

    def is_concentric_annulus(self):
        return (
            isinstance(self.inner, Circle)
            and isinstance(self.outer, Circle)
            and self.inner.center == self.outer.center
        )
