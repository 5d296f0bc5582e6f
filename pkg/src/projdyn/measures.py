"""Observables, empirical measures and geometric rate fits.

Test functions act on stacks of canonical coordinates (shape ``(N, k+1)``)
and return real arrays; calling one on a single `ProjectivePoint` returns a
float.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .errors import EmptyMeasure, ExceptionalBase, InsufficientData
from .fibers import FiberCloud, backward_orbit, default_lambda, is_exceptional, sample_backward
from .projective import ProjectivePoint, as_coords, chordal_distance, fs_random_points, point


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A real observable with declared regularity ``alpha`` and norm ``||phi||_{C^alpha}``."""

    __test__ = False  # not a pytest class

    evaluator: Callable
    alpha: float
    norm_alpha: float
    family_tag: str
    dim: int = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise ValueError("alpha must lie in (0, 2]")
        if self.dim is not None:
            probes = fs_random_points(self.dim + 1, 1000, np.random.default_rng(12345))
            vals = np.asarray(self.evaluator(probes), dtype=float)
            if np.max(np.abs(vals)) > self.norm_alpha * (1 + 1e-12):
                raise ValueError(f"{self.family_tag}: |phi| exceeds the declared norm {self.norm_alpha}")

    def __call__(self, x):
        if isinstance(x, ProjectivePoint):
            return float(self.evaluator(x.coords[None])[0])
        x = np.asarray(x, dtype=complex)
        if x.ndim == 1:
            return float(self.evaluator(x[None])[0])
        return np.asarray(self.evaluator(x), dtype=float)

    def describe(self):
        return {"kind": self.family_tag.split("(")[0], **self.params}


def trig_moment(m) -> TestFunction:
    """2 Re(z^m conj(w)^m) / (|z|^{2m} + |w|^{2m}) on P^1: equals cos(m theta) on the unit circle."""
    m = int(m)
    if m < 1:
        raise ValueError("m must be positive")

    def ev(Z):
        z, w = Z[:, 0], Z[:, 1]
        zm, wm = z ** m, w ** m
        return 2 * np.real(zm * np.conj(wm)) / (np.abs(zm) ** 2 + np.abs(wm) ** 2)

    return TestFunction(ev, 2.0, float(1 + m + m * m), f"trig_moment({m})", dim=1, params={"m": m})


def bump(center, radius) -> TestFunction:
    """(1 - s^2)^3 for s = dist(., center)/radius < 1, else 0; C^2 and supported in the chordal ball."""
    c = np.asarray(as_coords(center), dtype=complex)
    r = float(radius)
    if r <= 0:
        raise ValueError("radius must be positive")

    def ev(Z):
        s2 = (chordal_distance(Z, c[None, :]) / r) ** 2
        return np.where(s2 < 1, (1 - s2) ** 3, 0.0)

    # sup |b| + sup |b'| / r + sup |b''| / r^2 for b(s) = (1 - s^2)^3
    norm = 1 + 96 / (25 * math.sqrt(5)) / r + 6 / r ** 2
    return TestFunction(ev, 2.0, norm, f"bump({_tag(center)}, {r:g})", dim=len(c) - 1,
                        params={"center": _json_point(c), "radius": r})


def holder_kernel(center, alpha) -> TestFunction:
    """dist(., center)^alpha: Hoelder of exponent alpha (smooth for alpha = 2)."""
    c = np.asarray(as_coords(center), dtype=complex)
    a = float(alpha)

    def ev(Z):
        return chordal_distance(Z, c[None, :]) ** a

    return TestFunction(ev, min(a, 2.0), 2.0, f"holder_kernel({_tag(center)}, {a:g})", dim=len(c) - 1,
                        params={"center": _json_point(c), "alpha": a})


def constant(value=1.0) -> TestFunction:
    v = float(value)
    return TestFunction(lambda Z: np.full(len(Z), v), 2.0, abs(v), f"constant({v:g})",
                        params={"value": v})


def custom(fn, alpha, norm_alpha, tag="custom", dim=None) -> TestFunction:
    return TestFunction(fn, alpha, norm_alpha, tag, dim=dim)


def _tag(c):
    c = as_coords(c)
    if len(c) == 2:
        p = point(*c)
        x = p.affine
        return "inf" if math.isinf(x.real) else f"{x.real:g}{x.imag:+g}i"
    return "[" + ",".join(f"{complex(v).real:g}{complex(v).imag:+g}i" for v in c) + "]"


def _json_point(c):
    return [[float(v.real), float(v.imag)] for v in np.asarray(c, dtype=complex)]


# --- measures -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    points: np.ndarray
    weights: np.ndarray
    normalized: bool = True

    @classmethod
    def from_cloud(cls, cloud: FiberCloud):
        w = np.asarray(cloud.weights, dtype=float)
        return cls(cloud.points, w / np.sum(w), True)

    @classmethod
    def from_arrays(cls, points, weights=None, normalize=True):
        points = np.asarray(points, dtype=complex)
        w = np.ones(len(points)) if weights is None else np.asarray(weights, dtype=float)
        if normalize:
            w = w / np.sum(w)
        return cls(points, w, normalize)

    @classmethod
    def dirac(cls, p):
        return cls(as_coords(p)[None].copy(), np.ones(1), True)

    def __len__(self):
        return len(self.weights)


def pair(m: EmpiricalMeasure, phi) -> float:
    """<m, phi> = sum w phi(atom) / sum w."""
    if len(m) == 0:
        raise EmptyMeasure("cannot pair an empty measure")
    vals = phi(m.points)
    return float(np.dot(m.weights, vals) / np.sum(m.weights))


@dataclass(frozen=True)
class FullFiber:
    base: object
    depth: int


@dataclass(frozen=True)
class InverseIteration:
    seed: int
    burn_in: int
    count: int
    start: object = (0.3 + 0.7j, 1.0)


def equilibrium_estimate(f, method, lam=None, tol=None, threads=1) -> EmpiricalMeasure:
    """Empirical approximation of the equilibrium measure (k = 1).

    ``FullFiber(base, depth)``: the normalized exact fiber.  ``InverseIteration``:
    ``count`` independent backward random walks of ``burn_in`` steps.
    """
    tol = tol or f.tol
    start = method.base if isinstance(method, FullFiber) else method.start
    if is_exceptional(f, start, lam or default_lambda(f.degree), tol.scan_depth, tol):
        raise ExceptionalBase(f"base point {point(*as_coords(start))} is exceptional")
    if isinstance(method, FullFiber):
        return EmpiricalMeasure.from_cloud(backward_orbit(f, method.base, method.depth, tol=tol,
                                                          threads=threads))
    if isinstance(method, InverseIteration):
        pts = sample_backward(f, method.start, method.burn_in, method.count, method.seed, tol)
        return EmpiricalMeasure.from_arrays(pts)
    raise TypeError(f"unknown estimator {method!r}")


class RateFit(NamedTuple):
    ns: list
    errors: list
    fitted_rho: float
    r_squared: float


def fit_rate(ns, errors, floor=1e-14) -> RateFit:
    """Least-squares fit of log e_n = c - n log(rho) over entries above ``floor``."""
    ns = np.asarray(ns, dtype=float)
    e = np.asarray(errors, dtype=float)
    keep = e > floor
    if np.count_nonzero(keep) < 3:
        raise InsufficientData(f"need at least 3 errors above {floor:g}, got {np.count_nonzero(keep)}")
    x, y = ns[keep], np.log(e[keep])
    A = np.stack([np.ones_like(x), x], axis=1)
    (c, slope), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (c + slope * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else min(1.0, max(0.0, 1 - ss_res / ss_tot))
    return RateFit([int(v) for v in ns], [float(v) for v in e], float(np.exp(-slope)), r2)


# --- sets for counting ---------------------------------------------------------------

def _affine(Z):
    z, w = Z[:, 0], Z[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(w == 0, np.inf, z / np.where(w == 0, 1, w))


class Sector:
    """{x : |arg(x) - center_angle| < half_width} in the affine chart of P^1."""

    def __init__(self, center_angle=0.0, half_width=math.pi / 4):
        self.center_angle = float(center_angle)
        self.half_width = float(half_width)
        self.tag = f"sector({self.center_angle:g}, {self.half_width:g})"

    def _offset(self, Z):
        x = _affine(Z)
        ang = np.angle(np.where(np.isfinite(x), x, 0) * np.exp(-1j * self.center_angle))
        bad = ~np.isfinite(x) | (x == 0)
        return ang, bad

    def __call__(self, Z):
        ang, bad = self._offset(Z)
        return ~bad & (np.abs(ang) < self.half_width)

    def boundary_shell(self, Z, width):
        ang, bad = self._offset(Z)
        return ~bad & (np.abs(np.abs(ang) - self.half_width) < width)

    def haar_mass(self):
        return min(1.0, self.half_width / math.pi)

    def describe(self):
        return {"kind": "sector", "center_angle": self.center_angle, "half_width": self.half_width}


class Disc:
    """{x : |x - center| < radius} in the affine chart of P^1."""

    def __init__(self, center=0.0, radius=0.5):
        self.center = complex(center)
        self.radius = float(radius)
        self.tag = f"disc({self.center.real:g}{self.center.imag:+g}i, {self.radius:g})"

    def __call__(self, Z):
        x = _affine(Z)
        return np.isfinite(x) & (np.abs(x - self.center) < self.radius)

    def boundary_shell(self, Z, width):
        x = _affine(Z)
        return np.isfinite(x) & (np.abs(np.abs(x - self.center) - self.radius) < width)

    def describe(self):
        return {"kind": "disc", "center": [self.center.real, self.center.imag], "radius": self.radius}


class HalfPlane:
    """{x : Re(x e^{-i angle}) > 0} in the affine chart of P^1 (the point at infinity excluded)."""

    def __init__(self, angle=0.0):
        self.angle = float(angle)
        self.tag = f"half_plane({self.angle:g})"

    def _proj(self, Z):
        x = _affine(Z)
        return np.where(np.isfinite(x), np.real(np.where(np.isfinite(x), x, 0) * np.exp(-1j * self.angle)), np.nan)

    def __call__(self, Z):
        with np.errstate(invalid="ignore"):
            return self._proj(Z) > 0

    def boundary_shell(self, Z, width):
        with np.errstate(invalid="ignore"):
            return np.abs(self._proj(Z)) < width

    def describe(self):
        return {"kind": "half_plane", "angle": self.angle}


class Everything:
    tag = "everything"

    def __call__(self, Z):
        return np.ones(len(Z), dtype=bool)

    def boundary_shell(self, Z, width):
        return np.zeros(len(Z), dtype=bool)

    def describe(self):
        return {"kind": "everything"}


class Empty(Everything):
    tag = "empty"

    def __call__(self, Z):
        return np.zeros(len(Z), dtype=bool)

    def describe(self):
        return {"kind": "empty"}


def count_in_set(cloud: FiberCloud, U) -> int:
    """Sum of atom weights inside U (U maps a coordinate stack to booleans)."""
    return int(np.sum(cloud.weights[U(cloud.points)]))


# --- report files ----------------------------------------------------------------------

RATE_COLUMNS = ("experiment_id", "n", "phi_tag", "alpha", "error", "fitted_rho", "r_squared")


def write_rate_rows(path, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(RATE_COLUMNS)
        for r in rows:
            wr.writerow([_cell(r.get(c)) for c in RATE_COLUMNS])


def write_gnuplot(path, ns, errors):
    """Two columns: n and log10 of the error (nonpositive errors skipped)."""
    lines = [f"{int(n)} {math.log10(e)!r}" for n, e in zip(ns, errors) if e > 0]
    Path(path).write_text("# n log10(error)\n" + "\n".join(lines) + "\n")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v
