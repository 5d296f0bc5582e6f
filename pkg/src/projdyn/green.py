"""Renormalized forward orbits and the Green function G = lim d^{-n} log ||F^n||.

G lives on C^{k+1} minus the origin and satisfies G(t z) = log|t| + G(z);
on P^k it is reported at Euclidean-unit representatives.  The finite-depth
value G_n is assembled from the per-step log scale factors of the canonical
orbit, so F^n is never formed.
"""
from __future__ import annotations

import csv
import math
from contextlib import nullcontext
from typing import NamedTuple

import numpy as np

from .errors import AllZero
from .projective import ProjectivePoint, apply_array, as_coords, normalize_array


class OrbitRecord(NamedTuple):
    points: list
    log_scales: list


class GreenEstimate(NamedTuple):
    value: float
    depth: int
    tail_bound: float
    map_constant: float


def orbit(f, p, n) -> OrbitRecord:
    if n < 0:
        raise ValueError("n must be nonnegative")
    cur = normalize_array(as_coords(p)[None])
    pts = [ProjectivePoint(cur[0])]
    scales = []
    for _ in range(n):
        cur, ls = apply_array(f, cur)
        pts.append(ProjectivePoint(cur[0]))
        scales.append(float(ls[0]))
    return OrbitRecord(pts, scales)


def _representatives(p):
    if isinstance(p, ProjectivePoint):
        z = p.coords
        return z / np.linalg.norm(z)
    return as_coords(p)


def green_values(f, Z, n):
    """G_n at every row of Z (raw representatives, not renormalized). Returns an array."""
    if n < 1:
        raise ValueError("green_value needs n >= 1")
    Z = np.asarray(Z, dtype=complex)
    mod = np.abs(Z)
    idx = np.argmax(mod, axis=1)
    top = mod[np.arange(len(Z)), idx]
    if np.any(top == 0):
        raise AllZero("zero representative")
    d = f.degree
    value = np.log(top)
    cur = normalize_array(Z)
    for j in range(1, n + 1):
        cur, ls = apply_array(f, cur)
        value = value + ls * float(d) ** (-j)
    # switch from the sup-norm chart to the Euclidean norm
    return value + np.log(np.linalg.norm(cur, axis=1)) * float(d) ** (-n)


def tail_bound(f, n):
    d = f.degree
    return f.map_constant * float(d) ** (-n) / (d - 1)


def green_value(f, p, n) -> GreenEstimate:
    """Finite-depth Green function with a bound on its distance to the limit.

    A `ProjectivePoint` is evaluated at its Euclidean-unit representative; a
    raw coordinate vector is evaluated at that representative.
    """
    z = _representatives(p)
    value = float(green_values(f, z[None], n)[0])
    return GreenEstimate(value, n, tail_bound(f, n), f.map_constant)


def depth_for_tail(f, target):
    """Smallest depth whose tail bound is at most ``target``."""
    d = f.degree
    c = f.map_constant / (d - 1)
    if c <= target:
        return 1
    return max(1, int(math.ceil(math.log(c / target) / math.log(d))))


def green_exact_monomial(coords) -> float:
    """Closed form max_i log|z_i| of the Green function of (z_0^d, ..., z_k^d)."""
    z = np.abs(as_coords(coords))
    if not np.any(z > 0):
        raise AllZero("zero representative")
    return float(np.log(np.max(z)))


def write_green_csv(path, points, estimates):
    """Rows (point_id, re_0.., im_0.., n, G_n, tail_bound); ``path`` may be an open text file."""
    points = [as_coords(p) for p in points]
    n_vars = len(points[0]) if points else 0
    with (nullcontext(path) if hasattr(path, "write") else open(path, "w", newline="")) as fh:
        wr = csv.writer(fh)
        wr.writerow(["point_id"] + [f"re{i}" for i in range(n_vars)] + [f"im{i}" for i in range(n_vars)]
                    + ["n", "G_n", "tail_bound"])
        for i, (z, est) in enumerate(zip(points, estimates)):
            wr.writerow([i] + [repr(float(c.real)) for c in z] + [repr(float(c.imag)) for c in z]
                        + [est.depth, repr(est.value), repr(est.tail_bound)])
