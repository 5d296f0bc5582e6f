"""Homogeneous coordinates on P^k: points, polynomials, endomorphisms and the chordal metric.

Points are stored in a canonical chart: the coordinate of largest modulus is
exactly 1 (lowest index wins ties), so every coordinate lies in the closed
unit disc.  Batched routines work on complex arrays of shape ``(N, k+1)``.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import norm, qmc

from .config import DEFAULT, Tolerances
from .errors import AllZero, Degenerate, DegenerateImage, DimMismatch, NonFinite


def _as_complex_array(raw):
    arr = np.asarray(raw, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"non-finite homogeneous coordinates: {raw!r}")
    return arr


def normalize_array(Z):
    """Canonical representatives for a stack of homogeneous coordinates.

    ``Z`` has shape ``(N, k+1)``; rows that are entirely zero raise `AllZero`.
    """
    Z = _as_complex_array(Z)
    if Z.ndim != 2:
        raise ValueError("expected an array of shape (N, k+1)")
    mod = np.abs(Z)
    idx = np.argmax(mod, axis=1)
    rows = np.arange(Z.shape[0])
    pivot = Z[rows, idx]
    if np.any(pivot == 0):
        raise AllZero("point with all coordinates zero")
    out = Z / pivot[:, None]
    # division can overshoot the unit disc by an ulp
    m = np.abs(out)
    over = m > 1.0
    if np.any(over):
        out[over] /= m[over]
    out[rows, idx] = 1.0
    return out


@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    """A point of P^k held in canonical homogeneous coordinates."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=complex).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def dim(self):
        return self.coords.shape[0] - 1

    @property
    def affine(self):
        """Affine coordinate z_0/z_k (``inf`` at the hyperplane z_k = 0); P^1 only."""
        if self.coords[-1] == 0:
            return complex(math.inf, 0.0)
        return complex(self.coords[0] / self.coords[-1])

    def __eq__(self, other):
        if not isinstance(other, ProjectivePoint):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())

    def __repr__(self):
        inner = " : ".join(_fmt_complex(c) for c in self.coords)
        return f"[{inner}]"


def _fmt_complex(c):
    c = complex(c)
    if c.imag == 0:
        return f"{c.real:g}"
    if c.real == 0:
        return f"{c.imag:g}i"
    return f"{c.real:g}{c.imag:+g}i"


def normalize(raw) -> ProjectivePoint:
    """Canonical `ProjectivePoint` for a vector of k+1 complex numbers."""
    arr = np.asarray(raw, dtype=complex).reshape(1, -1)
    if arr.shape[1] < 2:
        raise DimMismatch("need at least two homogeneous coordinates")
    return ProjectivePoint(normalize_array(arr)[0])


def point(*coords) -> ProjectivePoint:
    """Shorthand: ``point(2, 1)`` is [2 : 1] = [1 : 0.5]."""
    return normalize(coords)


def as_coords(p):
    """Homogeneous coordinates of a point or raw vector as a 1-d complex array."""
    if isinstance(p, ProjectivePoint):
        return p.coords
    return _as_complex_array(p).reshape(-1)


def wedge_norm(Z, W):
    """Row-wise ``||z ^ w||`` for arrays of shape (N, k+1)."""
    total = np.zeros(np.broadcast_shapes(Z.shape, W.shape)[:-1])
    for i, j in combinations(range(Z.shape[-1]), 2):
        total = total + np.abs(Z[..., i] * W[..., j] - Z[..., j] * W[..., i]) ** 2
    return np.sqrt(total)


def chordal_distance(Z, W):
    """Chordal metric ``||z ^ w|| / (||z|| ||w||)`` between rows of Z and W (broadcasting)."""
    Z = np.asarray(Z, dtype=complex)
    W = np.asarray(W, dtype=complex)
    if Z.shape[-1] != W.shape[-1]:
        raise DimMismatch(f"dimension mismatch: {Z.shape[-1] - 1} vs {W.shape[-1] - 1}")
    den = np.linalg.norm(Z, axis=-1) * np.linalg.norm(W, axis=-1)
    return np.minimum(wedge_norm(Z, W) / den, 1.0)


def fs_distance(p, q) -> float:
    """Chordal (Fubini-Study comparable) distance between two points of P^k."""
    z, w = as_coords(p), as_coords(q)
    if z.shape != w.shape:
        raise DimMismatch(f"dimension mismatch: {z.shape[0] - 1} vs {w.shape[0] - 1}")
    if not (np.any(z) and np.any(w)):
        raise AllZero("the zero vector is not a point of projective space")
    return float(chordal_distance(z[None], w[None])[0])


def sphere_points(n_vars, count, seed=0):
    """Quasi-random points on the unit sphere of C^{n_vars} (scrambled Sobol + Gaussian map)."""
    m = int(math.ceil(math.log2(max(count, 2))))
    u = qmc.Sobol(d=2 * n_vars, scramble=True, seed=seed).random_base2(m)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    g = norm.ppf(u)
    z = g[:, :n_vars] + 1j * g[:, n_vars:]
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def fs_random_points(n_vars, count, rng):
    """Random points distributed by the Fubini-Study volume, in canonical form."""
    z = rng.standard_normal((count, n_vars)) + 1j * rng.standard_normal((count, n_vars))
    return normalize_array(z)


class HomogeneousPolynomial:
    """A homogeneous polynomial in ``dim`` variables stored as {exponents: coefficient}."""

    def __init__(self, dim, degree, terms):
        self.dim = int(dim)
        self.degree = int(degree)
        clean = {}
        for exps, coef in dict(terms).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.dim or min(exps) < 0 or sum(exps) != self.degree:
                raise ValueError(f"exponent tuple {exps} incompatible with dim={dim}, degree={degree}")
            coef = complex(coef)
            if not (math.isfinite(coef.real) and math.isfinite(coef.imag)):
                raise NonFinite(f"non-finite coefficient for {exps}")
            if coef != 0:
                clean[exps] = clean.get(exps, 0) + coef
        clean = {e: c for e, c in clean.items() if c != 0}
        if not clean:
            raise ValueError("polynomial has no nonzero coefficient")
        self.terms = clean
        keys = sorted(clean)
        self._exps = np.array(keys, dtype=np.int64)
        self._coefs = np.array([clean[e] for e in keys], dtype=complex)

    @classmethod
    def monomial(cls, exps, coef=1.0):
        exps = tuple(exps)
        return cls(len(exps), sum(exps), {exps: coef})

    def __call__(self, Z):
        """Evaluate on a single vector or on rows of an (N, dim) array."""
        Z = np.asarray(Z, dtype=complex)
        single = Z.ndim == 1
        Z2 = Z[None] if single else Z
        vals = np.prod(Z2[:, None, :] ** self._exps[None, :, :], axis=2) @ self._coefs
        return vals[0] if single else vals

    def binary_coefficients(self):
        """For dim = 2: array c with c[j] the coefficient of z^j w^(degree-j)."""
        if self.dim != 2:
            raise DimMismatch("binary coefficients need exactly two variables")
        c = np.zeros(self.degree + 1, dtype=complex)
        for (a, _b), coef in self.terms.items():
            c[a] += coef
        return c

    def coefficient_norm(self):
        return float(np.sum(np.abs(self._coefs)))

    def to_json(self):
        return [{"exps": list(e), "re": c.real, "im": c.imag} for e, c in sorted(self.terms.items())]

    @classmethod
    def from_json(cls, dim, degree, items):
        terms = {}
        for item in items:
            exps = tuple(item["exps"])
            terms[exps] = terms.get(exps, 0) + complex(item.get("re", 0.0), item.get("im", 0.0))
        return cls(dim, degree, terms)

    def __repr__(self):
        return f"HomogeneousPolynomial(dim={self.dim}, degree={self.degree}, terms={self.terms})"


def binary_form(coeffs):
    """Binary form from coefficients c[j] of z^j w^(d-j)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    d = len(coeffs) - 1
    return HomogeneousPolynomial(2, d, {(j, d - j): c for j, c in enumerate(coeffs) if c != 0})


@dataclass(frozen=True)
class Certificate:
    method: str          # "resultant" or "sphere_sampling"
    witness: float       # |Res| or min ||F|| on the sampled sphere
    heuristic: bool
    samples: int = 0


def sylvester_resultant(a, b):
    """Resultant of two binary forms of degree d given by coefficient arrays c[j] (z^j w^(d-j))."""
    a = np.asarray(a, dtype=complex)[::-1]
    b = np.asarray(b, dtype=complex)[::-1]
    m, n = len(a) - 1, len(b) - 1
    size = m + n
    S = np.zeros((size, size), dtype=complex)
    for i in range(n):
        S[i, i:i + m + 1] = a
    for i in range(m):
        S[n + i, i:i + n + 1] = b
    return complex(np.linalg.det(S))


@dataclass(frozen=True, eq=False)
class EndomorphismMap:
    """Holomorphic endomorphism of P^k given by a homogeneous lift F = (F_0, ..., F_k).

    Construction checks that F^{-1}(0) = {0} and stores the certificate.
    ``exceptional`` lists points known to be totally invariant (presets only).
    """

    components: tuple
    name: str = "custom"
    exceptional: tuple = ()
    tol: Tolerances = field(default=DEFAULT, repr=False)
    certificate: Certificate = field(default=None, repr=False)

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if len(comps) < 2:
            raise DimMismatch("need at least two components")
        n_vars = comps[0].dim
        d = comps[0].degree
        for c in comps:
            if c.dim != n_vars or c.degree != d:
                raise DimMismatch("components must share the number of variables and the degree")
        if n_vars != len(comps):
            raise DimMismatch(f"{len(comps)} components for {n_vars} variables")
        if d < 2:
            raise ValueError("algebraic degree must be at least 2")
        object.__setattr__(self, "exceptional", tuple(self.exceptional))
        if self.certificate is None:
            object.__setattr__(self, "certificate", check_nondegenerate(self))

    @property
    def dim(self):
        return len(self.components) - 1

    @property
    def degree(self):
        return self.components[0].degree

    @cached_property
    def coefficient_scale(self):
        return max(float(np.max(np.abs(c._coefs))) for c in self.components)

    def lift(self, Z):
        """F applied to rows of Z (no normalization)."""
        Z = np.asarray(Z, dtype=complex)
        return np.stack([c(Z) for c in self.components], axis=-1)

    @cached_property
    def binary_coefficients(self):
        """(F_0, F_1) coefficient arrays for k = 1."""
        if self.dim != 1:
            raise DimMismatch("binary coefficients exist only for k = 1")
        return np.stack([c.binary_coefficients() for c in self.components])

    @cached_property
    def map_constant(self):
        """sup over the unit sphere of |log ||F(z)|| |, sampled and inflated by the safety factor."""
        z = sphere_points(self.dim + 1, self.tol.sphere_samples, seed=0)
        vals = np.abs(np.log(np.linalg.norm(self.lift(z), axis=1)))
        return float(self.tol.safety_factor * np.max(vals))

    @cached_property
    def critical_points(self):
        """Zeros of the Jacobian determinant (k = 1), with multiplicity."""
        from .fibers import solve_binary_forms

        J = jacobian_binary(self.binary_coefficients)
        roots, mult = solve_binary_forms(J[None], self.tol)
        keep = mult[0] > 0
        return roots[0][keep], mult[0][keep]

    @cached_property
    def critical_values(self):
        pts, _ = self.critical_points
        if len(pts) == 0:
            return np.zeros((0, 2), dtype=complex)
        img, _ = apply_array(self, pts)
        return img

    def describe(self):
        return map_to_dict(self)

    def __repr__(self):
        return f"EndomorphismMap(name={self.name!r}, dim={self.dim}, degree={self.degree})"


def jacobian_binary(F):
    """Jacobian determinant of a pair of binary forms, as coefficients of a degree 2d-2 form."""
    F0, F1 = np.asarray(F[0], dtype=complex), np.asarray(F[1], dtype=complex)
    d = len(F0) - 1
    j = np.arange(d + 1)

    def dz(c):
        return (j * c)[1:]

    def dw(c):
        return ((d - j) * c)[:-1]

    return np.convolve(dz(F0), dw(F1)) - np.convolve(dw(F0), dz(F1))


def check_nondegenerate(f: EndomorphismMap) -> Certificate:
    """Certify F^{-1}(0) = {0}.

    k = 1: Sylvester resultant of F_0, F_1 (after scaling each to unit max
    coefficient) must exceed ``tol.resultant`` in modulus.  k >= 2: minimum of
    ||F|| over quasi-random unit-sphere samples must exceed
    ``tol.sphere_threshold``, after a local least-squares descent from the
    best samples; this is a heuristic and flagged as such.
    """
    tol = f.tol
    if f.dim == 1:
        F = [c.binary_coefficients() for c in f.components]
        F = [c / np.max(np.abs(c)) for c in F]
        res = abs(sylvester_resultant(F[0], F[1]))
        if not res > tol.resultant:
            raise Degenerate(f"nondegeneracy check failed: |resultant| = {res:.3e} (components share a zero)")
        return Certificate("resultant", res, heuristic=False)
    z = sphere_points(f.dim + 1, tol.sphere_samples, seed=0)
    vals = np.linalg.norm(f.lift(z), axis=1) / f.coefficient_scale
    witness = float(np.min(vals))
    # samples alone sit ~0.1 apart on the sphere; polish the best ones toward a common zero
    n = f.dim + 1

    def resid(x):
        v = x[:n] + 1j * x[n:]
        W = f.lift((v / np.linalg.norm(v))[None])[0] / f.coefficient_scale
        return np.concatenate([W.real, W.imag])

    for i in np.argsort(vals)[:4]:
        x0 = np.concatenate([z[i].real, z[i].imag])
        sol = least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=400 * n)
        witness = min(witness, float(np.linalg.norm(resid(sol.x))))
    if not witness > tol.sphere_threshold:
        raise Degenerate(f"nondegeneracy check failed: min ||F|| on sphere = {witness:.3e}")
    return Certificate("sphere_sampling", witness, heuristic=True, samples=len(z))


def apply_array(f: EndomorphismMap, Z):
    """Images and log sup-norm scale factors for rows of canonical coordinates Z."""
    W = f.lift(Z)
    scale = np.max(np.abs(W), axis=1)
    if np.any(~(scale > 1e-13 * f.coefficient_scale)):
        raise DegenerateImage("F vanishes at a nonzero point; the nondegeneracy certificate is wrong here")
    return normalize_array(W), np.log(scale)


def evaluate_map(f: EndomorphismMap, p):
    """Image of p under f and the log sup-norm of F at p's coordinates."""
    z = as_coords(p)
    if z.shape[0] != f.dim + 1:
        raise DimMismatch(f"point in P^{z.shape[0] - 1}, map on P^{f.dim}")
    img, ls = apply_array(f, z[None])
    return ProjectivePoint(img[0]), float(ls[0])


# presets -------------------------------------------------------------------

def power_map(d, dim=1, tol=DEFAULT):
    """(z_0^d, ..., z_k^d); its exceptional points on P^1 are 0 and infinity."""
    comps = tuple(HomogeneousPolynomial.monomial(tuple(d if j == i else 0 for j in range(dim + 1)))
                  for i in range(dim + 1))
    exc = (point(0, 1), point(1, 0)) if dim == 1 else tuple(
        normalize(np.eye(dim + 1)[i]) for i in range(dim + 1))
    return EndomorphismMap(comps, name=f"power({d})", exceptional=exc, tol=tol)


def reciprocal_power_map(d, tol=DEFAULT):
    """Lift (w^d, z^d) of z -> z^{-d} on P^1."""
    comps = (HomogeneousPolynomial.monomial((0, d)), HomogeneousPolynomial.monomial((d, 0)))
    return EndomorphismMap(comps, name=f"reciprocal_power({d})",
                           exceptional=(point(0, 1), point(1, 0)), tol=tol)


def quadratic_family(c_re, c_im=0.0, tol=DEFAULT):
    """Lift (z^2 + c w^2, w^2) of the quadratic polynomial z^2 + c."""
    c = complex(c_re, c_im)
    F0 = HomogeneousPolynomial(2, 2, {(2, 0): 1.0, (0, 2): c})
    F1 = HomogeneousPolynomial.monomial((0, 2))
    # infinity is totally invariant for every polynomial
    return EndomorphismMap((F0, F1), name=f"quadratic_family({c_re:g}, {c_im:g})",
                           exceptional=(point(1, 0),), tol=tol)


PRESETS = {
    "power": "power(d): (z_0^d, ..., z_k^d)",
    "quadratic_family": "quadratic_family(c_re, c_im): lift of z^2 + c on P^1",
    "reciprocal_power": "reciprocal_power(d): lift (w^d, z^d) of z^{-d} on P^1",
}

_PRESET_RE = re.compile(r"^\s*([a-z_]+)\s*\(([^)]*)\)\s*$")


def preset(spec: str, dim=1, tol=DEFAULT) -> EndomorphismMap:
    m = _PRESET_RE.match(spec)
    if not m or m.group(1) not in PRESETS:
        raise ValueError(f"unknown preset {spec!r}; known: {', '.join(PRESETS.values())}")
    name = m.group(1)
    args = [float(a) for a in m.group(2).split(",") if a.strip()]
    if name == "power":
        if len(args) != 1 or args[0] != int(args[0]):
            raise ValueError("power(d) takes one integer")
        return power_map(int(args[0]), dim=dim, tol=tol)
    if dim != 1:
        raise ValueError(f"preset {name} is defined on P^1 only")
    if name == "reciprocal_power":
        return reciprocal_power_map(int(args[0]), tol=tol)
    if len(args) not in (1, 2):
        raise ValueError("quadratic_family(c_re, c_im) takes one or two numbers")
    return quadratic_family(*args, tol=tol)


def map_from_dict(obj, tol=DEFAULT) -> EndomorphismMap:
    """Build a map from the JSON map-definition schema (explicit components or a preset name)."""
    if isinstance(obj, str):
        return preset(obj, tol=tol)
    dim = int(obj.get("dim", 1))
    comps = obj["components"]
    if isinstance(comps, str):
        return preset(comps, dim=dim, tol=tol)
    if len(comps) != dim + 1:
        raise DimMismatch(f"expected {dim + 1} components, got {len(comps)}")
    degree = int(obj["degree"])
    polys = tuple(HomogeneousPolynomial.from_json(dim + 1, degree, c) for c in comps)
    return EndomorphismMap(polys, name=obj.get("name", "custom"), tol=tol)


def map_to_dict(f: EndomorphismMap):
    return {"dim": f.dim, "degree": f.degree, "name": f.name,
            "components": [c.to_json() for c in f.components]}


def load_map(path_or_spec, tol=DEFAULT) -> EndomorphismMap:
    """Map from a JSON file path, a JSON string or a preset name."""
    s = str(path_or_spec)
    if _PRESET_RE.match(s):
        return preset(s, tol=tol)
    p = Path(s)
    text = p.read_text() if p.exists() else s
    return map_from_dict(json.loads(text), tol=tol)
