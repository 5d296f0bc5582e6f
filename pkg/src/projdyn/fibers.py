"""Preimages and backward-orbit trees on P^1.

Everything here is batched: a level of a backward-orbit tree is a stack of
targets, and solving ``a_1 F_0 - a_0 F_1 = 0`` for all of them is a stack of
companion-matrix eigenvalue problems.  Fibers over P^k with k >= 2 are not
supported.
"""
from __future__ import annotations

import csv
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .config import DEFAULT
from .errors import CapExceeded, NotSupported, SolverFailure
from .projective import (ProjectivePoint, apply_array, as_coords, chordal_distance,
                         normalize_array)

_EPS = np.finfo(float).eps
CHUNK = 1 << 15


# --- univariate kernels -----------------------------------------------------

def _horner(A, X):
    """Value and derivative of polynomials with ascending coefficient rows A at points X."""
    p = np.repeat(A[:, -1:], X.shape[1], axis=1)
    dp = np.zeros_like(X)
    for i in range(A.shape[1] - 2, -1, -1):
        dp = dp * X + p
        p = p * X + A[:, i:i + 1]
    return p, dp


def companion_roots(A):
    """Roots of each row of ascending coefficients A (leading entry nonzero) via companion eigenvalues."""
    N, m1 = A.shape
    m = m1 - 1
    if m == 1:
        return -(A[:, :1] / A[:, 1:])
    mon = A[:, :-1] / A[:, -1:]
    C = np.zeros((N, m, m), dtype=complex)
    C[:, np.arange(1, m), np.arange(m - 1)] = 1.0
    C[:, :, -1] = -mon
    return np.linalg.eigvals(C)


def aberth_roots(A, max_iter=500):
    """Simultaneous Aberth-Ehrlich iteration on each row of ascending coefficients A."""
    N, m1 = A.shape
    m = m1 - 1
    A = A / A[:, -1:]
    radius = np.abs(A[:, 0]) ** (1.0 / m)
    radius = np.where(radius > 0, radius, 1.0)
    angles = 2 * np.pi * np.arange(m) / m + 0.4
    Z = radius[:, None] * np.exp(1j * angles)[None, :]
    off = ~np.eye(m, dtype=bool)
    for _ in range(max_iter):
        p, dp = _horner(A, Z)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = p / dp
            diff = Z[:, :, None] - Z[:, None, :]
            s = np.sum(np.where(off, 1.0 / np.where(off, diff, 1.0), 0.0), axis=2)
            step = w / (1.0 - w * s)
        step = np.where(np.isfinite(step), step, 0.0)
        Z = Z - step
        if np.all(np.abs(step) <= 4 * _EPS * np.maximum(np.abs(Z), 1.0)):
            break
    return Z


def _polish(A, X, steps):
    """Newton-polish roots X of ascending rows A; roots outside the unit disc are polished in 1/x."""
    X = X.copy()
    outside = np.abs(X) > 1
    Ar = A[:, ::-1]
    Y = np.where(outside, 1.0 / np.where(outside, X, 1.0), X)
    for _ in range(steps):
        p_in, dp_in = _horner(A, Y)
        p_out, dp_out = _horner(Ar, Y)
        p = np.where(outside, p_out, p_in)
        dp = np.where(outside, dp_out, dp_in)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = Y - p / dp
        ok = np.isfinite(cand)
        if not np.any(ok):
            break
        cand = np.where(ok, cand, Y)
        q_in, _ = _horner(A, cand)
        q_out, _ = _horner(Ar, cand)
        q = np.where(outside, q_out, q_in)
        better = np.abs(q) <= np.abs(p)
        Y = np.where(better, cand, Y)
    # homogeneous coordinates in the chart where the free coordinate is small
    H = np.empty(X.shape + (2,), dtype=complex)
    H[..., 0] = np.where(outside, 1.0, Y)
    H[..., 1] = np.where(outside, Y, 1.0)
    return H


def _sort_key_order(R):
    """Per-row slot order by (re, im) of the affine coordinate, infinity last."""
    z, w = R[..., 0], R[..., 1]
    inf = w == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(inf, 0.0, z / np.where(inf, 1.0, w))
    return np.lexsort((x.imag, x.real, inf.astype(int)), axis=-1)


def _cluster(R, tol):
    """Merge roots closer than ``tol`` (single linkage); returns merged roots and multiplicities."""
    N, D, _ = R.shape
    if D == 1:
        return R, np.ones((N, 1), dtype=np.int64)
    dist = chordal_distance(R[:, :, None, :], R[:, None, :, :])
    adj = dist < tol
    adj |= np.eye(D, dtype=bool)[None]
    steps = int(np.ceil(np.log2(D))) + 1
    for _ in range(steps):
        ai = adj.astype(np.int64)
        adj = (ai @ ai) > 0
    label = np.argmax(adj, axis=2)
    mult = np.zeros((N, D), dtype=np.int64)
    out = R.copy()
    for j in range(D):
        members = label == j
        cnt = members.sum(axis=1)
        mult[:, j] = cnt
        multi = cnt > 1
        if not np.any(multi):
            continue
        rows = np.nonzero(multi)[0]
        rep = R[rows, j]
        idx = np.argmax(np.abs(rep), axis=1)
        piv = R[rows, :, idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            aligned = R[rows] / piv[:, :, None]
        m = members[rows][:, :, None]
        mean = np.sum(np.where(m, aligned, 0.0), axis=1) / cnt[rows][:, None]
        out[rows, j] = normalize_array(mean)
    return out, mult


def solve_binary_forms(C, tol=DEFAULT):
    """Zeros on P^1 of binary forms with coefficient rows ``C[:, j]`` of z^j w^(D-j).

    Returns ``(roots, mult)``: canonical roots of shape (N, D, 2) sorted by affine
    coordinate (infinity last) and integer multiplicities of shape (N, D); slots
    absorbed into a cluster carry multiplicity 0.
    """
    C = np.asarray(C, dtype=complex)
    N, D1 = C.shape
    D = D1 - 1
    scale = np.max(np.abs(C), axis=1, keepdims=True)
    if np.any(scale == 0):
        raise ValueError("zero binary form")
    nz = np.abs(C) > 4 * _EPS * scale
    lo = np.argmax(nz, axis=1)
    hi = np.argmax(nz[:, ::-1], axis=1)
    R = np.empty((N, D, 2), dtype=complex)
    pattern = lo * (D + 1) + hi
    use_aberth_for = tol.solver == "aberth" or (tol.solver == "auto" and D >= tol.aberth_min_degree)
    for key in np.unique(pattern):
        rows = np.nonzero(pattern == key)[0]
        l, h = divmod(int(key), D + 1)
        m = D - l - h
        block = np.empty((len(rows), D, 2), dtype=complex)
        block[:, :l] = (0.0, 1.0)
        block[:, l:l + h] = (1.0, 0.0)
        if m > 0:
            A = C[rows, l:D - h + 1]
            X = aberth_roots(A) if (use_aberth_for and m >= 2) else companion_roots(A)
            block[:, l + h:] = _polish(A, X, tol.newton_steps)
        R[rows] = block
    order = _sort_key_order(R)
    R = np.take_along_axis(R, order[..., None], axis=1)
    R, mult = _cluster(R, tol.cluster)
    return R, mult


# --- preimages ----------------------------------------------------------------

def _require_p1(f):
    if f.dim != 1:
        raise NotSupported("fibers are implemented on P^1 only (k >= 2 needs polynomial-system solving)")


def _near_critical(f, targets, tol):
    cv = f.critical_values
    if len(cv) == 0:
        return np.zeros(len(targets), dtype=bool)
    dist = chordal_distance(targets[:, None, :], cv[None, :, :])
    return np.min(dist, axis=1) < tol.near_critical


def preimages_batch(f, targets, tol=None):
    """Preimages of each row of ``targets`` (canonical coords, shape (N, 2)).

    Returns roots (N, d, 2), multiplicities (N, d) and chordal residuals (N, d),
    the latter NaN on absorbed slots.  Raises `SolverFailure` if a residual
    exceeds the tolerance (relaxed by a factor d near critical values).
    """
    _require_p1(f)
    tol = tol or f.tol
    targets = np.asarray(targets, dtype=complex)
    F = f.binary_coefficients
    C = targets[:, 1:2] * F[0][None, :] - targets[:, 0:1] * F[1][None, :]
    roots, mult = solve_binary_forms(C, tol)
    N, d = mult.shape
    img, _ = apply_array(f, roots.reshape(-1, 2))
    res = chordal_distance(img.reshape(N, d, 2), targets[:, None, :])
    res = np.where(mult > 0, res, np.nan)
    limit = np.full(N, tol.residual)
    worst = np.nanmax(res, axis=1)
    bad = worst > limit
    if np.any(bad):
        limit = np.where(_near_critical(f, targets, tol), tol.residual * f.degree, limit)
        bad = worst > limit
        if np.any(bad):
            i = int(np.argmax(bad))
            raise SolverFailure(f"preimage residual {worst[i]:.3e} exceeds {limit[i]:.1e} "
                                f"for target {targets[i]}")
    return roots, mult, res


class PreimageSet(NamedTuple):
    target: ProjectivePoint
    roots: list          # list of (ProjectivePoint, multiplicity)
    residuals: list


def preimages_p1(f, a, tol=None) -> PreimageSet:
    """The fiber f^{-1}(a) on P^1 with multiplicities summing to d."""
    _require_p1(f)
    a = ProjectivePoint(normalize_array(as_coords(a)[None])[0])
    roots, mult, res = preimages_batch(f, a.coords[None], tol)
    keep = mult[0] > 0
    return PreimageSet(a,
                       [(ProjectivePoint(r), int(m)) for r, m in zip(roots[0][keep], mult[0][keep])],
                       [float(r) for r in res[0][keep]])


# --- backward orbits ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FiberCloud:
    """Atoms of f^{-n}(base) with integer weights (exact) or i.i.d. samples of the fiber measure."""

    base: ProjectivePoint
    depth: int
    points: np.ndarray
    weights: np.ndarray
    mode: str = "exact"
    count: int = 0
    seed: int = None

    @property
    def total_weight(self):
        return int(np.sum(self.weights))

    def __len__(self):
        return len(self.weights)

    def atoms(self):
        for p, w in zip(self.points, self.weights):
            yield ProjectivePoint(p), int(w)


def _expand_chunk(f, tol, pts, w):
    roots, mult, _ = preimages_batch(f, pts, tol)
    keep = mult > 0
    return roots[keep], (w[:, None] * mult)[keep]


def _expand(f, pts, w, tol, threads):
    if len(pts) <= CHUNK or threads <= 1:
        parts = [_expand_chunk(f, tol, pts[i:i + CHUNK], w[i:i + CHUNK])
                 for i in range(0, len(pts), CHUNK)]
    else:
        starts = range(0, len(pts), CHUNK)
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda i: _expand_chunk(f, tol, pts[i:i + CHUNK], w[i:i + CHUNK]), starts))
    return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


def check_cap(f, depth, tol=None):
    tol = tol or f.tol
    if f.degree ** depth > tol.atom_cap:
        raise CapExceeded(f"d^n = {f.degree}^{depth} exceeds the atom cap {tol.atom_cap}")


def fiber_levels(f, a, depth, tol=None, threads=1):
    """Yield ``(n, points, weights)`` for n = 0..depth along the exact backward-orbit tree."""
    _require_p1(f)
    tol = tol or f.tol
    check_cap(f, depth, tol)
    pts = normalize_array(as_coords(a)[None])
    w = np.ones(1, dtype=np.int64)
    yield 0, pts, w
    for n in range(1, depth + 1):
        pts, w = _expand(f, pts, w, tol, threads)
        yield n, pts, w


def sample_backward(f, a, n, count, seed, tol=None, keep_path=False):
    """Independent backward random walks of length n from a.

    At each step the walker moves to a preimage chosen with probability
    multiplicity/d.  The uniforms come from a Philox stream keyed by ``seed``,
    drawn up front so row i always belongs to sample i.
    """
    _require_p1(f)
    tol = tol or f.tol
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.Generator(np.random.Philox(seed))
    U = rng.random((count, n))
    cur = np.repeat(normalize_array(as_coords(a)[None]), count, axis=0)
    path = [cur] if keep_path else None
    d = f.degree
    rows = np.arange(count)
    for step in range(n):
        roots, mult, _ = preimages_batch(f, cur, tol)
        cum = np.cumsum(mult, axis=1) / d
        idx = np.argmax(cum > U[:, step:step + 1], axis=1)
        cur = roots[rows, idx]
        if keep_path:
            path.append(cur)
    return (cur, np.stack(path)) if keep_path else cur


def backward_orbit(f, a, n, mode="exact", count=None, seed=None, tol=None, threads=1) -> FiberCloud:
    """The depth-n fiber of a as a `FiberCloud` (exact tree or sampled walks)."""
    _require_p1(f)
    tol = tol or f.tol
    base = ProjectivePoint(normalize_array(as_coords(a)[None])[0])
    if n < 0:
        raise ValueError("depth must be nonnegative")
    if mode == "exact":
        for _, pts, w in fiber_levels(f, base, n, tol, threads):
            pass
        return FiberCloud(base, n, pts, w, "exact")
    if mode == "sampled":
        if count is None or seed is None:
            raise ValueError("sampled mode needs count and seed")
        pts = sample_backward(f, base, n, count, seed, tol)
        return FiberCloud(base, n, pts, np.ones(count, dtype=np.int64), "sampled", count, seed)
    raise ValueError(f"unknown mode {mode!r}")


def lambda_apply(f, phi, a, n, tol=None, threads=1):
    """Lambda^n phi(a) = sum over f^{-n}(a) of phi, counted with multiplicity (k = 1)."""
    cloud = backward_orbit(f, a, n, tol=tol, threads=threads)
    return float(np.sum(cloud.weights * phi(cloud.points)))


# --- multiplicities -------------------------------------------------------------

class MultiplicityReport(NamedTuple):
    point: ProjectivePoint
    kappa_along_orbit: list
    kappa_n: int
    kappa_minus_n: int
    depth: int


def local_degree(f, y, tol=None):
    """kappa_1(y): multiplicity of y inside f^{-1}(f(y))."""
    tol = tol or f.tol
    y = normalize_array(as_coords(y)[None])
    img, _ = apply_array(f, y)
    roots, mult, _ = preimages_batch(f, img, tol)
    dist = chordal_distance(roots[0], y)
    dist = np.where(mult[0] > 0, dist, np.inf)
    return int(mult[0][np.argmin(dist)])


def multiplicity_kappa(f, x, n, tol=None) -> MultiplicityReport:
    """kappa_n(x) by the chain rule along the forward orbit and kappa_{-n}(x) over the backward tree."""
    _require_p1(f)
    tol = tol or f.tol
    x = ProjectivePoint(normalize_array(as_coords(x)[None])[0])
    along = []
    cur = x.coords[None]
    for _ in range(n):
        along.append(local_degree(f, cur, tol))
        cur, _ = apply_array(f, cur)
    kappa_n = int(np.prod(along, dtype=np.int64)) if along else 1
    # the weight of an atom in the depth-n tree is the product of local degrees along its path
    cloud = backward_orbit(f, x, n, tol=tol)
    return MultiplicityReport(x, along, kappa_n, int(np.max(cloud.weights)), n)


class ScanResult(NamedTuple):
    point: ProjectivePoint
    flagged: bool
    rate: float


def default_lambda(d):
    return (1.0 + d) / 2.0


def exceptional_scan(f, lam, depth, candidates, tol=None):
    """Flag candidates whose finite-depth rate kappa_{-depth}^{1/depth} reaches d/lam.

    A finite-depth heuristic for the limit function kappa_-; it cannot certify
    membership in the exceptional set.
    """
    _require_p1(f)
    tol = tol or f.tol
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if not 1 < lam < f.degree:
        raise ValueError("lambda must lie in (1, d)")
    out = []
    for c in candidates:
        p = ProjectivePoint(normalize_array(as_coords(c)[None])[0])
        cloud = backward_orbit(f, p, depth, tol=tol)
        rate = float(np.max(cloud.weights)) ** (1.0 / depth)
        out.append(ScanResult(p, rate >= f.degree / lam * (1 - 1e-12), rate))
    return out


def is_exceptional(f, a, lam=None, depth=None, tol=None):
    """True if a is a known invariant point of the preset or is flagged by the scan."""
    tol = tol or f.tol
    a = ProjectivePoint(normalize_array(as_coords(a)[None])[0])
    for e in f.exceptional:
        if chordal_distance(e.coords, a.coords) < tol.cluster:
            return True
    lam = lam or default_lambda(f.degree)
    return exceptional_scan(f, lam, depth or tol.scan_depth, [a], tol)[0].flagged


# --- export ---------------------------------------------------------------------

def write_cloud_csv(cloud: FiberCloud, path):
    """Columns atom_re, atom_im, chart, weight; chart is the coordinate index equal to 1."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["atom_re", "atom_im", "chart", "weight"])
        for p, w in zip(cloud.points, cloud.weights):
            # the pivot is stored as exactly 1; |other| can tie with it up to rounding
            chart = int(np.flatnonzero(p == 1)[0])
            other = p[1 - chart]
            wr.writerow([repr(float(other.real)), repr(float(other.imag)), chart, int(w)])


_MAGIC = b"FIBC"
_VERSION = 1
_HEADER = struct.Struct("<BBIQq")


def write_cloud_binary(cloud: FiberCloud, path):
    """FIBC cache: magic, version byte, header, base coords, then per atom coords and weight, all little-endian."""
    k = cloud.base.dim
    mode = 0 if cloud.mode == "exact" else 1
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(bytes([_VERSION]))
        fh.write(_HEADER.pack(k, mode, cloud.depth, len(cloud), -1 if cloud.seed is None else cloud.seed))
        fh.write(np.asarray(cloud.base.coords, dtype="<c16").tobytes())
        rows = np.empty((len(cloud), 2 * (k + 1) + 1), dtype="<f8")
        rows[:, 0:2 * (k + 1):2] = cloud.points.real
        rows[:, 1:2 * (k + 1):2] = cloud.points.imag
        rows[:, -1] = cloud.weights
        fh.write(rows.tobytes())


def read_cloud_binary(path) -> FiberCloud:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise ValueError("not a FIBC file")
    if data[4] != _VERSION:
        raise ValueError(f"unsupported FIBC version {data[4]}")
    k, mode, depth, count, seed = _HEADER.unpack_from(data, 5)
    off = 5 + _HEADER.size
    base = np.frombuffer(data, dtype="<c16", count=k + 1, offset=off)
    off += 16 * (k + 1)
    rows = np.frombuffer(data, dtype="<f8", offset=off).reshape(count, 2 * (k + 1) + 1)
    pts = np.empty((count, k + 1), dtype=complex)
    pts.real = rows[:, 0:2 * (k + 1):2]
    pts.imag = rows[:, 1:2 * (k + 1):2]
    return FiberCloud(ProjectivePoint(base), depth, pts, rows[:, -1].astype(np.int64),
                      "exact" if mode == 0 else "sampled", count if mode else 0,
                      None if seed < 0 else seed)
