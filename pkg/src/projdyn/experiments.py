"""Reproducible equidistribution experiments with pass/fail verdicts.

Each ``exp_*`` function returns an `ExperimentReport`.  Rate verdicts are
property based: the constants in the underlying estimates are not known, so a
verdict asks for geometric decay with a fitted ratio above a threshold and a
good log-linear fit, never for an absolute constant.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ExceptionalBase, InsufficientData, NotSupported
from .fibers import (check_cap, default_lambda, exceptional_scan, fiber_levels, is_exceptional,
                     sample_backward, solve_binary_forms)
from .green import depth_for_tail, green_values
from .measures import (RATE_COLUMNS, EmpiricalMeasure, fit_rate, pair, write_gnuplot,
                       write_rate_rows)
from .projective import (ProjectivePoint, apply_array, as_coords, chordal_distance,
                         fs_random_points, normalize_array, point)

PASS, FAIL, INCONCLUSIVE, REPORT = "pass", "fail", "inconclusive", "report"
DEFAULT_REF_BASE = (5.0, 2.0)


@dataclass
class Verdict:
    label: str
    status: str
    measured: float = float("nan")
    threshold: float = float("nan")
    note: str = ""

    def line(self):
        return f"{self.label}\t{self.status}\tmeasured={self.measured!r}\tthreshold={self.threshold!r}" + (
            f"\t{self.note}" if self.note else "")


@dataclass
class ExperimentReport:
    experiment_id: str
    config_digest: str
    columns: tuple
    rows: list
    verdicts: list
    seed: int = None
    meta: dict = field(default_factory=dict)

    @property
    def outcome(self):
        statuses = {v.status for v in self.verdicts}
        if FAIL in statuses:
            return FAIL
        if INCONCLUSIVE in statuses:
            return INCONCLUSIVE
        return PASS

    def verdict(self, label):
        for v in self.verdicts:
            if v.label == label:
                return v
        raise KeyError(label)

    def column(self, name, **where):
        return [r[name] for r in self.rows if all(r.get(k) == v for k, v in where.items())]

    def rows_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.columns)
        for r in self.rows:
            wr.writerow([_cell(r.get(c)) for c in self.columns])
        return buf.getvalue()

    def summary(self):
        return {"experiment_id": self.experiment_id, "config_digest": self.config_digest,
                "seed": self.seed, "outcome": self.outcome,
                "verdicts": [{"label": v.label, "status": v.status, "measured": _json_num(v.measured),
                              "threshold": _json_num(v.threshold), "note": v.note} for v in self.verdicts],
                "meta": _jsonable(self.meta)}

    def write(self, out_dir):
        """Write report.csv, verdicts.txt and summary.json under out_dir/<config_digest>/."""
        d = Path(out_dir) / self.config_digest
        d.mkdir(parents=True, exist_ok=True)
        (d / "report.csv").write_text(self.rows_csv())
        (d / "verdicts.txt").write_text("\n".join(v.line() for v in self.verdicts) + "\n")
        (d / "summary.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        if "error" in self.columns and "phi_tag" in self.columns:
            write_rate_rows(d / "rates.csv", [{**r, "experiment_id": self.experiment_id} for r in self.rows])
            for tag in dict.fromkeys(r["phi_tag"] for r in self.rows):
                sel = [r for r in self.rows if r["phi_tag"] == tag]
                write_gnuplot(d / f"{_slug(tag)}.dat", [r["n"] for r in sel], [r["error"] for r in sel])
        return d


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (bool, np.bool_)):
        return int(bool(v))
    return "" if v is None else v


def _json_num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return _json_num(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, ProjectivePoint):
        return [[float(c.real), float(c.imag)] for c in obj.coords]
    return obj


def _slug(tag):
    return re.sub(r"[^A-Za-z0-9.+-]+", "_", tag).strip("_")


def digest(payload) -> str:
    """SHA-256 of the canonical JSON form of ``payload``."""
    text = json.dumps(_jsonable(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _digest_or(config_digest, experiment_id, f, **inputs):
    if config_digest:
        return config_digest
    desc = {"experiment": experiment_id, "map": f.describe(), **{k: _describe(v) for k, v in inputs.items()}}
    return digest(desc)


def _describe(v):
    if hasattr(v, "describe"):
        return v.describe()
    if isinstance(v, (list, tuple)):
        return [_describe(x) for x in v]
    if isinstance(v, np.ndarray):
        return [[float(c.real), float(c.imag)] for c in v.reshape(-1)]
    if isinstance(v, ProjectivePoint):
        return _jsonable(v)
    if hasattr(v, "as_dict"):
        return v.as_dict()
    return v


def _canon(a):
    return ProjectivePoint(normalize_array(as_coords(a)[None])[0])


# --- reference measure ---------------------------------------------------------------

class ReferenceMeasure:
    """Full-fiber estimate of the equilibrium measure at ``depth`` from ``base``.

    The depth-1 fiber of the same base is kept so every pairing comes with a
    self-consistency gap.
    """

    def __init__(self, f, base, depth, tol, threads=1):
        self.base = _canon(base)
        self.depth = depth
        prev = cur = None
        for n, pts, w in fiber_levels(f, self.base, depth, tol, threads):
            prev, cur = cur, (pts, w)
        self.measure = EmpiricalMeasure.from_arrays(cur[0], cur[1])
        self.coarse = EmpiricalMeasure.from_arrays(*prev) if prev is not None else self.measure

    def pair(self, phi):
        return pair(self.measure, phi)

    def gap(self, phi):
        return abs(pair(self.measure, phi) - pair(self.coarse, phi))

    def mass(self, U):
        return float(np.sum(self.measure.weights[U(self.measure.points)]))


def _gate(f, a, lam, tol):
    if is_exceptional(f, a, lam, tol.scan_depth, tol):
        raise ExceptionalBase(f"base point {_canon(a)} is exceptional (known invariant point or flagged by the scan)")


def _ref_depth(f, ns, ref_depth, tol):
    if ref_depth is None:
        ref_depth = max(ns) + 2
        while f.degree ** ref_depth > tol.atom_cap:
            ref_depth -= 1
    check_cap(f, ref_depth, tol)
    return ref_depth


def _rate_verdict(label, ns, errors, gap, tol):
    """Exact if the last three or more errors are below tol.exact, otherwise a geometric-decay fit."""
    errors = np.asarray(errors, dtype=float)
    # exact once the errors vanish from some n on (e.g. roots-of-unity cancellation)
    big = np.flatnonzero(errors > tol.exact)
    start = 0 if len(big) == 0 else big[-1] + 1
    if len(errors) - start >= 3:
        return Verdict(label, PASS if gap <= tol.exact else INCONCLUSIVE, float(np.max(errors[start:])),
                       tol.exact, f"exact equidistribution from n = {ns[start]}"), None
    try:
        fit = fit_rate(ns, errors, tol.error_floor)
    except InsufficientData as exc:
        return Verdict(label, INCONCLUSIVE, note=str(exc)), None
    used = errors[errors > tol.error_floor]
    ok = fit.fitted_rho >= tol.rate_threshold and fit.r_squared >= tol.r_squared
    status = PASS if ok else FAIL
    note = f"r_squared={fit.r_squared:.4f} gap={gap:.3e} min_error={float(np.min(used)):.3e}"
    if gap >= np.min(used):
        status = INCONCLUSIVE
        note += " (reference gap not below the smallest error)"
    return Verdict(label, status, fit.fitted_rho, tol.rate_threshold, note), fit


# --- point equidistribution ------------------------------------------------------------

def exp_point_equidistribution(f, a, phis, ns, *, ref_base=DEFAULT_REF_BASE, ref_depth=None, lam=None,
                               tol=None, threads=1, config_digest=None) -> ExperimentReport:
    """Errors |<mu_n^a - mu_ref, phi>| over n with a geometric-rate verdict per phi.

    When two or more Hoelder kernels are present, an extra verdict checks that
    the fitted log-rate does not decrease with the exponent alpha.
    """
    tol = tol or f.tol
    lam = lam or default_lambda(f.degree)
    ns = sorted(int(n) for n in ns)
    _gate(f, a, lam, tol)
    check_cap(f, max(ns), tol)
    ref_depth = _ref_depth(f, ns, ref_depth, tol)
    ref = ReferenceMeasure(f, ref_base, ref_depth, tol, threads)
    ref_vals = [ref.pair(phi) for phi in phis]
    gaps = [ref.gap(phi) for phi in phis]
    pairings = {n: [] for n in ns}
    for n, pts, w in fiber_levels(f, a, max(ns), tol, threads):
        if n in pairings:
            m = EmpiricalMeasure.from_arrays(pts, w)
            pairings[n] = [pair(m, phi) for phi in phis]
    rows, verdicts, fits = [], [], {}
    for i, phi in enumerate(phis):
        errs = [abs(pairings[n][i] - ref_vals[i]) for n in ns]
        v, fit = _rate_verdict(f"decay:{phi.family_tag}", ns, errs, gaps[i], tol)
        verdicts.append(v)
        fits[phi.family_tag] = fit
        for n, e in zip(ns, errs):
            rows.append({"n": n, "phi_tag": phi.family_tag, "alpha": phi.alpha, "pairing": pairings[n][i],
                         "reference": ref_vals[i], "error": e,
                         "fitted_rho": fit.fitted_rho if fit else None,
                         "r_squared": fit.r_squared if fit else None})
    kernels = sorted((phi for phi in phis if phi.family_tag.startswith("holder_kernel")),
                     key=lambda p: p.params["alpha"])
    if len(kernels) >= 2:
        rates = [fits[k.family_tag] for k in kernels]
        if any(r is None for r in rates):
            verdicts.append(Verdict("alpha_scaling", INCONCLUSIVE, note="a kernel had no rate fit"))
        else:
            logs = [math.log(r.fitted_rho) for r in rates]
            steps = np.diff(logs)
            verdicts.append(Verdict("alpha_scaling", PASS if np.all(steps >= 0) else FAIL,
                                    float(np.min(steps)), 0.0,
                                    "log-rates by alpha: " + ", ".join(
                                        f"{k.params['alpha']:g}->{l:.4f}" for k, l in zip(kernels, logs))))
    meta = {"base": _canon(a), "ref_base": ref.base, "ref_depth": ref_depth,
            "reference_gap": {phi.family_tag: g for phi, g in zip(phis, gaps)}, "lambda": lam}
    dg = _digest_or(config_digest, "point_equidistribution", f, a=_canon(a), phis=phis, ns=ns,
                    ref_base=_canon(ref_base), ref_depth=ref_depth, lam=lam, tol=tol)
    return ExperimentReport("point_equidistribution", dg,
                            ("n", "phi_tag", "alpha", "pairing", "reference", "error", "fitted_rho", "r_squared"),
                            rows, verdicts, None, meta)


# --- exceptional points --------------------------------------------------------------

def exp_exceptional(f, a, phis, ns, *, ref_base=DEFAULT_REF_BASE, ref_depth=None, lam=None, tol=None,
                    threads=1, config_digest=None) -> ExperimentReport:
    """Fiber measures of an exceptional point do not approach the reference measure."""
    tol = tol or f.tol
    lam = lam or default_lambda(f.degree)
    ns = sorted(int(n) for n in ns)
    if not is_exceptional(f, a, lam, tol.scan_depth, tol):
        raise ValueError(f"{_canon(a)} is not exceptional for {f.name}")
    ref_depth = _ref_depth(f, ns, ref_depth, tol)
    ref = ReferenceMeasure(f, ref_base, ref_depth, tol, threads)
    ref_vals = [ref.pair(phi) for phi in phis]
    rows = []
    worst = {n: 0.0 for n in ns}
    for n, pts, w in fiber_levels(f, a, max(ns), tol, threads):
        if n not in worst:
            continue
        m = EmpiricalMeasure.from_arrays(pts, w)
        for phi, r in zip(phis, ref_vals):
            val = pair(m, phi)
            e = abs(val - r)
            worst[n] = max(worst[n], e)
            rows.append({"n": n, "phi_tag": phi.family_tag, "alpha": phi.alpha, "pairing": val,
                         "reference": r, "error": e, "atoms": len(w)})
    first = worst[ns[0]]
    ratio = min(worst.values()) / first if first > 0 else 0.0
    ok = first > tol.exact and ratio >= 0.5
    scan = exceptional_scan(f, lam, tol.scan_depth, [a], tol)[0]
    verdicts = [Verdict("non_convergence", PASS if ok else FAIL, ratio, 0.5,
                        f"max error at n={ns[0]}: {first:.6g}"),
                Verdict("scan_rate", REPORT, scan.rate, f.degree / lam,
                        "flagged" if scan.flagged else "not flagged")]
    meta = {"base": _canon(a), "ref_base": ref.base, "ref_depth": ref_depth, "scan_flagged": scan.flagged,
            "scan_rate": scan.rate}
    dg = _digest_or(config_digest, "exceptional", f, a=_canon(a), phis=phis, ns=ns,
                    ref_base=_canon(ref_base), ref_depth=ref_depth, lam=lam, tol=tol)
    return ExperimentReport("exceptional", dg,
                            ("n", "phi_tag", "alpha", "pairing", "reference", "error", "atoms"),
                            rows, verdicts, None, meta)


# --- counting -----------------------------------------------------------------

def exp_counting(f, a, b, U_set, ns, *, ref_base=DEFAULT_REF_BASE, ref_depth=None, lam=None, tol=None,
                 threads=1, config_digest=None) -> ExperimentReport:
    """Weighted counts of f^{-n}(a) and f^{-n}(b) in each set U against mu_ref(U) d^n."""
    tol = tol or f.tol
    lam = lam or default_lambda(f.degree)
    ns = sorted(int(n) for n in ns)
    _gate(f, a, lam, tol)
    _gate(f, b, lam, tol)
    ref_depth = _ref_depth(f, ns, ref_depth, tol)
    ref = ReferenceMeasure(f, ref_base, ref_depth, tol, threads)
    counts = {}
    for label, base in (("a", a), ("b", b)):
        for n, pts, w in fiber_levels(f, base, max(ns), tol, threads):
            if n in ns:
                counts[label, n] = [int(np.sum(w[U(pts)])) for U in U_set]
    rows, verdicts = [], []
    d = f.degree
    for j, U in enumerate(U_set):
        mass = ref.mass(U)
        for n in ns:
            ca, cb = counts["a", n][j], counts["b", n][j]
            rows.append({"n": n, "set": U.tag, "count_a": ca, "count_b": cb,
                         "ratio": ca / cb if cb else (1.0 if ca == 0 else math.inf),
                         "mu_ref": mass,
                         "normalized_a": ca / (mass * d ** n) if mass > 0 else math.nan,
                         "normalized_b": cb / (mass * d ** n) if mass > 0 else math.nan})
        last = rows[-1]
        interior = mass
        shell = float(np.sum(ref.measure.weights[U.boundary_shell(ref.measure.points, tol.boundary_shell)]))
        boundary_ok = interior == 0 or shell < tol.boundary_fraction * interior
        ratio_ok = abs(last["ratio"] - 1) <= tol.count_tolerance
        verdicts.append(Verdict(f"ratio:{U.tag}", PASS if ratio_ok else FAIL, last["ratio"], tol.count_tolerance))
        if mass > 0:
            norm_ok = abs(last["normalized_a"] - 1) <= tol.count_tolerance
            verdicts.append(Verdict(f"normalized:{U.tag}", PASS if norm_ok else FAIL, last["normalized_a"],
                                    tol.count_tolerance))
        if not boundary_ok:
            for v in verdicts[-2:]:
                if v.label.endswith(U.tag):
                    v.status = INCONCLUSIVE
                    v.note = f"boundary shell mass {shell:.3g} vs interior {interior:.3g}"
    meta = {"ref_base": ref.base, "ref_depth": ref_depth}
    dg = _digest_or(config_digest, "counting", f, a=_canon(a), b=_canon(b), sets=U_set, ns=ns,
                    ref_base=_canon(ref_base), ref_depth=ref_depth, lam=lam, tol=tol)
    return ExperimentReport("counting", dg,
                            ("n", "set", "count_a", "count_b", "ratio", "mu_ref", "normalized_a", "normalized_b"),
                            rows, verdicts, None, meta)


# --- mixing -------------------------------------------------------------------

DEFAULT_START = (0.3 + 0.7j, 1.0)


def exp_mixing(f, phi, psi, ns, sample_size, seed, *, burn_in=50, start=DEFAULT_START, lam=None, tol=None,
               config_digest=None) -> ExperimentReport:
    """Correlations <mu, phi (psi o f^n)> - <mu, phi><mu, psi> over an inverse-iteration sample."""
    tol = tol or f.tol
    lam = lam or default_lambda(f.degree)
    ns = sorted(int(n) for n in ns)
    _gate(f, start, lam, tol)
    X = sample_backward(f, start, burn_in, sample_size, seed, tol)
    a = phi(X)
    ac = a - a.mean()
    rows = []
    cur = X
    N = len(X)
    for n in range(1, max(ns) + 1):
        cur, _ = apply_array(f, cur)
        if n not in ns:
            continue
        b = psi(cur)
        corr = float(np.mean(a * b) - np.mean(a) * np.mean(b))
        prod = ac * (b - b.mean())
        sigma = float(np.std(prod, ddof=1) / math.sqrt(N)) if N > 1 else math.inf
        rows.append({"n": n, "correlation": corr, "sigma": sigma, "band": 3 * sigma,
                     "within_band": abs(corr) <= 3 * sigma})
    last = rows[-1]
    verdicts = [Verdict("decay_to_band", PASS if last["within_band"] else FAIL, abs(last["correlation"]),
                        last["band"]),
                Verdict("within_band_all_n", REPORT, float(sum(r["within_band"] for r in rows)), float(len(rows)))]
    dg = _digest_or(config_digest, "mixing", f, phi=phi, psi=psi, ns=ns, sample_size=sample_size, seed=seed,
                    burn_in=burn_in, start=_canon(start), tol=tol)
    return ExperimentReport("mixing", dg, ("n", "correlation", "sigma", "band", "within_band"), rows, verdicts,
                            seed, {"burn_in": burn_in, "sample_size": sample_size})


# --- Birkhoff averages ------------------------------------------------------------

def _forward_orbit(f, a, length):
    cur = normalize_array(as_coords(a)[None])
    out = np.empty((length, cur.shape[1]), dtype=complex)
    for j in range(length):
        out[j] = cur[0]
        cur, _ = apply_array(f, cur)
    return out


def exp_birkhoff(f, phis, checkpoints=(10, 100, 1000, 10000), *, a=None, seed=0, burn_in=100,
                 start=DEFAULT_START, ref_base=DEFAULT_REF_BASE, ref_depth=16, tol=None, threads=1,
                 config_digest=None) -> ExperimentReport:
    """Orbit averages (1/n) sum phi(f^j(a)) against the reference measure.

    With ``a=None`` the start is the end point of a backward random walk of
    length max(checkpoints) + burn_in, and its forward orbit is read off the
    walk in reverse, which stays on the support of mu instead of drifting away
    under forward round-off.  An explicit ``a`` is iterated forward directly.
    """
    tol = tol or f.tol
    checkpoints = sorted(int(c) for c in checkpoints)
    total = checkpoints[-1]
    flags = {}
    if a is None:
        _, path = sample_backward(f, start, total + burn_in, 1, seed, tol, keep_path=True)
        orbit_pts = path[::-1, 0, :][:total]
        a_used = ProjectivePoint(orbit_pts[0])
    else:
        a_used = _canon(a)
        orbit_pts = _forward_orbit(f, a_used, total)
        head = orbit_pts[:min(total, 200)]
        dist = chordal_distance(head[1:], head[0][None, :])
        flags["non_generic_start"] = bool(np.any(dist < 1e-9)) or is_exceptional(f, a_used, tol=tol)
    check_cap(f, ref_depth, tol)
    ref = ReferenceMeasure(f, ref_base, ref_depth, tol, threads)
    rows, verdicts = [], []
    for phi in phis:
        vals = phi(orbit_pts)
        csum = np.cumsum(vals)
        r = ref.pair(phi)
        errs = {}
        for c in checkpoints:
            avg = float(csum[c - 1] / c)
            errs[c] = abs(avg - r)
            rows.append({"n": c, "phi_tag": phi.family_tag, "alpha": phi.alpha, "average": avg,
                         "reference": r, "error": errs[c]})
        early = 100 if 100 in errs else checkpoints[min(1, len(checkpoints) - 1)]
        e_late, e_early = errs[total], errs[early]
        ok = e_late < e_early or (e_late <= tol.exact and e_early <= tol.exact)
        verdicts.append(Verdict(f"birkhoff:{phi.family_tag}", PASS if ok else FAIL, e_late, e_early))
    if flags.get("non_generic_start"):
        verdicts.append(Verdict("generic_start", FAIL, note="start point is periodic or exceptional"))
    dg = _digest_or(config_digest, "birkhoff", f, phis=phis, checkpoints=checkpoints,
                    a=None if a is None else _canon(a), seed=seed, burn_in=burn_in, start=_canon(start),
                    ref_base=_canon(ref_base), ref_depth=ref_depth, tol=tol)
    return ExperimentReport("birkhoff", dg, ("n", "phi_tag", "alpha", "average", "reference", "error"), rows,
                            verdicts, seed, {"start_point": a_used, **flags})


# --- hypersurfaces ----------------------------------------------------------------

def hypersurface_potential(f, h, Z, green_depth):
    """u = log|h(z)|/deg(h) - G(z) at Euclidean-unit representatives (degree-0 homogeneous)."""
    Z = np.asarray(Z, dtype=complex)
    Zu = Z / np.linalg.norm(Z, axis=1, keepdims=True)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(h(Zu))) / h.degree - green_values(f, Zu, green_depth)


def _pole_distance(h, Z):
    """Chordal distance to {h = 0} on P^1; a coefficient-normalized |h| proxy for k >= 2."""
    if h.dim == 2:
        roots, mult = solve_binary_forms(h.binary_coefficients()[None])
        zeros = roots[0][mult[0] > 0]
        return np.min(chordal_distance(Z[:, None, :], zeros[None, :, :]), axis=1)
    Zu = Z / np.linalg.norm(Z, axis=1, keepdims=True)
    return np.abs(h(Zu)) / h.coefficient_norm()


def excluded_hypersurface(f, h, lam=None, tol=None):
    """True if {h = 0} contains a known invariant point or (k = 1) a flagged point."""
    tol = tol or f.tol
    for e in f.exceptional:
        if _pole_distance(h, e.coords[None])[0] < tol.cluster:
            return True
    if f.dim == 1:
        roots, mult = solve_binary_forms(h.binary_coefficients()[None])
        zeros = roots[0][mult[0] > 0]
        scan = exceptional_scan(f, lam or default_lambda(f.degree), tol.scan_depth, list(zeros), tol)
        return any(s.flagged for s in scan)
    return False


def circle_grid(count, offset=(math.sqrt(5) - 1) / 2):
    """``count`` points on the unit circle of the affine chart, angles shifted by an irrational offset."""
    th = 2 * math.pi * (np.arange(count) + offset) / count
    return normalize_array(np.stack([np.exp(1j * th), np.ones(count)], axis=1))


def annulus_grid(n_angles=20, n_radii=20, width=1e-4, offset=(math.sqrt(5) - 1) / 2):
    """Points r e^{i theta} with log r in [-width, width] (n_radii values, 0 excluded when even)."""
    th = 2 * math.pi * (np.arange(n_angles) + offset) / n_angles
    t = np.linspace(-width, width, n_radii)
    x = (np.exp(t)[:, None] * np.exp(1j * th)[None, :]).reshape(-1)
    return normalize_array(np.stack([x, np.ones_like(x)], axis=1))


def torus_grid(side=30, offset=(math.sqrt(5) - 1) / 2):
    """side x side points [e^{i s} : e^{i t} : 1] of the unit torus in P^2."""
    th = 2 * math.pi * (np.arange(side) + offset) / side
    s, t = np.meshgrid(th, th * math.sqrt(2) % (2 * math.pi), indexing="ij")
    Z = np.stack([np.exp(1j * s).reshape(-1), np.exp(1j * t).reshape(-1), np.ones(side * side)], axis=1)
    return normalize_array(Z)


def exp_hypersurface(f, h, grid, ns, *, lam=None, tol=None, config_digest=None) -> ExperimentReport:
    """Decay of d^{-n} u(f^n(p)) over a grid, u the potential of deg(h)^{-1}[h = 0] - T.

    Grid points that start within ``tol.grid_pole_distance`` of {h = 0}, or
    whose orbit later comes within ``tol.pole_distance`` of it, are dropped and
    counted.  If {h = 0} passes through an exceptional point the decay verdict
    is replaced by a negative test that expects no decay.
    """
    tol = tol or f.tol
    ns = sorted(int(n) for n in ns)
    if h.dim != f.dim + 1:
        raise ValueError("polynomial and map live on different spaces")
    depth = depth_for_tail(f, tol.green_tail)
    Z = normalize_array(grid)
    start_ok = _pole_distance(h, Z) >= tol.grid_pole_distance
    dropped_initial = int(np.count_nonzero(~start_ok))
    cur = Z[start_ok]
    alive = np.ones(len(cur), dtype=bool)
    d = f.degree
    rows = []
    for n in range(0, max(ns) + 1):
        if n > 0:
            cur, _ = apply_array(f, cur)
            alive &= _pole_distance(h, cur) >= tol.pole_distance
        if n in ns:
            vals = np.abs(hypersurface_potential(f, h, cur[alive], depth)) * float(d) ** (-n)
            rows.append({"n": n, "median": float(np.median(vals)) if len(vals) else math.nan,
                         "max": float(np.max(vals)) if len(vals) else math.nan,
                         "survivors": int(np.count_nonzero(alive))})
    survival = np.count_nonzero(alive) / len(Z)
    excluded = excluded_hypersurface(f, h, lam, tol)
    verdicts = [Verdict("survival", PASS if survival >= tol.survival else FAIL, survival, tol.survival,
                        f"dropped: {dropped_initial} at start, {len(alive) - int(alive.sum())} along orbits")]
    medians = [r["median"] for r in rows]
    try:
        fit = fit_rate(ns, medians, tol.error_floor)
    except InsufficientData as exc:
        fit = None
        note = str(exc)
    if excluded:
        no_decay = fit is None or fit.fitted_rho < tol.rate_threshold
        verdicts.append(Verdict("excluded_case_no_decay", PASS if no_decay else FAIL,
                                fit.fitted_rho if fit else math.nan, tol.rate_threshold,
                                "hypersurface through an exceptional point"))
    elif fit is None:
        verdicts.append(Verdict("median_decay", INCONCLUSIVE, note=note))
    else:
        ok = fit.fitted_rho >= tol.rate_threshold and fit.r_squared >= tol.r_squared
        verdicts.append(Verdict("median_decay", PASS if ok else FAIL, fit.fitted_rho, tol.rate_threshold,
                                f"r_squared={fit.r_squared:.4f}"))
    for r in rows:
        r["fitted_rho"] = fit.fitted_rho if fit else None
        r["r_squared"] = fit.r_squared if fit else None
    meta = {"excluded_case": excluded, "green_depth": depth, "grid_size": len(Z),
            "dropped_initial": dropped_initial, "survival": survival}
    dg = _digest_or(config_digest, "hypersurface", f, h=h.to_json(), grid=Z, ns=ns, lam=lam, tol=tol)
    return ExperimentReport("hypersurface", dg, ("n", "median", "max", "survivors", "fitted_rho", "r_squared"),
                            rows, verdicts, None, meta)


def exp_exponential_estimate(f, h, sample_size, seeds=(0, 1, 2), *, scale=1.0, mass_safety=1.0, tol=None,
                             config_digest=None) -> ExperimentReport:
    """Monte Carlo of the integral of exp|u| against the Fubini-Study volume; report only.

    u is the hypersurface potential divided by deg(h) (1 + mass_safety) and
    multiplied by ``scale``; samples are Gaussian directions in C^{k+1}.
    """
    tol = tol or f.tol
    depth = depth_for_tail(f, tol.green_tail)
    rows = []
    for s in seeds:
        Z = fs_random_points(f.dim + 1, sample_size, np.random.default_rng(s))
        u = hypersurface_potential(f, h, Z, depth) / (h.degree * (1 + mass_safety)) * scale
        e = np.exp(np.abs(u))
        rows.append({"seed": s, "estimate": float(np.mean(e)),
                     "stderr": float(np.std(e, ddof=1) / math.sqrt(sample_size))})
    est = np.array([r["estimate"] for r in rows])
    spread = float((est.max() - est.min()) / est.mean()) if np.all(np.isfinite(est)) else math.inf
    verdicts = [Verdict("estimate", REPORT, float(est.mean())),
                Verdict("seed_spread", REPORT, spread, 0.1)]
    dg = _digest_or(config_digest, "exponential_estimate", f, h=h.to_json(), sample_size=sample_size,
                    seeds=list(seeds), scale=scale, mass_safety=mass_safety, tol=tol)
    return ExperimentReport("exponential_estimate", dg, ("seed", "estimate", "stderr"), rows, verdicts,
                            seeds[0], {"scale": scale, "mass_safety": mass_safety})


# --- Hoelder modulus ---------------------------------------------------------------

def exp_holder_modulus(f, phi, pairs, ns, *, tol=None, threads=1, config_digest=None) -> ExperimentReport:
    """Empirical Hoelder exponent of x -> d^{-n} Lambda^n phi(x) fitted over point pairs; report only."""
    tol = tol or f.tol
    ns = sorted(int(n) for n in ns)
    pairs = [(_canon(x), _canon(y)) for x, y in pairs]
    for x, y in pairs:
        for e in f.exceptional:
            for p in (x, y):
                if chordal_distance(p.coords, e.coords) < 0.1:
                    raise ValueError(f"pair point {p} is within 0.1 of the exceptional point {e}")

    def averages(p):
        out = {}
        for n, pts, w in fiber_levels(f, p, max(ns), tol, threads):
            if n in ns:
                out[n] = pair(EmpiricalMeasure.from_arrays(pts, w), phi)
        return out

    vals = [(averages(x), averages(y)) for x, y in pairs]
    dists = np.array([float(chordal_distance(x.coords, y.coords)) for x, y in pairs])
    rows, verdicts = [], []
    for n in ns:
        diffs = np.array([abs(vx[n] - vy[n]) for vx, vy in vals])
        keep = (diffs > tol.error_floor) & (dists > 0)
        if np.count_nonzero(keep) >= 2:
            slope = float(np.polyfit(np.log(dists[keep]), np.log(diffs[keep]), 1)[0])
        else:
            slope = math.nan
        for i, (dd, df) in enumerate(zip(dists, diffs)):
            rows.append({"n": n, "pair": i, "dist": float(dd), "diff": float(df), "exponent": slope})
        verdicts.append(Verdict(f"exponent:n={n}", REPORT, slope))
    dg = _digest_or(config_digest, "holder_modulus", f, phi=phi, pairs=[[x, y] for x, y in pairs], ns=ns, tol=tol)
    return ExperimentReport("holder_modulus", dg, ("n", "pair", "dist", "diff", "exponent"), rows, verdicts)


EXPERIMENTS = {
    "point_equidistribution": exp_point_equidistribution,
    "exceptional": exp_exceptional,
    "counting": exp_counting,
    "mixing": exp_mixing,
    "birkhoff": exp_birkhoff,
    "hypersurface": exp_hypersurface,
    "exponential_estimate": exp_exponential_estimate,
    "holder_modulus": exp_holder_modulus,
}


def require_p1(f):
    if f.dim != 1:
        raise NotSupported("this experiment needs fibers, available on P^1 only")
