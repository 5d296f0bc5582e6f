"""
What goes wrong at an exceptional point
=======================================

The point 0 is totally invariant for z^2: its only preimage is itself.  Its
fiber measures are Dirac masses forever, so they cannot approach the
equilibrium measure.  The local multiplicity scan detects this.
"""
from projdyn.experiments import exp_exceptional
from projdyn.fibers import default_lambda, exceptional_scan, multiplicity_kappa
from projdyn.measures import bump
from projdyn.projective import point, power_map, reciprocal_power_map

f = power_map(2)

# %%
# Errors against the reference stay constant in n.
report = exp_exceptional(f, point(0, 1), [bump((0, 1), 0.5)], range(1, 9), ref_depth=12)
print("errors:", [f"{e:.4f}" for e in report.column("error")])
for v in report.verdicts:
    print(v.line())

# %%
# The backward multiplicity kappa_{-n} doubles with every step at 0 and
# stays 1 at a generic point.
for p in (point(0, 1), point(1, 0), point(2, 1)):
    print(f"  {p}: kappa_-n for n = 1, 3, 6:", [multiplicity_kappa(f, p, n).kappa_minus_n for n in (1, 3, 6)])

lam = default_lambda(f.degree)
for r in exceptional_scan(f, lam, 6, [point(0, 1), point(1, 0), point(0.5, 1)]):
    print(f"  scan {r.point}: rate {r.rate:.3f}, flagged {r.flagged}  (threshold d/lambda = {2 / lam:.3f})")

# %%
# For 1/z^2 the points 0 and infinity swap, so the fiber measures alternate.
g = reciprocal_power_map(2)
alt = exp_exceptional(g, point(0, 1), [bump((0, 1), 0.5)], range(1, 7), ref_depth=8)
print("1/z^2 pairings:", alt.column("pairing"))
