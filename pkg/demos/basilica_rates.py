"""
Geometric convergence of fiber measures for z^2 - 1
===================================================

For the basilica map the equilibrium measure has no closed form.  We use a
deep fiber from an unrelated base point as the reference and watch the error
of shallower fibers shrink geometrically.
"""
import math

from projdyn.experiments import exp_point_equidistribution
from projdyn.measures import bump, holder_kernel
from projdyn.projective import point, quadratic_family

f = quadratic_family(-1.0, 0.0)
golden = (1 + math.sqrt(5)) / 2

# %%
# A smooth bump and three Hoelder kernels centred on the repelling fixed point.
phis = [bump((0.5, 1), 0.6)] + [holder_kernel((golden, 1), a) for a in (0.5, 1, 2)]
report = exp_point_equidistribution(f, point(3, 1), phis, range(1, 17), ref_base=point(5, 2), ref_depth=18)

# %%
# Error table: the error roughly halves with each extra level of the tree.
tags = [phi.family_tag for phi in phis]
print("n   " + "".join(f"{h:>12}" for h in ("bump", "alpha=0.5", "alpha=1", "alpha=2")))
for n in range(1, 17):
    print(f"{n:<3} " + "".join(f"{report.column('error', n=n, phi_tag=t)[0]:12.3e}" for t in tags))

# %%
# Fitted rates and verdicts.  The reference measure is itself a finite fiber,
# so its own depth-to-depth change is printed as a noise floor.
for v in report.verdicts:
    print(v.line())
print("reference gaps:", {k: f"{g:.1e}" for k, g in report.meta["reference_gap"].items()})
