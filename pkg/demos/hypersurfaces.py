"""
Pulling back hypersurfaces
==========================

Preimages of a hypersurface V equidistribute when the potential
u = log|h| / deg h - G, pulled back and divided by d^n, tends to zero.  We
follow that quantity along orbits of a grid of sample points.
"""
import numpy as np

from projdyn.experiments import annulus_grid, exp_exponential_estimate, exp_hypersurface, torus_grid
from projdyn.projective import HomogeneousPolynomial, binary_form, power_map

f = power_map(2)

# %%
# V = {z = w} is the point [1:1] on the unit circle.  The grid lives just off
# the circle so orbits neither escape nor fall into 0 quickly.
grid = annulus_grid()
pos = exp_hypersurface(f, binary_form([-1, 1]), grid, range(1, 13))
print("median |d^-n u o f^n|:", np.array2string(np.array(pos.column("median")), precision=2))
for v in pos.verdicts:
    print(v.line())

# %%
# Negative control: V = {z = 0} is totally invariant, the potential is
# multiplied by d at each step and the normalized quantity never decays.
neg = exp_hypersurface(f, binary_form([0, 1]), grid, range(1, 13))
print("excluded case:", neg.meta["excluded_case"])
for v in neg.verdicts:
    print(v.line())

# %%
# The same test on P^2 with a generic line and a grid on the unit torus.
f2 = power_map(2, dim=2)
line = HomogeneousPolynomial(3, 1, {(1, 0, 0): 1, (0, 1, 0): 1, (0, 0, 1): 1})
print(exp_hypersurface(f2, line, torus_grid(30), range(1, 13)).verdict("median_decay").line())

# %%
# Exponential integrability: a Monte Carlo estimate of the mean of exp|u|
# against the Fubini-Study measure, stable across seeds.
est = exp_exponential_estimate(f, binary_form([-1, 1]), 20000)
for v in est.verdicts:
    print(v.line())
