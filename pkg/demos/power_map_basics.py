"""
Fibers and Green functions of z^2
=================================

The squaring map is the simplest example where every quantity has a closed
form, so it is a good place to see the pieces of the library fit together.
"""
import numpy as np

from projdyn.fibers import backward_orbit, preimages_p1
from projdyn.green import green_value, tail_bound
from projdyn.measures import EmpiricalMeasure, pair, trig_moment
from projdyn.projective import point, power_map

f = power_map(2)
print(f)

# %%
# One step back: the two square roots of 4, with multiplicity one each.
pre = preimages_p1(f, point(4, 1))
for p, m in pre.roots:
    print(f"  {p}  multiplicity {m}")

# %%
# The critical value 0 has a single preimage of multiplicity 2, so the fiber
# tree of [0:1] collapses to one atom carrying all the weight.
print("fiber of [0:1] at depth 5:", backward_orbit(f, point(0, 1), 5).weights)

# %%
# A generic base point: depth n gives 2^n distinct points on the circle of
# radius 2^(2^-n), and the Fourier moments cancel while m < 2^n.  At
# m = 1024 every atom has x^m = 2 and the moment is 2*2/(4+1) = 0.8.
cloud = backward_orbit(f, point(2, 1), 10)
mu = EmpiricalMeasure.from_cloud(cloud)
modulus = np.abs(cloud.points[:, 0] / cloud.points[:, 1])
print(f"depth 10: {len(cloud)} atoms, |x| in [{modulus.min():.6f}, {modulus.max():.6f}]")
for m in (1, 4, 1023, 1024):
    print(f"  <mu, cos({m} theta)> = {pair(mu, trig_moment(m)): .3e}")

# %%
# The Green function of the squaring map is log max(|z|, |w|).  Raw
# coordinates are used as given; the tail bound is a rigorous error estimate.
for z in [(2, 1), (0.3, 0.1j), (5j, 5)]:
    est = green_value(f, z, 30)
    print(f"  G_30{z} = {est.value:.12f}  exact {np.log(max(map(abs, z))):.12f}  tail <= {est.tail_bound:.1e}")
print("tail bounds by depth:", [f"{tail_bound(f, n):.1e}" for n in (5, 10, 20, 40)])
