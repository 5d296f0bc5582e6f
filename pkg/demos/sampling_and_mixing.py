"""
Random backward walks, mixing and Birkhoff averages
===================================================

Exact fibers grow like d^n.  Random backward walks give an unbiased sample of
the same measures at fixed cost and drive the mixing and Birkhoff experiments.
"""
import math

from projdyn.experiments import exp_birkhoff, exp_mixing
from projdyn.fibers import backward_orbit
from projdyn.measures import EmpiricalMeasure, FullFiber, InverseIteration, equilibrium_estimate, pair, trig_moment
from projdyn.projective import point, power_map, quadratic_family

f = quadratic_family(-1.0, 0.0)

# %%
# Exact depth-12 fiber versus 20000 random walks of the same depth.
exact = EmpiricalMeasure.from_cloud(backward_orbit(f, point(3, 1), 12))
walk = EmpiricalMeasure.from_cloud(backward_orbit(f, point(3, 1), 12, mode="sampled", count=20000, seed=1))
for m in (1, 2, 3):
    print(f"  m={m}: exact {pair(exact, trig_moment(m)): .4f}  sampled {pair(walk, trig_moment(m)): .4f}")

# %%
# Inverse iteration: one long walk with burn-in.
sampled = equilibrium_estimate(f, InverseIteration(seed=3, burn_in=50, count=20000))
reference = equilibrium_estimate(f, FullFiber(point(5, 2), 16))
print("inverse iteration vs depth-16 fiber:",
      f"{pair(sampled, trig_moment(1)):.4f} vs {pair(reference, trig_moment(1)):.4f}")

# %%
# Correlations of cos(theta) with itself under z^2 vanish for n >= 1; the
# estimates sit inside the three-sigma band.
g = power_map(2)
mix = exp_mixing(g, trig_moment(1), trig_moment(1), range(1, 7), 10000, seed=0)
for row in mix.rows:
    print(f"  n={row['n']}: corr {row['correlation']: .4f}  band +-{row['band']:.4f}")

# %%
# Birkhoff averages along a typical orbit (a backward walk read in reverse)
# and along the orbit of an irrational rotation angle.
typ = exp_birkhoff(g, [trig_moment(1)], (10, 100, 1000, 10000), seed=2, ref_depth=14)
print("typical orbit errors:", [f"{e:.4f}" for e in typ.column("error")])
th = 2 * math.pi * (math.sqrt(2) - 1)
rot = exp_birkhoff(g, [trig_moment(1)], (10, 100, 1000), a=(complex(math.cos(th), math.sin(th)), 1), ref_depth=12)
print("angle sqrt(2)-1 errors:", [f"{e:.4f}" for e in rot.column("error")])
