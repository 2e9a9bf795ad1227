"""How fast does J(rho) approach 1 for the first and second order approximations?

On the ball both are exact.  On a real ellipsoid the first-order function
r J^{-1/(n+1)} leaves a defect of order |r| while the B-corrected rho_1 leaves
order |r|^2.  The fitted slope over depths 1e-1..1e-3 mixes in the next term
on rays where its coefficient is large; local slopes show the limit.
"""
import numpy as np

from superpsc.expr import builtin
from superpsc.fefferman import defect_scan
from superpsc.geometry import sample_boundary

ball = builtin("ball")
p = sample_boundary(ball, 3, 0).points[2]
s = defect_scan(ball, p, np.logspace(-1, -3, 5))
print("ball: max defect rho_1", s.defect_rho1.max(), "rho_0", s.defect_rho0.max())

ell = builtin("ellipsoid", a=[2, 1])
depths = np.logspace(-1, -3, 5)
print("\nray   slope_rho1  slope_rho0")
scans = []
for smp in sample_boundary(ell, 10, 0).samples:
    sc = defect_scan(ell, smp.point, depths)
    scans.append(sc)
    print(f"{smp.index:3d}   {sc.slope_rho1:9.4f}  {sc.slope_rho0:9.4f}")

worst = int(np.argmin([sc.slope_rho1 for sc in scans]))
sc = scans[worst]
local = np.diff(np.log(sc.defect_rho1)) / np.diff(np.log(np.abs(sc.r)))
print(f"\nray {worst}: defects {sc.defect_rho1}")
print(f"local slopes between consecutive depths: {np.round(local, 4)}")

# the same ray over one more decade of depth
deeper = defect_scan(ell, sample_boundary(ell, 10, 0).samples[worst].point, np.logspace(-2, -4, 5))
print(f"slope over depths 1e-2..1e-4: {deeper.slope_rho1:.4f}")

# how common are such rays?
slopes = np.array([defect_scan(ell, q.point, depths).slope_rho1
                   for q in sample_boundary(ell, 60, 0).samples])
print(f"\n60 rays: {np.sum(slopes < 1.9)} below 1.9 over 1e-1..1e-3, min {slopes.min():.4f}")
