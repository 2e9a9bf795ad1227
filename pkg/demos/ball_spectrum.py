"""The ball: radial Monge-Ampere solve, Kahler-Einstein check, Rayleigh quotients."""
import numpy as np

from superpsc.expr import builtin
from superpsc.solver import log_level_residual, solve_radial
from superpsc.spectrum import einstein_defect, rayleigh_mc, rayleigh_quotient, rayleigh_scan

# -- radial solve: u = f(|z|^2) with det H(u) = exp(3u), exact f = -log(1-t)
for nodes in (500, 1000, 2000, 4000):
    p = solve_radial(n=2, nodes=nodes)
    print(f"{nodes:5d} nodes  {p.iterations:2d} Newton steps  deviation {p.deviation(0.99):.3e}")
print("rho vs t - 1:", np.abs(p.rho - (p.t - 1)).max())
print("log-level residual:", log_level_residual(p).max())

# -- the metric of -log(1 - |z|^2) is Einstein with constant -(n+1)
ball = builtin("ball")
rng = np.random.default_rng(0)
pts = rng.normal(size=(20, 4))
pts *= (rng.uniform(0, 0.95, 20) / np.linalg.norm(pts, axis=1))[:, None]
print("\nmax Einstein defect:", max(einstein_defect(ball, x) for x in pts))

# -- Rayleigh quotients of (1-|z|^2)^s with the -4 g^{i jbar} normalisation
print("\n  s     Q(s)      4s")
for pt in rayleigh_scan(2, np.arange(1.1, 3.01, 0.3), 1e-4):
    print(f"{pt.s:4.1f}  {pt.quotient:8.4f}  {4 * pt.s:6.2f}")

# Q(s) = 4s for the pure power, so the infimum over s > 1 is n^2 = 4, reached
# only as s -> n/2 where the cutoff carries more and more of the quotient
for eps in (1e-3, 1e-4, 1e-5, 1e-6):
    print(f"eps {eps:.0e}: Q(1.2) = {rayleigh_quotient(2, 1.2, eps).quotient:.4f}")

mc = rayleigh_mc(2, 2.0, samples=400_000, seed=1, threads=4)
print(f"\nMonte Carlo Q(2) = {mc.quotient:.4f} +- {mc.stderr:.4f}")
