"""Walk through the two built-in counterexamples.

example51 is strictly convex, yet its cutoff-built defining function has a
negative criterion at the origin.  example52 is not convex but passes the
criterion everywhere on the sampled boundary.
"""
import math

import numpy as np

from superpsc import jets
from superpsc.criteria import (E_tilde, L2, boundary_data, classify, convex_sufficient,
                               detH_rho_boundary)
from superpsc.expr import builtin

e = math.e

# --- example51 at the origin -------------------------------------------------
d51 = builtin("example51")
print(d51.ast.to_source())

bd = boundary_data(jets.jet_eval(d51.ast, np.zeros((1, 4)), 4))
print("H(r)(0)          ", bd.w.H[0].real.round(12).tolist())
print("J(r)(0)          ", float(bd.J[0]))
print("r_11b11b(0)      ", float(bd.w.r_ijbklb[0, 0, 0, 0, 0].real), "  -32/e =", -32 / e)
print("E~(0)            ", float(E_tilde(bd)[0][0]), "  -32/(6e) =", -32 / (6 * e))

# L2 at the origin is 1 + E~ because the gradient terms vanish there
print("L2(0)            ", float(L2(bd)[0]), "  1 - 32/(6e) =", 1 - 32 / (6 * e))
print("det H(rho)(0)    ", float(detH_rho_boundary(bd)[0][0]))

# the convexity certificate subtracts a further 2/3
print("certificate(0)   ", float(convex_sufficient(bd)[0]), "  1 - 2/3 - 32/(6e) =", 1 - 2 / 3 - 32 / (6 * e))

verdict, table, _ = classify(d51, 400, seed=0)
print(verdict.classification, verdict.convexity, "worst point", np.round(verdict.worst_point, 6))

# how negative is L2 away from the origin? the bump is flat outside |z1|^2 < 4^-12
order = np.argsort(table["L2"])
print("three smallest L2 values:", table["L2"][order[:3]])
print("median L2:", np.median(table["L2"]))

# --- example52 -----------------------------------------------------------------
d52 = builtin("example52")
alpha = d52.parameters["alpha"]
D2 = jets.jet_eval(d52.ast, np.zeros(4), 2).derivative_tensor(2)
print("\nd^2 r / dy_2^2 (0) =", D2[3, 3], " 2 - 2 alpha =", 2 - 2 * alpha)

verdict, table, samples = classify(d52, 500, seed=0)
print(verdict.classification, verdict.convexity, "margin", round(verdict.margin, 6))

# the concave directions show up in the tangential real Hessian
neg = table["tangent_hessian_min"] < 0
print(f"{neg.sum()} of {len(neg)} samples have a negative tangential Hessian eigenvalue")
print("x_2 range on the sampled boundary:", samples.points[:, 2].min(), samples.points[:, 2].max())
