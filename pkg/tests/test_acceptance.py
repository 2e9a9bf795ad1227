"""Acceptance criteria, one check per criterion at its stated tolerance.

Each check returns ``(passed, detail)``.  Under pytest every criterion is a
test and the summary lists one PASS/FAIL line per criterion; run as a script
it prints the same lines.
"""
import json
import math
import sys

import numpy as np
from scipy.optimize import brentq

from superpsc import jets
from superpsc.calculus import raise_indices, tilde_grad_norm_sq
from superpsc.cli import main as cli_main
from superpsc.criteria import (E_tilde, S_r, boundary_data, detH_rho_boundary, evaluate_points,
                               real_hessian_min_eig)
from superpsc.expr import builtin, example52_cmax, from_expression
from superpsc.fefferman import (J_bordered, J_product, auto_shift, defect_scan, fefferman_jets,
                                log_level_identity_check, shift_identity_residual)
from superpsc.geometry import sample_boundary
from superpsc.solver import log_level_residual, solve_radial
from superpsc.spectrum import einstein_defect, rayleigh_scan

E = math.e


def corpus():
    return [builtin("ball"), builtin("ellipsoid"), builtin("example51"), builtin("example52"),
            builtin("example52", n=3), builtin("disc_perturbed")]


def random_interior(domain, count, seed):
    """Uniform points of the sampling box with r < 0 (rejection sampling)."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        x = domain.interior_point + rng.uniform(-domain.box, domain.box, size=(4096, domain.dim))
        out.extend(x[domain.r(x) < -1e-6])
    return np.array(out[:count])


def shifted_jet(domain, points, order):
    rj = jets.jet_eval(domain.ast, points, order)
    a, _ = auto_shift(jets.wirtinger(rj.truncate(2)))
    return (rj + rj * rj * (0.5 * a) if a else rj), a


# ------------------------------------------------------------------ checks

def criterion_1():
    worst = {"bordered": 0.0, "log": 0.0, "shift": 0.0}
    total = 0
    for k, d in enumerate(corpus()):
        pts = random_interior(d, 100, k)
        total += len(pts)
        w = jets.wirtinger(jets.jet_eval(d.ast, pts, 2))
        rd = raise_indices(w, check=False)
        jb = J_bordered(w)
        worst["bordered"] = max(worst["bordered"], float(np.max(np.abs(jb - J_product(w, rd)) / np.abs(jb))))
        worst["log"] = max(worst["log"], float(log_level_identity_check(w, rd).max()))
        for a in (0.5, 2.0, 8.0):
            worst["shift"] = max(worst["shift"], float(shift_identity_residual(w, a).max()))
    ok = worst["bordered"] <= 1e-10 and worst["log"] <= 1e-8 and worst["shift"] <= 1e-8
    return ok, (f"{total} points on {len(corpus())} domains; bordered vs product {worst['bordered']:.1e} (1e-10), "
                f"log level {worst['log']:.1e} (1e-8), shift {worst['shift']:.1e} (1e-8)")


def criterion_2():
    worst = {"grad": 0.0, "dB": 0.0, "a": 0.0}
    for d in corpus():
        pts = sample_boundary(d, 200, 0).points
        rj, _ = shifted_jet(d, pts, 6)
        w = jets.wirtinger(rj.truncate(2))
        rd = raise_indices(w)
        worst["grad"] = max(worst["grad"], float(np.abs(tilde_grad_norm_sq(rd, w.r_i)).max()))
        worst["a"] = max(worst["a"], float(np.abs(np.einsum("...kl,...l->...k", rd.a, np.conj(w.r_i))).max()))
        fj = fefferman_jets(rj)
        dB = fj.B.gradient_z() + fj.B0.value[:, None] * w.r_i
        worst["dB"] = max(worst["dB"], float(np.abs(dB).max()))
    ok = worst["grad"] <= 1e-8 and worst["dB"] <= 1e-7 and worst["a"] <= 1e-8
    return ok, (f"200 samples x {len(corpus())} domains; |grad~ r|^2 {worst['grad']:.1e} (1e-8), "
                f"dB + B0 dr {worst['dB']:.1e} (1e-7), a~ rbar {worst['a']:.1e} (1e-8)")


def criterion_3():
    d = builtin("ellipsoid", a=[2, 1])
    depths = np.logspace(-1, -3, 5)
    slopes = []
    for s in sample_boundary(d, 10, 0).samples:
        slopes.append(defect_scan(d, s.point, depths).slope_rho1)
    ball = builtin("ball")
    ball_defect = max(float(defect_scan(ball, s.point, depths).defect_rho1.max())
                      for s in sample_boundary(ball, 10, 0).samples)
    k = int(np.argmin(slopes))
    ok = min(slopes) >= 1.9 and ball_defect <= 1e-13
    return ok, (f"ellipsoid 2x1^2+y1^2+|z2|^2 min slope {slopes[k]:.4f} on ray {k} (>= 1.9), "
                f"median {np.median(slopes):.4f}; ball max defect {ball_defect:.1e} (1e-13)")


def criterion_4():
    d = builtin("example51")
    bd = boundary_data(jets.jet_eval(d.ast, np.zeros((1, 4)), 4))
    det_rho = float(detH_rho_boundary(bd)[0][0] * bd.J[0] ** (2 / 3))
    target = 1 - 2 / 3 - 32 / (6 * E)
    r4 = float(bd.w.r_ijbklb[0, 0, 0, 0, 0].real)
    et = float(E_tilde(bd)[0][0])
    pts = sample_boundary(d, 200, 0).points
    hmin = float(real_hessian_min_eig(jets.jet_eval(d.ast, pts, 2)).min())
    parts = [abs(det_rho - target) <= 1e-6, abs(r4 + 32 / E) <= 1e-8, abs(et + 32 / (6 * E)) <= 1e-7, hmin > 0]
    return all(parts), (f"det H(rho)(0) J^(2/3) = {det_rho:.7f} vs {target:.7f} (1e-6) [{_pf(parts[0])}]; "
                        f"r_11bar11bar(0) = {r4:.9f} [{_pf(parts[1])}]; E~(0) = {et:.8f} [{_pf(parts[2])}]; "
                        f"min real Hessian eig on 200 samples {hmin:.3f} [{_pf(parts[3])}]")


def criterion_5():
    d = builtin("example52")
    alpha = d.parameters["alpha"]
    yy = float(jets.jet_eval(d.ast, np.zeros(4), 2).derivative_tensor(2)[3, 3])
    pts = sample_boundary(d, 500, 0).points
    L2 = evaluate_points(d, pts)["L2"]
    try:
        builtin("example52", C=example52_cmax(alpha) * (1 + 1e-9))
        guard = False
    except ValueError:
        guard = True
    parts = [yy == 2 - 2 * alpha and abs(yy + 0.1) <= 1e-15, len(pts) >= 500 and L2.min() > 0, guard]
    return all(parts), (f"d^2r/dy2^2(0) = {yy!r} [{_pf(parts[0])}]; L2 margin {L2.min():.6f} on {len(pts)} "
                        f"samples [{_pf(parts[1])}]; C guard [{_pf(parts[2])}]")


def _menger_curvature(domain, theta, h):
    """Signed curvature of the circle through boundary points at angles theta-h, theta, theta+h."""
    c = domain.interior_point

    def hit(t):
        u = np.array([math.cos(t), math.sin(t)])
        s = brentq(lambda s: float(domain.r(c + s * u)), 1e-6, domain.box, xtol=1e-15, rtol=1e-15)
        return c + s * u

    a, b, e = hit(theta - h), hit(theta), hit(theta + h)
    cross = (b[0] - a[0]) * (e[1] - a[1]) - (b[1] - a[1]) * (e[0] - a[0])
    return 2 * cross / (np.linalg.norm(b - a) * np.linalg.norm(e - b) * np.linalg.norm(e - a))


def planar_domains():
    return [builtin("ball", n=1), builtin("ellipsoid", n=1, a=[3.0], b=[1.0]), builtin("disc_perturbed"),
            builtin("disc_perturbed", depth=0.3, width=0.05),
            from_expression("abs2(z1) - 1 + 0.3*x1^3", 1, name="cubic")]


def criterion_6():
    checked = mismatched = undecided = 0
    negative = []
    for d in planar_domains():
        samples = sample_boundary(d, 200, 0).samples
        pts = np.array([s.point for s in samples])
        sr = S_r(jets.wirtinger(jets.jet_eval(d.ast, pts, 2)))
        negative.append(bool(sr.min() < 0))
        for s, v in zip(samples, sr):
            x = s.point - d.interior_point
            theta = math.atan2(x[1], x[0])
            k1, k2 = _menger_curvature(d, theta, 2e-3), _menger_curvature(d, theta, 1e-3)
            if abs(k2) <= 10 * abs(k1 - k2):
                undecided += 1
                continue
            checked += 1
            mismatched += int(np.sign(k2) != np.sign(v))
    ok = mismatched == 0 and any(negative) and checked + undecided == 1000
    return ok, (f"{checked} samples on 5 planar domains, {mismatched} sign mismatches, {undecided} "
                f"near-inflection samples without a resolved oracle sign; S_r < 0 found on "
                f"{sum(negative)} domain(s)")


def criterion_7():
    worst, comp = -np.inf, np.inf
    convex = {"ball", "ellipsoid", "example51"}
    count = 0
    for d in corpus():
        t = evaluate_points(d, sample_boundary(d, 200, 0).points)
        gap = np.maximum(t["E_lower"] - t["E_tilde"], t["E_tilde"] - t["E_upper"])
        worst = max(worst, float(gap.max()))
        count += len(gap)
        if d.name in convex:
            comp = min(comp, float(t["conv_companion"].min()))
    ok = worst <= 1e-7 and comp >= -1e-8
    return ok, (f"largest sandwich violation {worst:.2e} over {count} samples (slack 1e-7); "
                f"convex-domain companion min {comp:.3e} (>= -1e-8)")


def criterion_8():
    p = solve_radial(n=2, nodes=2000, eps=1e-2)
    coarse = solve_radial(n=2, nodes=1000, eps=1e-2)
    dev, ratio = p.deviation(0.99), coarse.deviation(0.99) / p.deviation(0.99)
    res = float(log_level_residual(p).max())
    ok = dev <= 1e-6 and res <= 1e-7 and ratio >= 3
    return ok, f"deviation {dev:.3e} (1e-6); log-level residual {res:.1e} (1e-7); refinement ratio {ratio:.2f} (3)"


def criterion_9():
    pts = rayleigh_scan(2, [1.2, 1.5, 2.0, 2.5, 3.0], 1e-4, threads=4)
    q = [p.quotient for p in pts]
    rng = np.random.default_rng(9)
    g = rng.normal(size=(50, 4))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    interior = g * rng.uniform(0, 0.95, size=(50, 1))
    ball = builtin("ball")
    ein = max(einstein_defect(ball, x) for x in interior)
    parts = [min(q) >= 4 - 1e-3, min(q) <= 4.6, ein <= 1e-6]
    return all(parts), (f"quotients {', '.join(f'{v:.4f}' for v in q)} on s = 1.2..3.0; all >= 3.999 "
                        f"[{_pf(parts[0])}]; min {min(q):.4f} <= 4.6 [{_pf(parts[1])}]; "
                        f"Einstein defect {ein:.1e} at 50 points [{_pf(parts[2])}]")


def criterion_10(tmpdir):
    blobs = []
    for threads in ("1", "3"):
        path = f"{tmpdir}/report_{threads}.json"
        code = cli_main(["check", "--domain", "example52", "--samples", "200", "--seed", "11",
                         "--threads", threads, "--out", path])
        with open(path, "rb") as fh:
            blobs.append(fh.read())
    ok = code == 0 and blobs[0] == blobs[1] and json.loads(blobs[0])["rows"]
    return bool(ok), f"threads 1 vs 3: {len(blobs[0])} bytes each, identical = {blobs[0] == blobs[1]}"


def _pf(ok):
    return "PASS" if ok else "FAIL"


TITLES = {
    1: "operator identities",
    2: "boundary invariants",
    3: "approximate-solution order",
    4: "first counterexample regression",
    5: "second counterexample regression",
    6: "planar convexity equivalence",
    7: "error-term sandwich",
    8: "radial solver",
    9: "spectrum bottom",
    10: "determinism",
}


def _line(k, ok, detail):
    return f"criterion {k}: {_pf(ok)}  {TITLES[k]}: {detail}"


def _run(k, record, *args):
    ok, detail = globals()[f"criterion_{k}"](*args)
    record(_line(k, ok, detail))
    assert ok, detail


def test_criterion_1(acceptance_line):
    _run(1, acceptance_line)


def test_criterion_2(acceptance_line):
    _run(2, acceptance_line)


def test_criterion_3(acceptance_line):
    _run(3, acceptance_line)


def test_criterion_4(acceptance_line):
    _run(4, acceptance_line)


def test_criterion_5(acceptance_line):
    _run(5, acceptance_line)


def test_criterion_6(acceptance_line):
    _run(6, acceptance_line)


def test_criterion_7(acceptance_line):
    _run(7, acceptance_line)


def test_criterion_8(acceptance_line):
    _run(8, acceptance_line)


def test_criterion_9(acceptance_line):
    _run(9, acceptance_line)


def test_criterion_10(acceptance_line, tmp_path):
    _run(10, acceptance_line, tmp_path)


if __name__ == "__main__":
    import tempfile
    failed = 0
    for k in TITLES:
        args = (tempfile.mkdtemp(),) if k == 10 else ()
        ok, detail = globals()[f"criterion_{k}"](*args)
        print(_line(k, ok, detail), flush=True)
        failed += not ok
    sys.exit(1 if failed else 0)
