"""End-to-end acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
Criteria 6 to 8 run the default experiment configurations and take a few minutes.
"""

import math
import random
import time
from fractions import Fraction as F

import numpy as np
import pytest

from sphmax.exponents import (
    ExponentPoint,
    d_exponent,
    figure1_vertices,
    quadrangle_Q,
    random_admissible_point,
    s2,
    s_n,
    sigma,
    smoothing_endpoint,
)
from sphmax.experiments import ExperimentConfig, run_cone, run_focusing, run_plate, run_smoothing
from sphmax.field import GridField, GridSpec, lebesgue_norm
from sphmax.operators import (
    RadialMultiplier,
    apply_multiplier,
    ball_volume,
    half_wave,
    residual_decay_slope,
    spherical_multiplier,
)


def test_criterion_01_exponent_identities(acceptance):
    rng = random.Random(1)
    t0 = time.perf_counter()
    bad = 0
    for n in (2, 3, 4, 5, 8):
        for _ in range(10_000):
            pt = random_admissible_point(rng, n)
            if n == 2:
                bad += sigma(pt) != s2(pt) - F(1, 2) + pt.inv_q
            else:
                bad += d_exponent(pt) != s_n(pt) - F(n - 1, 2) + pt.inv_q
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 5.0
    assert acceptance(1, ok, f"{bad} mismatches over 10^4 points for each of 5 dimensions, {elapsed:.2f}s")


def test_criterion_02_vertex_consistency(acceptance):
    bad = []
    for n in range(3, 13):
        ip0, iq0, s0 = smoothing_endpoint(n)
        p0 = F(2 * (n * n + 2 * n - 1), (n - 1) * (n + 3))
        want_s0 = F((n - 1) * (n + 1), 2 * (n * n + 2 * n - 1))
        B = figure1_vertices(n)["B"]
        if B != (ip0, iq0) or ip0 != 1 / p0 or s_n(ExponentPoint(*B, n)) != s0 or s0 != want_s0:
            bad.append(n)
    assert acceptance(2, not bad, f"n = 3..12, failures: {bad or 'none'}")


def _interior_point(rng, Q):
    # random rational convex combination with all weights positive
    w = [F(rng.randint(1, 1000)) for _ in Q.corners]
    total = sum(w)
    x = sum(wi * c[0] for wi, c in zip(w, Q.corners)) / total
    y = sum(wi * c[1] for wi, c in zip(w, Q.corners)) / total
    return ExponentPoint(x, y, Q.dim)


def test_criterion_03_quadrangle_recovery(acceptance):
    rng = random.Random(3)
    Q = quadrangle_Q(3)
    t0 = time.perf_counter()
    inside_bad = outside_bad = inside = outside = 0
    while inside < 1000:
        pt = _interior_point(rng, Q)
        if Q.contains(pt, closed=False):
            inside += 1
            inside_bad += not d_exponent(pt) < 0
    while outside < 1000:
        pt = random_admissible_point(rng, 3)
        if not Q.contains(pt):
            outside += 1
            outside_bad += not sigma(pt) > 0
    elapsed = time.perf_counter() - t0
    ok = inside_bad == 0 and outside_bad == 0 and elapsed < 5.0
    assert acceptance(3, ok, f"inside failures {inside_bad}/1000, outside failures {outside_bad}/1000, {elapsed:.2f}s")


def test_criterion_04_multiplier(acceptance):
    vol_err = max(abs(spherical_multiplier(n, 1, 0.0) - ball_volume(n)) for n in (2, 3))
    vol_err = max(vol_err, abs(ball_volume(2) - math.pi), abs(ball_volume(3) - 4 * math.pi / 3))
    r = np.linspace(0.1, 100, 20000)
    sinc_err = float(np.max(np.abs(spherical_multiplier(3, 0, r) - np.sin(2 * np.pi * r) / r)))

    g = GridSpec(2, 256, 8.0)
    c = (0.3, -0.2)
    f = GridField.from_function(g, lambda x, y: np.exp(-np.pi * ((x - c[0]) ** 2 + (y - c[1]) ** 2)))
    out = apply_multiplier(f, RadialMultiplier(2, "spherical_mean", 0)).samples.real
    theta = 2 * np.pi * np.arange(2048) / 2048
    ax = g.axis()
    quad_err = scale = 0.0
    for k in range(16):
        i = 128 + 3 * k
        x = ax[i]
        # the order-0 symbol pi J_0(2 pi r) is pi times the normalized circle mean
        circle = np.mean(np.exp(-np.pi * ((x - np.cos(theta) - c[0]) ** 2 + (np.sin(theta) + c[1]) ** 2)))
        quad_err = max(quad_err, abs(out[i, 128] - math.pi * circle))
        scale = max(scale, math.pi * circle)
    ok = vol_err < 1e-8 and sinc_err < 1e-8 and quad_err < 1e-5
    assert acceptance(4, ok, f"ball volume err {vol_err:.1e}, closed form err {sinc_err:.1e}, "
                             f"quadrature err {quad_err:.1e} at 16 radii (values up to {scale:.2f})")


def test_criterion_05_decomposition(acceptance):
    parts = []
    ok = True
    for alpha in (0, 0.5, 1j):
        slope = residual_decay_slope(2, alpha, 3, 4.0, r_min=8.0, r_max=1024.0)
        bound = -(3 + 0.5 + complex(alpha).real) + 0.3
        ok &= slope <= bound
        parts.append(f"alpha={alpha}: {slope:.3f} <= {bound:.2f}")
    assert acceptance(5, ok, "; ".join(parts))


def _experiment(number, runner, config, target, tol, budget):
    rep = runner(config)
    ok = abs(rep.fitted_slope - target) <= tol and rep.runtime <= budget
    acceptance_line = (f"slope {rep.fitted_slope:.4f} vs {target} +- {tol}, window {rep.slope_window}, "
                       f"runtime {rep.runtime:.1f}s (budget {budget:.0f}s)")
    return rep, ok, acceptance_line


def test_criterion_06_focusing(acceptance):
    cfg = ExperimentConfig("focusing", p="2", q="inf", j_range=(3, 7))
    rep, ok, line = _experiment(6, run_focusing, cfg, 0.5, 0.15, 300)
    ok &= max(r.points_per_axis for r in rep.rows) <= 2048
    assert acceptance(6, ok, line)


@pytest.mark.slow
def test_criterion_07_plate(acceptance):
    cfg = ExperimentConfig("plate", p="2", q="2", j_range=(3, 7))
    spacing_ok = all(np.allclose(np.diff(cfg.t_grid(j)), 2.0 ** -j / 4) for j in cfg.js)
    rep, ok, line = _experiment(7, run_plate, cfg, 0.0, 0.15, 900)
    assert acceptance(7, ok and spacing_ok, line + f", t spacing 2^-j/4: {spacing_ok}")


@pytest.mark.slow
def test_criterion_08_cone(acceptance):
    cfg = ExperimentConfig("cone", p="1", q="1", j_range=(3, 6))
    rep, ok, line = _experiment(8, run_cone, cfg, 1.0, 0.2, 900)
    assert acceptance(8, ok, line)


def test_criterion_09_alpha_shift(acceptance):
    base = run_focusing(ExperimentConfig("focusing", p="2", q="inf", j_range=(3, 7)))
    cfg = ExperimentConfig("focusing", p="2", q="inf", j_range=(3, 7), alpha=0.5)
    rep, ok, line = _experiment(9, run_focusing, cfg, 0.0, 0.15, 300)
    shift = rep.fitted_slope - base.fitted_slope
    assert acceptance(9, ok, line + f", shift {shift:.4f}")


def test_criterion_10_wave_propagator(acceptance):
    g = GridSpec(2, 128, 8.0)
    rng = np.random.default_rng(10)
    f = GridField(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
    n0 = lebesgue_norm(f, 2)
    unit = max(abs(lebesgue_norm(half_wave(f, t, s), 2) - n0) / n0 for t in (0.3, 1.0, 1.7) for s in (1, -1))
    group = 0.0
    for s, t in ((0.4, 0.9), (-1.2, 0.5), (1.5, 1.5)):
        a = half_wave(half_wave(f, s), t).to_space().samples
        b = half_wave(f, s + t).to_space().samples
        group = max(group, np.linalg.norm(a - b) / np.linalg.norm(b))

    l2 = run_smoothing(ExperimentConfig("smoothing", p="2", q="2"))
    probes = {}
    for p, q in (("2", "2"), ("inf", "inf"), ("1", "inf")):
        rep = run_smoothing(ExperimentConfig("smoothing", p=p, q=q, smoothing_input="bump"))
        probes[(p, q)] = (rep.fitted_slope, float(rep.predicted_slope))
    sound = all(slope <= bound + 0.2 for slope, bound in probes.values())
    ok = unit < 1e-10 and group < 1e-10 and abs(l2.fitted_slope) <= 0.02 and sound
    probe_text = ", ".join(f"({p},{q}): {s:.3f} <= {b:g}+0.2" for (p, q), (s, b) in probes.items())
    assert acceptance(10, ok, f"unitarity {unit:.1e}, group law {group:.1e}, L2 slope {l2.fitted_slope:.4f}; "
                              + probe_text)
