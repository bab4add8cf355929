"""Acceptance checks, one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` or ``python tests/test_acceptance.py``.
"""

import contextlib
import io
import math
import shutil
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from semidiscrete import cli
from semidiscrete.analysis import estimate_strong_order, positivity_report, run_stability_experiment
from semidiscrete.noise import RngSeed, sample_increments, standard_normals
from semidiscrete.schemes import IntegralMode, exact_linear_step, exponential_value, langevin_value
from semidiscrete.stability import (check_drift_inequality, integral_bound_check, phi1_exp_tsd,
                                    phi1_tsd, phi2_exp_tsd_sample, phi2_tsd_sample)
from semidiscrete.truncation import TruncationPolicy

P = TruncationPolicy()
EXACT = IntegralMode.EXACT_GAUSSIAN
RESULTS = {}


def report(n, ok, detail, elapsed, limit):
    within = elapsed < limit
    status = "PASS" if ok and within else "FAIL"
    line = f"[criterion {n}] {status}: {detail} ({elapsed:.2f}s, limit {limit:g}s)"
    RESULTS[n] = line
    print("\n" + line, file=sys.__stdout__, flush=True)
    assert ok, line
    assert within, line


def test_criterion_1_decomposition_identity():
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.Philox(1))
    n = 10_000
    y = rng.uniform(-20.0, 20.0, n)
    d = 1.0 - rng.uniform(0.0, 1.0, n)  # (0, 1]
    z = rng.standard_normal(n)
    dw = z * np.sqrt(d)
    cap = P.cap(d)
    p = np.sign(y) * np.minimum(np.abs(y), cap)
    c = p * p

    # EXP_TSD: the scheme's own step formula, vectorized
    step = y * np.exp(-10.5 * c * d + p * dw)
    p1 = phi1_exp_tsd(y, d, P)
    p2 = phi2_exp_tsd_sample(y, d, P, dw)
    scale = np.max(np.abs([step * step, y * y, p1, p2]), axis=0)
    ulp = np.spacing(scale)
    worst_exp = 0.0
    for args in zip(step.tolist(), y.tolist(), p1.tolist(), p2.tolist(), ulp.tolist()):
        s_, y_, a_, b_, u_ = args
        # residual in exact rational arithmetic, in ulps of the largest term
        res = Fraction(s_) ** 2 - Fraction(y_) ** 2 - Fraction(a_) - Fraction(b_)
        worst_exp = max(worst_exp, abs(float(res)) / u_)

    # TSD in EXACT_GAUSSIAN mode with the same standard normal in step and phi2
    sd = np.sqrt(-np.expm1(-20.0 * c * d) / (20.0 * c))
    step = np.exp(-10.0 * c * d) * y + c * sd * z
    p1 = phi1_tsd(y, d, P)
    p2 = phi2_tsd_sample(y, d, P, z, EXACT)
    scale = np.max(np.abs([step * step, y * y, p1, p2]), axis=0)
    worst_tsd = float(np.max(np.abs(step * step - y * y - p1 - p2) / scale))
    # spot check the vectorized steps against the scalar scheme functions
    for i in range(0, n, 997):
        assert langevin_value(y[i], 0.0, d[i], cap[i], EXACT, z[i]) == pytest.approx(step[i], rel=1e-14)
        assert exponential_value(y[i], dw[i], d[i], cap[i]) == pytest.approx(
            y[i] * np.exp(-10.5 * c[i] * d[i] + p[i] * dw[i]), rel=1e-14)
    ok = worst_exp <= 4.0 and worst_tsd <= 1e-8
    report(1, ok, f"EXP_TSD worst {worst_exp:.2f} ulps (<= 4); TSD exact worst relative "
                  f"{worst_tsd:.2e} (<= 1e-8) over {n} samples", time.perf_counter() - t0, 1.0)


def test_criterion_2_martingale():
    t0 = time.perf_counter()
    n = 100_000
    worst = 0.0
    failures = []
    for di in (0.01, 0.25, 1.0):
        g = standard_normals(RngSeed(2, 0), n)
        dw = sample_increments(RngSeed(2, 1), n, di).increments()
        for yi in (0.1, 1.0, 5.0, 20.0):
            for name, v in (("TSD", phi2_tsd_sample(yi, di, P, g, EXACT)),
                            ("EXP_TSD", phi2_exp_tsd_sample(yi, di, P, dw))):
                se = v.std(ddof=1) / math.sqrt(n)
                score = abs(v.mean()) / se
                worst = max(worst, score)
                if score > 4:
                    failures.append(f"{name} y={yi} delta={di}")
    report(2, not failures, f"worst |mean|/SE = {worst:.2f} over 24 cells (<= 4)"
                            + (f"; failing {failures}" if failures else ""),
           time.perf_counter() - t0, 10.0)


def test_criterion_3_drift_inequality():
    t0 = time.perf_counter()
    violations = 0
    points = 0
    for scheme in ("TSD", "EXP_TSD"):
        for d in (0.01, 0.25, 0.5, 1.0):
            rep = check_drift_inequality(scheme, d, n_mc=0)
            violations += rep.n_violations
            points += rep.y.size
    report(3, violations == 0, f"{violations} violations over {points} grid points",
           time.perf_counter() - t0, 1.0)


def test_criterion_4_asymptotic_stability():
    t0 = time.perf_counter()
    parts = []
    ok = True
    for s in ("TSD", "EXP_TSD", "LSD"):
        for d in (0.25, 0.5):
            rep = run_stability_experiment(s, 10.0, d, 50.0, 1000, 1e-3, seed=0, threads=4)
            good = rep.fraction_below_threshold_at_T >= 0.99 and rep.fraction_diverged == 0
            ok &= good
            parts.append(f"{s}@{d}: below={rep.fraction_below_threshold_at_T:.3f} "
                         f"div={rep.fraction_diverged:.3f} median|y_T|={rep.terminal_abs_quantiles[0]:.3g}")
    tem = run_stability_experiment("TEM", 10.0, 0.09, 50.0, 1000, 1e-3, seed=0, threads=4)
    ok &= tem.fraction_below_threshold_at_T >= 0.95
    parts.append(f"TEM@0.09: below={tem.fraction_below_threshold_at_T:.3f} "
                 f"median|y_T|={tem.terminal_abs_quantiles[0]:.3g}")
    em = run_stability_experiment("EM", 10.0, 0.5, 50.0, 1000, 1e-3, seed=0, threads=4)
    ok &= em.fraction_diverged > 0
    parts.append(f"EM@0.5: diverged={em.fraction_diverged:.3f}")
    report(4, ok, "; ".join(parts), time.perf_counter() - t0, 60.0)


def test_criterion_5_positivity():
    t0 = time.perf_counter()
    lsd = positivity_report("LSD", 10.0, 0.25, 250.0, 1000, seed=0, threads=4)
    exp = positivity_report("EXP_TSD", 10.0, 0.25, 250.0, 1000, seed=0, threads=4)
    tem = positivity_report("TEM", 10.0, 0.25, 250.0, 1000, seed=0, threads=4)
    ok = (lsd.n_nonpositive == 0 and exp.n_nonpositive == 0 and tem.n_sign_changes >= 1
          and lsd.n_states == 1000 * 1000)
    report(5, ok, f"LSD nonpositive={lsd.n_nonpositive}, EXP_TSD nonpositive={exp.n_nonpositive} "
                  f"over {lsd.n_states} states; TEM sign changes={tem.n_sign_changes}",
           time.perf_counter() - t0, 30.0)


@pytest.mark.slow
def test_criterion_6_strong_order():
    t0 = time.perf_counter()
    deltas = [2.0**-k for k in range(4, 10)]
    parts = []
    ok = True
    for s in ("TSD", "EXP_TSD", "LSD"):
        rep = estimate_strong_order(s, 1.0, 1.0, deltas, 2.0**-13, 4000, seed=0, threads=4)
        good = 0.35 <= rep.fitted_order <= 0.75 and rep.fit_r2 >= 0.95
        ok &= good
        parts.append(f"{s}: order={rep.fitted_order:.3f} R2={rep.fit_r2:.4f}")
    report(6, ok, "; ".join(parts) + " (window [0.35, 0.75], R2 >= 0.95)",
           time.perf_counter() - t0, 300.0)


def test_criterion_7_integral_bound():
    t0 = time.perf_counter()
    bad = []
    cells = 0
    for c in (0.0, 0.5, 1.0):
        for d in (0.01, 0.1):
            for r in (0.1, 0.25, 0.4):
                rep = integral_bound_check(c, d, r, 10_000, 256, seed=7)
                cells += 1
                if not rep.within_bound:
                    bad.append((c, d, r, rep.empirical_prob, rep.theoretical_bound))
    report(7, not bad, f"{cells - len(bad)}/{cells} cells within bound + 3 SE"
                       + (f"; failing {bad}" if bad else ""), time.perf_counter() - t0, 30.0)


def test_criterion_8_exact_kernel():
    t0 = time.perf_counter()
    n = 100_000
    x, dt = 1.0, 0.1
    g = standard_normals(RngSeed(8), n)
    parts = []
    ok = True
    for a, b in ((-1.0, 1.0), (-10.0, 1.0), (0.0, 1.0)):
        v = np.array([exact_linear_step(a, b, x, dt, gi) for gi in g.tolist()])
        mean = math.exp(a * dt) * x
        var = b * b * (math.expm1(2 * a * dt) / (2 * a) if a else dt)
        em = abs(v.mean() / mean - 1)
        ev = abs(v.var(ddof=1) / var - 1)
        ok &= em <= 0.02 and ev <= 0.02
        parts.append(f"(a={a:g}, b={b:g}) mean err {em:.2%} var err {ev:.2%}")
    report(8, ok, "; ".join(parts), time.perf_counter() - t0, 5.0)


DETERMINISM_RUNS = [
    ("simulate", ["--set", "schemes=TSD,EXP_TSD,LSD,TEM", "--set", "delta=0.09", "--set", "n_paths=3"]),
    ("stability", ["--set", "n_paths=300", "--set", "T=20"]),
    ("convergence", ["--set", "n_paths=300", "--set", "deltas=0.0625,0.03125,0.015625",
                     "--set", "ref_delta=0.001953125"]),
    ("decomposition", ["--set", "n_mc=200"]),
    ("integral-bound", ["--set", "n_samples=1000"]),
    ("positivity", ["--set", "n_paths=300", "--set", "T=50"]),
    ("moments", ["--set", "n_paths=300"]),
    ("make-figures", []),
]


def test_criterion_9_determinism():
    t0 = time.perf_counter()
    root = Path(tempfile.mkdtemp())
    mismatched = []
    try:
        for cmd, extra in DETERMINISM_RUNS:
            blobs = []
            for threads in (1, 4, 8):
                out = root / f"{cmd}-{threads}"
                with contextlib.redirect_stdout(io.StringIO()):
                    code = cli.run([cmd, "--out", str(out), "--threads", str(threads), "--seed", "42"] + extra)
                assert code == 0, cmd
                blobs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
            if not blobs[0] or any(b != blobs[0] for b in blobs[1:]):
                mismatched.append(cmd)
    finally:
        shutil.rmtree(root)
    report(9, not mismatched, f"{len(DETERMINISM_RUNS) - len(mismatched)}/{len(DETERMINISM_RUNS)} "
                              "commands byte-identical across 1, 4, 8 threads"
                              + (f"; differing {mismatched}" if mismatched else ""),
           time.perf_counter() - t0, math.inf)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
