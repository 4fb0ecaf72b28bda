"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line (shown even
without ``-s``) before asserting.
"""

import math
import time

import numpy as np
import pytest

from degenflow.asymptotics import (PathAnalyzer, eigenspace_angle, log_increments,
                                   log_norm_profile, threshold_violations)
from degenflow.cli import run
from degenflow.flows import (SynthPathConfig, analyze_gram_path, calabi_energy, gram_from_metric,
                             perturbed_round, pipeline_p1, pullback_grams, round_metric,
                             synth_path, AREA)
from degenflow.futaki import (PolytopeData, TorusWeightTable, df_and_n2, futaki_limit,
                              gradient_hessian, soliton_vector, weights_from_polytope)
from degenflow.io import bundled_names, read_json, ring_from_json
from degenflow.linalg import HermitianGenerator, principal_angles
from degenflow.reps import induced_weights
from degenflow.ringfilt import (initial_ideal, monomials, quotient_norm_of, rational_normal_curve,
                                section_weight, sym_factor)

from test_asymptotics import _random_generator
from test_ringfilt import exact_initial_dim

pytestmark = pytest.mark.slow


@pytest.fixture
def emit(capsys):
    def _emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    return _emit


def _random_config(rng, seed):
    k = int(rng.integers(1, 4))
    while True:
        levels = np.round(rng.uniform(-2, 3, size=k), 3)
        if k == 1 or np.min(np.abs(np.subtract.outer(levels, levels))[np.triu_indices(k, 1)]) >= 0.5:
            break
    dim = int(rng.integers(max(k, 2), 13))
    mults = rng.multinomial(dim - k, np.ones(k) / k) + 1
    plane = tuple(int(i) for i in rng.choice(dim, size=2, replace=False))
    return SynthPathConfig(levels.tolist(), mults.tolist(), steps=2000,
                           noise=float(rng.uniform(0, 0.3)), decay=2.0,
                           theta=float(rng.uniform(0, 1.5)), plane=plane, random_frame=True,
                           twist=float(rng.uniform(0, 0.5)), seed=seed)


@pytest.fixture(scope="module")
def recovery_suite():
    """Fitted analyzers for the 50 random synthetic configurations."""
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    out = []
    for i in range(50):
        cfg = _random_config(rng, 1000 + i)
        path, truth = synth_path(cfg)
        an = PathAnalyzer().fit(path)
        d = cfg.dim
        # two coordinate vectors, a generic vector and one vector per planted subspace
        probes = [np.eye(d)[j] for j in rng.choice(d, size=2, replace=False)]
        probes.append(rng.standard_normal(d) + 1j * rng.standard_normal(d))
        for V in truth.subspaces:
            probes.append(V @ (rng.standard_normal(V.shape[1]) + 1j * rng.standard_normal(V.shape[1])))
        predicted = [truth.predicted_weight(v) for v in probes]
        snapped = an.transform(np.array(probes)).tolist()
        out.append((cfg, path, truth, an, predicted, snapped))
    return out, time.perf_counter() - t0


def test_criterion_1_recovery(recovery_suite, emit):
    suite, elapsed = recovery_suite
    spectrum_err = ang_err = 0.0
    bad_probes = 0
    for cfg, path, truth, an, predicted, snapped in suite:
        est = an.gauge_.lam
        if len(est.spectrum) != len(truth.lam.spectrum) or est.multiplicities != truth.lam.multiplicities:
            spectrum_err = math.inf
            continue
        spectrum_err = max(spectrum_err, np.max(np.abs(est.spectrum - truth.lam.spectrum)))
        for s in range(len(truth.subspaces)):
            ang_err = max(ang_err, principal_angles(an.filtration_.subspaces[s],
                                                    truth.subspaces[s]).max())
        # snapped weights are estimated levels, exact up to the spectrum error
        bad_probes += sum(abs(p - w) > 1e-6 for p, w in zip(predicted, snapped))
    ok = spectrum_err < 1e-6 and ang_err < 1e-4 and bad_probes == 0 and elapsed < 60
    emit(1, ok, f"50 paths, max spectrum error {spectrum_err:.2e}, max principal angle {ang_err:.2e}, "
                f"{bad_probes} probe mismatches, {elapsed:.1f} s")
    assert ok


def test_criterion_2_convexity(emit):
    rng = np.random.default_rng(7)
    t = np.arange(-40, 41, dtype=float)
    worst_d2, iff_fail, flat = math.inf, 0, 0
    for trial in range(200):
        gen = _random_generator(rng, int(rng.integers(3, 7)))
        d = gen.dim
        if trial % 2:
            v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        else:
            U = gen.eigenspaces[rng.integers(len(gen.spectrum))]
            v = U @ rng.standard_normal(U.shape[1])
            if trial % 4 == 0:
                v = v + 10.0 ** rng.uniform(-8, -2) * rng.standard_normal(d)
        f = log_norm_profile(gen, v, t)
        d2 = f[2:] - 2 * f[1:-1] + f[:-2]
        worst_d2 = min(worst_d2, d2.min())
        angle = eigenspace_angle(gen, v)
        if d2.max() < 1e-8:
            flat += 1
            iff_fail += angle >= 1e-4
        elif angle == 0.0:
            iff_fail += 1
    ok = worst_d2 >= -1e-10 and iff_fail == 0
    emit(2, ok, f"200 pairs, min second difference {worst_d2:.2e}, {flat} flat profiles, "
                f"{iff_fail} violations of the eigenvector characterization")
    assert ok


def test_criterion_3_threshold(recovery_suite, emit):
    suite, _ = recovery_suite
    rng = np.random.default_rng(8)
    violations = checks = 0
    for cfg, path, truth, an, _, _ in suite:
        weights = induced_weights(an.gauge_.lam).weights
        tail = an.gauge_.tail_start
        for _ in range(5):
            v = rng.standard_normal(cfg.dim) + 1j * rng.standard_normal(cfg.dim)
            incr, _ = log_increments(path, v)
            while True:
                mu = rng.uniform(weights.min() - 1, weights.max() + 1)
                if np.min(np.abs(weights - mu)) > 0.05:
                    break
            violations += len(threshold_violations(incr[tail:], mu))
            checks += 1
    ok = violations == 0
    emit(3, ok, f"{checks} (path, mu) pairs, {violations} threshold violations")
    assert ok


def test_criterion_4_flatness(emit):
    conic = ring_from_json(read_json("bundled:conic"))
    cubic = ring_from_json(read_json("bundled:twisted-cubic"))
    dc = initial_ideal(conic, [1.0, 0.0, 0.0])
    conic_ok = all(
        dc.quotient_dims[k] == 2 * k + 1 == math.comb(k + 2, 2) - exact_initial_dim(conic, [1, 0, 0], k)
        and dc.flat[k] for k in range(7))
    # the initial ideal is (xz): monomials divisible by xz span it
    xz_ok = all(dc.rows[k].shape[0] == sum(a[0] >= 1 and a[2] >= 1 for a in monomials(3, k))
                for k in range(7))
    dt = initial_ideal(cubic, [3.0, 2.0, 1.0, 0.0])
    cubic_ok = all(
        dt.quotient_dims[k] == 3 * k + 1 == math.comb(k + 3, 3) - exact_initial_dim(cubic, [3, 2, 1, 0], k)
        and dt.flat[k] for k in range(5))
    ok = conic_ok and xz_ok and cubic_ok
    emit(4, ok, f"conic dims {[dc.quotient_dims[k] for k in range(7)]}, "
                f"twisted cubic dims {[dt.quotient_dims[k] for k in range(5)]}, exact rank oracles agree")
    assert ok


def test_criterion_5_quotient_norm_growth(emit):
    r = 2
    lam = 0.25 * np.array([0.0, 1.0, 3.0, 4.0, 6.0])
    H = gram_from_metric(round_metric(), r).gram
    times = np.arange(41.0)
    path, an = analyze_gram_path(times, pullback_grams(H, lam, times))
    F = path.reference_form.frame()
    A = path.cumulative()
    ring = rational_normal_curve(2 * r, K=3)
    worst_slope = worst_point = 0.0
    within = True
    n_sections = 0
    for k in (1, 2, 3):
        gen = HermitianGenerator.from_levels(*_levels(lam))
        snap_tol = 1e-2 * induced_weights(gen, f"sym:{k}").min_gap()
        I = ring.ideal_basis(k)
        for a in monomials(2 * r + 1, k):
            f = np.zeros(len(monomials(2 * r + 1, k)), dtype=complex)
            f[monomials(2 * r + 1, k).index(a)] = 1
            planted = section_weight(ring, lam, f, k)

            def log_norm(i):
                return math.log(quotient_norm_of(None, I, f, factor=sym_factor(A[i] @ np.linalg.inv(F), k)))
            point = log_norm(40) / 40
            slope = (log_norm(40) - log_norm(20)) / 20
            worst_point = max(worst_point, abs(point - planted))
            worst_slope = max(worst_slope, abs(slope - planted))
            within &= abs(slope - planted) < snap_tol
            n_sections += 1
    spectrum_ok = np.allclose(an.gauge_.lam.spectrum, np.sort(lam)[::-1], atol=1e-6)
    ok = within and spectrum_ok
    emit(5, ok, f"{n_sections} monomial sections, k <= 3, T = 40: slope estimator error "
                f"{worst_slope:.2e} (within snap_tol = 1e-2 * weight gap); "
                f"one-point t^-1 log|s| error {worst_point:.2e}")
    assert ok


def _levels(lam):
    vals, counts = np.unique(lam, return_counts=True)
    return vals[::-1], counts[::-1]


def test_criterion_6_futaki(emit):
    p2 = weights_from_polytope(PolytopeData(((-1, -1), (2, -1), (-1, 2)), kmax=30))
    p2_vals = [abs(futaki_limit(p2, [0, 0], e).value) for e in ([1, 0], [0, 1])]
    verts = ((-1, 0), (0, -1), (2, -1), (-1, 2))
    b24 = weights_from_polytope(PolytopeData(verts, kmax=24))
    b48 = weights_from_polytope(PolytopeData(verts, kmax=48))
    e24, e48 = futaki_limit(b24, [0, 0], [1, 1]), futaki_limit(b48, [0, 0], [1, 1])
    signs = {np.sign(x) for x in (e24.value, e24.shifted_value, e48.value, e48.shifted_value)}
    sign_ok = len(signs) == 1 and 0 not in signs
    drift = abs(abs(e24.value) - abs(e48.value))
    V = np.array([0.2, -0.1])
    a, b = np.array([1.0, 0.5]), np.array([-0.3, 2.0])
    lin = abs(futaki_limit(b24, V, 2 * a - 3 * b).value
              - 2 * futaki_limit(b24, V, a).value + 3 * futaki_limit(b24, V, b).value)
    shifted = abs(futaki_limit(b24.shifted(7), [0, 0, 0], [0, 0, 1]).value)
    moved = TorusWeightTable(2, 2, {k: w + np.array([2, 5]) for k, w in b24.degrees.items()})
    shift2 = abs(futaki_limit(moved, [0, 0], [1, 1]).value - e24.value)
    n2 = abs(df_and_n2(moved, [1, 1])["n2"] - df_and_n2(b24, [1, 1])["n2"])
    ok = max(p2_vals) < 1e-8 and sign_ok and drift < 1e-4 and max(lin, shifted, shift2, n2) < 1e-9
    emit(6, ok, f"P2 |Fut| {max(p2_vals):.1e}; Bl1P2 Fut(1,1) = {e24.value:.10f} "
                f"(kmax 24) vs {e48.value:.10f} (kmax 48), sign stable {sign_ok}; "
                f"linearity {lin:.1e}, shift {max(shifted, shift2):.1e}, N2 shift {n2:.1e}")
    assert ok


def test_criterion_7_soliton(emit):
    verts = ((-1, 0), (0, -1), (2, -1), (-1, 2))
    b24 = weights_from_polytope(PolytopeData(verts, kmax=24))
    b48 = weights_from_polytope(PolytopeData(verts, kmax=48))
    r24, r48 = soliton_vector(b24), soliton_vector(b48)
    pd = all(np.linalg.eigvalsh(gradient_hessian(b24, h["V"])[1]).min() > 0 for h in r24.history)
    drift = float(np.max(np.abs(r24.vector - r48.vector)))
    ok = r24.residual < 1e-8 and r48.residual < 1e-8 and drift < 1e-5 and pd
    emit(7, ok, f"V* = {np.round(r24.vector, 10).tolist()}, residual {r24.residual:.1e}, "
                f"{r24.iterations} Newton steps, kmax-doubling drift {drift:.1e}, Hessian PD {pd}")
    assert ok


def test_criterion_8_p1_pipeline(emit):
    t0 = time.perf_counter()
    initial = perturbed_round(0.1, 256)
    out = pipeline_p1(initial, 50.0, r=2, K=3)
    elapsed = time.perf_counter() - t0
    sup_dev = out.series[-1]["sup_dev_S"]
    areas = np.array([m.area() for m in out.metrics])
    area_drift = float(np.max(np.abs(np.diff(areas)) / AREA))
    g = out.analyzer.gauge_
    lam_norm = float(np.max(np.abs(g.lam.spectrum)))
    weights = out.analyzer.transform(np.eye(5))
    bounded = all(out.h2[k]["bounded"] for k in (2, 3))
    ratio = calabi_energy(out.metrics[-1]) / calabi_energy(initial)
    ok = (sup_dev < 1e-4 and area_drift < 1e-8 and g.case_II and lam_norm < 1e-3
          and np.all(weights == 0) and bounded and ratio < 0.1 and elapsed < 300)
    emit(8, ok, f"T = 50: sup|S - mean S| {sup_dev:.2e}, area drift {area_drift:.1e}/unit time, "
                f"case II {g.case_II}, |Lambda| {lam_norm:.1e}, "
                f"C_2 sup {out.h2[2]['sup']:.4f}, C_3 sup {out.h2[3]['sup']:.4f} (stable {bounded}), "
                f"Calabi ratio {ratio:.1e}, {elapsed:.1f} s")
    assert ok


def _bundled_runs(tmp):
    path = str(tmp / "noisy-path.json")
    runs = [["analyze-path", "--input", "bundled:geodesic"],
            ["gen-path", "--config", "bundled:gauged-noisy", "--out", path],
            ["analyze-path", "--input", path],
            ["ring-degenerate", "--ring", "bundled:conic", "--weights", "1,0,0"],
            ["ring-degenerate", "--ring", "bundled:twisted-cubic", "--weights", "3,2,1,0"],
            ["futaki", "--polytope", "bundled:p1", "--vprime", "1"],
            ["futaki", "--polytope", "bundled:p2", "--vprime", "1,0"],
            ["futaki", "--polytope", "bundled:bl1p2", "--vprime", "1,1"],
            ["soliton", "--polytope", "bundled:bl1p2"],
            ["p1-flow", "--csv", str(tmp / "series.csv")]]
    return runs


def test_criterion_9_determinism(tmp_path, monkeypatch, emit):
    assert {"geodesic", "gauged-noisy", "conic", "twisted-cubic", "p1", "p2", "bl1p2"} <= set(bundled_names())
    report = tmp_path / "report.json"
    mismatches, failures = [], []
    runs = _bundled_runs(tmp_path)
    for argv in runs:
        texts = []
        for n in ("1", "4"):
            monkeypatch.setenv("DEGENFLOW_THREADS", n)
            status, _ = run(argv + ["--report", str(report)])
            if status:
                failures.append(argv[0])
            texts.append(report.read_bytes())
        if texts[0] != texts[1]:
            mismatches.append(" ".join(argv[:3]))
    ok = not mismatches and not failures
    emit(9, ok, f"{len(runs)} bundled runs under DEGENFLOW_THREADS=1 and 4, "
                f"{len(mismatches)} byte mismatches, {len(failures)} failed runs")
    assert ok
