import math

import numpy as np
import pytest
import sympy
from scipy.linalg import expm

from degenflow.asymptotics import NonConvergent, estimate_gauge
from degenflow.errors import ConfigInvalid, DegenerateMetric, QuadratureNotConverged
from degenflow.flows import (AREA, SymmetricMetricP1, SynthPathConfig, analyze_gram_path,
                             calabi_energy, gram_from_metric, krf_p1, monomial_complement,
                             normalization_constant, perturbed_round, pipeline_p1,
                             pullback_grams, round_metric, synth_path)
from degenflow.ringfilt import monomials


# --- synthetic paths -------------------------------------------------------------

def test_synth_geodesic_is_exact():
    cfg = SynthPathConfig([1.0, 0.5, -0.25], steps=30, random_frame=True, seed=4)
    path, truth = synth_path(cfg)
    X = truth.lam.matrix
    for i, A in enumerate(path.cumulative()):
        np.testing.assert_allclose(A, expm(i * X), rtol=1e-10, atol=1e-10 * np.exp(i))


def test_synth_rotating_gauge_recovers_spectrum():
    cfg = SynthPathConfig([2.0, 1.0, 0.0], [1, 2, 1], steps=200, theta=0.9, plane=(0, 2),
                          random_frame=True, seed=5)
    path, truth = synth_path(cfg)
    g = estimate_gauge(path)
    np.testing.assert_allclose(g.lam.spectrum, [2.0, 1.0, 0.0], atol=1e-10)
    assert g.lam.multiplicities == (1, 2, 1)
    np.testing.assert_allclose(truth.limit_gauge, expm(0.9 * np.array(
        [[0, 0, -1, 0], [0, 0, 0, 0], [1, 0, 0, 0], [0, 0, 0, 0]])), atol=1e-14)


def test_synth_divergent_noise_is_rejected():
    cfg = SynthPathConfig([1.0, 0.0], steps=2000, noise=0.5, decay=0.5, seed=1)
    path, _ = synth_path(cfg)
    with pytest.raises(NonConvergent):
        estimate_gauge(path)


def test_synth_ground_truth_subspaces():
    cfg = SynthPathConfig([1.0, 0.0, -1.0], steps=10, twist=0.4, seed=2)
    path, truth = synth_path(cfg)
    A = path.cumulative()[-1]
    for s, level in enumerate(truth.lam.spectrum):
        V = truth.subspaces[s]
        assert V.shape[1] == 3 - s
        # A_i maps V_s onto the eigenspaces of level <= spectrum[s]
        assert np.linalg.norm(A @ V, 2) == pytest.approx(np.exp(10 * level), rel=1e-10)
        assert truth.predicted_weight(V[:, -1]) == truth.lam.spectrum[-1]
    assert truth.predicted_weight(truth.subspaces[1] @ np.ones(2)) == 0.0


@pytest.mark.parametrize("kw", [
    {"spectrum": [1, 1]},
    {"spectrum": [1, 0], "multiplicities": [1]},
    {"spectrum": [1, 0], "noise": 1.0},
    {"spectrum": [1, 0], "steps": 0},
    {"spectrum": [1, 0], "theta": 0.5, "plane": (0, 2)},
    {"spectrum": [1, 0], "twist": -1.0},
    {"spectrum": [1, 0], "multiplicities": [0, 1]},
])
def test_synth_config_validation(kw):
    with pytest.raises(ConfigInvalid):
        synth_path(SynthPathConfig(**kw))


# --- metrics on the projective line ------------------------------------------------

def test_round_metric_has_constant_curvature():
    m = round_metric()
    np.testing.assert_allclose(m.scalar_curvature(), 2.0, atol=1e-9)
    assert calabi_energy(m) < 1e-8
    assert m.area() == pytest.approx(AREA, rel=1e-14)


def _quartic_calabi(eps):
    x = sympy.symbols("x")
    e = sympy.Rational(eps).limit_denominator(10 ** 6)
    phi = (1 - x ** 2) * (1 + e * (1 - x ** 2)) / 2
    S = -2 * sympy.diff(phi, x, 2)
    mean = sympy.integrate(S, (x, -1, 1)) / 2
    return float(2 * sympy.pi * sympy.integrate((S - mean) ** 2, (x, -1, 1)))


def test_calabi_quartic_exact_and_refined():
    eps = 0.1
    exact = _quartic_calabi(eps)
    coarse = calabi_energy(perturbed_round(eps, n=256))
    fine = calabi_energy(perturbed_round(eps, n=1024))
    assert coarse == pytest.approx(fine, rel=1e-6)
    assert fine == pytest.approx(exact, rel=1e-8)


def test_calabi_nonnegative():
    rng = np.random.default_rng(0)
    x = np.linspace(-1, 1, 128)
    for _ in range(10):
        c = rng.uniform(-0.3, 0.3, size=3)
        phi = 0.5 * (1 - x ** 2) * np.exp(c[0] * x + c[1] * x ** 2 + c[2] * x ** 3)
        assert calabi_energy(SymmetricMetricP1(phi)) >= 0


def test_degenerate_profile_rejected():
    x = np.linspace(-1, 1, 64)
    bad = SymmetricMetricP1(0.5 * (1 - x ** 2) * (x - 0.2))
    with pytest.raises(DegenerateMetric):
        calabi_energy(bad)
    with pytest.raises(DegenerateMetric):
        gram_from_metric(bad, 1)
    with pytest.raises(ConfigInvalid):
        SymmetricMetricP1(np.ones(4))


def test_round_metric_is_stationary():
    ms = krf_p1(round_metric(), T=3.0)
    for m in ms:
        np.testing.assert_allclose(m.phi, ms[0].phi, atol=1e-8)


def test_flow_keeps_boundary_data_and_area():
    ms = krf_p1(perturbed_round(0.2), T=4.0)
    for m in ms:
        left, right = m.boundary_slopes()
        assert left == pytest.approx(1.0, abs=1e-5) and right == pytest.approx(-1.0, abs=1e-5)
        assert m.area() == pytest.approx(AREA, rel=1e-8)
        np.testing.assert_array_equal(m.phi[[0, -1]], 0.0)


def test_flow_reduces_curvature_spread():
    ms = krf_p1(perturbed_round(0.1), T=10.0)
    dev = [np.max(np.abs(m.scalar_curvature() - 2.0)) for m in ms]
    assert all(b < a for a, b in zip(dev[2:], dev[3:]))
    assert calabi_energy(ms[-1]) < 0.1 * calabi_energy(ms[0])


# --- Gram matrices ------------------------------------------------------------------

def test_round_gram_beta_oracle():
    r = 1
    H = np.diag(gram_from_metric(round_metric(), r).gram).real
    # 2 pi e^{rc} int (1+x)^j (1-x)^(2r-j) dx with e^c = area / (2 pi * 4)
    ec = AREA / (8 * np.pi)
    beta = [2 ** (2 * r + 1) * math.factorial(j) * math.factorial(2 * r - j) / math.factorial(2 * r + 1)
            for j in range(2 * r + 1)]
    np.testing.assert_allclose(H, 2 * np.pi * ec ** r * np.array(beta), rtol=1e-10)
    assert H[1] / H[0] == pytest.approx(0.5, rel=1e-10)


def test_round_gram_reflection_symmetry():
    H = np.diag(gram_from_metric(round_metric(), 3).gram).real
    np.testing.assert_allclose(H, H[::-1], rtol=1e-12)


def test_gram_shift_and_normalization():
    m = perturbed_round(0.15)
    r = 2
    base = gram_from_metric(m, r, normalize=False, shift=0.0).gram
    c_star = normalization_constant(m)
    for c in (-1.0, 0.3, 2.0):
        G = gram_from_metric(m, r, normalize=False, shift=c).gram
        np.testing.assert_allclose(G, np.exp(r * c) * base, rtol=1e-12)
        np.testing.assert_allclose(np.exp(r * (c_star - c)) * G, gram_from_metric(m, r).gram,
                                   rtol=1e-10)


def test_quadrature_convergence_check():
    with pytest.raises(QuadratureNotConverged):
        gram_from_metric(perturbed_round(0.3), 4, nodes=3)


def test_monomial_complement_picks_each_exponent_once():
    comp = monomial_complement(5, 2)
    mons = monomials(5, 2)
    exps = [sum(j * e for j, e in enumerate(mons[int(np.argmax(col))])) for col in comp.T.real]
    assert exps == list(range(9))


# --- Gram-path pipelines ------------------------------------------------------------

def test_pullback_path_recovers_generator():
    rng = np.random.default_rng(3)
    H = np.diag(rng.uniform(0.5, 2.0, size=5))
    lam = 0.25 * (np.arange(5) - 2)
    times = np.arange(41.0)
    path, an = analyze_gram_path(times, pullback_grams(H, lam, times))
    np.testing.assert_allclose(an.gauge_.lam.spectrum, lam[::-1], atol=1e-6)
    assert an.case_ == "I"
    F = path.reference_form.frame()
    w = an.transform(np.linalg.solve(F, np.eye(5)).T)
    np.testing.assert_allclose(w, lam, atol=1e-6)
    # a combination takes the largest planted weight it involves
    assert an.transform(np.linalg.solve(F, np.array([1, 1, 0, 0, 0.0])))[0] == pytest.approx(lam[1])


def test_noncommuting_pullback_is_not_self_similar():
    # transitions P e^L P^{-1} with non-unitary P have the wrong singular values
    rng = np.random.default_rng(3)
    X = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    H = X.conj().T @ X + 3 * np.eye(3)
    times = np.arange(21.0)
    with pytest.raises(NonConvergent):
        analyze_gram_path(times, pullback_grams(H, np.array([-0.3, 0.0, 0.3]), times))


def test_round_pipeline_is_trivial():
    out = pipeline_p1(round_metric(), T=20.0)
    assert out.analyzer.case_ == "II"
    np.testing.assert_array_equal(out.analyzer.gauge_.lam.spectrum, [0.0])
    for A in out.path.cumulative():
        np.testing.assert_allclose(A, np.eye(5), atol=1e-8)
    for k in (2, 3):
        np.testing.assert_allclose(out.h2[k]["C"], out.h2[k]["C"][0], rtol=1e-8)
    assert set(out.series[0]) == {"t", "calabi_energy", "sup_dev_S", "lambda_norm_estimate",
                                  "C_2", "C_3"}
