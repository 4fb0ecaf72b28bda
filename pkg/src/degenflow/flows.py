"""Matrix-path generators: a synthetic self-similar path with known answers,
and the circle-symmetric Kähler-Ricci flow on the projective line feeding the
Gram-matrix pipeline.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline
from scipy.linalg import expm, solve_banded

from .errors import (ConfigInvalid, DegenerateMetric, QuadratureNotConverged,
                     StepUnstable)
from .linalg import HermitianForm, HermitianGenerator, OperatorPath, parallel_lift
from .ringfilt import h2_check, monomials, rational_normal_curve, sym_gram

__all__ = [
    "SynthPathConfig", "SynthTruth", "synth_path", "random_unitary",
    "SymmetricMetricP1", "round_metric", "perturbed_round", "calabi_energy",
    "krf_p1", "normalization_constant", "gram_from_metric", "pullback_grams",
    "monomial_complement", "GramPipelineOutput", "analyze_gram_path", "pipeline_p1",
]


def random_unitary(d, rng):
    """Haar-distributed unitary via QR of a complex Gaussian matrix."""
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph


@dataclass
class SynthPathConfig:
    """Parameters of a synthetic gauged self-similar path.

    Parameters
    ----------
    spectrum, multiplicities : sequence
        Planted generator levels (any order) and their multiplicities.
    steps : int
        Number of unit steps.
    noise, decay : float
        Perturbation amplitude ``a`` and decay exponent ``p``; the step-``i``
        perturbation has operator norm ``a * i**-p``.
    theta : float
        Gauge schedule ``g_i = exp(theta (1 - 1/i) J)`` with ``J`` the rotation
        generator of the plane ``plane``.
    random_frame : bool
        Conjugate the generator by a random unitary.
    twist : float
        Scale of a random non-unitary change of basis ``C`` at step 0
        (0 means ``C = I``).
    """

    spectrum: tuple
    multiplicities: tuple = None
    steps: int = 2000
    noise: float = 0.0
    decay: float = 2.0
    theta: float = 0.0
    plane: tuple = (0, 1)
    random_frame: bool = False
    twist: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.spectrum = tuple(float(s) for s in self.spectrum)
        if self.multiplicities is None:
            self.multiplicities = (1,) * len(self.spectrum)
        self.multiplicities = tuple(int(m) for m in self.multiplicities)

    @property
    def dim(self):
        return sum(self.multiplicities)

    def validate(self):
        if len(self.spectrum) != len(self.multiplicities) or not self.spectrum:
            raise ConfigInvalid("spectrum and multiplicities must be nonempty and of equal length")
        if any(m < 1 for m in self.multiplicities):
            raise ConfigInvalid("multiplicities must be positive")
        if len(set(self.spectrum)) != len(self.spectrum):
            raise ConfigInvalid("spectrum levels must be distinct")
        if not np.all(np.isfinite(self.spectrum)):
            raise ConfigInvalid("spectrum must be finite")
        if self.steps < 1:
            raise ConfigInvalid("steps must be positive")
        if not 0 <= self.noise < 1:
            raise ConfigInvalid("noise amplitude must lie in [0, 1) to keep steps invertible")
        if self.decay < 0:
            raise ConfigInvalid("decay exponent must be nonnegative")
        if self.theta != 0 and (self.dim < 2 or len(set(self.plane)) != 2
                                or max(self.plane) >= self.dim or min(self.plane) < 0):
            raise ConfigInvalid(f"invalid rotation plane {self.plane} for dim {self.dim}")
        if self.twist < 0:
            raise ConfigInvalid("twist must be nonnegative")
        return self

    def to_dict(self):
        return {"spectrum": list(self.spectrum), "multiplicities": list(self.multiplicities),
                "steps": self.steps, "noise": self.noise, "decay": self.decay,
                "theta": self.theta, "plane": list(self.plane),
                "random_frame": self.random_frame, "twist": self.twist, "seed": self.seed}


@dataclass
class SynthTruth:
    """Ground truth of a synthetic path.

    ``subspaces[s]`` spans the vectors of weight at most ``lam.spectrum[s]``.
    """

    lam: HermitianGenerator
    limit_gauge: np.ndarray
    C: np.ndarray
    subspaces: list = field(repr=False)

    def predicted_weight(self, v, tol=1e-9):
        """Largest level whose eigenspace meets ``C v``."""
        x = self.C @ np.asarray(v, dtype=complex)
        for s, U in enumerate(self.lam.eigenspaces):
            if np.linalg.norm(U.conj().T @ x) > tol * np.linalg.norm(x):
                return float(self.lam.spectrum[s])
        raise ValueError("zero vector")


def _gauge(theta, plane, d, i):
    if theta == 0 or i == 0:
        return np.eye(d, dtype=complex)
    a, b = plane
    c, s = np.cos(theta * (1 - 1 / i)), np.sin(theta * (1 - 1 / i))
    g = np.eye(d, dtype=complex)
    g[a, a], g[a, b], g[b, a], g[b, b] = c, -s, s, c
    return g


def synth_path(cfg):
    """Generate ``A_i = h_i (I + F_i) e^{iL} C`` and its ground truth.

    Only transitions are stored, so long expanding paths do not overflow;
    each transition is ``h_i e^L h_i^{-1}`` up to a factor that is the
    identity plus ``O(i^-p)``.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    d = cfg.dim
    Q = random_unitary(d, rng) if cfg.random_frame else np.eye(d, dtype=complex)
    lam = HermitianGenerator.from_levels(cfg.spectrum, cfg.multiplicities, basis=Q)
    if cfg.twist > 0:
        Z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        C = np.eye(d) + cfg.twist * Z / np.linalg.norm(Z, 2)
    else:
        C = np.eye(d, dtype=complex)
    E = lam.exp(1.0)

    def factor(i):
        Z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        return np.eye(d) + cfg.noise * i ** (-cfg.decay) * Z / np.linalg.norm(Z, 2)

    steps = np.empty((cfg.steps, d, d), dtype=complex)
    F_prev = factor(1)
    h_prev = _gauge(cfg.theta, cfg.plane, d, 1)
    steps[0] = h_prev @ F_prev @ E @ C
    for i in range(2, cfg.steps + 1):
        F = factor(i)
        h = _gauge(cfg.theta, cfg.plane, d, i)
        steps[i - 1] = h @ F @ E @ np.linalg.solve(F_prev, h_prev.conj().T)
        F_prev, h_prev = F, h
    path = OperatorPath.from_transitions(np.arange(cfg.steps + 1, dtype=float), steps,
                                         meta={"synth": cfg.to_dict()})
    Cinv = np.linalg.inv(C)
    spaces = [Cinv @ np.hstack(lam.eigenspaces[s:]) for s in range(len(lam.spectrum))]
    limit = expm(cfg.theta * _rotation_generator(cfg.plane, d)) if cfg.theta else np.eye(d)
    return path, SynthTruth(lam, limit, C, spaces)


def _rotation_generator(plane, d):
    J = np.zeros((d, d))
    a, b = plane
    J[a, b], J[b, a] = -1.0, 1.0
    return J


# --- circle-symmetric Kähler-Ricci flow on the projective line -------------
#
# The metric is encoded by its momentum profile phi(x) = 1/u''(x) on [-1, 1]
# (u the symplectic potential); g = dx^2/(2 phi) + 2 phi dtheta^2 so the
# round metric of area 4 pi is phi = (1 - x^2)/2. The normalized flow reads
#     phi_t = phi phi'' - phi'^2 + phi - x phi',
# with phi(+-1) = 0; the scalar curvature is S = -2 phi''.

AREA = 4.0 * np.pi


@dataclass
class SymmetricMetricP1:
    """Momentum profile ``phi`` sampled on a uniform grid of ``[-1, 1]``."""

    phi: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        if self.phi.ndim != 1 or len(self.phi) < 8:
            raise ConfigInvalid("profile needs at least 8 grid points")

    @property
    def x(self):
        return np.linspace(-1.0, 1.0, len(self.phi))

    @property
    def h(self):
        return 2.0 / (len(self.phi) - 1)

    def validate(self):
        """Raise DegenerateMetric unless ``phi > 0`` inside (``u`` strictly convex)."""
        inner = self.phi[1:-1]
        if not np.all(np.isfinite(self.phi)) or np.any(inner <= 0):
            raise DegenerateMetric("profile is not positive in the interior (u not convex)",
                                   t=self.t)
        return self

    def scalar_curvature(self):
        """``S = -2 phi''`` by fourth-order differences (one-sided at the ends)."""
        return -2.0 * _second_derivative(self.phi, self.h)

    def area(self):
        """Area from the volume density ``sqrt(g_xx g_tt) = 1`` (Simpson)."""
        return 2.0 * np.pi * simpson(np.ones_like(self.phi), x=self.x)

    def boundary_slopes(self):
        h = self.h
        p = self.phi
        left = (-25 * p[0] + 48 * p[1] - 36 * p[2] + 16 * p[3] - 3 * p[4]) / (12 * h)
        right = (25 * p[-1] - 48 * p[-2] + 36 * p[-3] - 16 * p[-4] + 3 * p[-5]) / (12 * h)
        return left, right


def round_metric(n=256):
    x = np.linspace(-1.0, 1.0, n)
    return SymmetricMetricP1(0.5 * (1 - x ** 2))


def perturbed_round(eps, n=256):
    """``phi = (1 - x^2)(1 + eps (1 - x^2)) / 2``: same boundary data as round."""
    x = np.linspace(-1.0, 1.0, n)
    return SymmetricMetricP1(0.5 * (1 - x ** 2) * (1 + eps * (1 - x ** 2))).validate()


def _second_derivative(p, h):
    d = np.empty_like(p)
    d[2:-2] = (-p[4:] + 16 * p[3:-1] - 30 * p[2:-2] + 16 * p[1:-3] - p[:-4]) / (12 * h * h)
    for i, sgn in ((0, 1), (1, 1), (-1, -1), (-2, -1)):
        j = np.arange(6)
        idx = i + sgn * j if i >= 0 else len(p) + i - j
        c = np.array([45, -154, 214, -156, 61, -10]) / (12 * h * h)
        if i in (1, -2):
            # shifted one-sided stencil centered one node in
            c = np.array([10, -15, -4, 14, -6, 1]) / (12 * h * h)
            idx = (np.arange(6) if i == 1 else len(p) - 1 - np.arange(6))
        d[i] = c @ p[idx]
    return d


def calabi_energy(metric):
    """``2 pi int (S - mean S)^2 dx`` by Simpson's rule."""
    metric.validate()
    S = metric.scalar_curvature()
    x = metric.x
    mean = 2.0 * np.pi * simpson(S, x=x) / metric.area()
    return float(2.0 * np.pi * simpson((S - mean) ** 2, x=x))


def _krf_rhs(p, x, h):
    d1 = np.zeros_like(p)
    d2 = np.zeros_like(p)
    d1[1:-1] = (p[2:] - p[:-2]) / (2 * h)
    d2[1:-1] = (p[2:] - 2 * p[1:-1] + p[:-2]) / (h * h)
    return p * d2 - d1 ** 2 + p - x * d1, d1, d2


def _implicit_step(p, x, h, dt, tol=1e-12, max_newton=20):
    """One backward-Euler step with Newton on the interior nodes."""
    q = p.copy()
    m = len(p) - 2
    for _ in range(max_newton):
        N, d1, d2 = _krf_rhs(q, x, h)
        R = (q[1:-1] - p[1:-1]) / dt - N[1:-1]
        qi, xi, d1i = q[1:-1], x[1:-1], d1[1:-1]
        lower = qi / h ** 2 + d1i / h + xi / (2 * h)
        upper = qi / h ** 2 - d1i / h - xi / (2 * h)
        diag = d2[1:-1] - 2 * qi / h ** 2 + 1.0
        ab = np.zeros((3, m))
        ab[0, 1:] = -upper[:-1]
        ab[1] = 1.0 / dt - diag
        ab[2, :-1] = -lower[1:]
        delta = solve_banded((1, 1), ab, -R)
        q[1:-1] += delta
        if not np.all(np.isfinite(q)):
            break
        if np.max(np.abs(delta)) <= tol * max(1.0, np.max(np.abs(q))):
            return q
    raise StepUnstable(f"Newton did not converge for dt = {dt:.3g}")


def krf_p1(initial, T, dt=1e-3, sample_every=1.0, max_halvings=6):
    """Run the normalized flow to time ``T``; returns metrics at sample times.

    Steps that fail to converge are retried with halved ``dt``.
    """
    initial.validate()
    if T < 0 or dt <= 0:
        raise ConfigInvalid("T must be nonnegative and dt positive")
    p = initial.phi.copy()
    x, h = initial.x, initial.h
    n_per_sample = max(int(round(sample_every / dt)), 1)
    dt = sample_every / n_per_sample
    n_samples = int(round(T / sample_every))
    out = [SymmetricMetricP1(p.copy(), 0.0)]
    for s in range(1, n_samples + 1):
        for _ in range(n_per_sample):
            sub, q = 1, None
            for _attempt in range(max_halvings + 1):
                try:
                    q = p
                    for _ in range(sub):
                        q = _implicit_step(q, x, h, dt / sub)
                    break
                except StepUnstable:
                    sub *= 2
            else:
                raise StepUnstable(f"step failed after {max_halvings} halvings", t=out[-1].t)
            p = q
        m = SymmetricMetricP1(p.copy(), s * sample_every)
        out.append(m.validate())
    return out


def _potential(metric):
    """Bounded part ``w`` of the symplectic potential ``u = u_round + w`` as
    splines ``(w, w')`` with ``w(0) = w'(0) = 0``, and ``(1 - x^2) u''``."""
    x, p = metric.x, metric.phi
    inner = slice(1, -1)
    q = np.empty_like(p)
    q[inner] = 1.0 / p[inner] - 2.0 / (1 - x[inner] ** 2)
    for end, nb in ((0, [1, 2, 3, 4]), (-1, [-2, -3, -4, -5])):
        c = np.polyfit(x[nb], q[nb], 3)
        q[end] = np.polyval(c, x[end])
    spl = CubicSpline(x, q)
    W1 = spl.antiderivative(1)
    W2 = spl.antiderivative(2)
    a, b = float(W1(0.0)), float(W2(0.0))

    def w(t):
        return W2(t) - a * t - b

    def dw(t):
        return W1(t) - a

    def density(t):
        return (1 - t ** 2) * spl(t) + 2.0
    return w, dw, density


@lru_cache(maxsize=8)
def _gauss_rule(nodes):
    return np.polynomial.legendre.leggauss(nodes)


def _gauss(f, nodes):
    t, wt = _gauss_rule(nodes)
    return float(np.dot(wt, f(t)))


def _converged(f, nodes, tol):
    a, b = _gauss(f, nodes), _gauss(f, 2 * nodes)
    if abs(a - b) > tol * max(abs(b), 1e-300):
        raise QuadratureNotConverged(f"quadrature changed by {abs(a - b):.2e} on node doubling")
    return b


def normalization_constant(metric, nodes=256, tol=1e-10):
    """Constant ``c`` with ``2 pi int e^{u - x u'} u'' dx`` equal to the area."""
    w, dw, dens = _potential(metric)
    I = _converged(lambda t: dens(t) * np.exp(w(t) - t * dw(t)), nodes, tol)
    return float(np.log(AREA / (2.0 * np.pi * I)))


def gram_from_metric(metric, r, nodes=256, tol=1e-10, normalize=True, shift=0.0):
    """Diagonal L2 Gram of ``z^j``, ``j = 0..2r``, in ``H^0(O(2r))``.

    ``H_jj = 2 pi int (1+x)^j (1-x)^(2r-j) exp(r w + (j - r(1+x)) w') dx`` with
    ``u = u_round + w + c``; ``c`` is fixed by the volume normalization unless
    ``normalize`` is False, in which case ``shift`` is used instead.
    """
    metric.validate()
    if not 1 <= r <= 16:
        raise ConfigInvalid("r must lie in 1..16")
    w, dw, _ = _potential(metric)
    c = normalization_constant(metric, nodes, tol) if normalize else float(shift)
    diag = []
    for j in range(2 * r + 1):
        def f(t, j=j):
            return (1 + t) ** j * (1 - t) ** (2 * r - j) * np.exp(r * (w(t) + c) + (j - r * (1 + t)) * dw(t))
        diag.append(2.0 * np.pi * _converged(f, nodes, tol))
    return HermitianForm(np.diag(np.array(diag, dtype=complex)))


def pullback_grams(H_fix, lam_prime, times):
    """Gram path ``e^{t L'} H_fix e^{t L'}`` for a diagonal ``L'``."""
    H_fix = np.asarray(H_fix, dtype=complex)
    lam_prime = np.asarray(lam_prime, dtype=float)
    return [np.exp(t * lam_prime)[:, None] * H_fix * np.exp(t * lam_prime)[None, :] for t in times]


def monomial_complement(n_vars, k):
    """Columns picking, for each exponent sum ``m``, the first degree-``k``
    monomial ``x^a`` with ``sum_j j a_j = m``; on the rational normal curve
    their classes are the sections ``z^m``."""
    mons = monomials(n_vars, k)
    first = {}
    for i, a in enumerate(mons):
        m = sum(j * e for j, e in enumerate(a))
        first.setdefault(m, i)
    cols = [first[m] for m in sorted(first)]
    return np.eye(len(mons), dtype=complex)[:, cols]


@dataclass
class GramPipelineOutput:
    times: np.ndarray
    metrics: list = field(repr=False)
    grams: list = field(repr=False)
    path: OperatorPath = field(repr=False)
    analyzer: object = None
    h2: dict = field(default_factory=dict)
    series: list = field(default_factory=list)


def analyze_gram_path(times, grams, lift_tol=1e-8, **analyzer_kw):
    """Parallel lift followed by the full path analysis."""
    from .asymptotics import PathAnalyzer
    path = parallel_lift(times, grams, lift_tol=lift_tol)
    return path, PathAnalyzer(**analyzer_kw).fit(path)


def pipeline_p1(initial, T, r=2, K=3, dt=1e-3, h2_degrees=(2, 3), mapper=map, lift_tol=1e-8):
    """Flow, sample Grams on ``H^0(O(2r))``, lift, analyze and compare metrics.

    ``mapper`` evaluates the per-time quadratures (e.g. an ordered thread pool
    map); results are identical to the serial run.
    """
    if any(k > K for k in h2_degrees):
        raise ConfigInvalid("comparison degrees must not exceed K")
    metrics = krf_p1(initial, T, dt)
    times = np.array([m.t for m in metrics])
    grams = list(mapper(lambda m: gram_from_metric(m, r).gram, metrics))
    path, analyzer = analyze_gram_path(times, grams, lift_tol=lift_tol)

    ring = rational_normal_curve(2 * r, K=max(h2_degrees, default=1))
    h2 = {}
    for k in h2_degrees:
        I = ring.ideal_basis(k)
        comp = monomial_complement(2 * r + 1, k)
        sym = [sym_gram(G, k) for G in grams]
        l2 = list(mapper(lambda m, k=k: gram_from_metric(m, r * k).gram, metrics))
        h2[k] = h2_check(sym, I, l2, comp)

    g = analyzer.gauge_
    lam_est = np.concatenate([[np.nan], np.max(np.abs(g.log_spectra), axis=1)])
    series = []
    for i, m in enumerate(metrics):
        S = m.scalar_curvature()
        row = {"t": m.t, "calabi_energy": calabi_energy(m),
               "sup_dev_S": float(np.max(np.abs(S - 2.0 * np.pi * simpson(S, x=m.x) / m.area()))),
               "lambda_norm_estimate": float(lam_est[i])}
        for k in h2_degrees:
            row[f"C_{k}"] = float(h2[k]["C"][i])
        series.append(row)
    return GramPipelineOutput(times, metrics, grams, path, analyzer, h2, series)
