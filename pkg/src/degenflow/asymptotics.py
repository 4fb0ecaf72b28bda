"""Asymptotics of gauged self-similar matrix paths.

Given a path ``A_i`` whose transitions ``B_i = A_i A_{i-1}^{-1}`` approach
``g_i e^L g_i^{-1}`` for unitary gauges ``g_i``, this module estimates the
generator ``L``, the growth rate (weight) of vectors and subspaces, the
induced filtration with a splitting, the associated one-parameter subgroup
and limit points in projective space.
"""

from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import (IntersectionDefect, NonConvergent, NotStabilized,
                     RankBorderline, SingularInput, SpectrumAmbiguity,
                     TooShort, ZeroVector)
from .linalg import (HermitianGenerator, OperatorPath, fs_distance, orth,
                     principal_angles)
from .reps import STD, RepDescriptor, induce, induce_lie, induced_weights, plucker

__all__ = [
    "GaugeEstimate", "WeightFiltration", "OneParamData", "LimitSetSample",
    "Weight", "estimate_gauge", "log_increments", "weight", "weight_level",
    "weight_grassmann", "filtration", "splitting", "one_param",
    "equal_filtration", "bar_limit", "limit_set", "stabilizer_dim",
    "threshold_violations", "default_snap_tol", "log_norm_profile",
    "eigenspace_angle", "PathAnalyzer",
]

MIN_STEPS = 20

Weight = namedtuple("Weight", ["raw", "snapped", "average"])


@dataclass
class GaugeEstimate:
    """Estimated generator with unitary gauges certifying self-similarity.

    ``gauges[i]`` is ``g_i`` (``gauges[0]`` is the identity). The residual
    curves hold the per-step values whose tail maxima are reported.
    """

    lam: HermitianGenerator
    gauges: np.ndarray
    residual_star: float
    residual_gauge: float
    tail_start: int
    case_II: bool
    star_curve: np.ndarray = field(repr=False, default=None)
    gauge_curve: np.ndarray = field(repr=False, default=None)
    log_spectra: np.ndarray = field(repr=False, default=None)

    @property
    def n_steps(self):
        return len(self.gauges) - 1

    def block_frame(self, i):
        """``g_i Q``: the gauged image at step ``i`` of the eigenbasis of ``lam``."""
        return self.gauges[i] @ self.lam.basis


@dataclass
class WeightFiltration:
    """Decreasing filtration ``E = V_1 > ... > V_r`` with optional splitting.

    ``subspaces[s]`` and ``splitting[s]`` hold orthonormal bases (columns).
    """

    jumps: np.ndarray
    subspaces: list
    dims: list
    splitting: list = None
    diagnostics: dict = field(default_factory=dict)


@dataclass
class OneParamData:
    """Generator ``xi`` acting by ``jumps[s]`` on ``W_s``, and ``C0`` with
    ``C0 W_s = U_s``."""

    xi: np.ndarray
    C0: np.ndarray
    jumps: np.ndarray
    filtration: WeightFiltration

    def lambda_t(self, t):
        return expm(t * self.xi)


@dataclass
class LimitSetSample:
    rep: RepDescriptor
    points: list
    diameter: float
    pairwise: np.ndarray
    max_gap: float
    subspace_angles: np.ndarray
    weight: float
    within_tol: bool


def _as_unit_path(path):
    if not isinstance(path, OperatorPath):
        raise TypeError("expected an OperatorPath")
    return path if path.is_unit_spaced() else path.resample_unit()


def _align_blocks(M, blocks):
    """Block-diagonal unitary ``u`` making ``M u`` as close to I as possible."""
    u = np.zeros_like(M)
    for sl in blocks:
        X, _, Yh = np.linalg.svd(M[sl, sl])
        u[sl, sl] = Yh.conj().T @ X.conj().T
    return u


def estimate_gauge(path, tail_fraction=0.25, star_tol=1e-3, lambda_zero_tol=1e-3,
                   cluster_tol=None):
    """Estimate the generator and the gauges of a self-similar path.

    The positive polar parts of the transitions are diagonalized; their
    log-spectra (descending) are averaged over the tail and clustered into
    levels. The eigenbasis of the first transition fixes the frame of the
    generator, and gauges are aligned step to step inside each eigenspace
    block so that consecutive gauges stay as close as possible.

    Raises
    ------
    TooShort
        Fewer than 20 unit steps.
    NonConvergent
        Either self-similarity residual exceeds ``star_tol`` on the tail.
    """
    path = _as_unit_path(path)
    Bs = path.steps()
    N = len(Bs)
    if N < MIN_STEPS:
        raise TooShort(f"path has {N} unit steps, need at least {MIN_STEPS}")
    d = path.dim
    evals, evecs = np.linalg.eigh(np.conj(np.swapaxes(Bs, 1, 2)) @ Bs)
    if np.any(evals[:, 0] <= 0) or np.any(evals[:, -1] / evals[:, 0] > 1e24):
        raise SingularInput("a transition is numerically singular")
    logs = 0.5 * np.log(evals[:, ::-1])
    V = evecs[:, :, ::-1]

    tail_start = min(max(1, int(np.floor(N * (1.0 - tail_fraction)))), N)
    tail = slice(tail_start - 1, N)
    mean_logs = logs[tail].mean(axis=0)
    if cluster_tol is None:
        cluster_tol = max(1e-6 * max(np.max(np.abs(mean_logs)), 1.0), star_tol)
    groups = [[0]]
    for j in range(1, d):
        if mean_logs[j - 1] - mean_logs[j] < cluster_tol:
            groups[-1].append(j)
        else:
            groups.append([j])
    levels = np.array([mean_logs[g].mean() for g in groups])
    case_II = bool(np.max(np.abs(levels)) < lambda_zero_tol)
    if case_II:
        # vanishing generator: one level, exactly zero
        groups, levels = [list(range(d))], np.zeros(1)
    mults = tuple(len(g) for g in groups)
    blocks = [slice(g[0], g[-1] + 1) for g in groups]
    diag = np.repeat(levels, mults)

    Q = V[0]
    lam = HermitianGenerator.from_levels(levels, mults, basis=Q)
    h_prev = Q
    gauges = np.empty((N + 1, d, d), dtype=complex)
    gauges[0] = np.eye(d)
    star = np.empty(N)
    gauge_res = np.empty(N)
    eye = np.eye(d)
    inv_exp = np.exp(-diag)
    for i in range(N):
        Vi = V[i]
        u = _align_blocks(h_prev.conj().T @ Vi, blocks)
        h = Vi @ u
        gauge_res[i] = np.linalg.norm(h_prev.conj().T @ h - eye, 2)
        star[i] = np.linalg.norm(Bs[i] @ ((h * inv_exp) @ h.conj().T) - eye, 2)
        gauges[i + 1] = h @ Q.conj().T
        h_prev = h

    res_star = float(star[tail].max())
    res_gauge = float(gauge_res[tail].max())
    est = GaugeEstimate(lam, gauges, res_star, res_gauge, tail_start, case_II,
                        star, gauge_res, logs)
    if res_star > star_tol or res_gauge > star_tol:
        raise NonConvergent(
            f"self-similarity residuals {res_star:.3e} / {res_gauge:.3e} exceed {star_tol:.1e}",
            residual_star=res_star, residual_gauge=res_gauge,
            star_curve=star.tolist(), gauge_curve=gauge_res.tolist())
    return est


def _rep_steps(path, desc):
    Bs = path.steps()
    desc = RepDescriptor.parse(desc)
    if desc == STD:
        return Bs
    return np.array([induce(desc, B) for B in Bs])


def log_increments(path, v, desc=STD, deflate=None):
    """Increments ``f_i - f_{i-1}`` of ``f_i = log |A_i v|`` for i = 1..N.

    ``v`` may hold several vectors as columns; the iteration is renormalized
    every step so long expanding paths do not overflow. ``deflate(i)`` may
    return an orthonormal frame whose span is projected out after step ``i``
    (or None).
    """
    path = _as_unit_path(path)
    v = np.asarray(v, dtype=complex)
    single = v.ndim == 1
    X = v[:, None] if single else v
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        raise ZeroVector("weight of the zero vector is undefined")
    X = X / norms
    steps = _rep_steps(path, desc)
    out = np.empty((len(steps), X.shape[1]))
    for i, B in enumerate(steps, start=1):
        X = B @ X
        if deflate is not None:
            F = deflate(i)
            if F is not None and F.shape[1]:
                X = X - F @ (F.conj().T @ X)
        n = np.linalg.norm(X, axis=0)
        if np.any(n == 0):
            raise ZeroVector("iterate vanished under deflation")
        out[i - 1] = np.log(n)
        X = X / n
    log0 = np.log(norms)
    return (out[:, 0], float(log0[0])) if single else (out, log0)


def log_norm_profile(gen, v, times, rel_cutoff=1e-13):
    """``log |exp(t L) v|`` at each ``t``, evaluated without overflow.

    With ``c_s = |P_s v|^2`` this is ``0.5 * logsumexp(2 t lambda_s + log c_s)``,
    a convex function of ``t``. Components below ``rel_cutoff`` relative to
    ``|v|`` are rounding residue and are dropped.
    """
    v = np.asarray(v, dtype=complex)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise ZeroVector("log-norm of the zero vector")
    c = np.array([np.linalg.norm(U.conj().T @ v) ** 2 for U in gen.eigenspaces])
    keep = c > (rel_cutoff * nv) ** 2
    lam, logc = gen.spectrum[keep], np.log(c[keep])
    t = np.asarray(times, dtype=float)
    return 0.5 * logsumexp(2.0 * t[:, None] * lam[None, :] + logc[None, :], axis=1)


def eigenspace_angle(gen, v):
    """Smallest angle between ``v`` and an eigenspace of ``gen``."""
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    best = np.pi / 2
    for U in gen.eigenspaces:
        p = U @ (U.conj().T @ v)
        best = min(best, float(np.arctan2(np.linalg.norm(v - p), np.linalg.norm(p))))
    return best


def default_snap_tol(wd):
    gap = wd.min_gap()
    if np.isfinite(gap):
        return 1e-2 * gap
    return 1e-2 * max(1.0, float(np.max(np.abs(wd.weights))))


def _snap(raw, wd, snap_tol):
    dist = np.abs(wd.weights - raw)
    order = np.argsort(dist)
    if dist[order[0]] >= snap_tol:
        raise SpectrumAmbiguity(f"weight estimate {raw:.6g} is {dist[order[0]]:.3e} "
                                f"from the nearest admissible weight")
    if len(order) > 1 and dist[order[1]] <= 2 * snap_tol:
        raise SpectrumAmbiguity(f"weight estimate {raw:.6g} is ambiguous")
    return float(wd.weights[order[0]])


def _weight_from_increments(incr, log0, wd, snap_tol, window):
    N = len(incr)
    raw = float(np.mean(incr[-window:]))
    average = float((log0 + incr.sum()) / N)
    # f_N / N carries an O(1/N) offset from log|v|, so agreement is tested
    # on the growth over the second half of the path
    slope = float(np.mean(incr[N // 2:]))
    if snap_tol is None:
        snap_tol = default_snap_tol(wd)
    if abs(raw - slope) > snap_tol:
        raise NonConvergent(f"increment estimate {raw:.6g} and average growth "
                            f"{slope:.6g} disagree", raw=raw, average=average, slope=slope)
    return Weight(raw, _snap(raw, wd, snap_tol), average)


def weight_level(data, v, desc=STD, gauge=None, member_tol=1e-6):
    """Index of the largest induced weight whose component in ``C0 v`` is
    nonzero, i.e. the filtration level containing ``v``."""
    desc = RepDescriptor.parse(desc)
    wd = induced_weights(gauge.lam, desc)
    x = induce(desc, data.C0) @ np.asarray(v, dtype=complex)
    comps = wd.components(x)
    nz = np.nonzero(comps > member_tol * np.linalg.norm(x))[0]
    if len(nz) == 0:
        raise ZeroVector("weight of the zero vector is undefined")
    return int(nz[0]), wd


def _deflator(gauge, wd, level, desc):
    if level == 0:
        return None
    U = np.hstack(wd.subspaces[:level])

    def frame(i):
        g = gauge.gauges[i]
        return (g if desc == STD else induce(desc, g)) @ U
    return frame


def weight(path, gauge, v, desc=STD, snap_tol=None, window=10, data=None, member_tol=1e-6):
    """Growth rate of ``|A_i v|`` snapped to the induced spectrum.

    ``raw`` averages the last ``window`` increments and must agree to
    ``snap_tol`` with the mean increment over the second half of the path.
    ``average`` is ``f_N / N``, reported for reference.

    Plain forward iteration only resolves the dominant weight: rounding
    seeds components in faster weight spaces which then take over within
    roughly ``37 / gap`` steps. When one-parameter data ``data`` is given,
    the level of ``v`` is read from ``C0 v`` and faster directions
    ``g_i U_{<s}`` are projected out each step; the increments must then
    reproduce that level.
    """
    desc = RepDescriptor.parse(desc)
    wd = induced_weights(gauge.lam, desc)
    if data is None:
        incr, log0 = log_increments(path, v, desc)
        return _weight_from_increments(incr, log0, wd, snap_tol, window)
    level, _ = weight_level(data, v, desc, gauge, member_tol)
    incr, log0 = log_increments(path, v, desc, _deflator(gauge, wd, level, desc))
    w = _weight_from_increments(incr, log0, wd, snap_tol, window)
    expected = float(wd.weights[level])
    if w.snapped != expected:
        raise NonConvergent(f"deflated growth {w.raw:.6g} does not match filtration level "
                            f"{expected:.6g}", raw=w.raw, expected=expected)
    return w


def grassmann_increments(path, W):
    """Increments of ``log |A_i w_1 ^ ... ^ A_i w_p|`` tracked by QR."""
    path = _as_unit_path(path)
    W = np.asarray(W, dtype=complex)
    if W.ndim == 1:
        W = W[:, None]
    X, R = np.linalg.qr(W)
    diag = np.abs(np.diag(R))
    if np.any(diag <= 1e-10 * max(diag.max(), 1e-300)):
        raise ZeroVector("subspace spanning set is degenerate")
    log0 = float(np.sum(np.log(diag)))
    steps = path.steps()
    out = np.empty(len(steps))
    for i, B in enumerate(steps):
        X, R = np.linalg.qr(B @ X)
        out[i] = np.sum(np.log(np.abs(np.diag(R))))
    return out, log0


def weight_grassmann(path, gauge, W, snap_tol=None, window=10, data=None):
    """Weight of the subspace spanned by the columns of ``W`` (via its wedge).

    Without ``data`` the wedge is tracked by QR, which (like forward
    iteration of vectors) resolves the dominant weight only; with
    one-parameter data the Plücker vector is analyzed in the exterior power
    with deflation, as in :func:`weight`.
    """
    W = np.asarray(W, dtype=complex)
    p = 1 if W.ndim == 1 else W.shape[1]
    if data is not None:
        return weight(path, gauge, plucker(W).coordinates, RepDescriptor("ext", p),
                      snap_tol, window, data)
    incr, log0 = grassmann_increments(path, W)
    wd = induced_weights(gauge.lam, RepDescriptor("ext", p))
    return _weight_from_increments(incr, log0, wd, snap_tol, window)


def threshold_violations(increments, mu):
    """Indices j violating: once an increment reaches ``mu``, later ones exceed it."""
    incr = np.asarray(increments)
    hits = np.nonzero(incr >= mu)[0]
    if len(hits) == 0:
        return []
    first = hits[0]
    return [int(j) for j in range(first + 1, len(incr)) if incr[j] <= mu]


def _pullback_flag(Binv, alpha, frame):
    """``A_alpha^{-1} frame`` with column-nested QR at every step."""
    X = frame
    for i in range(alpha - 1, -1, -1):
        X, _ = np.linalg.qr(Binv[i] @ X)
    return X


def filtration(path, gauge, filt_tol=1e-4, n_checks=3):
    """Subspaces ``V_s`` of vectors with weight at most ``jumps[s]``.

    ``V_s`` is the pullback ``A_a^{-1} g_a (U_s + ... + U_r)`` at several tail
    indices ``a``; successive pullbacks must agree to ``filt_tol`` in
    principal angle.
    """
    path = _as_unit_path(path)
    Binv = np.linalg.inv(path.steps())
    N = len(Binv)
    lam = gauge.lam
    r = len(lam.spectrum)
    mults = lam.multiplicities
    q = [sum(mults[s:]) for s in range(r)]
    alphas = sorted(set(int(a) for a in np.linspace(gauge.tail_start, N, n_checks)))
    offsets = np.concatenate([[0], np.cumsum(mults)])
    results, drift = [], []
    for a in alphas:
        F = gauge.block_frame(a)
        # slowest block first so leading columns span U_s + ... + U_r
        cols = np.concatenate([np.arange(offsets[s], offsets[s + 1]) for s in range(r - 1, -1, -1)])
        X = _pullback_flag(Binv, a, F[:, cols])
        spaces = [X[:, :q[s]] for s in range(r)]
        if results:
            drift.append(max(float(np.max(principal_angles(S, T), initial=0.0))
                             for S, T in zip(results[-1], spaces)))
        results.append(spaces)
    worst = max(drift, default=0.0)
    if worst > filt_tol:
        raise NotStabilized(f"pullbacks rotate by {worst:.3e} > {filt_tol:.1e}",
                            drift=drift)
    return WeightFiltration(jumps=lam.spectrum.copy(), subspaces=results[-1], dims=q,
                            diagnostics={"pullback_indices": alphas, "drift": drift})


def _intersection(X, Y, tol=1e-6):
    """Orthonormal basis of span(X) ∩ span(Y)."""
    Qx, Qy = orth(X), orth(Y)
    M = Qx - Qy @ (Qy.conj().T @ Qx)
    _, s, Vh = np.linalg.svd(M, full_matrices=True)
    s = np.concatenate([s, np.zeros(Qx.shape[1] - len(s))])
    null = Vh.conj().T[:, s < tol]
    return orth(Qx @ null), s


def splitting(path, gauge, filt, method="orthogonal", alpha=None):
    """Complements ``W_s`` with ``V_s = W_s + V_{s+1}``.

    ``W_s = R_s ∩ V_s`` where ``R_s`` is a complement of ``V_{s+1}`` whose
    forward images converge to ``U_1 + ... + U_s``. With
    ``method="orthogonal"`` ``R_s`` is the orthogonal complement of
    ``V_{s+1}``; ``method="pullback"`` uses ``A_a^{-1} g_a (U_1 + ... + U_s)``
    at ``a = alpha`` (defaults to the tail start), which is only numerically
    meaningful while ``A_a`` stays well conditioned.
    """
    path = _as_unit_path(path)
    lam = gauge.lam
    r = len(filt.jumps)
    d = path.dim
    mults = lam.multiplicities
    V = list(filt.subspaces) + [np.zeros((d, 0), dtype=complex)]
    if method == "orthogonal":
        R = [orth(np.eye(d) - V[s + 1] @ V[s + 1].conj().T) if V[s + 1].shape[1] else np.eye(d, dtype=complex)
             for s in range(r)]
    elif method == "pullback":
        a = gauge.tail_start if alpha is None else int(alpha)
        Binv = np.linalg.inv(path.steps())
        F = gauge.block_frame(a)
        X = _pullback_flag(Binv, a, F)
        p = np.cumsum(mults)
        R = [X[:, :p[s]] for s in range(r)]
    else:
        raise ValueError(f"unknown splitting method {method!r}")
    W = []
    for s in range(r):
        Ws, _ = _intersection(R[s], V[s])
        if Ws.shape[1] != mults[s]:
            raise IntersectionDefect(f"dim(R_{s+1} ∩ V_{s+1}) = {Ws.shape[1]}, expected {mults[s]}")
        sv = np.linalg.svd(np.hstack([Ws, V[s + 1]]), compute_uv=False)
        if sv[-1] <= 1e-6:
            raise IntersectionDefect(f"W_{s+1} meets V_{s+2} (sigma_min {sv[-1]:.2e})")
        W.append(Ws)
    return WeightFiltration(jumps=filt.jumps, subspaces=filt.subspaces, dims=filt.dims,
                            splitting=W, diagnostics=dict(filt.diagnostics, split_method=method))


def one_param(filt, gauge, check_times=(1.0, 2.0, 5.0), tol=1e-8):
    """One-parameter subgroup acting by ``jumps[s]`` on the splitting.

    ``C0`` maps each ``W_s`` isometrically onto ``U_s``, choosing the isometry
    closest to orthogonal projection (unitary polar factor).
    """
    if filt.splitting is None:
        raise ValueError("filtration has no splitting; call splitting() first")
    lam = gauge.lam
    M_cols, N_cols = [], []
    for s, Ws in enumerate(filt.splitting):
        Us = lam.eigenspaces[s]
        T = Us.conj().T @ Ws
        X, sv, Yh = np.linalg.svd(T)
        Y = X @ Yh if sv[-1] > 1e-12 else np.eye(T.shape[0])
        M_cols.append(Ws)
        N_cols.append(Us @ Y)
    M, Nm = np.hstack(M_cols), np.hstack(N_cols)
    Minv = np.linalg.inv(M)
    C0 = Nm @ Minv
    xi = (M * np.repeat(filt.jumps, lam.multiplicities)) @ Minv
    data = OneParamData(xi, C0, filt.jumps.copy(), filt)
    C0inv = np.linalg.inv(C0)
    for t in check_times:
        lhs = data.lambda_t(t)
        rhs = C0inv @ lam.exp(t) @ C0
        err = np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1.0)
        if err > tol:
            raise IntersectionDefect(f"exp(t xi) and C0^-1 e^(tL) C0 differ by {err:.2e} at t={t}")
    return data


def _xi_flag(data):
    """``V_s`` recovered from ``xi``: span of eigenvectors with eigenvalue <= jump s."""
    W = data.filtration.splitting
    return [np.hstack(W[s:]) for s in range(len(W))]


def equal_filtration(a, b, tol=1e-6):
    """True when two one-parameter data define the same filtration."""
    if len(a.jumps) != len(b.jumps) or np.max(np.abs(a.jumps - b.jumps)) > tol:
        return False
    ev_a = np.sort(np.linalg.eigvals(a.xi).real)
    ev_b = np.sort(np.linalg.eigvals(b.xi).real)
    if np.max(np.abs(ev_a - ev_b)) > tol:
        return False
    for X, Y in zip(_xi_flag(a), _xi_flag(b)):
        if X.shape[1] != Y.shape[1] or np.max(principal_angles(X, Y), initial=0.0) > tol:
            return False
    return True


BarLimit = namedtuple("BarLimit", ["point", "weight", "index"])


def bar_limit(data, v, desc=STD, gauge=None, rel_tol=1e-9):
    """Limit of ``C0 lambda(t) [v]``: top nonzero weight component of ``C0 v``."""
    v = np.asarray(v, dtype=complex)
    if np.linalg.norm(v) == 0:
        raise ZeroVector("bar limit of the zero vector")
    desc = RepDescriptor.parse(desc)
    lam = gauge.lam if gauge is not None else _generator_from(data)
    x = induce(desc, data.C0) @ v
    wd = induced_weights(lam, desc)
    comps = wd.components(x)
    nz = np.nonzero(comps > rel_tol * np.linalg.norm(x))[0]
    j = int(nz[0])
    U = wd.subspaces[j]
    p = U @ (U.conj().T @ x)
    return BarLimit(p / np.linalg.norm(p), float(wd.weights[j]), j)


def _generator_from(data):
    raise ValueError("bar_limit needs the gauge estimate for the generator")


def limit_set(path, gauge, v, desc=STD, schedule=(1,), tol=1e-3, snap_tol=None):
    """Sample the gauged orbit ``[g_i^{-1} A_i v]`` over the tail.

    Points along each stride are greedily clustered at Fubini-Study radius
    ``tol``. ``max_gap`` (largest jump between consecutive samples) is a
    connectedness diagnostic only.
    """
    path = _as_unit_path(path)
    desc = RepDescriptor.parse(desc)
    w = weight(path, gauge, v, desc, snap_tol=snap_tol)
    wd = induced_weights(gauge.lam, desc)
    U = wd.subspaces[wd.index_of(w.snapped, 1e-9 * max(1.0, abs(w.snapped)))]
    steps = _rep_steps(path, desc)
    x = np.asarray(v, dtype=complex)
    x = x / np.linalg.norm(x)
    samples = {}
    for i, B in enumerate(steps, start=1):
        x = B @ x
        x = x / np.linalg.norm(x)
        if i >= gauge.tail_start:
            ginv = gauge.gauges[i].conj().T
            samples[i] = (ginv if desc == STD else induce(desc, ginv)) @ x
    N = len(steps)
    reps, seq, gaps = [], [], []
    for stride in schedule:
        idx = list(range(gauge.tail_start, N + 1, int(stride)))
        prev = None
        for i in idx:
            y = samples[i]
            seq.append(y)
            if prev is not None:
                gaps.append(fs_distance(prev, y))
            prev = y
            if not any(fs_distance(y, r) < tol for r in reps):
                reps.append(y)
    pair = np.array([[fs_distance(a, b) for b in reps] for a in reps])
    angles = np.array([np.arccos(np.clip(np.linalg.norm(U.conj().T @ y) / np.linalg.norm(y), 0, 1))
                       for y in seq])
    return LimitSetSample(desc, reps, float(pair.max(initial=0.0)), pair,
                          float(max(gaps, default=0.0)), angles, w.snapped,
                          bool(np.all(angles < tol)))


def stabilizer_dim(w, lam, desc=STD, cutoff=1e-8):
    """Dimension of the stabilizer of ``[w]`` inside the centralizer of ``lam``.

    Counts centralizer elements ``xi`` with ``xi . w`` in ``C w`` via the rank
    of the assembled action matrix.
    """
    w = np.asarray(w, dtype=complex)
    nw = np.linalg.norm(w)
    if nw == 0:
        raise ZeroVector("stabilizer of the zero vector")
    w = w / nw
    desc = RepDescriptor.parse(desc)
    cols = []
    for Us in lam.eigenspaces:
        m = Us.shape[1]
        for a in range(m):
            for b in range(m):
                xi = np.outer(Us[:, a], Us[:, b].conj())
                y = induce_lie(desc, xi) @ w
                cols.append(y - w * np.vdot(w, y))
    C = np.array(cols).T
    s = np.linalg.svd(C, compute_uv=False)
    border = s[(s > 1e-10) & (s < 1e-6)]
    if len(border):
        raise RankBorderline(f"singular value {border[0]:.2e} too close to the cutoff")
    return int(C.shape[1] - np.sum(s > cutoff))


class PathAnalyzer(BaseEstimator):
    """Estimator wrapping the full analysis of a self-similar operator path.

    ``fit(path)`` estimates the generator, filtration, splitting and
    one-parameter subgroup; ``transform(X)`` maps vectors of the chosen
    representation (rows) to their snapped weights.
    """

    def __init__(self, tail_fraction=0.25, star_tol=1e-3, snap_tol=None, filt_tol=1e-4,
                 lambda_zero_tol=1e-3, rep="std", split_method="orthogonal"):
        self.tail_fraction = tail_fraction
        self.star_tol = star_tol
        self.snap_tol = snap_tol
        self.filt_tol = filt_tol
        self.lambda_zero_tol = lambda_zero_tol
        self.rep = rep
        self.split_method = split_method

    def fit(self, path, y=None):
        self.path_ = _as_unit_path(path)
        self.gauge_ = estimate_gauge(self.path_, self.tail_fraction, self.star_tol,
                                     self.lambda_zero_tol)
        filt = filtration(self.path_, self.gauge_, self.filt_tol)
        self.filtration_ = splitting(self.path_, self.gauge_, filt, self.split_method)
        self.one_param_ = one_param(self.filtration_, self.gauge_)
        self.case_ = "II" if self.gauge_.case_II else "I"
        return self

    def _vectors(self, X):
        X = np.asarray(X, dtype=complex)
        return X[None, :] if X.ndim == 1 else X

    def weights(self, X):
        """Full :class:`Weight` records for the rows of ``X``."""
        check_is_fitted(self, "gauge_")
        return [weight(self.path_, self.gauge_, x, self.rep, self.snap_tol, data=self.one_param_)
                for x in self._vectors(X)]

    def transform(self, X):
        return np.array([w.snapped for w in self.weights(X)])

    def fit_transform(self, path, X):
        return self.fit(path).transform(X)

    def report(self, X=None):
        check_is_fitted(self, "gauge_")
        g = self.gauge_
        out = {
            "lambda_spectrum": g.lam.spectrum.tolist(),
            "multiplicities": list(g.lam.multiplicities),
            "residuals": {"star": g.residual_star, "gauge": g.residual_gauge,
                          "tail_start": g.tail_start},
            "case": self.case_,
            "filtration": {"jumps": self.filtration_.jumps.tolist(),
                           "dims": list(self.filtration_.dims)},
            "weights": [],
        }
        if X is not None:
            for j, w in enumerate(self.weights(X)):
                out["weights"].append({"vector_id": j, "raw": w.raw, "snapped": w.snapped})
        return out
