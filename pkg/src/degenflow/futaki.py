"""Futaki-type limits of torus weight tables and the soliton vector.

Weights on ``R_k`` are vectors ``w`` of the torus Lie algebra dual. For a
probe ``V`` they enter through ``exp(<w, V> / k)``, i.e. ``V`` acts on
``R_k`` after rescaling by the degree, so every quantity below converges as
``k`` grows once divided by the right power of ``k``. Limits are taken by
fitting polynomials in ``1/k`` on the upper half of the available degrees.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import (ConfigInvalid, DegreeOverflow, NoConvergence,
                     NonConvexHessian, NotFullDimensional,
                     UnstableExtrapolation)

__all__ = [
    "PolytopeData", "TorusWeightTable", "lattice_points",
    "weights_from_polytope", "ehrhart_coefficients", "trace_exp",
    "moment_sums", "Extrapolation", "extrapolate", "futaki_limit",
    "proxy_F", "gradient_hessian", "soliton_vector", "df_and_n2",
    "SolitonSolver",
]


@dataclass(frozen=True)
class PolytopeData:
    """Lattice polytope given by (rational) vertices."""

    vertices: tuple
    kmax: int = 30

    def __post_init__(self):
        verts = tuple(tuple(Fraction(x) for x in v) for v in self.vertices)
        if not verts or len({len(v) for v in verts}) != 1:
            raise ConfigInvalid("vertices must be nonempty and of equal dimension")
        object.__setattr__(self, "vertices", verts)
        if self.kmax < 1:
            raise ConfigInvalid("kmax must be positive")

    @property
    def dim(self):
        return len(self.vertices[0])

    def as_array(self):
        return np.array([[float(x) for x in v] for v in self.vertices])


@dataclass
class TorusWeightTable:
    """Weight vectors of ``R_k`` for ``k = 1..kmax``.

    ``degrees[k]`` is an integer (or float) array of shape ``(N(k), rank)``.
    """

    n: int
    rank: int
    degrees: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        degs = {}
        for k, w in self.degrees.items():
            w = np.asarray(w)
            if w.ndim == 1:
                w = w.reshape(-1, self.rank)
            if w.shape[1] != self.rank:
                raise ConfigInvalid(f"degree {k}: weight vectors must have length {self.rank}")
            degs[int(k)] = w
        self.degrees = dict(sorted(degs.items()))

    @property
    def kmax(self):
        return max(self.degrees)

    def counts(self):
        return {k: len(w) for k, w in self.degrees.items()}

    def truncated(self, kmax):
        return TorusWeightTable(self.n, self.rank, {k: w for k, w in self.degrees.items() if k <= kmax},
                                dict(self.meta))

    def shifted(self, c):
        """Every weight vector gains an extra coordinate equal to ``c``."""
        return TorusWeightTable(self.n, self.rank + 1,
                                {k: np.hstack([w, np.full((len(w), 1), c, dtype=w.dtype)])
                                 for k, w in self.degrees.items()}, dict(self.meta))

    def _get(self, k):
        if k not in self.degrees:
            raise DegreeOverflow(f"degree {k} not in table (kmax = {self.kmax})")
        return self.degrees[k]


def lattice_points(P, k=1, tol=1e-9):
    """Integer points of ``k P`` in lexicographic order."""
    V = P.as_array() * k
    n = V.shape[1]
    lo = np.floor(V.min(axis=0) + tol).astype(int)
    hi = np.ceil(V.max(axis=0) - tol).astype(int)
    if n == 1:
        a, b = V.min(), V.max()
        if b - a <= tol:
            raise NotFullDimensional("degenerate interval")
        pts = np.arange(int(math.ceil(a - tol)), int(math.floor(b + tol)) + 1)
        return pts.reshape(-1, 1)
    try:
        hull = ConvexHull(V)
    except QhullError as exc:
        raise NotFullDimensional("polytope is not full-dimensional") from exc
    A, b = hull.equations[:, :-1], hull.equations[:, -1]
    axes = [np.arange(l, h + 1) for l, h in zip(lo, hi)]
    grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(n, -1).T
    inside = np.all(grid @ A.T + b <= tol * max(1.0, k), axis=1)
    return grid[inside]


def ehrhart_coefficients(counts, n):
    """Exact interpolating polynomial of degree ``n`` through ``N(k)``.

    Returns Fraction coefficients (constant term first) and whether every
    count is reproduced.
    """
    ks = sorted(counts)
    if len(ks) < n + 1:
        raise ConfigInvalid(f"need at least {n + 1} degrees for an Ehrhart fit")
    base = ks[:n + 1]
    coeffs = [Fraction(0)] * (n + 1)
    for i, ki in enumerate(base):
        # Lagrange basis polynomial for node ki
        poly = [Fraction(1)]
        denom = Fraction(1)
        for j, kj in enumerate(base):
            if j == i:
                continue
            poly = [Fraction(0)] + poly
            for t in range(len(poly) - 1):
                poly[t] -= kj * poly[t + 1]
            denom *= ki - kj
        for t in range(n + 1):
            coeffs[t] += Fraction(counts[ki]) * poly[t] / denom
    ok = all(sum(c * k ** t for t, c in enumerate(coeffs)) == counts[k] for k in ks)
    return coeffs, ok


def weights_from_polytope(P, kmax=None):
    """Weight table whose degree-``k`` weights are the lattice points of ``k P``."""
    kmax = P.kmax if kmax is None else kmax
    degrees = {k: lattice_points(P, k) for k in range(1, kmax + 1)}
    table = TorusWeightTable(P.dim, P.dim, degrees, {"source": "polytope"})
    if kmax >= P.dim + 1:
        coeffs, ok = ehrhart_coefficients(table.counts(), P.dim)
        table.meta["ehrhart"] = [str(c) for c in coeffs]
        table.meta["ehrhart_exact"] = ok
    return table


def trace_exp(table, V, k):
    """``sum_w exp(<w, V> / k)`` over the degree-``k`` weights (correctly rounded sum)."""
    W = table._get(k)
    V = np.asarray(V, dtype=float)
    return math.fsum(np.exp(W @ V / k))


def moment_sums(table, V, k, order=2):
    """Exact derivatives of ``trace_exp`` in ``V``: zeroth, first and second moments.

    Returns ``(S0, S1, S2)`` with ``S1[i] = sum w_i e`` and
    ``S2[i, j] = sum w_i w_j e`` where ``e = exp(<w, V> / k)``.
    """
    W = np.asarray(table._get(k), dtype=float)
    V = np.asarray(V, dtype=float)
    e = np.exp(W @ V / k)
    S0 = math.fsum(e)
    S1 = np.array([math.fsum(W[:, i] * e) for i in range(W.shape[1])])
    if order < 2:
        return S0, S1, None
    r = W.shape[1]
    S2 = np.empty((r, r))
    for i in range(r):
        for j in range(i, r):
            S2[i, j] = S2[j, i] = math.fsum(W[:, i] * W[:, j] * e)
    return S0, S1, S2


@dataclass
class Extrapolation:
    value: float
    ks: list
    samples: list
    coefficients: list
    residual: float
    shifted_value: float
    stable: bool


def extrapolate(ks, values, degree, tol=1e-3, scale=None):
    """Limit of ``values`` as ``k -> inf`` by a degree-``degree`` polynomial fit in ``1/k``.

    The fit is repeated with the window shifted down by one degree; a
    relative change above ``tol`` (against ``max(|value|, scale)``) marks
    the result unstable.
    """
    ks = np.asarray(ks, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(ks) < degree + 2:
        raise UnstableExtrapolation(f"need at least {degree + 2} degrees, have {len(ks)}")
    kref = ks.max()

    def fit(sl_k, sl_y):
        x = kref / sl_k
        c = np.polynomial.polynomial.polyfit(x, sl_y, degree)
        res = float(np.max(np.abs(np.polynomial.polynomial.polyval(x, c) - sl_y), initial=0.0))
        return c, res

    c, res = fit(ks[1:], y[1:])
    c_shift, _ = fit(ks[:-1], y[:-1])
    value, shifted = float(c[0]), float(c_shift[0])
    ref = max(abs(value), scale if scale is not None else 0.0)
    stable = abs(value - shifted) <= tol * ref if ref > 0 else abs(value - shifted) == 0
    return Extrapolation(value, ks[1:].tolist(), y[1:].tolist(),
                         [float(t) * kref ** -i for i, t in enumerate(c)], res, shifted, bool(stable))


def _window(table, kmin=None):
    kmax = table.kmax
    lo = max(kmax // 2, 1) if kmin is None else kmin
    ks = [k for k in range(lo - 1, kmax + 1) if k in table.degrees and k >= 1]
    return ks


def _default_degree(table, degree, target):
    """Fit degree: ``target`` unless the window is too short for it."""
    if degree is not None:
        return degree
    return max(min(target, len(_window(table)) - 2), table.n + 1)


def _volume_scale(table):
    kmax = table.kmax
    return len(table.degrees[kmax]) / kmax ** table.n


def futaki_limit(table, V, Vprime, degree=None, kmin=None, tol=1e-3, raise_unstable=True):
    """``-lim k^{-n-1} sum_w <w, V'> exp(<w, V>/k)`` with fit diagnostics.

    Raises
    ------
    UnstableExtrapolation
        The limit moves by more than ``tol`` (relative) when the fit window
        shifts by one degree.
    """
    n = table.n
    if table.kmax < n + 3:
        raise DegreeOverflow(f"kmax must be at least n + 3 = {n + 3}")
    # the sums are polynomial in k only at V = 0; two extra orders absorb the
    # 1/k corrections of the exponential weighting
    degree = _default_degree(table, degree, n + 3)
    Vp = np.asarray(Vprime, dtype=float)
    ks = _window(table, kmin)
    vals = []
    for k in ks:
        _, S1, _ = moment_sums(table, V, k, order=1)
        vals.append(float(S1 @ Vp) / k ** (n + 1))
    scale = 1e-6 * _volume_scale(table) * max(np.linalg.norm(Vp), 1e-300)
    ex = extrapolate(ks, vals, degree, tol, scale)
    ex.value, ex.shifted_value = -ex.value, -ex.shifted_value
    if raise_unstable and not ex.stable:
        raise UnstableExtrapolation(f"limit moved from {ex.shifted_value:.6g} to {ex.value:.6g}",
                                    value=ex.value, shifted=ex.shifted_value)
    return ex


def _limits(table, V, degree, kmin=None):
    """Extrapolated proxy value, gradient and Hessian of ``F`` at ``V``."""
    n = table.n
    ks = _window(table, kmin)
    f0, f1, f2 = [], [], []
    for k in ks:
        S0, S1, S2 = moment_sums(table, V, k)
        f0.append(S0 / k ** n)
        f1.append(S1 / k ** (n + 1))
        f2.append(S2 / k ** (n + 2))
    f1, f2 = np.array(f1), np.array(f2)
    r = table.rank
    F = extrapolate(ks, f0, degree).value
    g = np.array([extrapolate(ks, f1[:, i], degree).value for i in range(r)])
    H = np.empty((r, r))
    for i in range(r):
        for j in range(i, r):
            H[i, j] = H[j, i] = extrapolate(ks, f2[:, i, j], degree).value
    return F, g, H


def proxy_F(table, V, degree=None):
    """Extrapolated ``lim k^{-n} trace_exp(V, k)``: the convex potential whose
    gradient is minus the modified Futaki invariant."""
    return _limits(table, V, _default_degree(table, degree, table.n + 3))[0]


def gradient_hessian(table, V, degree=None):
    return _limits(table, V, _default_degree(table, degree, table.n + 3))[1:]


@dataclass
class SolitonResult:
    vector: np.ndarray
    residual: float
    iterations: int
    history: list


def soliton_vector(table, V0=None, tol=1e-8, max_iter=100, degree=None):
    """Zero of the modified Futaki invariant by damped Newton on the convex proxy.

    Each step checks that the Hessian is positive definite and backtracks
    until the proxy value decreases.
    """
    if table.kmax < table.n + 3:
        raise DegreeOverflow(f"kmax must be at least n + 3 = {table.n + 3}")
    degree = _default_degree(table, degree, table.n + 3)
    V = np.zeros(table.rank) if V0 is None else np.asarray(V0, dtype=float).copy()
    F, g, H = _limits(table, V, degree)
    history = []
    for it in range(max_iter + 1):
        res = float(np.max(np.abs(g)))
        history.append({"V": V.tolist(), "F": F, "residual": res})
        if res < tol:
            return SolitonResult(V, res, it, history)
        if it == max_iter:
            break
        try:
            L = np.linalg.cholesky(H)
        except np.linalg.LinAlgError as exc:
            raise NonConvexHessian("proxy Hessian is not positive definite; increase kmax",
                                   V=V.tolist()) from exc
        step = -np.linalg.solve(L.T, np.linalg.solve(L, g))
        t = 1.0
        while True:
            Vn = V + t * step
            Fn, gn, Hn = _limits(table, Vn, degree)
            if Fn <= F or t < 1e-8:
                break
            t *= 0.5
        if Fn > F and float(np.max(np.abs(gn))) >= res:
            raise NoConvergence("line search failed to decrease the proxy", V=V.tolist())
        V, F, g, H = Vn, Fn, gn, Hn
    raise NoConvergence(f"no convergence after {max_iter} Newton steps", residual=res)


def df_and_n2(table, generator, degree=None, tol=1e-3):
    """Futaki number, centered second-moment norm and their ratio.

    ``A_k`` is the action of ``generator`` on ``R_k``:
    ``N2^2 = lim k^{-n-2} (Tr A_k^2 - (Tr A_k)^2 / N(k))``.
    """
    n = table.n
    gen = np.asarray(generator, dtype=float)
    fut = futaki_limit(table, np.zeros(table.rank), gen, degree, tol=tol)
    ks = _window(table)
    # N Tr A^2 - (Tr A)^2 and N are polynomial in k, so each is fitted
    # separately instead of their ratio
    num, den = [], []
    for k in ks:
        a = np.asarray(table.degrees[k], dtype=float) @ gen
        tr, tr2 = math.fsum(a), math.fsum(a * a)
        num.append((len(a) * tr2 - tr * tr) / k ** (2 * n + 2))
        den.append(len(a) / k ** n)
    vol = _volume_scale(table)
    scale = 1e-6 * vol * vol * max(np.dot(gen, gen), 1e-300)
    ex = extrapolate(ks, num, _default_degree(table, degree, 2 * n + 2), tol, scale)
    if not ex.stable:
        raise UnstableExtrapolation("second-moment limit is unstable", value=ex.value)
    vol_ex = extrapolate(ks, den, _default_degree(table, degree, n), tol)
    ex.value /= vol_ex.value
    ex.shifted_value /= vol_ex.shifted_value
    n2sq = max(ex.value, 0.0)
    n2 = math.sqrt(n2sq)
    ratio = fut.value / n2 if n2 > 1e-12 else None
    return {"fut": fut.value, "n2": n2, "n2_squared": ex.value, "ratio": ratio,
            "fut_extrapolation": fut, "n2_extrapolation": ex,
            "n2_definition": "centered second moment of generator weights"}


class SolitonSolver(BaseEstimator):
    """Estimator wrapper for the soliton vector of a weight table.

    ``fit(table)`` solves for the soliton vector; ``transform(V')`` returns the
    modified Futaki invariants ``Fut_{V*}(V')`` of probe rows.
    """

    def __init__(self, tol=1e-8, max_iter=100, degree=None):
        self.tol = tol
        self.max_iter = max_iter
        self.degree = degree

    def fit(self, table, y=None):
        self.table_ = table
        res = soliton_vector(table, tol=self.tol, max_iter=self.max_iter, degree=self.degree)
        self.vector_ = res.vector
        self.residual_ = res.residual
        self.n_iter_ = res.iterations
        self.history_ = res.history
        return self

    def transform(self, X):
        check_is_fitted(self, "vector_")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([futaki_limit(self.table_, self.vector_, x, self.degree).value for x in X])


def grid_directions(rank):
    """Coordinate directions, used as default probes."""
    return [tuple(int(i == j) for j in range(rank)) for i in range(rank)]

