"""Weight filtrations on truncated graded rings ``Sym(R_1) / I``.

Polynomials are dicts mapping exponent tuples to coefficients. Degree-``k``
pieces are handled as coefficient vectors over the monomial basis returned by
:func:`monomials`, which matches the ordering used by ``induce("sym:k", .)``.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.linalg import qr, solve_triangular
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import (ConfigInvalid, DegreeOverflow, IrrationalFiltration,
                     SingularGram, TieDetected, ZeroVector)
from .linalg import HermitianForm, principal_angles
from .reps import RepDescriptor, _sym_exponents, _sym_factorials, induce

__all__ = [
    "monomials", "GradedRing", "rational_normal_curve", "quotient_norm",
    "quotient_norm_of", "reduced_echelon", "sym_gram", "sym_factor", "minimal_representative", "WeightEchelon", "weight_echelon",
    "section_weight", "RingFiltrationData", "ring_filtration",
    "InitialIdealData", "initial_ideal", "ReesData", "regrade",
    "perturb_rational", "h2_check", "RingDegeneration",
]

WEIGHT_TOL = 1e-9
RANK_TOL = 1e-9
MAX_DENOMINATOR = 10 ** 6


@lru_cache(maxsize=128)
def monomials(n, k):
    """Exponent tuples of degree ``k`` in ``n`` variables."""
    if k == 0:
        return ((0,) * n,)
    return tuple(tuple(int(e) for e in row) for row in _sym_exponents(n, k))


@lru_cache(maxsize=128)
def _monomial_index(n, k):
    return {a: i for i, a in enumerate(monomials(n, k))}


def _poly_degree(p):
    degs = {sum(a) for a in p}
    if len(degs) != 1:
        raise ConfigInvalid("polynomial is not homogeneous")
    return degs.pop()


def _poly_vector(p, n, k):
    idx = _monomial_index(n, k)
    v = np.zeros(len(idx), dtype=complex)
    for a, c in p.items():
        v[idx[tuple(a)]] += c
    return v


@dataclass(frozen=True)
class GradedRing:
    """Presentation ``C[x_1..x_m] / (generators)`` truncated at degree ``K``."""

    num_vars: int
    generators: tuple
    K: int = 6
    hilbert: tuple = None

    def __post_init__(self):
        gens = tuple({tuple(int(e) for e in a): complex(c) for a, c in g.items() if c != 0}
                     for g in self.generators)
        for g in gens:
            if not g:
                raise ConfigInvalid("zero generator")
            if any(len(a) != self.num_vars or min(a) < 0 for a in g):
                raise ConfigInvalid("exponent vector has the wrong length or a negative entry")
            _poly_degree(g)
        object.__setattr__(self, "generators", gens)
        if self.K < 0:
            raise ConfigInvalid("truncation degree must be nonnegative")

    def _check_degree(self, k):
        if k > self.K:
            raise DegreeOverflow(f"degree {k} exceeds truncation {self.K}")

    def sym_dim(self, k):
        return math.comb(self.num_vars + k - 1, k)

    def ideal_matrix(self, k):
        """Rows spanning ``I_k`` (products of monomials with generators)."""
        self._check_degree(k)
        n = self.num_vars
        rows = []
        for g in self.generators:
            dg = _poly_degree(g)
            if dg > k:
                continue
            for m in monomials(n, k - dg):
                rows.append(_poly_vector({tuple(np.add(a, m)): c for a, c in g.items()}, n, k))
        if not rows:
            return np.zeros((0, self.sym_dim(k)), dtype=complex)
        return np.array(rows)

    def ideal_basis(self, k):
        """Orthonormal rows spanning ``I_k``."""
        M = self.ideal_matrix(k)
        if M.shape[0] == 0:
            return M
        _, s, Vh = np.linalg.svd(M, full_matrices=False)
        rank = int(np.sum(s > RANK_TOL * max(s[0], 1.0)))
        return Vh[:rank]

    def dim(self, k):
        """``dim R_k``; checked against the declared Hilbert function."""
        d = self.sym_dim(k) - self.ideal_basis(k).shape[0]
        if self.hilbert is not None and k < len(self.hilbert) and self.hilbert[k] != d:
            raise ConfigInvalid(f"dim R_{k} = {d} disagrees with declared Hilbert value "
                                f"{self.hilbert[k]}")
        return d


def rational_normal_curve(n, K=6):
    """Ideal of the degree-``n`` rational normal curve (2x2 minors)."""
    gens = []
    for i in range(n):
        for j in range(i + 1, n):
            def e(*idx):
                a = [0] * (n + 1)
                for t in idx:
                    a[t] += 1
                return tuple(a)
            p = {}
            for mono, c in ((e(i, j + 1), 1.0), (e(i + 1, j), -1.0)):
                p[mono] = p.get(mono, 0) + c
            p = {a: c for a, c in p.items() if c != 0}
            if p:
                gens.append(p)
    return GradedRing(n + 1, tuple(gens), K)


def sym_gram(G, k):
    """Gram matrix on degree-``k`` monomials induced by a Gram ``G`` on the
    variables: monomial ``x^a`` has norm ``sqrt(a!/k!)`` when ``G = I``."""
    G = np.asarray(G, dtype=complex)
    n = G.shape[0]
    if k == 0:
        return np.ones((1, 1), dtype=complex)
    c = np.sqrt(_sym_factorials(n, k) / math.factorial(k))
    S = induce(RepDescriptor("sym", k), G)
    S = c[:, None] * S * c[None, :]
    return 0.5 * (S + S.conj().T)


def _complement(I_rows, n_cols):
    """Columns spanning a coordinate complement of the row space of ``I_rows``."""
    if I_rows.shape[0] == 0:
        return np.eye(n_cols, dtype=complex)
    from scipy.linalg import qr
    _, _, piv = qr(I_rows, pivoting=True, mode="economic")
    rest = np.sort(piv[I_rows.shape[0]:])
    return np.eye(n_cols, dtype=complex)[:, rest]


def quotient_norm(H, I_rows, complement=None):
    """Quotient metric on ``Sym / I`` as the Schur complement of the ``I`` block.

    Parameters
    ----------
    H : array_like or HermitianForm
        Gram matrix on the ambient space.
    I_rows : ndarray
        Rows spanning the subspace ``I`` (coefficient vectors).
    complement : ndarray, optional
        Columns whose classes form the basis of the quotient; defaults to
        coordinate vectors complementary to ``I``.

    Returns
    -------
    form : HermitianForm
        Quotient Gram on the classes of ``complement``.
    complement : ndarray
    """
    G = H.gram if isinstance(H, HermitianForm) else np.asarray(H, dtype=complex)
    I_rows = np.asarray(I_rows, dtype=complex).reshape(-1, G.shape[0])
    if complement is None:
        complement = _complement(I_rows, G.shape[0])
    K = np.asarray(complement, dtype=complex)
    J = I_rows.T
    A = K.conj().T @ G @ K
    if J.shape[1] == 0:
        return HermitianForm(A), K
    B = K.conj().T @ G @ J
    C = J.conj().T @ G @ J
    try:
        L = np.linalg.cholesky(0.5 * (C + C.conj().T))
    except np.linalg.LinAlgError as exc:
        raise SingularGram("Gram restricted to the ideal is not positive definite") from exc
    X = np.linalg.solve(L, B.conj().T)
    S = A - X.conj().T @ X
    try:
        return HermitianForm(0.5 * (S + S.conj().T)), K
    except Exception as exc:
        raise SingularGram("quotient Gram is not positive definite") from exc


def reduced_echelon(rows, tol=1e-12):
    """Reduced row echelon form of ``rows`` with entries below ``tol`` (relative)
    set to zero.

    For ideals spanned by sparse generators this recovers the sparse exact
    basis from any numerically orthonormal one, which keeps components of
    different weight from mixing at rounding level.
    """
    M = np.array(rows, dtype=complex)
    if M.size == 0:
        return M
    scale = np.max(np.abs(M))
    r = 0
    for c in range(M.shape[1]):
        if r == M.shape[0]:
            break
        p = r + int(np.argmax(np.abs(M[r:, c])))
        if abs(M[p, c]) <= tol * scale:
            M[r:, c] = 0
            continue
        M[[r, p]] = M[[p, r]]
        M[r] /= M[r, c]
        others = np.arange(M.shape[0]) != r
        M[others] -= np.outer(M[others, c], M[r])
        M[np.abs(M) <= tol * scale] = 0
        r += 1
    return M[:r]


def quotient_norm_of(H, I_rows, f, factor=None):
    """``inf |f + g|`` over ``g`` in the span of ``I_rows``.

    With ``factor`` (a matrix ``F`` with ``|v| = |F v|``) the minimization is
    a least-squares problem on ``F`` applied to the reduced echelon basis of
    ``I_rows``, solved by Householder QR with rows sorted by size and column
    pivoting; this is accurate row by row even when the metric has a huge
    dynamic range. ``H`` is then ignored.
    """
    f = np.asarray(f, dtype=complex)
    J = np.asarray(I_rows, dtype=complex).reshape(-1, len(f))
    if factor is not None:
        F = np.asarray(factor, dtype=complex)
        y = F @ f
        J = reduced_echelon(J).T
        if J.shape[1] == 0:
            return float(np.linalg.norm(y))
        Y = F @ J
        order = np.argsort(-np.max(np.abs(np.column_stack([Y, y])), axis=1), kind="stable")
        Q, R, piv = qr(Y[order], mode="economic", pivoting=True)
        c = solve_triangular(R, Q.conj().T @ y[order])
        r = y - Y[:, piv] @ c
        return float(np.linalg.norm(r))
    J = J.T
    G = H.gram if isinstance(H, HermitianForm) else np.asarray(H, dtype=complex)
    if J.shape[1]:
        c = np.linalg.solve(J.conj().T @ G @ J, J.conj().T @ G @ f)
        f = f - J @ c
    return float(np.sqrt(max(np.real(np.vdot(f, G @ f)), 0.0)))


def sym_factor(A, k):
    """Factor ``F`` on degree-``k`` monomials with ``|f| = |F f|`` for the
    metric induced by ``G = A^* A`` on the variables."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    if k == 0:
        return np.ones((1, 1), dtype=complex)
    c = np.sqrt(_sym_factorials(n, k) / math.factorial(k))
    return induce(RepDescriptor("sym", k), A) * c[None, :]


def _levels(values, tol=WEIGHT_TOL):
    """Distinct values (descending) with tolerance and the level of each entry."""
    order = np.argsort(-values, kind="stable")
    levels, label = [], np.empty(len(values), dtype=int)
    for i in order:
        if levels and abs(levels[-1] - values[i]) <= tol:
            label[i] = len(levels) - 1
        else:
            levels.append(float(values[i]))
            label[i] = len(levels) - 1
    return np.array(levels), label


@dataclass
class WeightEchelon:
    """Weight-echelonized basis of ``I_k``.

    ``rows[l]`` are ideal elements whose top weight is ``levels[l]``;
    ``leads[l]`` are their restrictions to that level (the initial forms),
    with tied monomials kept together as one block.
    """

    k: int
    levels: np.ndarray
    label: np.ndarray
    monomial_weights: np.ndarray
    rows: list
    leads: list

    def initial_rows(self):
        """Rows spanning the initial space of ``I_k``."""
        n = len(self.label)
        out = []
        for l, L in enumerate(self.leads):
            cols = np.nonzero(self.label == l)[0]
            for r in L:
                v = np.zeros(n, dtype=complex)
                v[cols] = r
                out.append(v)
        return np.array(out) if out else np.zeros((0, n), dtype=complex)

    def graded_dims(self):
        """Dimension of ``R_k`` in each weight level."""
        return np.array([np.sum(self.label == l) - len(self.leads[l])
                         for l in range(len(self.levels))])


def _rank_split(B, tol):
    U, s, Vh = np.linalg.svd(B, full_matrices=True)
    scale = max(s[0] if len(s) else 0.0, 1.0)
    rank = int(np.sum(s > tol * scale))
    return U, rank


def weight_echelon(ring, weights, k, tol=RANK_TOL):
    """Echelonize ``I_k`` from the highest weight level down."""
    weights = np.asarray(weights, dtype=float)
    if len(weights) != ring.num_vars:
        raise ConfigInvalid(f"expected {ring.num_vars} weights, got {len(weights)}")
    mw = np.array(monomials(ring.num_vars, k), dtype=float).reshape(-1, ring.num_vars) @ weights
    levels, label = _levels(mw)
    M = ring.ideal_basis(k)
    rows, leads = [], []
    for l in range(len(levels)):
        cols = label == l
        if M.shape[0] == 0:
            rows.append(np.zeros((0, len(mw)), dtype=complex))
            leads.append(np.zeros((0, int(cols.sum())), dtype=complex))
            continue
        U, rank = _rank_split(M[:, cols], tol)
        R = U.conj().T @ M
        top, rest = R[:rank], R[rank:]
        rest[:, cols] = 0
        rest = rest[:, :]
        # drop numerically dependent remainders
        if rest.shape[0]:
            _, s, Vh = np.linalg.svd(rest, full_matrices=False)
            rest = Vh[s > tol * max(s[0] if len(s) else 0.0, 1.0)] if len(s) else rest
        rows.append(top)
        leads.append(top[:, cols])
        M = rest
    return WeightEchelon(k, levels, label, mw, rows, leads)


def _reduce(ech, f, tol):
    """Top weight level of the coset ``f + I_k`` (None if ``f`` is in ``I_k``)."""
    f = np.array(f, dtype=complex)
    scale = max(np.linalg.norm(f), 1e-300)
    for l in range(len(ech.levels)):
        cols = ech.label == l
        block = f[cols]
        if np.linalg.norm(block) <= tol * scale:
            f[cols] = 0
            continue
        L = ech.leads[l]
        if L.shape[0] == 0:
            return l
        c, *_ = np.linalg.lstsq(L.T, block, rcond=None)
        if np.linalg.norm(L.T @ c - block) > tol * scale:
            return l
        f = f - ech.rows[l].T @ c
        f[cols] = 0
    return None


def section_weight(ring, weights, s, k=None, tol=1e-8):
    """Minimal top weight over the coset ``s + I_k``.

    ``s`` is a polynomial dict or a coefficient vector of degree ``k``.
    """
    if isinstance(s, dict):
        k = _poly_degree(s)
        s = _poly_vector(s, ring.num_vars, k)
    elif k is None:
        raise ValueError("degree k is required for coefficient vectors")
    ring._check_degree(k)
    if k == 0:
        return 0.0
    ech = weight_echelon(ring, weights, k)
    l = _reduce(ech, s, tol)
    if l is None:
        raise ZeroVector("element lies in the ideal")
    return float(ech.levels[l])


def minimal_representative(ring, weights, f, k, tol=1e-8):
    """Element of the coset ``f + I_k`` whose top weight equals ``d(f)``."""
    ech = weight_echelon(ring, weights, k)
    f = np.array(f, dtype=complex)
    scale = max(np.linalg.norm(f), 1e-300)
    for l in range(len(ech.levels)):
        cols = ech.label == l
        block = f[cols]
        if np.linalg.norm(block) <= tol * scale:
            f[cols] = 0
            continue
        L = ech.leads[l]
        if L.shape[0] == 0:
            return f
        c, *_ = np.linalg.lstsq(L.T, block, rcond=None)
        if np.linalg.norm(L.T @ c - block) > tol * scale:
            return f
        f = f - ech.rows[l].T @ c
        f[cols] = 0
    raise ZeroVector("element lies in the ideal")


@dataclass
class RingFiltrationData:
    weights: np.ndarray
    jumps: dict
    graded_dims: dict
    basis: dict
    section_weights: dict
    multiplicativity_defect: float = 0.0
    echelons: dict = field(default_factory=dict, repr=False)


def _standard_monomials(ech):
    """Per level, monomial indices whose classes span that graded piece."""
    from scipy.linalg import qr
    out = []
    for l, L in enumerate(ech.leads):
        cols = np.nonzero(ech.label == l)[0]
        if L.shape[0] == 0:
            out.append(cols)
            continue
        _, _, piv = qr(L, pivoting=True, mode="economic")
        out.append(np.sort(cols[piv[L.shape[0]:]]))
    return out


def ring_filtration(ring, weights, n_samples=50, seed=0):
    """Weights of a triangular basis of each ``R_k`` and the jump values.

    The basis consists of standard monomials, level by level; multiplicativity
    ``d(st) <= d(s) + d(t)`` is checked on products of random basis elements.
    """
    weights = np.asarray(weights, dtype=float)
    if ring.K < 2:
        raise DegreeOverflow("filtration needs truncation degree at least 2")
    ech, basis, sw, jumps, dims = {}, {}, {}, {}, {}
    for k in range(ring.K + 1):
        e = weight_echelon(ring, weights, k)
        ech[k] = e
        std = _standard_monomials(e)
        mons = monomials(ring.num_vars, k)
        basis[k] = [mons[i] for l in range(len(e.levels)) for i in std[l]]
        sw[k] = np.array([e.levels[l] for l in range(len(e.levels)) for _ in std[l]])
        gd = e.graded_dims()
        keep = gd > 0
        jumps[k] = np.sort(e.levels[keep])
        dims[k] = dict(zip(e.levels[keep].tolist(), gd[keep].tolist()))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        k1 = int(rng.integers(1, ring.K))
        k2 = int(rng.integers(1, ring.K - k1 + 1))
        i1, i2 = int(rng.integers(len(basis[k1]))), int(rng.integers(len(basis[k2])))
        prod = tuple(np.add(basis[k1][i1], basis[k2][i2]))
        l = _reduce(ech[k1 + k2], _poly_vector({prod: 1.0}, ring.num_vars, k1 + k2), 1e-8)
        if l is None:
            continue
        d = ech[k1 + k2].levels[l]
        worst = max(worst, d - sw[k1][i1] - sw[k2][i2])
    return RingFiltrationData(weights, jumps, dims, basis, sw, float(worst), ech)


@dataclass
class InitialIdealData:
    weights: np.ndarray
    rows: dict
    quotient_dims: dict
    ring_dims: dict
    flat: dict
    generator_quotient_dims: dict
    generators_suffice: dict
    closed_under_variables: bool


def _span_dim(rows, tol=RANK_TOL):
    if rows.shape[0] == 0:
        return 0
    s = np.linalg.svd(rows, compute_uv=False)
    return int(np.sum(s > tol * max(s[0], 1.0)))


def _generator_initial_forms(ring, weights):
    out = []
    for g in ring.generators:
        vals = {a: float(np.dot(a, weights)) for a in g}
        top = max(vals.values())
        out.append({a: c for a, c in g.items() if vals[a] >= top - WEIGHT_TOL})
    return out


def initial_ideal(ring, weights):
    """Initial spaces of ``I_k`` for ``k <= K`` with flatness diagnostics.

    ``flat[k]`` compares ``dim Sym^k / in(I)_k`` with ``dim R_k``.
    ``generators_suffice[k]`` tells whether the initial forms of the given
    generators already span ``in(I)_k``.
    """
    weights = np.asarray(weights, dtype=float)
    init_ring = GradedRing(ring.num_vars, tuple(_generator_initial_forms(ring, weights)), ring.K)
    rows, qd, rd, flat, gq, gs = {}, {}, {}, {}, {}, {}
    for k in range(ring.K + 1):
        e = weight_echelon(ring, weights, k)
        rows[k] = e.initial_rows()
        n = ring.sym_dim(k)
        qd[k] = n - _span_dim(rows[k])
        rd[k] = ring.dim(k)
        flat[k] = qd[k] == rd[k]
        gq[k] = n - init_ring.ideal_basis(k).shape[0]
        gs[k] = gq[k] == qd[k]
    closed = True
    for k in range(ring.K):
        if rows[k].shape[0] == 0:
            continue
        shifted = []
        for j in range(ring.num_vars):
            for r in rows[k]:
                p = {}
                for a, c in zip(monomials(ring.num_vars, k), r):
                    if abs(c) > 0:
                        b = list(a)
                        b[j] += 1
                        p[tuple(b)] = c
                shifted.append(_poly_vector(p, ring.num_vars, k + 1))
        both = np.vstack([rows[k + 1], np.array(shifted)])
        closed &= _span_dim(both) == _span_dim(rows[k + 1])
    return InitialIdealData(weights, rows, qd, rd, flat, gq, gs, bool(closed))


def _rational(x, tol=1e-9, quality=1e-3):
    """Continued-fraction reconstruction of ``x``.

    Any real lies within ``1 / (q * cap)`` of some ``p / q`` with
    ``q <= cap``, so closeness alone does not separate rationals; the
    approximation must also satisfy ``q**2 |x - p/q| < quality``.
    """
    fr = Fraction(float(x)).limit_denominator(MAX_DENOMINATOR)
    err = abs(float(fr) - x)
    if err > tol or fr.denominator ** 2 * err >= quality:
        raise IrrationalFiltration(f"{x!r} has no stable rational reconstruction with "
                                   f"denominator <= {MAX_DENOMINATOR}")
    return fr


@dataclass
class ReesData:
    underline_lambda: int
    D: int
    levels: dict
    generators: list
    generated: dict


def regrade(ring, filt):
    """Shift weights by ``-underline_lambda * k`` and scale to integers.

    ``levels[k]`` lists the integer levels ``D (d(s) - underline_lambda k)``
    of the triangular basis of ``R_k``. The Rees algebra is generated by
    ``t`` and the degree-one basis elements at their levels; ``generated[k]``
    confirms that products of generators fill every ``F''_j R_k``.
    """
    w = filt.weights
    lam_ = int(math.floor(float(np.min(w)))) - 1
    shifted = {k: [_rational(d - lam_ * k) for d in filt.section_weights[k]] for k in filt.section_weights}
    var_shift = [_rational(x - lam_) for x in w]
    D = 1
    for fr in [f for v in shifted.values() for f in v] + var_shift:
        D = D * fr.denominator // math.gcd(D, fr.denominator)
    levels = {k: [int(f * D) for f in v] for k, v in shifted.items()}
    gens = [{"element": "t", "bidegree": [0, 1]}]
    for mono, lev in zip(filt.basis.get(1, []), levels.get(1, [])):
        gens.append({"element": list(mono), "bidegree": [1, lev]})
    var_levels = np.array([int(f * D) for f in var_shift])
    generated = {}
    for k in range(ring.K + 1):
        mons = monomials(ring.num_vars, k)
        mlev = np.array(mons, dtype=int).reshape(-1, ring.num_vars) @ var_levels
        I = ring.ideal_basis(k)
        ok = True
        for j in sorted(set(levels[k])):
            want = sum(1 for x in levels[k] if x <= j)
            cols = np.nonzero(mlev <= j)[0]
            M = np.vstack([I, np.eye(len(mons), dtype=complex)[cols]])
            ok &= (_span_dim(M) - I.shape[0]) == want
        generated[k] = bool(ok)
    return ReesData(lam_, int(D), levels, gens, generated)


def perturb_rational(weights, ring, rel_dev=0.1, max_denominator=MAX_DENOMINATOR):
    """Rational weights with the same strict initial terms and initial ideal.

    Denominators ``q = 1, 2, ...`` are tried with ``round(q w) / q``; the first
    candidate within ``rel_dev * max|w|`` that keeps every generator's top
    monomials strictly on top and reproduces ``in(I)_k`` for ``k <= K`` wins.
    """
    w = np.asarray(weights, dtype=float)
    for g in ring.generators:
        vals = sorted((float(np.dot(a, w)) for a in g), reverse=True)
        if len(vals) > 1 and vals[0] - vals[1] <= WEIGHT_TOL:
            raise TieDetected("a generator has tied top-weight monomials", generator=str(g))
    try:
        return np.array([float(_rational(x)) for x in w]), [_rational(x) for x in w]
    except IrrationalFiltration:
        pass
    ref = initial_ideal(ring, w)
    tops = [max(g, key=lambda a: float(np.dot(a, w))) for g in ring.generators]
    budget = rel_dev * max(np.max(np.abs(w)), 1e-300)
    for q in range(1, max_denominator + 1):
        num = np.round(q * w)
        gamma = num / q
        if np.max(np.abs(gamma - w)) > budget:
            continue
        if not all(all(np.dot(a, gamma) < np.dot(t, gamma) - WEIGHT_TOL for a in g if a != t)
                   for g, t in zip(ring.generators, tops)):
            continue
        cand = initial_ideal(ring, gamma)
        if all(_same_span(ref.rows[k], cand.rows[k]) for k in ref.rows):
            return gamma, [Fraction(int(n), q) for n in num]
    raise IrrationalFiltration("no rational perturbation found within the denominator cap")


def _same_span(X, Y, tol=1e-8):
    if X.shape[0] != Y.shape[0]:
        return False
    if X.shape[0] == 0:
        return True
    return float(np.max(principal_angles(X.T, Y.T))) < tol


def h2_check(sym_grams, I_rows, l2_grams, complement, stab_frac=0.05):
    """Two-sided comparison constants between quotient and L2 metrics.

    Returns the per-sample ``C_k = max(lambda_max, 1/lambda_min)`` of the
    pencil ``(H*, L2)``, the overall sup and whether the running sup
    increased by less than ``stab_frac`` over the last quarter.
    """
    from scipy.linalg import eigh
    C = []
    for H, L in zip(sym_grams, l2_grams):
        Hq, _ = quotient_norm(H, I_rows, complement)
        Lm = L.gram if isinstance(L, HermitianForm) else np.asarray(L, dtype=complex)
        try:
            ev = eigh(Hq.gram, Lm, eigvals_only=True)
        except np.linalg.LinAlgError as exc:
            raise SingularGram("L2 Gram is not positive definite") from exc
        C.append(max(ev[-1], 1.0 / ev[0]))
    C = np.array(C)
    run = np.maximum.accumulate(C)
    q = max(len(run) * 3 // 4 - 1, 0)
    increase = (run[-1] - run[q]) / run[q]
    return {"C": C, "sup": float(run[-1]), "bounded": bool(increase < stab_frac),
            "last_quarter_increase": float(increase)}


class RingDegeneration(BaseEstimator):
    """Estimator computing the weight filtration and its degeneration.

    ``fit(ring)`` computes the filtration, initial ideal and regrading;
    ``transform(polys)`` returns section weights of homogeneous polynomials.
    """

    def __init__(self, weights=None, n_samples=50, seed=0):
        self.weights = weights
        self.n_samples = n_samples
        self.seed = seed

    def fit(self, ring, y=None):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) != ring.num_vars or not np.all(np.isfinite(w)):
            raise ConfigInvalid("weights must be a finite vector with one entry per variable")
        self.ring_ = ring
        self.filtration_ = ring_filtration(ring, w, self.n_samples, self.seed)
        self.initial_ = initial_ideal(ring, w)
        try:
            self.rees_ = regrade(ring, self.filtration_)
        except IrrationalFiltration:
            self.rees_ = None
        return self

    def transform(self, polys):
        check_is_fitted(self, "filtration_")
        return np.array([section_weight(self.ring_, self.filtration_.weights, p) for p in polys])

    def report(self):
        check_is_fitted(self, "filtration_")
        f, ii = self.filtration_, self.initial_
        out = {
            "weights": f.weights.tolist(),
            "truncation_degree": self.ring_.K,
            "degrees": [],
            "multiplicativity_defect": f.multiplicativity_defect,
            "initial_ideal_closed_under_variables": ii.closed_under_variables,
            "note": "initial ideal equality is certified only up to the truncation degree",
        }
        for k in range(self.ring_.K + 1):
            out["degrees"].append({
                "k": k, "dim_R": ii.ring_dims[k], "dim_quotient_initial": ii.quotient_dims[k],
                "flat": ii.flat[k], "generator_initial_forms_suffice": ii.generators_suffice[k],
                "jumps": f.jumps[k].tolist(),
                "graded_dims": [[d, n] for d, n in sorted(f.graded_dims[k].items())],
            })
        if self.rees_ is not None:
            out["rees"] = {"underline_lambda": self.rees_.underline_lambda, "D": self.rees_.D,
                           "generators": self.rees_.generators,
                           "generated": [self.rees_.generated[k] for k in sorted(self.rees_.generated)]}
        else:
            out["rees"] = None
        return out
