"""Induced representations of GL(E): dual, symmetric and exterior powers, tensors.

Index conventions are fixed: exterior powers use lexicographic p-subsets,
symmetric powers use non-decreasing index multisets in lexicographic order
(the same as graded-lex monomials ``x_0^k, x_0^{k-1} x_1, ...``). The induced
inner product makes the monomial/wedge basis orthonormal after the standard
normalization ``u_a = x^a sqrt(k!/a!)``, so unitary operators induce unitary
operators.
"""

import itertools
import math
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateSpan, DimensionOverflow, ConfigInvalid
from .linalg import HermitianGenerator

__all__ = [
    "RepDescriptor", "WeightDecomposition", "PluckerVector", "induce",
    "induce_lie", "induced_weights", "plucker", "plucker_residual",
    "ext_basis", "sym_basis", "DEFAULT_DIM_CAP",
]

DEFAULT_DIM_CAP = 20000
_CHUNK = 4_000_000


@dataclass(frozen=True)
class RepDescriptor:
    """Shape of a functorial representation: ``std``, ``dual``, ``sym:k``,
    ``ext:p`` or ``tensor(a,b,...)``."""

    kind: str = "std"
    param: int = 0
    parts: tuple = ()

    def __post_init__(self):
        if self.kind not in ("std", "dual", "sym", "ext", "tensor"):
            raise ConfigInvalid(f"unknown representation kind {self.kind!r}")
        if self.kind in ("sym", "ext") and self.param < 1:
            raise ConfigInvalid(f"{self.kind} needs a positive parameter")
        if self.kind == "tensor" and len(self.parts) < 1:
            raise ConfigInvalid("tensor needs at least one factor")

    @classmethod
    def parse(cls, text):
        if isinstance(text, RepDescriptor):
            return text
        text = text.strip()
        if text in ("std", "dual"):
            return cls(text)
        m = re.fullmatch(r"(sym|ext):(\d+)", text)
        if m:
            return cls(m.group(1), int(m.group(2)))
        if text.startswith("tensor(") and text.endswith(")"):
            inner, parts, depth, start = text[7:-1], [], 0, 0
            for i, ch in enumerate(inner):
                depth += ch == "("
                depth -= ch == ")"
                if ch == "," and depth == 0:
                    parts.append(inner[start:i])
                    start = i + 1
            parts.append(inner[start:])
            return cls("tensor", 0, tuple(cls.parse(p) for p in parts))
        raise ConfigInvalid(f"cannot parse representation {text!r}")

    def __str__(self):
        if self.kind in ("std", "dual"):
            return self.kind
        if self.kind == "tensor":
            return "tensor(" + ",".join(str(p) for p in self.parts) + ")"
        return f"{self.kind}:{self.param}"

    def dim(self, n):
        if self.kind in ("std", "dual"):
            return n
        if self.kind == "sym":
            return math.comb(n + self.param - 1, self.param)
        if self.kind == "ext":
            if self.param > n:
                raise ConfigInvalid(f"ext:{self.param} exceeds dim E = {n}")
            return math.comb(n, self.param)
        return math.prod(p.dim(n) for p in self.parts)


STD = RepDescriptor("std")


@lru_cache(maxsize=64)
def ext_basis(n, p):
    return np.array(list(itertools.combinations(range(n), p)), dtype=int).reshape(-1, p)


@lru_cache(maxsize=64)
def sym_basis(n, k):
    return np.array(list(itertools.combinations_with_replacement(range(n), k)),
                    dtype=int).reshape(-1, k)


@lru_cache(maxsize=64)
def _sym_exponents(n, k):
    idx = sym_basis(n, k)
    ex = np.zeros((len(idx), n), dtype=int)
    for r, row in enumerate(idx):
        for i in row:
            ex[r, i] += 1
    return ex


@lru_cache(maxsize=64)
def _sym_factorials(n, k):
    return np.array([math.prod(math.factorial(e) for e in row)
                     for row in _sym_exponents(n, k)], dtype=float)


def _check_cap(desc, n, cap):
    d = desc.dim(n)
    if d > cap:
        raise DimensionOverflow(f"dim {desc} = {d} exceeds cap {cap}")
    return d


def _minors(A, rows, cols):
    """Matrix of minors det A[I, J] for row subsets ``rows`` and column subsets ``cols``."""
    p = rows.shape[1]
    out = np.empty((len(rows), len(cols)), dtype=complex)
    if p == 0:
        out[:] = 1.0
        return out
    step = max(1, _CHUNK // max(1, len(rows) * p * p))
    for c0 in range(0, len(cols), step):
        J = cols[c0:c0 + step]
        sub = A[rows[:, None, :, None], J[None, :, None, :]]
        out[:, c0:c0 + step] = np.linalg.det(sub)
    return out


def _sym_power(A, n, k):
    idx = sym_basis(n, k)
    N = len(idx)
    masks = np.array(list(itertools.product((0, 1), repeat=k)), dtype=float).T  # (k, 2^k)
    signs = (-1.0) ** (k - masks.sum(axis=0))
    out = np.empty((N, N), dtype=complex)
    step = max(1, _CHUNK // max(1, N * k * masks.shape[1]))
    for c0 in range(0, N, step):
        J = idx[c0:c0 + step]
        cols = A[:, J]                                  # (n, b, k)
        sums = cols @ masks                              # (n, b, 2^k)
        prods = sums[idx].prod(axis=1)                   # (N, b, 2^k) via Ryser
        out[:, c0:c0 + step] = prods @ signs
    f = np.sqrt(_sym_factorials(n, k))
    return out / np.outer(f, f)


def induce(desc, A, cap=DEFAULT_DIM_CAP):
    """Matrix of the induced action of ``A`` on the representation ``desc``."""
    desc = RepDescriptor.parse(desc)
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    _check_cap(desc, n, cap)
    if desc.kind == "std":
        return A.copy()
    if desc.kind == "dual":
        return np.linalg.inv(A).T
    if desc.kind == "ext":
        B = ext_basis(n, desc.param)
        return _minors(A, B, B)
    if desc.kind == "sym":
        return _sym_power(A, n, desc.param)
    out = np.ones((1, 1), dtype=complex)
    for part in desc.parts:
        out = np.kron(out, induce(part, A, cap))
    return out


def induce_lie(desc, X, cap=DEFAULT_DIM_CAP):
    """Derivative at the identity of :func:`induce` in direction ``X``."""
    desc = RepDescriptor.parse(desc)
    X = np.asarray(X, dtype=complex)
    n = X.shape[0]
    d = _check_cap(desc, n, cap)
    if desc.kind == "std":
        return X.copy()
    if desc.kind == "dual":
        return -X.T
    out = np.zeros((d, d), dtype=complex)
    if desc.kind == "ext":
        basis = ext_basis(n, desc.param)
        pos = {tuple(r): a for a, r in enumerate(basis)}
        for b, J in enumerate(basis):
            J = list(J)
            for m, j in enumerate(J):
                for i in range(n):
                    if X[i, j] == 0 or (i != j and i in J):
                        continue
                    K = J.copy()
                    K[m] = i
                    order = np.argsort(K)
                    sign = _perm_sign(order)
                    out[pos[tuple(np.array(K)[order])], b] += sign * X[i, j]
        return out
    if desc.kind == "sym":
        ex = _sym_exponents(n, desc.param)
        pos = {tuple(r): a for a, r in enumerate(ex)}
        fact = _sym_factorials(n, desc.param)
        for b, beta in enumerate(ex):
            for j in np.nonzero(beta)[0]:
                for i in range(n):
                    if X[i, j] == 0:
                        continue
                    alpha = beta.copy()
                    alpha[j] -= 1
                    alpha[i] += 1
                    a = pos[tuple(alpha)]
                    out[a, b] += np.sqrt(fact[a] / fact[b]) * beta[j] * X[i, j]
        return out
    mats = [induce_lie(p, X, cap) for p in desc.parts]
    dims = [m.shape[0] for m in mats]
    for t, M in enumerate(mats):
        term = np.ones((1, 1), dtype=complex)
        for u, D in enumerate(dims):
            term = np.kron(term, M if u == t else np.eye(D))
        out += term
    return out


def _perm_sign(order):
    order = list(order)
    sign = 1
    for i in range(len(order)):
        while order[i] != i:
            j = order[i]
            order[i], order[j] = order[j], order[i]
            sign = -sign
    return sign


def _basis_weights(desc, lam):
    """Weights of the induced eigenbasis for diagonal eigenvalues ``lam``."""
    n = len(lam)
    if desc.kind == "std":
        return np.array(lam, dtype=float)
    if desc.kind == "dual":
        return -np.array(lam, dtype=float)
    if desc.kind == "ext":
        return lam[ext_basis(n, desc.param)].sum(axis=1)
    if desc.kind == "sym":
        return lam[sym_basis(n, desc.param)].sum(axis=1)
    w = np.zeros(1)
    for p in desc.parts:
        w = np.add.outer(w, _basis_weights(p, lam)).ravel()
    return w


@dataclass(frozen=True)
class WeightDecomposition:
    """Eigenspace decomposition of the induced generator on a representation."""

    weights: np.ndarray
    subspaces: tuple
    multiplicities: tuple

    def min_gap(self):
        if len(self.weights) < 2:
            return np.inf
        return float(np.min(-np.diff(self.weights)))

    def index_of(self, value, tol):
        hits = np.nonzero(np.abs(self.weights - value) < tol)[0]
        return int(hits[0]) if len(hits) else None

    def components(self, v):
        """Norms of the orthogonal projections of ``v`` onto each weight space."""
        v = np.asarray(v, dtype=complex)
        return np.array([np.linalg.norm(U.conj().T @ v) for U in self.subspaces])


def induced_weights(gen, desc=STD, cluster_tol=None, cap=DEFAULT_DIM_CAP):
    """Weight decomposition of the generator ``gen`` acting on ``desc``.

    Weights are sums (with or without repetition) of the spectrum, negated
    on the dual; levels closer than ``cluster_tol`` are merged.
    """
    desc = RepDescriptor.parse(desc)
    if not isinstance(gen, HermitianGenerator):
        raise TypeError("gen must be a HermitianGenerator")
    n = gen.dim
    _check_cap(desc, n, cap)
    lam = gen.diagonal()
    w = _basis_weights(desc, lam)
    if cluster_tol is None:
        cluster_tol = 1e-8 * max(1.0, float(np.max(np.abs(w))))
    Qv = induce(desc, gen.basis, cap)
    order = np.argsort(-w, kind="stable")
    groups = [[order[0]]]
    for a, b in zip(order[:-1], order[1:]):
        if w[a] - w[b] < cluster_tol:
            groups[-1].append(b)
        else:
            groups.append([b])
    weights = np.array([w[g].mean() for g in groups])
    spaces = tuple(Qv[:, g] for g in groups)
    return WeightDecomposition(weights, spaces, tuple(len(g) for g in groups))


@dataclass(frozen=True)
class PluckerVector:
    """Plücker coordinates of a p-plane in ``C^n`` (lexicographic p-subsets)."""

    n: int
    p: int
    coordinates: np.ndarray

    @property
    def rep(self):
        return RepDescriptor("ext", self.p)

    def normalized(self):
        return self.coordinates / np.linalg.norm(self.coordinates)


def plucker(W):
    """Plücker vector of the column span of ``W`` (shape (n, p))."""
    W = np.asarray(W, dtype=complex)
    if W.ndim == 1:
        W = W[:, None]
    n, p = W.shape
    if p == 0 or p > n:
        raise DegenerateSpan(f"cannot wedge {p} vectors in dimension {n}")
    s = np.linalg.svd(W, compute_uv=False)
    if s[-1] <= 1e-10:
        raise DegenerateSpan(f"spanning vectors dependent (sigma_min = {s[-1]:.2e})")
    rows = ext_basis(n, p)
    coords = _minors(W, rows, np.arange(p)[None, :])[:, 0]
    return PluckerVector(n, p, coords)


def plucker_residual(pv):
    """Largest violation of the quadratic Plücker relations (normalized vector)."""
    n, p = pv.n, pv.p
    x = pv.normalized()
    pos = {tuple(r): a for a, r in enumerate(ext_basis(n, p))}

    def coord(idx):
        if len(set(idx)) < len(idx):
            return 0.0
        order = np.argsort(idx)
        return _perm_sign(order) * x[pos[tuple(np.array(idx)[order])]]

    worst = 0.0
    for I in itertools.combinations(range(n), p - 1):
        for J in itertools.combinations(range(n), p + 1):
            total = 0.0
            for ell, j in enumerate(J):
                rest = J[:ell] + J[ell + 1:]
                total += (-1) ** ell * coord(I + (j,)) * coord(rest)
            worst = max(worst, abs(total))
    return worst
