"""Hermitian linear algebra on a fixed reference space.

All matrices are expressed in a basis that is orthonormal for an explicit
reference form; :class:`HermitianForm` converts between an arbitrary basis
and such a frame.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (AmbiguousClustering, NotHermitian, SingularGram,
                     SingularInput, StepTooLarge, ZeroVector)

__all__ = [
    "HermitianForm", "HermitianGenerator", "OperatorPath", "spectral_decompose",
    "polar_positive_part", "parallel_lift", "fs_distance", "principal_angles",
    "orth", "pairwise_sum", "hermitian_exp", "hermitian_log",
]

HERMITIAN_TOL = 1e-12
MAX_CONDITION = 1e12


def pairwise_sum(values):
    """Sum along axis 0 with a fixed binary tree, independent of scheduling."""
    values = np.asarray(values)
    if values.shape[0] == 0:
        return np.zeros(values.shape[1:], dtype=values.dtype)
    while values.shape[0] > 1:
        if values.shape[0] % 2:
            values = np.concatenate([values, np.zeros_like(values[:1])])
        values = values[0::2] + values[1::2]
    return values[0]


def _check_hermitian(H, name="matrix"):
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise NotHermitian(f"{name} must be square, got shape {H.shape}")
    scale = max(np.linalg.norm(H), 1.0)
    if np.linalg.norm(H - H.conj().T) > HERMITIAN_TOL * scale:
        raise NotHermitian(f"{name} deviates from its adjoint")
    return 0.5 * (H + H.conj().T)


@dataclass(frozen=True)
class HermitianForm:
    """A positive-definite Hermitian inner product given by its Gram matrix."""

    gram: np.ndarray

    def __post_init__(self):
        G = _check_hermitian(self.gram, "gram")
        evals = np.linalg.eigvalsh(G)
        if evals[0] <= 0 or not np.all(np.isfinite(evals)):
            raise SingularGram(f"Gram matrix not positive-definite "
                               f"(smallest eigenvalue {evals[0]:.3e})")
        object.__setattr__(self, "gram", G)

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim, dtype=complex))

    @property
    def dim(self):
        return self.gram.shape[0]

    def inner(self, v, w):
        return np.vdot(v, self.gram @ w)

    def norm(self, v):
        return float(np.sqrt(max(self.inner(v, v).real, 0.0)))

    def frame(self):
        """Matrix ``F`` with ``F^* gram F = I`` (columns form an orthonormal basis)."""
        L = np.linalg.cholesky(self.gram)
        return np.linalg.inv(L).conj().T

    def to_orthonormal(self, A):
        """Express an operator given in the raw basis in the orthonormal frame."""
        F = self.frame()
        return np.linalg.solve(F, A @ F)


@dataclass(frozen=True)
class HermitianGenerator:
    """A Hermitian operator together with its clustered spectral data.

    ``spectrum`` is strictly decreasing; ``eigenspaces[s]`` is an orthonormal
    basis (columns) of the eigenspace for ``spectrum[s]``.
    """

    matrix: np.ndarray
    spectrum: np.ndarray
    eigenspaces: tuple
    multiplicities: tuple

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def basis(self):
        """Unitary matrix whose column blocks are the eigenspaces, in order."""
        return np.hstack(self.eigenspaces)

    def diagonal(self):
        """Eigenvalues repeated by multiplicity, matching :attr:`basis`."""
        return np.repeat(self.spectrum, self.multiplicities)

    def projector(self, s):
        U = self.eigenspaces[s]
        return U @ U.conj().T

    def exp(self, t=1.0):
        Q = self.basis
        return (Q * np.exp(t * self.diagonal())) @ Q.conj().T

    @classmethod
    def from_levels(cls, spectrum, multiplicities, basis=None):
        """Build a generator with prescribed levels.

        Columns of ``basis`` (identity by default) are consumed block by block
        in the order the levels are given.
        """
        spectrum = np.asarray(spectrum, dtype=float)
        multiplicities = [int(m) for m in multiplicities]
        n = sum(multiplicities)
        Q = np.eye(n, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
        offsets = np.concatenate([[0], np.cumsum(multiplicities)])
        blocks = [Q[:, offsets[j]:offsets[j + 1]] for j in range(len(spectrum))]
        order = np.argsort(-spectrum, kind="stable")
        spectrum = spectrum[order]
        blocks = tuple(blocks[i] for i in order)
        mults = tuple(multiplicities[i] for i in order)
        Qs = np.hstack(blocks)
        M = (Qs * np.repeat(spectrum, mults)) @ Qs.conj().T
        return cls(0.5 * (M + M.conj().T), spectrum, blocks, mults)


def _cluster(evals, tol):
    """Split descending eigenvalues into levels; returns list of index lists."""
    groups = [[0]]
    for i in range(1, len(evals)):
        if evals[i - 1] - evals[i] < tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    for g in groups:
        if evals[g[0]] - evals[g[-1]] >= tol:
            raise AmbiguousClustering(
                f"eigenvalue chain of spread {evals[g[0]] - evals[g[-1]]:.3e} "
                f"admits several clusterings at tolerance {tol:.3e}")
    return groups


def spectral_decompose(H, cluster_tol=None):
    """Clustered eigendecomposition of a Hermitian operator.

    Parameters
    ----------
    H : (n, n) array_like
        Hermitian in the (orthonormal) working basis.
    cluster_tol : float, optional
        Eigenvalues closer than this belong to one level. Defaults to
        ``1e-6 * max(||H||, 1)``.

    Returns
    -------
    HermitianGenerator
    """
    H = _check_hermitian(H, "H")
    if cluster_tol is None:
        cluster_tol = 1e-6 * max(np.linalg.norm(H, 2), 1.0)
    evals, evecs = np.linalg.eigh(H)
    evals, evecs = evals[::-1], evecs[:, ::-1]
    groups = _cluster(evals, cluster_tol)
    spectrum = np.array([evals[g].mean() for g in groups])
    spaces = tuple(evecs[:, g] for g in groups)
    mults = tuple(len(g) for g in groups)
    gen = HermitianGenerator(H, spectrum, spaces, mults)
    recon = sum(lam * gen.projector(s) for s, lam in enumerate(spectrum))
    if np.linalg.norm(recon - H) > max(1e-10 * np.linalg.norm(H), cluster_tol * np.sqrt(len(evals))):
        raise AmbiguousClustering("clustered reconstruction does not reproduce H")
    return gen


def hermitian_exp(H, t=1.0):
    evals, evecs = np.linalg.eigh(_check_hermitian(H))
    return (evecs * np.exp(t * evals)) @ evecs.conj().T


def hermitian_log(P):
    """Logarithm of a Hermitian positive-definite matrix."""
    evals, evecs = np.linalg.eigh(_check_hermitian(P))
    if evals[0] <= 0:
        raise SingularGram("logarithm of a non-positive matrix")
    return (evecs * np.log(evals)) @ evecs.conj().T


def polar_positive_part(B, form=None):
    """Right polar decomposition ``B = U P``.

    ``P`` is Hermitian positive-definite and ``U`` unitary, both with respect
    to ``form`` (the identity form when omitted, i.e. ``B`` is already written
    in an orthonormal frame).
    """
    B = np.asarray(B, dtype=complex)
    if form is not None:
        B = form.to_orthonormal(B)
    if not np.all(np.isfinite(B)):
        raise SingularInput("non-finite entries")
    evals, evecs = np.linalg.eigh(B.conj().T @ B)
    if evals[0] <= 0 or np.sqrt(evals[-1] / evals[0]) > MAX_CONDITION:
        raise SingularInput("operator is numerically singular")
    s = np.sqrt(evals)
    P = (evecs * s) @ evecs.conj().T
    U = B @ ((evecs / s) @ evecs.conj().T)
    if form is not None:
        F = form.frame()
        Finv = np.linalg.inv(F)
        return F @ U @ Finv, F @ P @ Finv
    return U, 0.5 * (P + P.conj().T)


def fs_distance(p, q):
    """Fubini-Study distance between the lines spanned by ``p`` and ``q``."""
    p = np.asarray(p, dtype=complex).ravel()
    q = np.asarray(q, dtype=complex).ravel()
    np_, nq = np.linalg.norm(p), np.linalg.norm(q)
    if np_ == 0 or nq == 0:
        raise ZeroVector("projective point with zero representative")
    p, q = p / np_, q / nq
    c = np.vdot(p, q)
    # arctan2 form stays accurate near 0 and pi/2
    sin = np.linalg.norm(q - c * p)
    return float(np.arctan2(sin, abs(c)))


def orth(X, rtol=1e-12):
    """Orthonormal basis (columns) for the column span of ``X``."""
    X = np.asarray(X, dtype=complex)
    if X.size == 0:
        return X.reshape(X.shape[0], 0)
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    rank = int(np.sum(s > rtol * max(s[0], 1e-300)))
    return U[:, :rank]


def principal_angles(X, Y):
    """Principal angles (ascending) between the column spans of X and Y."""
    Qx, Qy = orth(X), orth(Y)
    if Qx.shape[1] == 0 or Qy.shape[1] == 0:
        return np.zeros(0)
    if Qx.shape[1] > Qy.shape[1]:
        Qx, Qy = Qy, Qx
    # sine-based formula keeps small angles accurate
    M = Qx - Qy @ (Qy.conj().T @ Qx)
    s = np.linalg.svd(M, compute_uv=False)
    return np.sort(np.arcsin(np.clip(s, 0.0, 1.0)))


@dataclass
class OperatorPath:
    """A sampled path of invertible operators starting at the identity.

    The path is stored through its transitions ``B_i = A_i A_{i-1}^{-1}``
    whenever those are available: long self-similar paths overflow double
    precision as cumulative products but never as transitions.
    """

    times: np.ndarray
    operators: list = None
    transitions: list = None
    reference_form: HermitianForm = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or np.any(np.diff(self.times) <= 0):
            raise SingularInput("times must be strictly increasing")
        if self.operators is None and self.transitions is None:
            raise SingularInput("path needs operators or transitions")
        if self.operators is not None:
            self.operators = [np.asarray(A, dtype=complex) for A in self.operators]
            if len(self.operators) != len(self.times):
                raise SingularInput("one operator per sample time required")
            if np.linalg.norm(self.operators[0] - np.eye(self.dim)) > 1e-12:
                raise SingularInput("first operator must be the identity")
        if self.transitions is not None:
            self.transitions = [np.asarray(B, dtype=complex) for B in self.transitions]
            if len(self.transitions) != len(self.times) - 1:
                raise SingularInput("one transition per step required")
        if self.reference_form is None:
            self.reference_form = HermitianForm.identity(self.dim)

    @classmethod
    def from_transitions(cls, times, transitions, **kw):
        return cls(times=times, transitions=list(transitions), **kw)

    @property
    def dim(self):
        if self.operators is not None:
            return self.operators[0].shape[0]
        return self.transitions[0].shape[0]

    def __len__(self):
        return len(self.times)

    def steps(self):
        """Transitions ``B_1, ..., B_N`` as an array of shape (N, d, d)."""
        if self.transitions is None:
            A = self.operators
            out = []
            for i in range(1, len(A)):
                # B A_{i-1} = A_i  <=>  A_{i-1}^T B^T = A_i^T
                out.append(np.linalg.solve(A[i - 1].T, A[i].T).T)
            self.transitions = out
        return np.asarray(self.transitions)

    def cumulative(self):
        """Operators ``A_i``; may overflow for long expanding paths."""
        if self.operators is None:
            A = [np.eye(self.dim, dtype=complex)]
            for B in self.transitions:
                A.append(B @ A[-1])
            self.operators = A
        return self.operators

    def is_unit_spaced(self, tol=1e-9):
        return np.allclose(np.diff(self.times), 1.0, atol=tol) and abs(self.times[0]) < tol

    def resample_unit(self):
        """Restrict to integer sample times (resampling continuous paths).

        Integer times must be present among the samples; paths sampled more
        finely are thinned, not interpolated.
        """
        if self.is_unit_spaced():
            return self
        t0 = self.times[0]
        targets = np.arange(np.ceil(t0 - 1e-9), np.floor(self.times[-1] + 1e-9) + 1)
        idx = []
        for t in targets:
            j = int(np.argmin(np.abs(self.times - t)))
            if abs(self.times[j] - t) > 1e-9:
                raise SingularInput(f"integer time {t} not sampled")
            idx.append(j)
        A = self.cumulative()
        ops = [A[j] for j in idx]
        ops0 = np.linalg.inv(ops[0])
        ops = [M @ ops0 for M in ops]
        return OperatorPath(times=targets - targets[0], operators=ops,
                            reference_form=self.reference_form, meta=dict(self.meta))


def _exp_derivative(L, E):
    """Directional derivative of ``exp`` at Hermitian ``L`` along ``E``."""
    l, U = np.linalg.eigh(L)
    diff = l[:, None] - l[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        phi = np.exp(l[None, :]) * np.where(np.abs(diff) > 1e-12, np.expm1(diff) / diff, 1.0 + diff / 2)
    return U @ (phi * (U.conj().T @ E @ U)) @ U.conj().T


def _psd_sqrt(S):
    l, U = np.linalg.eigh(0.5 * (S + S.conj().T))
    return (U * np.sqrt(np.maximum(l, 0.0))) @ U.conj().T, (U / np.sqrt(l)) @ U.conj().T


def _restore_isometry(A, G):
    """``Y A`` with Hermitian positive ``Y`` solving ``A^* Y^2 A = G``.

    ``Y^2 = A^{-*} G A^{-1}`` is close to the identity, so its square root
    loses only ``cond(G)`` digits, not ``cond(G)^2``.
    """
    M = np.linalg.solve(A.conj().T, G)
    C = np.linalg.solve(A.conj().T, M.conj().T).conj().T
    Y, _ = _psd_sqrt(C)
    return Y @ A


def _isometry_residual(A, G):
    # max over basis vectors s of | ||A s|| - ||s||_G | / ||s||_G
    lhs = np.linalg.norm(A, axis=0)
    rhs = np.sqrt(np.real(np.diag(G)))
    return float(np.max(np.abs(lhs - rhs) / rhs))


def parallel_lift(times, grams, lift_tol=1e-8, max_halvings=12):
    """Parallel lift of a Gram-matrix path to the general linear group.

    Solves ``dA/dt = (1/2) A^{-*} dG/dt`` with classical fourth-order
    Runge-Kutta on a cubic-spline interpolant of ``log G``, halving the step
    until the isometry ``||A(t) s|| = ||s||_{G(t)}`` holds to ``lift_tol``
    (relative) on the basis vectors at every sample. Grams are first written
    in a frame orthonormal for ``grams[0]``. Since the lift equation amplifies
    errors along contracting directions, the isometry is restored exactly at
    each sample (minimal Hermitian correction); ``lift_residual`` reports the
    largest residual before correction.

    Returns
    -------
    OperatorPath
    """
    times = np.asarray(times, dtype=float)
    G = np.asarray(grams, dtype=complex)
    if G.ndim != 3 or len(times) != len(G):
        raise SingularGram("need one square Gram matrix per time")
    if np.any(np.diff(times) <= 0):
        raise SingularGram("times must be increasing")
    for i, Gi in enumerate(G):
        HermitianForm(Gi)  # validates positivity
    H0 = HermitianForm(G[0])
    F = H0.frame()
    G = np.einsum("ji,tjk,kl->til", F.conj(), G, F)
    G = 0.5 * (G + np.conj(np.swapaxes(G, 1, 2)))
    d = G.shape[1]

    if len(times) == 1:
        return OperatorPath(times, operators=[np.eye(d, dtype=complex)], reference_form=H0)

    # interpolate log G so the interpolant stays positive definite even when
    # eigenvalues separate exponentially
    L = np.array([hermitian_log(Gi) for Gi in G])
    re = CubicSpline(times, L.real, axis=0)
    im = CubicSpline(times, L.imag, axis=0)
    dre, dim_ = re.derivative(), im.derivative()

    def rhs(t, A):
        Lt = re(t) + 1j * im(t)
        Gdot = _exp_derivative(0.5 * (Lt + Lt.conj().T), dre(t) + 1j * dim_(t))
        return 0.5 * np.linalg.solve(A.conj().T, Gdot)

    sub = 1
    for _ in range(max_halvings + 1):
        ops = [np.eye(d, dtype=complex)]
        A = ops[0]
        worst = 0.0
        for i in range(len(times) - 1):
            h = (times[i + 1] - times[i]) / sub
            t = times[i]
            for _ in range(sub):
                k1 = rhs(t, A)
                k2 = rhs(t + h / 2, A + h / 2 * k1)
                k3 = rhs(t + h / 2, A + h / 2 * k2)
                k4 = rhs(t + h, A + h * k3)
                A = A + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                t += h
            worst = max(worst, _isometry_residual(A, G[i + 1]))
            # the lift is unstable along contracting directions; restore the
            # isometry at every sample before continuing
            A = _restore_isometry(A, G[i + 1])
            ops.append(A)
            if worst > lift_tol and sub < 2 ** max_halvings:
                break
        if worst <= lift_tol:
            path = OperatorPath(times, operators=ops, reference_form=H0)
            path.meta["lift_residual"] = worst
            path.meta["substeps"] = sub
            return path
        sub *= 2
    raise StepTooLarge(f"isometry residual {worst:.3e} exceeds {lift_tol:.1e}")
