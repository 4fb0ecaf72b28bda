import itertools
import math

import numpy as np
import pytest
from scipy.linalg import expm

from degenflow.errors import ConfigInvalid, DegenerateSpan, DimensionOverflow
from degenflow.linalg import HermitianGenerator
from degenflow.reps import (PluckerVector, RepDescriptor, ext_basis, induce, induce_lie,
                            induced_weights, plucker, plucker_residual, sym_basis)

DESCS = ["std", "dual", "sym:2", "sym:3", "ext:2", "ext:3", "tensor(std,dual)", "tensor(sym:2,ext:2)"]


def rand_matrix(rng, n, scale=1.0):
    return scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))


def _tensor_power(A, k):
    out = np.ones((1, 1), dtype=complex)
    for _ in range(k):
        out = np.kron(out, A)
    return out


def _flat(idx, n):
    return sum(i * n ** (len(idx) - 1 - j) for j, i in enumerate(idx))


def _sym_vectors(n, k):
    # orthonormal symmetric tensors, one per multiset, in lexicographic order
    vecs = []
    for ms in itertools.combinations_with_replacement(range(n), k):
        perms = set(itertools.permutations(ms))
        v = np.zeros(n ** k)
        for p in perms:
            v[_flat(p, n)] = 1.0
        vecs.append(v / math.sqrt(len(perms)))
    return np.array(vecs).T


def _ext_vectors(n, p):
    vecs = []
    for S in itertools.combinations(range(n), p):
        v = np.zeros(n ** p)
        for perm in itertools.permutations(range(p)):
            sign = np.linalg.det(np.eye(p)[list(perm)])
            v[_flat([S[i] for i in perm], n)] = sign
        vecs.append(v / math.sqrt(math.factorial(p)))
    return np.array(vecs).T


@pytest.mark.parametrize("text", DESCS)
def test_descriptor_round_trip(text):
    assert str(RepDescriptor.parse(text)) == text


@pytest.mark.parametrize("text", ["sym:0", "foo", "ext:", "tensor()"])
def test_descriptor_rejects_bad_strings(text):
    with pytest.raises(ConfigInvalid):
        RepDescriptor.parse(text)


def test_dimensions():
    assert RepDescriptor.parse("sym:2").dim(4) == 10
    assert RepDescriptor.parse("ext:2").dim(4) == 6
    assert RepDescriptor.parse("tensor(std,ext:2)").dim(4) == 24
    with pytest.raises(ConfigInvalid):
        RepDescriptor.parse("ext:5").dim(4)


@pytest.mark.parametrize("k", [2, 3])
def test_sym_matches_symmetric_tensor_oracle(k):
    rng = np.random.default_rng(k)
    n = 3
    A = rand_matrix(rng, n)
    S = _sym_vectors(n, k)
    np.testing.assert_allclose(induce(f"sym:{k}", A), S.T @ _tensor_power(A, k) @ S, atol=1e-12)


@pytest.mark.parametrize("p", [2, 3])
def test_ext_matches_antisymmetric_tensor_oracle(p):
    rng = np.random.default_rng(10 + p)
    n = 4
    A = rand_matrix(rng, n)
    W = _ext_vectors(n, p)
    np.testing.assert_allclose(induce(f"ext:{p}", A), W.T @ _tensor_power(A, p) @ W, atol=1e-12)


@pytest.mark.parametrize("text", DESCS)
def test_induce_is_homomorphism(text):
    rng = np.random.default_rng(1)
    A, B = rand_matrix(rng, 4, 0.5), rand_matrix(rng, 4, 0.5)
    A += np.eye(4)
    B += np.eye(4)
    np.testing.assert_allclose(induce(text, A @ B), induce(text, A) @ induce(text, B),
                               atol=1e-10)


@pytest.mark.parametrize("text", DESCS)
def test_unitary_induces_unitary(text):
    rng = np.random.default_rng(2)
    Q, _ = np.linalg.qr(rand_matrix(rng, 4))
    U = induce(text, Q)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(len(U)), atol=1e-12)


@pytest.mark.parametrize("text", DESCS)
def test_lie_derivative_exponentiates(text):
    rng = np.random.default_rng(3)
    X = rand_matrix(rng, 4, 0.3)
    np.testing.assert_allclose(expm(induce_lie(text, X)), induce(text, expm(X)), atol=1e-10)


def test_induced_weights_sym2():
    gen = HermitianGenerator.from_levels([1.0, 0.0], [1, 1])
    wd = induced_weights(gen, "sym:2")
    np.testing.assert_allclose(wd.weights, [2.0, 1.0, 0.0])
    assert wd.multiplicities == (1, 1, 1)
    assert wd.min_gap() == 1.0


def test_induced_weights_dual_and_ext():
    gen = HermitianGenerator.from_levels([2.0, 1.0, 0.0], [1, 1, 2])
    np.testing.assert_allclose(induced_weights(gen, "dual").weights, [0.0, -1.0, -2.0])
    wd = induced_weights(gen, "ext:2")
    np.testing.assert_allclose(wd.weights, [3.0, 2.0, 1.0, 0.0])
    assert wd.multiplicities == (1, 2, 2, 1)


def test_weight_spaces_are_eigenspaces():
    rng = np.random.default_rng(4)
    Q, _ = np.linalg.qr(rand_matrix(rng, 3))
    gen = HermitianGenerator.from_levels([1.5, 0.5, -1.0], [1, 1, 1], basis=Q)
    L = induce_lie("sym:2", gen.matrix)
    wd = induced_weights(gen, "sym:2")
    for w, U in zip(wd.weights, wd.subspaces):
        np.testing.assert_allclose(L @ U, w * U, atol=1e-12)


def test_basis_orders():
    assert ext_basis(3, 2).tolist() == [[0, 1], [0, 2], [1, 2]]
    assert sym_basis(2, 2).tolist() == [[0, 0], [0, 1], [1, 1]]


def test_plucker_relations_hold_on_planes():
    rng = np.random.default_rng(5)
    W = rand_matrix(rng, 5)[:, :2]
    assert plucker_residual(plucker(W)) < 1e-13
    bad = PluckerVector(4, 2, rand_matrix(rng, 6)[:, 0])
    assert plucker_residual(bad) > 1e-3


def test_plucker_equivariance():
    rng = np.random.default_rng(6)
    W = rand_matrix(rng, 4)[:, :2]
    A = rand_matrix(rng, 4) + 2 * np.eye(4)
    g = rand_matrix(rng, 2) + np.eye(2)
    np.testing.assert_allclose(plucker(A @ W).coordinates,
                               induce("ext:2", A) @ plucker(W).coordinates, atol=1e-10)
    np.testing.assert_allclose(plucker(W @ g).coordinates,
                               np.linalg.det(g) * plucker(W).coordinates, atol=1e-10)


def test_plucker_rejects_dependent_columns():
    W = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]])
    with pytest.raises(DegenerateSpan):
        plucker(W)


def test_dimension_cap():
    with pytest.raises(DimensionOverflow):
        induce("sym:4", np.eye(30), cap=1000)
