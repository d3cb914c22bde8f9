import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qjd.errors import DimensionMismatch, IndexOutOfRange, NotHermitian
from qjd.matrix import haar_unitary, random_hermitian
from qjd.spectral import SpectralMeasure, conjugate, eigendecompose, projector_for

from conftest import HADAMARD, SX, SZ


def assert_measure_close(a: SpectralMeasure, b: SpectralMeasure, tol=1e-12):
    np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, atol=tol)
    for p, q in zip(a.projectors, b.projectors):
        np.testing.assert_allclose(p, q, atol=tol)


def test_sigma_z():
    sm = eigendecompose(SZ)
    assert sm.eigenvalues == (-1.0, 1.0)
    np.testing.assert_allclose(sm.projectors[0], np.diag([0, 1]), atol=1e-15)
    np.testing.assert_allclose(sm.projectors[1], np.diag([1, 0]), atol=1e-15)


def test_identity_collapses_to_one_cluster():
    sm = eigendecompose(np.eye(3))
    assert sm.eigenvalues == (1.0,)
    np.testing.assert_allclose(sm.projectors[0], np.eye(3), atol=1e-15)
    assert sm.ranks == (3,)


def test_sigma_x():
    # eigenvectors (1, -1)/sqrt2 for -1 and (1, 1)/sqrt2 for +1
    sm = eigendecompose(SX)
    np.testing.assert_allclose(sm.eigenvalues, (-1.0, 1.0), atol=1e-15)
    np.testing.assert_allclose(sm.projectors[0], 0.5 * np.array([[1, -1], [-1, 1]]), atol=1e-15)
    np.testing.assert_allclose(sm.projectors[1], 0.5 * np.array([[1, 1], [1, 1]]), atol=1e-15)


def test_projector_for():
    np.testing.assert_allclose(projector_for(eigendecompose(SZ), 0), np.diag([0, 1]), atol=1e-15)
    np.testing.assert_allclose(projector_for(eigendecompose(np.eye(3)), 0), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(projector_for(eigendecompose(SX), 1), 0.5 * np.ones((2, 2)), atol=1e-15)
    with pytest.raises(IndexOutOfRange):
        projector_for(eigendecompose(SZ), 2)
    with pytest.raises(IndexOutOfRange):
        projector_for(eigendecompose(SZ), -1)


def test_conjugate_examples():
    sm = eigendecompose(SX)
    assert_measure_close(conjugate(sm, np.eye(2)), sm, tol=0)
    np.testing.assert_allclose(HADAMARD @ SZ @ HADAMARD, SX, atol=1e-15)
    assert_measure_close(conjugate(eigendecompose(SZ), HADAMARD), sm, tol=1e-15)
    with pytest.raises(DimensionMismatch):
        conjugate(sm, np.eye(3))


def test_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        eigendecompose([[1, 2], [0, 1]])


def test_near_degenerate_eigenvalues_merge_with_mean():
    u = haar_unitary(3, 4).matrix
    a = u @ np.diag([2.0, 2.0 + 1e-10, 5.0]) @ u.conj().T
    sm = eigendecompose(a)
    assert len(sm) == 2
    assert sm.ranks == (2, 1)
    assert sm.eigenvalues[0] == pytest.approx(2.0 + 5e-11, abs=1e-13)
    assert sm.invariants_hold(a)


def test_cluster_threshold_is_relative():
    # gap 5e-7 at scale 100 is below 1e-8 * 100
    assert len(eigendecompose(np.diag([100.0, 100.0 + 5e-7]))) == 1
    assert len(eigendecompose(np.diag([1.0, 1.0 + 5e-7]))) == 2


def test_json_round_trip():
    sm = eigendecompose(random_hermitian(4, 3))
    back = SpectralMeasure.from_json(json.loads(json.dumps(sm.to_json())))
    assert_measure_close(back, sm, tol=0)


def test_reconstruction_over_corpus():
    # 200 seeded inputs, dims 2..8
    worst = 0.0
    for seed in range(200):
        dim = 2 + seed % 7
        a = random_hermitian(dim, seed).matrix
        errs = eigendecompose(a, validate=False).invariant_errors(a)
        worst = max(worst, errs["reconstruction"])
        assert errs["resolution"] <= 1e-8 and errs["orthogonal"] <= 1e-8
    assert worst <= 1e-7


@given(dim=st.integers(2, 8), seed=st.integers(0, 2**63))
@settings(max_examples=60, deadline=None)
def test_conjugation_covariance(dim, seed):
    a = random_hermitian(dim, seed).matrix
    u = haar_unitary(dim, seed, stream=1).matrix
    sm = eigendecompose(a)
    moved = eigendecompose(u @ a @ u.conj().T)
    np.testing.assert_allclose(moved.eigenvalues, sm.eigenvalues, atol=1e-8)
    assert moved.ranks == sm.ranks
    gaps = np.diff(sm.eigenvalues)
    if gaps.size == 0 or gaps.min() > 10 * 1e-8 * max(1, np.abs(sm.eigenvalues).max()):
        for p, q in zip(conjugate(sm, u).projectors, moved.projectors):
            assert np.linalg.norm(p - q) <= 1e-6


@given(dim=st.integers(2, 6), seed=st.integers(0, 2**63), levels=st.integers(1, 3))
@settings(max_examples=60, deadline=None)
def test_degenerate_inputs_satisfy_invariants(dim, seed, levels):
    u = haar_unitary(dim, seed).matrix
    diag = np.arange(dim) % levels
    a = u @ np.diag(diag.astype(float)) @ u.conj().T
    sm = eigendecompose(a)
    assert len(sm) == len(set(diag))
    assert sm.invariants_hold(a)
    assert conjugate(sm, haar_unitary(dim, seed, stream=3)).ranks == sm.ranks
