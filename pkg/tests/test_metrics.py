import numpy as np
import pytest

from pointsym.library import build_poly_library
from pointsym.metrics import (
    TRUTH_NAMES,
    encode_generator,
    grassmann_distance,
    linear_part,
    orthonormalize,
    truth_algebra,
    truth_library,
    truth_matrix,
)
from pointsym.symexpr import JetSpace


def test_orthonormalize():
    Q = np.linalg.qr(np.random.default_rng(0).normal(size=(6, 3)))[0]
    out = orthonormalize(Q)
    np.testing.assert_allclose(out.T @ out, np.eye(3), atol=1e-14)
    axes = orthonormalize(np.array([[2.0, 0], [0, 0], [0, 3.0]]))
    np.testing.assert_allclose(np.abs(axes), [[1, 0], [0, 0], [0, 1]])
    B = np.random.default_rng(1).normal(size=(5, 2))
    assert grassmann_distance(orthonormalize(B), np.linalg.qr(B)[0]) < 1e-7
    with pytest.raises(np.linalg.LinAlgError):
        orthonormalize(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_grassmann_trivial_cases():
    e1, e2 = np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])
    diag = np.array([[1.0], [1.0]]) / np.sqrt(2)
    assert grassmann_distance(e1, e1) == 0.0
    assert abs(grassmann_distance(e1, e2) - np.pi / 2) < 1e-12
    assert abs(grassmann_distance(e1, diag) - np.pi / 4) < 1e-12


def test_grassmann_symmetry_and_rotation_invariance():
    rng = np.random.default_rng(2)
    Q1 = np.linalg.qr(rng.normal(size=(10, 3)))[0]
    Q2 = np.linalg.qr(rng.normal(size=(10, 3)))[0]
    R1 = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    R2 = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    d = grassmann_distance(Q1, Q2)
    assert d > 0
    assert abs(d - grassmann_distance(Q2, Q1)) < 1e-10
    assert abs(d - grassmann_distance(Q1 @ R1, Q2 @ R2)) < 1e-10
    assert grassmann_distance(Q1, Q1 @ R1) < 1e-7


def test_grassmann_input_checks():
    with pytest.raises(ValueError):
        grassmann_distance(np.eye(3)[:, :2], np.eye(3)[:, :1])
    with pytest.raises(ValueError):
        grassmann_distance(np.ones((3, 1)), np.eye(3)[:, :1])


@pytest.mark.parametrize("name,d", [("burgers", 6), ("kdv", 4), ("heat", 8), ("wave2d", 20),
                                    ("schrodinger2d", 6), ("schrodinger2d_galilei", 8), ("rd2d", 5), ("topquark", 7), ("circle", 1)])
def test_truth_algebra_dimensions(name, d):
    Q = truth_algebra(name)
    assert Q.shape[1] == d
    np.testing.assert_allclose(Q.T @ Q, np.eye(d), atol=1e-12)


def test_burgers_projective_generator_encoding():
    lib = truth_library("burgers")
    W = encode_generator({"t": "4*t^2", "x": "4*t*x", "u": "-x^2 - 2*t"}, lib).reshape(3, lib.r)
    names = lib.texts()
    assert W[0, names.index("t^2")] == 4 and W[1, names.index("t*x")] == 4
    assert W[2, names.index("x^2")] == -1 and W[2, names.index("t")] == -2
    T = truth_matrix("burgers", lib)
    assert np.linalg.matrix_rank(np.column_stack([T, W.reshape(-1)])) == 6


def test_generator_outside_library():
    lib = truth_library("burgers")
    with pytest.raises(ValueError):
        encode_generator({"t": "t^3"}, lib)
    with pytest.raises(ValueError):
        encode_generator({"z": "1"}, lib)
    with pytest.raises(KeyError):
        truth_algebra("navier")
    assert set(TRUTH_NAMES) >= {"burgers", "topquark"}


def test_truth_library_must_match():
    other = build_poly_library(2, 1, 2, JetSpace(("t", "y"), ("u",)))
    with pytest.raises(ValueError):
        truth_matrix("burgers", other)


def test_linear_part():
    lib = truth_library("burgers")
    T = truth_algebra("burgers", lib)
    L = linear_part(T, lib)
    mask = np.tile(np.array(lib.linear_mask()), 3)
    assert np.all(L[~mask] == 0)
    np.testing.assert_allclose(L.T @ L, np.eye(L.shape[1]), atol=1e-12)
    assert linear_part(T, lib, rank=2).shape[1] == 2


def test_grassmann_small_angles_are_resolved():
    for delta in (1e-3, 1e-9, 1e-14):
        a = np.array([[1.0], [0.0]])
        b = np.array([[np.cos(delta)], [np.sin(delta)]])
        assert grassmann_distance(a, b) == pytest.approx(delta, rel=1e-6)
