from fractions import Fraction

import numpy as np
import pytest

from orbitmachine.jordan import (
    IllConditionedError, OrbitClass, classify, decompose, orbit_oracle, random_instance,
)

D, B, G = OrbitClass.DIVERGES, OrbitClass.BOUNDED_AWAY, OrbitClass.DECAYS


def test_diagonal():
    T = np.diag([0.5, 1.0, 2.0])
    dec = decompose(T)
    assert dec.Z.shape == (3, 1) and dec.Y.shape == (3, 2)
    assert classify(T, [1, 0, 0], dec).cls is G
    assert classify(T, [1, 1, 0], dec).cls is B
    assert classify(T, [0, 1, 0], dec).cls is B
    assert classify(T, [0, 0, 1], dec).cls is D
    assert classify(T, [1, 1, 1], dec).cls is D


def test_jordan_block_at_one():
    # only the eigenvector (the chain head) has a bounded orbit
    T = np.array([[1.0, 1.0], [0.0, 1.0]])
    dec = decompose(T)
    assert dec.Z.shape[1] == 0 and dec.Y.shape[1] == 1
    assert classify(T, [1, 0], dec).cls is B
    assert classify(T, [0, 1], dec).cls is D
    assert orbit_oracle(T, [0, 1]).cls is D
    assert orbit_oracle(T, [1, 0]).cls is B


def test_rotation_and_nilpotent():
    c, s = 0.6, 0.8
    T = np.array([[c, -s, 0], [s, c, 0], [0, 0, 0]])
    dec = decompose(T)
    assert classify(T, [1, 2, 0], dec).cls is B
    assert classify(T, [0, 0, 1], dec).cls is G
    N = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert classify(N, [3, 4]).cls is G


def test_complex_input():
    T = np.diag([1j, 0.3 + 0.1j, 1.5])
    assert classify(T, [1, 0, 0]).cls is B
    assert classify(T, [0, 1, 0]).cls is G
    assert classify(T, [0, 1, 1]).cls is D
    assert orbit_oracle(T, np.array([1, 1, 0], dtype=complex)).cls is B


def test_decomposition_residuals():
    rng = np.random.default_rng(11)
    for _ in range(5):
        Tq, _ = random_instance(rng)
        T = Tq.astype(float)
        dec = decompose(T)
        assert dec.invariance_residual(dec.Z) < 1e-8
        assert dec.chain_residual < 1e-5
        assert np.allclose(dec.Z.conj().T @ dec.Z, np.eye(dec.Z.shape[1]), atol=1e-10)
        assert sum(cl.multiplicity for cl in dec.clusters) == T.shape[0]


def test_ill_conditioned_eigenvalue():
    T = np.diag([1.0 + 1e-7, 0.5])
    with pytest.raises(IllConditionedError):
        decompose(T)


def test_ill_conditioned_membership():
    T = np.diag([0.5, 2.0])
    with pytest.raises(IllConditionedError):
        classify(T, [1.0, 1e-5])


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        decompose(np.ones((2, 3)))
    with pytest.raises(ValueError):
        decompose(np.eye(65))
    with pytest.raises(ValueError):
        classify(np.eye(2), [0, 0])
    with pytest.raises(ValueError):
        orbit_oracle(np.eye(2), [1, 0], steps=10)


def test_oracle_exact_vs_rounding():
    # iterating in floats lets rounding feed the growing mode
    T = np.array([[Fraction(1, 2), Fraction(0)], [Fraction(0), Fraction(2)]], dtype=object)
    P = np.array([[1, 1], [1, 2]], dtype=object)
    Pi = np.array([[2, -1], [-1, 1]], dtype=object)
    A = P.dot(T).dot(Pi)
    x = P.dot(np.array([Fraction(1), Fraction(0)], dtype=object))
    assert orbit_oracle(A, x).cls is G
    assert orbit_oracle(A.astype(float), x.astype(float), exact=False).cls is not G


def test_oracle_bound_constant():
    res = orbit_oracle(np.diag([1.0, -1.0]), [1.0, 2.0])
    assert res.cls is B and res.M == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(8))
def test_random_instances_agree(seed):
    rng = np.random.default_rng(1000 + seed)
    Tq, cases = random_instance(rng)
    T = Tq.astype(float)
    dec = decompose(T)
    for x, expected in cases:
        v = classify(T, x.astype(float), dec)
        assert v.cls is expected
        assert orbit_oracle(Tq, x).cls is expected


def test_nilpotent_everything_decays():
    N = np.triu(np.ones((4, 4)), 1)
    dec = decompose(N)
    assert dec.Z.shape[1] == 4 and dec.Y.shape[1] == 4 and dec.alpha < 1e-3


def test_oracle_examples():
    assert orbit_oracle(np.diag([2.0, 1.0, 0.5]), [1, 0, 0], steps=60).cls is D
    assert orbit_oracle(np.array([[0.5, 100.0], [0.0, 0.5]]), [0, 1]).cls is G
    res = orbit_oracle(np.array([[0.6, -0.8], [0.8, 0.6]]), [1, 2])
    assert res.cls is B and res.M == pytest.approx(1.0)
