import numpy as np
import pytest

from cohdec.tensors import contract, entropy_from_spectrum, svd_truncate
from oracles import naive_contract


def test_contract_identity_on_vector():
    eye = np.eye(2, dtype=complex)
    v = np.array([1.0, 0.0], dtype=complex)
    out = contract(eye, v, [(1, 0)])
    assert np.allclose(out, [1.0, 0.0])


def test_contract_full_inner_product():
    a = np.array([1.0, 1j])
    out = contract(a, a, [(0, 0)])
    assert abs(out) < 1e-15  # 1 + i^2 = 0


def test_contract_matrix_product_matches_naive_loops():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
    b = rng.normal(size=(4, 5)) + 1j * rng.normal(size=(4, 5))
    out = contract(a, b, [(1, 0)])
    assert np.allclose(out, naive_contract(a, b, [(1, 0)]), atol=1e-13)


def test_contract_random_tensors_match_naive_loops():
    rng = np.random.default_rng(7)
    for _ in range(8):
        sha = tuple(rng.integers(1, 6, size=3))
        shb = (sha[2], int(rng.integers(1, 6)), sha[0])
        a = rng.normal(size=sha) + 1j * rng.normal(size=sha)
        b = rng.normal(size=shb) + 1j * rng.normal(size=shb)
        pairs = [(2, 0), (0, 2)]
        assert np.allclose(contract(a, b, pairs), naive_contract(a, b, pairs),
                           atol=1e-12)


def test_contract_is_bilinear():
    rng = np.random.default_rng(11)
    a1 = rng.normal(size=(2, 3))
    a2 = rng.normal(size=(2, 3))
    b = rng.normal(size=(3, 2))
    lhs = contract(2.0 * a1 + 3.0 * a2, b, [(1, 0)])
    rhs = 2.0 * contract(a1, b, [(1, 0)]) + 3.0 * contract(a2, b, [(1, 0)])
    assert np.allclose(lhs, rhs)


def test_contract_extent_mismatch_raises():
    with pytest.raises(ValueError):
        contract(np.zeros((2, 3)), np.zeros((4, 2)), [(1, 0)])


def test_svd_identity_keeps_unit_spectrum():
    res = svd_truncate(np.eye(2, dtype=complex), split=1, chi_max=2)
    assert np.allclose(res.s, [1.0, 1.0])
    assert res.discarded_weight == 0.0


def test_svd_truncation_discarded_weight():
    t = np.diag([1.0, 1e-3]).astype(complex)
    res = svd_truncate(t, split=1, chi_max=1, tol=0.0)
    assert np.allclose(res.s, [1.0])
    assert np.isclose(res.discarded_weight, 1e-6 / (1 + 1e-6))


def test_svd_full_rank_reconstruction():
    rng = np.random.default_rng(5)
    t = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    res = svd_truncate(t, split=1, chi_max=8, tol=0.0)
    rec = res.u @ np.diag(res.s) @ res.v
    assert np.linalg.norm(rec - t) < 1e-12 * np.linalg.norm(t)


def test_svd_isometry_conditions():
    rng = np.random.default_rng(9)
    t = rng.normal(size=(4, 3, 5)) + 1j * rng.normal(size=(4, 3, 5))
    res = svd_truncate(t, split=2, chi_max=6)
    u = res.u.reshape(12, -1)
    v = res.v.reshape(len(res.s), -1)
    assert np.linalg.norm(u.conj().T @ u - np.eye(u.shape[1])) < 1e-12
    assert np.linalg.norm(v @ v.conj().T - np.eye(v.shape[0])) < 1e-12
    assert np.all(np.diff(res.s) <= 1e-15)


def test_svd_multileg_reconstruction():
    rng = np.random.default_rng(13)
    t = rng.normal(size=(2, 3, 4, 2)) + 1j * rng.normal(size=(2, 3, 4, 2))
    res = svd_truncate(t, split=2, chi_max=100, tol=0.0)
    rec = np.tensordot(res.u, np.tensordot(np.diag(res.s), res.v, axes=(1, 0)),
                       axes=(2, 0))
    assert np.allclose(rec, t, atol=1e-12)


def test_svd_zero_tensor():
    res = svd_truncate(np.zeros((3, 3), dtype=complex), split=1, chi_max=2)
    assert len(res.s) == 1 and res.s[0] == 0.0
    assert res.discarded_weight == 0.0


def test_svd_rejects_bad_arguments():
    with pytest.raises(ValueError):
        svd_truncate(np.eye(2), split=1, chi_max=0)
    with pytest.raises(ValueError):
        svd_truncate(np.eye(2), split=1, chi_max=1, tol=-1.0)


def test_entropy_single_value_is_zero():
    assert entropy_from_spectrum(np.array([1.0])) == 0.0


def test_entropy_two_equal_values():
    assert np.isclose(entropy_from_spectrum(np.array([1.0, 1.0])), np.log(2))


def test_entropy_weighted_spectrum():
    # p = (4/5, 1/5)
    expected = -(0.8 * np.log(0.8) + 0.2 * np.log(0.2))
    assert np.isclose(entropy_from_spectrum(np.array([2.0, 1.0])), expected)


def test_entropy_scale_invariance():
    rng = np.random.default_rng(17)
    s = rng.random(6)
    assert np.isclose(entropy_from_spectrum(s), entropy_from_spectrum(7.3 * s))


def test_entropy_rejects_zero_spectrum():
    with pytest.raises(ValueError):
        entropy_from_spectrum(np.zeros(3))
