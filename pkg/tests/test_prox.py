import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import conj_prox_closed_form, grid_optimal, operand_shape, random_functionals, \
    scalar_prox, svd_soft_threshold, vector2_prox
from structprior.prox import GroupL1, NonnegIndicator, NuclearL1, QuadraticFidelity, \
    RobustL1Fidelity, Scaled, SquaredNorm, Zero, conjugate_prox, prox, prox_shifted, svd_2col


def test_prox_examples():
    assert np.array_equal(prox(NonnegIndicator(), np.array([-1.0, 2.0]), 1.0), [0.0, 2.0])
    out = prox(GroupL1(1.0), np.array([[3.0, 4.0]]), 2.0)
    assert np.allclose(out, [[1.8, 2.4]])
    assert np.allclose(vector2_prox(GroupL1(1.0), np.array([3.0, 4.0]), 2.0), [1.8, 2.4],
                       atol=1e-6)
    M = np.diag([5.0, 1.0])[None]
    assert np.allclose(prox(NuclearL1(1.0), M, 2.0), np.diag([3.0, 0.0]), atol=1e-12)
    assert np.allclose(svd_soft_threshold(M, 2.0), np.diag([3.0, 0.0]))
    assert prox(SquaredNorm(0.5), np.array([2.0]), 1.0) == pytest.approx(1.0)
    assert np.array_equal(prox(Zero(), np.array([1.5, -2.0]), 3.0), [1.5, -2.0])


def test_group_shrinkage_of_zero_vector():
    z = np.zeros((4, 2))
    assert np.array_equal(prox(GroupL1(1.0), z, 1.0), z)
    assert np.array_equal(prox(NuclearL1(1.0), np.zeros((4, 2, 2)), 1.0), np.zeros((4, 2, 2)))


@pytest.mark.parametrize("F", [
    SquaredNorm(0.7),
    GroupL1(1.3),
    QuadraticFidelity(np.array([0.4]), 1.0),
    QuadraticFidelity(np.array([-1.2]), 2.5),
    RobustL1Fidelity(np.array([0.3]), 1.0),
    Zero(),
])
def test_scalar_prox_matches_golden_section(F):
    rng = np.random.default_rng(0)
    for _ in range(100):
        z, sigma = rng.normal() * 3, rng.uniform(0.05, 4)
        got = F.prox(np.array([z]), sigma)[0]
        assert got == pytest.approx(scalar_prox(F, z, sigma), abs=1e-6)


def test_nonneg_prox_matches_golden_section():
    rng = np.random.default_rng(1)
    F = NonnegIndicator()
    for _ in range(100):
        z = rng.normal() * 3
        ref = scalar_prox(F, z, 1.0, lo=0.0, hi=abs(z) + 10)
        assert F.prox(np.array([z]), 1.0)[0] == pytest.approx(ref, abs=1e-6)


def test_group_prox_matches_nested_search():
    rng = np.random.default_rng(2)
    for _ in range(30):
        w, sigma = rng.uniform(0.1, 2), rng.uniform(0.1, 2)
        shift = rng.normal(size=(1, 2))
        F = GroupL1(w, shift)
        z = rng.normal(size=(1, 2)) * 2
        ref = vector2_prox(F, z, sigma)
        assert np.allclose(F.prox(z, sigma).ravel(), ref, atol=1e-6)


def test_nuclear_prox_matches_svd_oracle():
    rng = np.random.default_rng(3)
    for d in (2, 3):
        M = rng.normal(size=(100, d, 2)) * rng.uniform(0.1, 5, size=(100, 1, 1))
        t = rng.uniform(0.05, 3)
        assert np.max(np.abs(NuclearL1(1.0).prox(M, t) - svd_soft_threshold(M, t))) <= 1e-8


def test_every_kind_is_grid_optimal():
    rng = np.random.default_rng(4)
    for _ in range(10):
        for F in random_functionals(rng, (2, 2), (1, 2, 2)):
            z = rng.normal(size=operand_shape(F, (2, 2), (1, 2, 2))) * 2
            sigma = rng.uniform(0.1, 3)
            assert grid_optimal(F, F.prox(z, sigma), z, sigma), F


def test_shift_rule():
    rng = np.random.default_rng(5)
    z = rng.normal(size=(6, 2))
    xi = rng.normal(size=(6, 2))
    plain = GroupL1(0.8)
    assert np.array_equal(GroupL1(0.8, np.zeros((6, 2))).prox(z, 1.2), plain.prox(z, 1.2))
    assert np.allclose(GroupL1(0.8, xi).prox(xi, 1.2), xi)
    assert np.allclose(prox_shifted(lambda q: plain.prox(q, 1.2), z, xi),
                       GroupL1(0.8, xi).prox(z, 1.2))
    with pytest.raises(ValueError):
        GroupL1(1.0, np.zeros((5, 2))).prox(z, 1.0)


def test_conjugate_prox_matches_closed_forms():
    rng = np.random.default_rng(6)
    for _ in range(20):
        for F in random_functionals(rng):
            y = rng.normal(size=operand_shape(F)) * 3
            sigma = rng.uniform(0.1, 5)
            got = conjugate_prox(F, y, sigma)
            assert np.allclose(got, conj_prox_closed_form(F, y, sigma), atol=1e-10), F


def test_moreau_identity_all_kinds():
    rng = np.random.default_rng(7)
    for _ in range(20):
        for F in random_functionals(rng):
            z = rng.normal(size=operand_shape(F)) * 3
            total = F.prox(z, 1.0) + F.conj_prox(z, 1.0)
            assert np.max(np.abs(total - z)) <= 1e-10


def test_fenchel_young_at_prox_pairs():
    # F(x) + F*(p) = <x, p> for x = prox_F(z), p = z - x
    rng = np.random.default_rng(8)
    for F in random_functionals(rng):
        z = rng.normal(size=operand_shape(F)) * 3
        x = F.prox(z, 1.0)
        p = z - x
        assert F(x) + F.convex_conj(p) == pytest.approx(np.vdot(x, p), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.01, 10))
def test_firm_nonexpansive(seed, sigma):
    rng = np.random.default_rng(seed)
    for F in random_functionals(rng):
        shape = operand_shape(F)
        a, b = rng.normal(size=(2,) + shape) * 3
        pa, pb = F.prox(a, sigma), F.prox(b, sigma)
        assert np.vdot(pa - pb, a - b) >= np.sum((pa - pb) ** 2) - 1e-10


def test_step_size_and_weight_validation():
    for F in (SquaredNorm(), GroupL1(), NonnegIndicator(), Zero()):
        with pytest.raises(ValueError):
            F.prox(np.zeros((2, 2)), 0.0)
        with pytest.raises(ValueError):
            conjugate_prox(F, np.zeros((2, 2)), -1.0)
    with pytest.raises(ValueError):
        SquaredNorm(-1.0)
    with pytest.raises(ValueError):
        QuadraticFidelity(np.zeros(3)).prox(np.zeros(4), 1.0)


def test_scaled_prox_matches_grid_search():
    rng = np.random.default_rng(9)
    for inner in (RobustL1Fidelity(np.array([0.5])), QuadraticFidelity(np.array([-0.3])),
                  SquaredNorm(1.5)):
        F = Scaled(inner, 2.0)
        for _ in range(20):
            z, sigma = rng.normal() * 2, rng.uniform(0.1, 2)
            assert F.prox(np.array([z]), sigma)[0] == pytest.approx(scalar_prox(F, z, sigma),
                                                                  abs=1e-6)
    F = Scaled(GroupL1(0.3), 1.0)
    z = rng.normal(size=(5, 2))
    assert np.max(np.abs(F.prox(z, 0.7) - GroupL1(0.3).prox(z, 0.7))) <= 1e-12


def test_svd_2col_examples_and_oracle():
    U, s1, s2, V = svd_2col(np.zeros((3, 2)))
    assert s1 == 0 and s2 == 0
    U, s1, s2, V = svd_2col(np.eye(2))
    assert s1 == pytest.approx(1) and s2 == pytest.approx(1)
    rng = np.random.default_rng(10)
    for d in (2, 3):
        M = rng.normal(size=(100, d, 2))
        U, s1, s2, V = svd_2col(M)
        ref = np.linalg.svd(M, compute_uv=False)
        assert np.max(np.abs(s1 - ref[:, 0])) <= 1e-10
        assert np.max(np.abs(s2 - ref[:, 1])) <= 1e-10
        rec = np.einsum("...ij,...j,...kj->...ik", U, np.stack([s1, s2], -1), V)
        err = np.linalg.norm(rec - M, axis=(-2, -1)) / np.linalg.norm(M, axis=(-2, -1))
        assert np.max(err) <= 1e-10
        assert np.allclose(np.einsum("...ji,...jk->...ik", U, U), np.eye(2), atol=1e-10)
    with pytest.raises(ValueError):
        svd_2col(np.zeros((4, 2)))


def test_svd_2col_rank_one_factors_orthonormal():
    M = np.array([[[1.0, 2.0], [2.0, 4.0]], [[0.0, 0.0], [3.0, 0.0]]])
    U, s1, s2, V = svd_2col(M)
    assert np.allclose(s2, 0)
    assert np.allclose(np.einsum("...ji,...jk->...ik", U, U), np.eye(2))
    assert np.allclose(np.einsum("...ji,...jk->...ik", V, V), np.eye(2))
