import itertools

import numpy as np
import pytest

from chainstab.errors import InvalidInput
from chainstab.lift import (
    MatrixSystem,
    block_pattern,
    build_lift,
    check_annihilation,
    lifted_product,
    lifted_vs_base_radius,
    selector_pattern,
)
from chainstab.linalg import kron, operator_norm, spectral_radius
from chainstab.subshift import (
    enumerate_words,
    full_shift,
    is_admissible,
    is_periodically_extendable,
    row_selector,
    validate_sign_matrix,
)

from .conftest import random_system


def random_systems(count=50, seed=1):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        k = int(rng.integers(1, 5))
        d = int(rng.integers(1, 4))
        yield random_system(rng, k, d)


def test_matrix_system_rejects():
    sign = full_shift(2)
    with pytest.raises(InvalidInput):
        MatrixSystem([], full_shift(1))
    with pytest.raises(InvalidInput) as excinfo:
        MatrixSystem([np.eye(2), np.eye(3)], sign)
    assert excinfo.value.location == "matrix 2"
    with pytest.raises(InvalidInput):
        MatrixSystem([np.eye(2)], sign)


def test_matrix_system_scaled(alternating):
    half = alternating.scaled(0.5)
    assert half.matrices[0][0, 0] == 1.0
    assert half.sign == alternating.sign
    assert half != alternating
    assert half.scaled(2) == alternating


def test_lift_triangle(triangle_sign):
    system = MatrixSystem([[[1.0]]] * 3, triangle_sign)
    lift = build_lift(system)
    assert [m.tolist() for m in lift.lifted] == [
        [[0, 1, 1], [0, 0, 0], [0, 0, 0]],
        [[0, 0, 0], [1, 0, 1], [0, 0, 0]],
        [[0, 0, 0], [0, 0, 0], [1, 1, 0]],
    ]


def test_lift_alternating(alternating):
    lift = build_lift(alternating)
    assert lift.size == 2
    assert lift.dimension == 1
    assert lift.lifted[0].tolist() == [[0, 2], [0, 0]]
    assert np.allclose(lift.lifted[1], [[0, 0], [1 / 3, 0]])
    assert np.allclose(lifted_product(lift, (0, 1)), [[2 / 3, 0], [0, 0]])


def test_lift_single_state():
    s1 = np.array([[1.0, 2.0], [3.0, 4.0]])
    lift = build_lift(MatrixSystem([s1], full_shift(1)))
    assert np.array_equal(lift.lifted[0], s1)


def test_lift_is_kron():
    for system in random_systems(20, seed=3):
        lift = build_lift(system)
        for k, m in enumerate(system.matrices):
            expected = kron(row_selector(system.sign, k), m)
            assert np.array_equal(lift.lifted[k], expected)
            assert not lift.lifted[k].flags.writeable


def test_annihilation_examples(alternating):
    lift = build_lift(alternating)
    assert check_annihilation(lift, (0, 0))
    assert not check_annihilation(lift, (0, 1))
    generic = MatrixSystem([[[1.0, 2.0], [0.5, 1.0]], [[0.3, -1.0], [2.0, 1.0]]], full_shift(2))
    glift = build_lift(generic)
    for w in itertools.product(range(2), repeat=3):
        assert not check_annihilation(glift, w)
    with pytest.raises(InvalidInput):
        check_annihilation(lift, (0,))


def test_annihilation_badly_scaled():
    big_small = MatrixSystem([np.diag([1e6, 1e-6]), np.diag([1e-6, 1e6])], full_shift(2))
    lift = build_lift(big_small)
    assert np.abs(lift.product((0, 1))).max() == pytest.approx(1.0)
    assert not check_annihilation(lift, (0, 1))
    assert not check_annihilation(lift, (1, 0))

    # the product stays at 1 however long the word gets
    doubling = MatrixSystem([[[2.0]], [[0.5]]], full_shift(2))
    dlift = build_lift(doubling)
    word = (0, 1) * 1000
    assert not check_annihilation(dlift, word)


def test_radius_examples(alternating):
    lift = build_lift(alternating)
    base, lifted = lifted_vs_base_radius(alternating, lift, (0, 1))
    assert base == pytest.approx(2 / 3)
    assert lifted == pytest.approx(2 / 3)

    one_way = MatrixSystem([[[2.0]], [[1 / 3]]], validate_sign_matrix([[1, 1], [1, 1]]))
    no_wrap = MatrixSystem([[[2.0]], [[1 / 3]]], validate_sign_matrix([[0, 1], [0, 1]]))
    assert lifted_vs_base_radius(one_way, build_lift(one_way), (0, 1)) == pytest.approx(
        (2 / 3, 2 / 3)
    )
    assert lifted_vs_base_radius(no_wrap, build_lift(no_wrap), (0, 1)) == pytest.approx(
        (0, 0), abs=1e-12
    )

    identity = MatrixSystem([np.eye(2)], full_shift(1))
    assert lifted_vs_base_radius(identity, build_lift(identity), (0,)) == pytest.approx((1, 1))

    with pytest.raises(InvalidInput):
        lifted_vs_base_radius(alternating, lift, (0, 0))


def test_forbidden_words_vanish_exactly():
    for system in random_systems():
        lift = build_lift(system)
        for n in range(2, 7):
            for w in enumerate_words(system.sign, n, "free"):
                if not is_admissible(w, system.sign):
                    assert np.abs(lift.product(w)).max() == 0.0, w


def test_lift_preserves_periodic_radius():
    for system in random_systems():
        lift = build_lift(system)
        for n in range(1, 7):
            for w in enumerate_words(system.sign, n, "admissible"):
                base, lifted = lifted_vs_base_radius(system, lift, w)
                assert abs(base - lifted) <= 1e-8 * (1 + lifted), w
                if not is_periodically_extendable(w, system.sign):
                    assert lifted <= 1e-8 * operator_norm(lift.product(w)) + 1e-300, w


def test_lifted_norm_dominates():
    for system in random_systems(seed=5):
        lift = build_lift(system)
        for n in range(1, 6):
            for w in enumerate_words(system.sign, n, "admissible"):
                assert (
                    operator_norm(lift.product(w))
                    >= operator_norm(system.product(w)) - 1e-10
                )


@pytest.mark.parametrize("k", [1, 2, 3])
def test_block_pattern_matches_selectors(k):
    rng = np.random.default_rng(k)
    rows = [r for r in itertools.product((0, 1), repeat=k) if any(r)]
    for grid in itertools.product(rows, repeat=k):
        sign = validate_sign_matrix([list(r) for r in grid])
        # strictly positive entries, so no accidental cancellation
        system = MatrixSystem([rng.uniform(0.5, 1.5, (2, 2)) for _ in range(k)], sign)
        lift = build_lift(system)
        for n in range(1, 5):
            for w in enumerate_words(sign, n, "free"):
                assert np.array_equal(
                    block_pattern(lift.product(w), k, 2), selector_pattern(sign, w)
                ), (grid, w)


def test_radius_of_lift_single_words():
    for system in random_systems(10, seed=11):
        lift = build_lift(system)
        for k in range(system.size):
            expected = spectral_radius(system.matrices[k]) if system.sign.allows(k, k) else 0
            assert spectral_radius(lift.lifted[k]) == pytest.approx(expected, abs=1e-8)
