import itertools
import math

import numpy as np
import pytest
from traitlets import TraitError

from chainstab.errors import EnumerationCapExceeded, InvalidInput
from chainstab.jsr import (
    LengthBounds,
    RadiusEstimator,
    SpectralBounds,
    Stability,
    decide_uniform_stability,
    direct_constrained_bound,
    estimate_radius,
    lower_bound_at,
    periodic_sweep,
    upper_bound_at,
)
from chainstab.lift import MatrixSystem, build_lift
from chainstab.linalg import operator_norm, spectral_radius
from chainstab.subshift import enumerate_words, full_shift, validate_sign_matrix

from .conftest import random_sign, random_system

SQRT_2_3 = math.sqrt(2 / 3)


def small_systems(count, seed, max_k=3, max_d=2):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        k = int(rng.integers(1, max_k + 1))
        d = int(rng.integers(1, max_d + 1))
        yield random_system(rng, k, d)


def brute_force_lower(system, n):
    """max rho(product) ** (1/n) over periodic words, by plain enumeration"""
    values = [
        spectral_radius(system.product(w)) ** (1 / n)
        for w in enumerate_words(system.sign, n, "periodic")
    ]
    return max(values, default=0.0)


def brute_force_direct(system, n):
    return max(
        operator_norm(system.product(w)) ** (1 / n)
        for w in enumerate_words(system.sign, n, "admissible")
    )


def test_lower_bound_alternating(alternating):
    value, witness = lower_bound_at(alternating, 2)
    assert value == pytest.approx(SQRT_2_3, rel=1e-12)
    assert witness == (0, 1)
    assert lower_bound_at(alternating, 1) == (0.0, None)
    assert lower_bound_at(alternating, 3) == (0.0, None)


@pytest.mark.parametrize("lam", [0.5, -2.0, 1.0])
@pytest.mark.parametrize("n", [1, 3, 5])
def test_single_scalar(lam, n):
    system = MatrixSystem([[[lam]]], full_shift(1))
    value, witness = lower_bound_at(system, n)
    assert value == pytest.approx(abs(lam), rel=1e-12)
    assert witness == (0,) * n
    upper, upper_witness = upper_bound_at(system, build_lift(system), n)
    assert upper == pytest.approx(abs(lam), rel=1e-12)
    assert upper_witness == (0,) * n


def test_upper_bound_alternating(alternating):
    lift = build_lift(alternating)
    value, witness = upper_bound_at(alternating, lift, 2)
    assert value == pytest.approx(SQRT_2_3, rel=1e-12)
    assert witness == (0, 1)
    assert upper_bound_at(alternating, lift, 1) == (pytest.approx(2.0), (0,))


def test_upper_bound_single_length(rng):
    for _ in range(10):
        system = random_system(rng, 3, 2)
        lift = build_lift(system)
        value, _ = upper_bound_at(system, lift, 1)
        assert value == pytest.approx(max(operator_norm(m) for m in lift.lifted))
        assert value >= max(operator_norm(m) for m in system.matrices) - 1e-12


def test_upper_bound_rejects(alternating, nilpotent_pair):
    with pytest.raises(InvalidInput):
        upper_bound_at(alternating, build_lift(alternating), 0)
    with pytest.raises(InvalidInput):
        upper_bound_at(alternating, build_lift(nilpotent_pair), 2)
    with pytest.raises(InvalidInput):
        lower_bound_at(alternating, 0)


def test_lower_bound_matches_brute_force():
    for system in small_systems(30, seed=2):
        for n in range(1, 6):
            value, witness = lower_bound_at(system, n)
            assert value == pytest.approx(brute_force_lower(system, n), rel=1e-12, abs=0)
            if witness is not None:
                assert spectral_radius(system.product(witness)) ** (1 / n) == pytest.approx(value)


def test_pruning_is_exact():
    for system in small_systems(30, seed=3):
        lift = build_lift(system)
        for n in range(1, 7):
            assert upper_bound_at(system, lift, n) == upper_bound_at(
                system, lift, n, prune=False
            )


def test_lift_bound_dominates_direct():
    for system in small_systems(30, seed=4):
        lift = build_lift(system)
        for n in range(1, 7):
            upper, _ = upper_bound_at(system, lift, n)
            direct, _ = direct_constrained_bound(system, n)
            assert direct == pytest.approx(brute_force_direct(system, n), rel=1e-12)
            assert upper >= direct * (1 - 1e-12)


def test_sandwich():
    for system in small_systems(20, seed=5):
        lift = build_lift(system)
        uppers = [upper_bound_at(system, lift, n)[0] for n in range(1, 7)]
        for n in range(1, 7):
            lower, _ = lower_bound_at(system, n)
            assert lower <= min(uppers) + 1e-9


@pytest.mark.parametrize("c", [2.0, 0.5])
def test_scaling_covariance(c):
    for system in small_systems(10, seed=6):
        scaled = system.scaled(c)
        lift, scaled_lift = build_lift(system), build_lift(scaled)
        for n in range(1, 6):
            lower, lower_witness = lower_bound_at(system, n)
            scaled_lower, scaled_lower_witness = lower_bound_at(scaled, n)
            assert scaled_lower == pytest.approx(c * lower, rel=1e-9)
            assert scaled_lower_witness == lower_witness
            upper, upper_witness = upper_bound_at(system, lift, n)
            scaled_upper, scaled_upper_witness = upper_bound_at(scaled, scaled_lift, n)
            assert scaled_upper == pytest.approx(c * upper, rel=1e-9)
            assert scaled_upper_witness == upper_witness


def test_threads_match_serial():
    for system in small_systems(5, seed=7, max_k=3, max_d=3):
        lift = build_lift(system)
        for n in (3, 5):
            assert upper_bound_at(system, lift, n, threads=4) == upper_bound_at(
                system, lift, n
            )
            assert periodic_sweep(system, n, threads=4) == periodic_sweep(system, n)


def test_estimate_alternating(alternating):
    bounds = estimate_radius(alternating, max_n=4)
    assert bounds.max_length == 2
    assert bounds.best_lower == pytest.approx(SQRT_2_3, abs=1e-9)
    assert bounds.best_upper == pytest.approx(SQRT_2_3, abs=1e-9)
    assert bounds.gap <= 1e-9
    trace = bounds.trace()
    assert [row["n"] for row in trace] == [1, 2]
    assert trace[0]["lower_witness"] is None
    assert trace[0]["upper"] == pytest.approx(2.0)
    assert trace[1]["lower_witness"] == [1, 2]
    d = bounds.to_dict()
    assert d["best_lower_length"] == 2
    assert d["best_lower_witness"] == [1, 2]
    assert d["best_upper_witness"] == [1, 2]


def test_estimate_identity():
    bounds = estimate_radius(MatrixSystem([np.eye(3)], full_shift(1)), max_n=5)
    assert bounds.best_lower == pytest.approx(1)
    assert bounds.best_upper == pytest.approx(1)
    for r in bounds.records:
        assert r.lower == pytest.approx(1)
        assert r.upper == pytest.approx(1)


def test_estimate_runs_to_max_length(nilpotent_pair):
    bounds = estimate_radius(nilpotent_pair, max_n=6)
    assert bounds.max_length == 6
    assert bounds.best_lower == pytest.approx(1)
    assert bounds.best_upper >= 1
    uppers = [row["best_upper"] for row in bounds.trace()]
    assert uppers == sorted(uppers, reverse=True)


def test_estimate_rejects(alternating):
    with pytest.raises(InvalidInput):
        estimate_radius(alternating, max_n=0)
    with pytest.raises(InvalidInput):
        estimate_radius(alternating, target_gap=0)


def test_estimate_with_direct(alternating):
    bounds = estimate_radius(alternating, max_n=2, direct=True)
    assert [r.direct_upper for r in bounds.records] == [
        pytest.approx(2.0),
        pytest.approx(SQRT_2_3),
    ]


def test_verdict_stable(alternating):
    verdict = decide_uniform_stability(estimate_radius(alternating))
    assert verdict.status is Stability.STABLE
    d = verdict.to_dict()
    assert d["status"] == "UniformlyStable"
    assert d["certificate"]["kind"] == "upper_bound"
    assert d["certificate"]["value"] == pytest.approx(SQRT_2_3)
    assert d["certificate"]["witness"] == [1, 2]
    assert d["max_length_searched"] == 2


def test_verdict_unstable():
    system = MatrixSystem([[[2.0]], [[3.0]]], full_shift(2))
    bounds = estimate_radius(system, max_n=3)
    assert bounds.best_lower == pytest.approx(3)
    verdict = decide_uniform_stability(bounds)
    assert verdict.status is Stability.UNSTABLE
    assert verdict.certificate == {
        "kind": "periodic_witness",
        "value": 2.0,
        "length": 1,
        "witness": [1],
    }


def test_verdict_undecided(nilpotent_pair):
    bounds = estimate_radius(nilpotent_pair, max_n=6)
    verdict = decide_uniform_stability(bounds)
    assert verdict.status is Stability.UNDECIDED
    low, high = verdict.to_dict()["bracket"]
    assert low <= 1 + 1e-12
    assert high >= 1
    assert verdict.certificate["kind"] == "bracket"


def test_verdict_empty_bounds():
    verdict = decide_uniform_stability(SpectralBounds())
    assert verdict.status is Stability.UNDECIDED
    assert verdict.to_dict()["bracket"] == [0.0, math.inf]


def test_verdict_margin():
    record = LengthBounds(n=1, lower=0.9, lower_witness=(0,), upper=1 - 1e-12, upper_witness=(0,))
    bounds = SpectralBounds([record])
    assert decide_uniform_stability(bounds).status is Stability.UNDECIDED
    assert decide_uniform_stability(bounds, margin=1e-13).status is Stability.STABLE


def test_verdict_monotone_in_length():
    for system in small_systems(10, seed=8):
        system = system.scaled(1.0 / max(estimate_radius(system, max_n=3).best_lower, 0.1))
        short = decide_uniform_stability(estimate_radius(system, max_n=2, target_gap=1e-12))
        long = decide_uniform_stability(estimate_radius(system, max_n=5, target_gap=1e-12))
        if short.status is not Stability.UNDECIDED:
            assert long.status is short.status


def test_periodic_cap_partial_is_valid(alternating):
    with pytest.raises(EnumerationCapExceeded) as excinfo:
        periodic_sweep(alternating, 2, cap=3)
    assert excinfo.value.valid
    assert excinfo.value.cap == 3


def test_upper_cap_partial_is_invalid():
    system = MatrixSystem([[[1.0]], [[0.5]]], full_shift(2))
    with pytest.raises(EnumerationCapExceeded) as excinfo:
        upper_bound_at(system, build_lift(system), 6, cap=10)
    assert not excinfo.value.valid


def test_estimate_cap_keeps_bounds(nilpotent_pair):
    with pytest.raises(EnumerationCapExceeded) as excinfo:
        estimate_radius(nilpotent_pair, max_n=10, cap=50)
    partial = excinfo.value.partial
    assert isinstance(partial, SpectralBounds)
    assert excinfo.value.valid
    assert 1 <= partial.max_length < 10


def test_constrained_sign_lowers_bounds(rng):
    sign = validate_sign_matrix([[0, 1], [1, 0]])
    for _ in range(5):
        free = random_system(rng, 2, 2, sign=full_shift(2))
        constrained = MatrixSystem(free.matrices, sign)
        for n in (2, 4):
            assert lower_bound_at(constrained, n)[0] <= lower_bound_at(free, n)[0] + 1e-12


def test_random_sign_helper(rng):
    for k in range(1, 5):
        s = random_sign(rng, k)
        assert all(any(row) for row in s.tolist())


def test_radius_estimator_traits():
    estimator = RadiusEstimator(node_cap="2K", max_length=4)
    assert estimator.node_cap == 2000
    for bad in [{"max_length": 0}, {"threads": 0}, {"target_gap": 0.0}, {"norm": "1"}]:
        with pytest.raises(TraitError):
            RadiusEstimator(**bad)
    with pytest.raises(TraitError):
        RadiusEstimator(node_cap="lots")


def test_radius_estimator(alternating):
    estimator = RadiusEstimator(max_length=3, norm="fro")
    bounds = estimator.estimate(alternating)
    assert bounds.best_upper == pytest.approx(SQRT_2_3)
    assert estimator.decide(bounds).status is Stability.STABLE


@pytest.mark.slow
def test_bounds_converge():
    rng = np.random.default_rng(41)
    shrinking = 0
    for _ in range(20):
        system = random_system(rng, 2, 2)
        lower8 = estimate_radius(system, max_n=8, target_gap=1e-12).best_lower
        system = system.scaled(0.9 / lower8)
        bounds = estimate_radius(system, max_n=10, target_gap=1e-12)
        trace = bounds.trace()
        width = [row["best_upper"] - row["best_lower"] for row in trace]
        assert width[-1] <= 0.15
        if width[-1] <= width[3]:
            shrinking += 1
    assert shrinking >= 18


def test_lexicographic_tie_break():
    # every word has the same product, so the smallest word wins
    system = MatrixSystem([np.eye(2)] * 3, full_shift(3))
    assert lower_bound_at(system, 3) == (pytest.approx(1), (0, 0, 0))
    lift = build_lift(system)
    value, witness = upper_bound_at(system, lift, 3)
    assert witness == (0, 0, 0)
    for w in itertools.product(range(3), repeat=3):
        assert operator_norm(lift.product(w)) ** (1 / 3) <= value * (1 + 1e-12)
