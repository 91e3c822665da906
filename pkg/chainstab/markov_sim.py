"""
Markov chains with a constant transition sign matrix, and Monte Carlo
estimates of the top Lyapunov exponent of the matrix products they drive.

Random streams
--------------
Every trajectory draws from its own stream,
``Philox(SeedSequence(seed, spawn_key=(trajectory,)))``, so estimates do
not depend on how trajectories are scheduled across threads.
RandomPerturbed schedules draw their time-dependent matrices from
``Philox(SeedSequence(seed, spawn_key=(_SCHEDULE_KEY, block)))`` in
blocks of ``_SCHEDULE_BLOCK`` steps, so ``matrix_at(t)`` is
reproducible and random access. Changing either layout changes results
and must be called out in the changelog.
"""

import math
from collections import namedtuple
from functools import lru_cache

import numpy as np
from traitlets import Integer, TraitError, Unicode, validate
from traitlets.config import LoggingConfigurable

from .errors import InvalidInput, NumericalFailure
from .jsr import periodic_sweep
from .lift import MatrixSystem
from .linalg import NORM_KINDS, as_matrix, operator_norm
from .log import log_duration
from .metrics import TRAJECTORIES
from .subshift import SignMatrix, format_word, is_irreducible
from .utils import beats, map_partitions

STOCHASTIC_ATOL = 1e-12
STATIONARY_TOL = 1e-12

_SCHEDULE_KEY = 2**32 - 1
_SCHEDULE_BLOCK = 4096
# trajectories are simulated in chunks of this many steps
_TIME_CHUNK = 4096

LOG2 = math.log(2.0)


def trajectory_stream(seed, trajectory):
    """The random generator of one trajectory"""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trajectory,)))
    )


def _check_stochastic(p, sign: SignMatrix, name):
    """Check that `p` is row-stochastic with exactly the support of `sign`"""
    p = as_matrix(p, name=name)
    k = sign.size
    if p.shape != (k, k):
        raise InvalidInput(
            f"{name} is {p.shape[0]}x{p.shape[1]}, expected {k}x{k}", location=name
        )
    for i in range(k):
        for j in range(k):
            allowed = sign.allows(i, j)
            if allowed and not p[i, j] > 0:
                raise InvalidInput(
                    f"{name} has p[{i + 1},{j + 1}] = {p[i, j]!r} but the sign matrix allows {i + 1}->{j + 1}",
                    location=f"{name} row {i + 1}",
                )
            if not allowed and p[i, j] != 0:
                raise InvalidInput(
                    f"{name} has p[{i + 1},{j + 1}] = {p[i, j]!r} but the sign matrix forbids {i + 1}->{j + 1}",
                    location=f"{name} row {i + 1}",
                )
        total = math.fsum(p[i])
        if abs(total - 1.0) > STOCHASTIC_ATOL:
            raise InvalidInput(
                f"{name} row {i + 1} sums to {total!r}, expected 1",
                location=f"{name} row {i + 1}",
            )
    return p


def uniform_on_support(sign: SignMatrix):
    """The stochastic matrix spreading each row uniformly over its allowed transitions"""
    entries = sign.entries.astype(np.float64)
    p = entries / entries.sum(axis=1, keepdims=True)
    p.setflags(write=False)
    return p


class TransitionSchedule:
    """A time-indexed family of stochastic matrices P(t) sharing one sign matrix

    initial: initial distribution, every entry > 0 (uniform by default)
    """

    mode = None

    def __init__(self, sign: SignMatrix, initial=None):
        self.sign = sign
        k = sign.size
        if initial is None:
            initial = np.full(k, 1.0 / k)
        initial = np.array(initial, dtype=np.float64)
        if initial.shape != (k,):
            raise InvalidInput(
                f"initial distribution has {initial.size} entries, expected {k}",
                location="initial_distribution",
            )
        if not np.all(np.isfinite(initial)) or not np.all(initial > 0):
            raise InvalidInput(
                "initial distribution must have every entry > 0",
                location="initial_distribution",
            )
        if abs(math.fsum(initial) - 1.0) > STOCHASTIC_ATOL:
            raise InvalidInput(
                f"initial distribution sums to {math.fsum(initial)!r}, expected 1",
                location="initial_distribution",
            )
        initial.setflags(write=False)
        self.initial = initial

    def matrix_at(self, t):
        """P(t)"""
        raise NotImplementedError()

    def matrices(self, start, stop):
        """Array of P(start), ..., P(stop - 1)"""
        k = self.sign.size
        if stop <= start:
            return np.empty((0, k, k))
        return np.stack([self.matrix_at(t) for t in range(start, stop)])

    def to_dict(self):
        raise NotImplementedError()


class Constant(TransitionSchedule):
    """P(t) = P for all t"""

    mode = "constant"

    def __init__(self, sign, matrix=None, initial=None):
        super().__init__(sign, initial)
        if matrix is None:
            matrix = uniform_on_support(sign)
        self.matrix = _check_stochastic(matrix, sign, "schedule matrix")

    def matrix_at(self, t):
        return self.matrix

    def matrices(self, start, stop):
        return np.broadcast_to(self.matrix, (max(stop - start, 0),) + self.matrix.shape)

    def to_dict(self):
        return {"mode": self.mode, "matrix": self.matrix.tolist()}


class PeriodicList(TransitionSchedule):
    """P(t) = P_(t mod m) for a list P_0, ..., P_(m-1)"""

    mode = "periodic_list"

    def __init__(self, sign, matrices, initial=None):
        super().__init__(sign, initial)
        if len(matrices) == 0:
            raise InvalidInput("periodic schedule needs at least one matrix")
        self.matrix_list = tuple(
            _check_stochastic(m, sign, f"schedule matrix {i + 1}")
            for i, m in enumerate(matrices)
        )

    def matrix_at(self, t):
        return self.matrix_list[t % len(self.matrix_list)]

    def to_dict(self):
        return {"mode": self.mode, "matrices": [m.tolist() for m in self.matrix_list]}


class RandomPerturbed(TransitionSchedule):
    """P(t) drawn around a base matrix with the same support

    Each allowed entry is ``base * (1 + amplitude * u)`` with u uniform
    in [-1, 1), and rows are renormalized, so the support stays exact
    for 0 <= amplitude < 1.
    """

    mode = "random_perturbed"

    def __init__(self, sign, base=None, amplitude=0.5, seed=0, initial=None):
        super().__init__(sign, initial)
        if base is None:
            base = uniform_on_support(sign)
        self.base = _check_stochastic(base, sign, "schedule base")
        if not 0 <= amplitude < 1:
            raise InvalidInput(
                f"amplitude must be in [0, 1), got {amplitude!r}", location="amplitude"
            )
        if not isinstance(seed, int) or seed < 0:
            raise InvalidInput(f"seed must be a non-negative integer, got {seed!r}")
        self.amplitude = float(amplitude)
        self.seed = seed
        self._block = lru_cache(maxsize=4)(self._make_block)

    def _make_block(self, b):
        k = self.sign.size
        rng = np.random.Generator(
            np.random.Philox(
                np.random.SeedSequence(self.seed, spawn_key=(_SCHEDULE_KEY, b))
            )
        )
        u = 2.0 * rng.random((_SCHEDULE_BLOCK, k, k)) - 1.0
        p = self.base * (1.0 + self.amplitude * u)
        p /= p.sum(axis=2, keepdims=True)
        p.setflags(write=False)
        return p

    def matrix_at(self, t):
        return self._block(t // _SCHEDULE_BLOCK)[t % _SCHEDULE_BLOCK]

    def matrices(self, start, stop):
        parts = []
        t = start
        while t < stop:
            b, offset = divmod(t, _SCHEDULE_BLOCK)
            n = min(stop - t, _SCHEDULE_BLOCK - offset)
            parts.append(self._block(b)[offset : offset + n])
            t += n
        if not parts:
            return super().matrices(start, stop)
        return np.concatenate(parts)

    def to_dict(self):
        return {
            "mode": self.mode,
            "base": self.base.tolist(),
            "amplitude": self.amplitude,
            "seed": self.seed,
        }


StationaryVector = namedtuple("StationaryVector", ["p", "residual", "iterations"])


def stationary_distribution(p_matrix, *, max_iterations=1_000_000) -> StationaryVector:
    """Stationary probability vector of an irreducible stochastic matrix

    Power iteration on the lazy chain (I + P) / 2, which has the same
    stationary vector and does not oscillate when P is periodic.
    Converges when ``max |pP - p| <= 1e-12``.
    """
    p_matrix = as_matrix(p_matrix, name="transition matrix")
    k = p_matrix.shape[0]
    if p_matrix.shape != (k, k):
        raise InvalidInput("transition matrix must be square")
    sign = SignMatrix((p_matrix > 0).astype(np.int8))
    if np.any(p_matrix < 0) or np.any(np.abs(p_matrix.sum(axis=1) - 1.0) > STOCHASTIC_ATOL):
        raise InvalidInput("transition matrix must be row-stochastic")
    if not is_irreducible(sign):
        raise InvalidInput("transition matrix is not irreducible")

    lazy = 0.5 * (np.eye(k) + p_matrix)
    p = np.full(k, 1.0 / k)
    residual = math.inf
    for iteration in range(1, max_iterations + 1):
        p = p @ lazy
        p /= p.sum()
        if iteration % 16 == 0 or k == 1:
            residual = float(np.max(np.abs(p @ p_matrix - p)))
            if residual <= STATIONARY_TOL:
                break
    else:
        raise NumericalFailure(
            f"power iteration did not converge in {max_iterations} iterations"
            f" (residual {residual:.3g})",
            partial=StationaryVector(p, residual, max_iterations),
        )
    p.setflags(write=False)
    return StationaryVector(p, residual, iteration)


def cylinder_measure(stationary: StationaryVector, p_matrix, word):
    """Stationary probability of the cylinder set of a 0-based word

    ``p[w0] * P[w0, w1] * ... * P[w(n-2), w(n-1)]``, which is positive
    exactly when the word is admissible for the support of P.
    """
    if len(word) == 0:
        raise InvalidInput("words must have length >= 1")
    p_matrix = np.asarray(p_matrix)
    measure = float(stationary.p[word[0]])
    for a, b in zip(word, word[1:]):
        measure *= float(p_matrix[a, b])
    return measure


def path_probability(schedule: TransitionSchedule, word):
    """Probability that the chain starts with the 0-based `word`

    ``initial[w0] * P(0)[w0, w1] * ... * P(n-2)[w(n-2), w(n-1)]``
    """
    if len(word) == 0:
        raise InvalidInput("words must have length >= 1")
    probability = float(schedule.initial[word[0]])
    for t, (a, b) in enumerate(zip(word, word[1:])):
        probability *= float(schedule.matrix_at(t)[a, b])
    return probability


def _draw_initial(schedule, u):
    cum = np.cumsum(schedule.initial)
    cum /= cum[-1]
    return np.minimum((u[:, None] >= cum[None, :]).sum(axis=1), schedule.sign.size - 1)


def _walk(schedule, rngs, steps):
    """Yield (t0, states) chunks of the trajectories drawn from `rngs`

    states has shape (len(rngs), chunk); column 0 of the first chunk is
    the initial state.
    """
    current = None
    t = 0
    while t < steps:
        n = min(_TIME_CHUNK, steps - t)
        u = np.stack([rng.random(n) for rng in rngs])
        states = np.empty(u.shape, dtype=np.intp)
        start = 0
        if current is None:
            current = _draw_initial(schedule, u[:, 0])
            states[:, 0] = current
            start = 1
        # transition into step t + c uses P(t + c - 1)
        ps = schedule.matrices(t + start - 1, t + n - 1)
        for c in range(start, n):
            cum = np.cumsum(ps[c - start], axis=1)
            cum /= cum[:, -1:]
            rows = cum[current]
            current = (u[:, c, None] >= rows).sum(axis=1)
            states[:, c] = current
        yield t, states
        t += n


def sample_trajectory(schedule: TransitionSchedule, steps, rng):
    """Sample a 0-based word of length `steps` from the chain using generator `rng`

    The word starts from the initial distribution and moves along
    row w(t) of P(t); it is always admissible.
    """
    if steps < 1:
        raise InvalidInput(f"steps must be >= 1, got {steps}")
    chunks = [states[0] for _, states in _walk(schedule, [rng], steps)]
    return tuple(int(i) for i in np.concatenate(chunks))


def sample_trajectories(schedule: TransitionSchedule, steps, trajectories, seed=0):
    """(trajectories, steps) array of sampled 0-based words, one stream per row"""
    if trajectories < 1:
        raise InvalidInput(f"trajectories must be >= 1, got {trajectories}")
    if steps < 1:
        raise InvalidInput(f"steps must be >= 1, got {steps}")
    rngs = [trajectory_stream(seed, i) for i in range(trajectories)]
    return np.concatenate([states for _, states in _walk(schedule, rngs, steps)], axis=1)


def lyapunov_along(word, system: MatrixSystem, norm="2"):
    """(1/n) log ||S_w0 ... S_w(n-1)|| for a 0-based word, natural log

    The running product is rescaled by a power of two after every factor,
    bringing its largest entry into [0.5, 1), and the exponents are
    summed, so long words neither overflow nor underflow and the
    rescaling itself is exact. Returns None when the product collapses to
    the exact zero matrix.
    """
    if len(word) == 0:
        raise InvalidInput("words must have length >= 1")
    product = np.eye(system.dimension)
    log2_scale = 0
    for i in word:
        product = product @ system.matrices[i]
        peak = float(np.max(np.abs(product)))
        if peak == 0.0:
            return None
        _, exponent = math.frexp(peak)
        product = np.ldexp(product, -exponent)
        log2_scale += exponent
    return (log2_scale * LOG2 + math.log(operator_norm(product, norm))) / len(word)


def _batched_lyapunov(system, schedule, steps, seed, indices, norm):
    """Lyapunov estimates for the trajectories with stream indices `indices`"""
    rngs = [trajectory_stream(seed, i) for i in indices]
    matrices = np.stack(system.matrices)
    t_count = len(rngs)
    d = system.dimension
    product = np.broadcast_to(np.eye(d), (t_count, d, d)).copy()
    log2_scale = np.zeros(t_count, dtype=np.int64)
    collapsed = np.zeros(t_count, dtype=bool)
    for _, states in _walk(schedule, rngs, steps):
        for c in range(states.shape[1]):
            product = product @ matrices[states[:, c]]
            peak = np.abs(product).max(axis=(1, 2))
            collapsed |= peak == 0.0
            _, exponent = np.frexp(peak)
            exponent[collapsed] = 0
            product = np.ldexp(product, -exponent[:, None, None])
            log2_scale += exponent
    if norm == "2":
        final = np.linalg.norm(product, ord=2, axis=(1, 2))
    else:
        final = np.linalg.norm(product, ord="fro", axis=(1, 2))
    values = []
    for i in range(t_count):
        if collapsed[i]:
            values.append(None)
        else:
            values.append((int(log2_scale[i]) * LOG2 + math.log(final[i])) / steps)
    return values


class LyapunovEstimate:
    """Per-trajectory finite-horizon Lyapunov exponents and their summary

    values holds one entry per trajectory, None for collapsed products.
    """

    def __init__(self, values, steps, seed):
        self.values = tuple(values)
        self.steps = steps
        self.seed = seed
        finite = np.array([v for v in self.values if v is not None])
        self.collapsed = len(self.values) - finite.size
        if finite.size:
            self.mean = float(np.mean(finite))
            self.min = float(np.min(finite))
            self.max = float(np.max(finite))
            self.std = float(np.std(finite))
        else:
            self.mean = self.min = self.max = self.std = None

    @property
    def trajectories(self):
        return len(self.values)

    def to_dict(self):
        return {
            "trajectories": self.trajectories,
            "steps": self.steps,
            "seed": self.seed,
            "collapsed": self.collapsed,
            "mean": self.mean,
            "min": self.min,
            "max": self.max,
            "std": self.std,
            "values": list(self.values),
        }

    def __eq__(self, other):
        if not isinstance(other, LyapunovEstimate):
            return NotImplemented
        return (self.values, self.steps, self.seed) == (
            other.values,
            other.steps,
            other.seed,
        )


def monte_carlo_lyapunov(
    system: MatrixSystem,
    schedule: TransitionSchedule,
    trajectories=100,
    steps=10_000,
    seed=0,
    *,
    norm="2",
    threads=1,
):
    """Estimate the top Lyapunov exponent along sampled trajectories

    Trajectory i always uses stream (seed, i), so results are identical
    for any number of threads.
    """
    if trajectories < 1:
        raise InvalidInput(f"trajectories must be >= 1, got {trajectories}")
    if steps < 1:
        raise InvalidInput(f"steps must be >= 1, got {steps}")
    if schedule.sign != system.sign:
        raise InvalidInput("schedule and system have different sign matrices")
    parts = np.array_split(np.arange(trajectories), max(1, min(threads, trajectories)))
    results = map_partitions(
        lambda idx: _batched_lyapunov(system, schedule, steps, seed, idx, norm),
        parts,
        threads,
    )
    return LyapunovEstimate([v for part in results for v in part], steps, seed)


PeriodicCheck = namedtuple(
    "PeriodicCheck", ["all_below_one", "worst_value", "worst_word", "max_length"]
)


def periodic_stability_check(system: MatrixSystem, max_n, *, cap=None, threads=1):
    """Whether every closed path of length <= max_n has spectral radius < 1

    Returns the worst rooted spectral radius and its word as witness.
    """
    worst_value, worst_word = 0.0, None
    for n in range(1, max_n + 1):
        value, word, _, _ = periodic_sweep(system, n, cap=cap, threads=threads)
        if word is not None and (worst_word is None or beats(value, worst_value)):
            worst_value, worst_word = value, word
    return PeriodicCheck(worst_value < 1.0, worst_value, worst_word, max_n)


class LyapunovSimulator(LoggingConfigurable):
    """Configurable front end to :func:`monte_carlo_lyapunov`"""

    trajectories = Integer(
        100,
        help="Number of independent trajectories to simulate.",
        config=True,
    )

    steps = Integer(
        10_000,
        help="Length of each trajectory (the horizon of the estimate).",
        config=True,
    )

    seed = Integer(
        0,
        help="""
        Seed of the per-trajectory random streams.

        The same seed always gives bit-identical estimates.
        """,
        config=True,
    )

    threads = Integer(
        1,
        help="Worker threads; trajectories are split between them.",
        config=True,
    )

    norm = Unicode(
        "2",
        help='Matrix norm for the final product: "2" or "fro".',
        config=True,
    )

    check_length = Integer(
        8,
        help="Longest closed path checked for spectral radius < 1 alongside a simulation.",
        config=True,
    )

    @validate("trajectories", "steps", "threads", "check_length")
    def _positive(self, proposal):
        if proposal.value < 1:
            raise TraitError(f"{proposal.trait.name} must be >= 1, got {proposal.value}")
        return proposal.value

    @validate("seed")
    def _valid_seed(self, proposal):
        if proposal.value < 0:
            raise TraitError(f"seed must be non-negative, got {proposal.value}")
        return proposal.value

    @validate("norm")
    def _valid_norm(self, proposal):
        if proposal.value not in NORM_KINDS:
            raise TraitError(f"norm must be one of {NORM_KINDS}, got {proposal.value!r}")
        return proposal.value

    @log_duration
    def simulate(self, system: MatrixSystem, schedule: TransitionSchedule):
        self.log.info(
            "Simulating %i trajectories of %i steps (seed %i, %s schedule)",
            self.trajectories,
            self.steps,
            self.seed,
            schedule.mode,
        )
        estimate = monte_carlo_lyapunov(
            system,
            schedule,
            self.trajectories,
            self.steps,
            self.seed,
            norm=self.norm,
            threads=self.threads,
        )
        TRAJECTORIES.inc(estimate.trajectories)
        if estimate.collapsed:
            self.log.warning(
                "%i of %i trajectories collapsed to the zero matrix",
                estimate.collapsed,
                estimate.trajectories,
            )
        return estimate

    def check(self, system: MatrixSystem):
        """Hypotheses of the almost-sure stability criterion"""
        check = periodic_stability_check(system, self.check_length, threads=self.threads)
        return {
            "irreducible": is_irreducible(system.sign),
            "periodic_radius_below_one": check.all_below_one,
            "worst_periodic_value": check.worst_value,
            "worst_periodic_word": (
                format_word(check.worst_word) if check.worst_word else None
            ),
            "checked_length": check.max_length,
        }

