"""
Bounds on the spectral radius of a system governed by a sign matrix,
and the uniform exponential stability decision built on them.

Lower bounds come from periodic words: for every n,

    lower_n = max over periodically extendable n-words w of rho(S_w) ** (1/n)

Upper bounds come from the lift. Products along concatenated admissible
words need not be admissible, so the constrained norm sequence is not
submultiplicative; the lift is a free system whose products along
forbidden words vanish, which restores submultiplicativity. Hence

    upper_n = max over all K**n words w of ||L_w|| ** (1/n)

bounds the constrained joint spectral radius from above for every n,
and both envelopes converge to the same limit.
"""

import math
from collections import namedtuple
from enum import Enum

from traitlets import Bool, Float, Integer, TraitError, Unicode, validate
from traitlets.config import LoggingConfigurable
from tornado.log import app_log

from .errors import EnumerationCapExceeded, InvalidInput
from .lift import LiftedSystem, MatrixSystem, build_lift
from .linalg import NORM_KINDS, operator_norm, spectral_radius
from .log import log_duration
from .metrics import WORDS_VISITED
from .subshift import format_word
from .utils import (
    CountSpecification,
    NodeBudget,
    beats,
    map_partitions,
    reduce_best,
)

# a prefix is abandoned only when its bound is below the incumbent
# by more than this relative margin, so pruning never changes a tie
PRUNE_SLACK = 1e-9


LengthBounds = namedtuple(
    "LengthBounds",
    [
        "n",
        "lower",
        "lower_witness",
        "upper",
        "upper_witness",
        "first_unstable",
        "first_unstable_value",
        "direct_upper",
    ],
    defaults=(None, None, None),
)


class Stability(Enum):
    """Outcome of the uniform stability decision"""

    STABLE = "UniformlyStable"
    UNSTABLE = "NotUniformlyStable"
    UNDECIDED = "Undecided"


class _Incumbent:
    """Best raw value seen so far, shared between workers

    Reads and writes are not synchronized: a stale value only
    weakens pruning.
    """

    def __init__(self):
        self.value = None

    def offer(self, value):
        if self.value is None or value > self.value:
            self.value = value


def _leaf_products(matrices, n, first, successors, budget, prune=None):
    """Yield (word, product) for n-words starting with `first`, in lexicographic order

    Products are accumulated left to right along the prefix tree.
    `prune(depth, product)` may cut a prefix before its subtree is expanded.
    """
    stack = [((first,), matrices[first])]
    while stack:
        word, product = stack.pop()
        budget.spend()
        if len(word) == n:
            yield word, product
            continue
        if prune is not None and prune(len(word), product):
            continue
        for j in reversed(successors(word[-1])):
            stack.append((word + (j,), product @ matrices[j]))


def _sweep_periodic(system, n, first, budget, incumbent, margin):
    sign = system.sign
    best_value, best_word = None, None
    unstable_word = unstable_value = None
    for word, product in _leaf_products(
        system.matrices, n, first, sign.successors, budget
    ):
        if not sign.allows(word[-1], word[0]):
            continue
        value = spectral_radius(product) ** (1.0 / n)
        if unstable_word is None and value >= 1.0 + margin:
            unstable_word, unstable_value = word, value
        if beats(value, best_value):
            best_value, best_word = value, word
            incumbent.offer(value)
    return best_value, best_word, unstable_word, unstable_value


def periodic_sweep(system: MatrixSystem, n, *, cap=None, threads=1, margin=1e-9):
    """Sweep all periodically extendable n-words

    Returns (lower_n, witness, first_unstable, first_unstable_value);
    the witness is None and lower_n 0 when no n-word wraps around.
    first_unstable is the lexicographically smallest periodic word whose
    rooted spectral radius is at least 1 + margin, or None.
    """
    if n < 1:
        raise InvalidInput(f"word length must be >= 1, got {n}")
    budget = NodeBudget(cap, what="admissible prefixes")
    incumbent = _Incumbent()

    def sweep(first):
        return _sweep_periodic(system, n, first, budget, incumbent, margin)

    try:
        results = map_partitions(sweep, range(system.size), threads)
    except EnumerationCapExceeded as e:
        e.partial = incumbent.value
        e.valid = True
        raise
    finally:
        WORDS_VISITED.labels(kind="periodic").inc(budget.spent)

    value, witness = reduce_best((r[0], r[1]) for r in results)
    unstable = next((r[2:] for r in results if r[2] is not None), (None, None))
    if witness is None:
        return 0.0, None, None, None
    return (value, witness, *unstable)


def lower_bound_at(system: MatrixSystem, n, *, cap=None, threads=1):
    """max over periodic n-words of rho(product) ** (1/n), with an argmax witness

    Returns (0.0, None) when no n-word is periodically extendable.
    """
    value, witness, _, _ = periodic_sweep(system, n, cap=cap, threads=threads)
    return value, witness


def _search_lifted(lift, n, first, budget, incumbent, norm, peak, prune):
    k = lift.size
    free = tuple(range(k))

    def cut(depth, product):
        if incumbent.value is None:
            return False
        bound = operator_norm(product, norm) * peak ** (n - depth)
        return bound * (1.0 + PRUNE_SLACK) < incumbent.value

    best_value, best_word = None, None
    for word, product in _leaf_products(
        lift.lifted, n, first, lambda i: free, budget, cut if prune else None
    ):
        value = operator_norm(product, norm)
        if beats(value, best_value):
            best_value, best_word = value, word
            incumbent.offer(value)
    return best_value, best_word


def upper_bound_at(
    system: MatrixSystem,
    lift: LiftedSystem,
    n,
    *,
    cap=None,
    norm="2",
    prune=True,
    threads=1,
):
    """max over all n-words of ||lifted product|| ** (1/n), with an argmax witness

    The search is depth-first with branch and bound: a prefix P of
    length m is abandoned when ``||P|| * max_k ||L_k|| ** (n - m)``
    cannot reach the incumbent. With prune=False every word is visited,
    which gives the same maximum.

    Hitting `cap` raises EnumerationCapExceeded whose `partial` is not
    a valid upper bound.
    """
    if n < 1:
        raise InvalidInput(f"word length must be >= 1, got {n}")
    if lift.system is not system:
        raise InvalidInput("lift does not belong to this system")
    peak = max(operator_norm(m, norm) for m in lift.lifted)
    budget = NodeBudget(cap, what="lifted search nodes")
    incumbent = _Incumbent()

    def search(first):
        return _search_lifted(lift, n, first, budget, incumbent, norm, peak, prune)

    try:
        results = map_partitions(search, range(lift.size), threads)
    except EnumerationCapExceeded as e:
        if incumbent.value is not None:
            e.partial = incumbent.value ** (1.0 / n)
        e.valid = False
        raise
    finally:
        WORDS_VISITED.labels(kind="lifted").inc(budget.spent)

    value, witness = reduce_best(results)
    return value ** (1.0 / n), witness


def direct_constrained_bound(system: MatrixSystem, n, *, cap=None, norm="2"):
    """max over admissible n-words of ||S_w|| ** (1/n), computed without the lift

    Diagnostic only: for n > 1 this is not a certified upper bound.
    """
    budget = NodeBudget(cap, what="admissible prefixes")
    best_value, best_word = None, None
    for first in range(system.size):
        for word, product in _leaf_products(
            system.matrices, n, first, system.sign.successors, budget
        ):
            value = operator_norm(product, norm)
            if beats(value, best_value):
                best_value, best_word = value, word
    return best_value ** (1.0 / n), best_word


class SpectralBounds:
    """Per-length lower/upper bounds and their running best values"""

    def __init__(self, records=()):
        self.records = []
        for record in records:
            self.add(record)

    def add(self, record: LengthBounds):
        self.records.append(record)
        if record.lower > self.best_upper + 1e-9:
            app_log.warning(
                "Lower bound %.12g at n=%i exceeds best upper bound %.12g",
                record.lower,
                record.n,
                self.best_upper,
            )

    @property
    def max_length(self):
        return self.records[-1].n if self.records else 0

    def _best_lower_record(self):
        best = None
        for r in self.records:
            if r.lower_witness is not None and (best is None or r.lower > best.lower):
                best = r
        return best

    def _best_upper_record(self):
        best = None
        for r in self.records:
            if best is None or r.upper < best.upper:
                best = r
        return best

    @property
    def best_lower(self):
        best = self._best_lower_record()
        return best.lower if best else 0.0

    @property
    def best_upper(self):
        best = self._best_upper_record()
        return best.upper if best else math.inf

    @property
    def gap(self):
        return self.best_upper - self.best_lower

    def first_unstable(self):
        """The first (shortest, then lexicographically smallest) unstable periodic word"""
        for r in self.records:
            if r.first_unstable is not None:
                return r
        return None

    def trace(self):
        """Per-length rows with running best values, in length order"""
        rows = []
        best_lower, best_upper = 0.0, math.inf
        for r in self.records:
            best_lower = max(best_lower, r.lower)
            best_upper = min(best_upper, r.upper)
            rows.append(
                {
                    "n": r.n,
                    "lower": r.lower,
                    "upper": r.upper,
                    "best_lower": best_lower,
                    "best_upper": best_upper,
                    "lower_witness": (
                        format_word(r.lower_witness) if r.lower_witness else None
                    ),
                    "upper_witness": format_word(r.upper_witness),
                    "direct_upper": r.direct_upper,
                }
            )
        return rows

    def to_dict(self):
        lower = self._best_lower_record()
        upper = self._best_upper_record()
        return {
            "best_lower": self.best_lower,
            "best_lower_length": lower.n if lower else None,
            "best_lower_witness": format_word(lower.lower_witness) if lower else None,
            "best_upper": self.best_upper,
            "best_upper_length": upper.n if upper else None,
            "best_upper_witness": format_word(upper.upper_witness) if upper else None,
            "gap": self.gap,
            "trace": self.trace(),
        }


def estimate_radius(
    system: MatrixSystem,
    max_n=12,
    target_gap=1e-3,
    *,
    cap=10_000_000,
    norm="2",
    threads=1,
    margin=1e-9,
    direct=False,
):
    """Bound the constrained spectral radius for n = 1 ... max_n

    Stops as soon as best_upper - best_lower <= target_gap.
    Cap overruns are re-raised with the bounds computed so far as
    `partial`; nothing is silently truncated.
    """
    if max_n < 1:
        raise InvalidInput(f"max_n must be >= 1, got {max_n}")
    if target_gap <= 0:
        raise InvalidInput(f"target_gap must be positive, got {target_gap}")
    lift = build_lift(system)
    bounds = SpectralBounds()
    for n in range(1, max_n + 1):
        try:
            lower, lower_witness, unstable, unstable_value = periodic_sweep(
                system, n, cap=cap, threads=threads, margin=margin
            )
            upper, upper_witness = upper_bound_at(
                system, lift, n, cap=cap, norm=norm, threads=threads
            )
            direct_upper = None
            if direct:
                direct_upper, _ = direct_constrained_bound(system, n, cap=cap, norm=norm)
        except EnumerationCapExceeded as e:
            app_log.error("Search at length %i exceeded cap %i", n, e.cap)
            e.partial = bounds
            e.valid = True
            raise
        bounds.add(
            LengthBounds(
                n=n,
                lower=lower,
                lower_witness=lower_witness,
                upper=upper,
                upper_witness=upper_witness,
                first_unstable=unstable,
                first_unstable_value=unstable_value,
                direct_upper=direct_upper,
            )
        )
        app_log.debug(
            "n=%i lower=%.12g upper=%.12g bracket=[%.12g, %.12g]",
            n,
            lower,
            upper,
            bounds.best_lower,
            bounds.best_upper,
        )
        if bounds.gap <= target_gap:
            app_log.debug("Gap %.3g reached target %.3g at n=%i", bounds.gap, target_gap, n)
            break
    return bounds


class StabilityVerdict:
    """A uniform stability decision and what certifies it"""

    def __init__(self, status: Stability, certificate, max_length_searched, bounds):
        self.status = status
        self.certificate = certificate
        self.max_length_searched = max_length_searched
        self.best_lower = bounds.best_lower
        self.best_upper = bounds.best_upper

    def to_dict(self):
        return {
            "status": self.status.value,
            "certificate": self.certificate,
            "max_length_searched": self.max_length_searched,
            "bracket": [self.best_lower, self.best_upper],
        }

    def __repr__(self):
        return f"<StabilityVerdict {self.status.value} n<={self.max_length_searched}>"


def decide_uniform_stability(bounds: SpectralBounds, margin=1e-9) -> StabilityVerdict:
    """Turn bounds into a verdict

    - UniformlyStable when best_upper < 1 - margin;
    - NotUniformlyStable when some periodic word has a rooted spectral
      radius >= 1 + margin (that word is an unstable closed path);
    - Undecided otherwise.
    """
    upper = bounds._best_upper_record()
    if upper is not None and upper.upper < 1.0 - margin:
        return StabilityVerdict(
            Stability.STABLE,
            {
                "kind": "upper_bound",
                "value": upper.upper,
                "length": upper.n,
                "witness": format_word(upper.upper_witness),
            },
            bounds.max_length,
            bounds,
        )
    unstable = bounds.first_unstable()
    if unstable is not None:
        return StabilityVerdict(
            Stability.UNSTABLE,
            {
                "kind": "periodic_witness",
                "value": unstable.first_unstable_value,
                "length": unstable.n,
                "witness": format_word(unstable.first_unstable),
            },
            bounds.max_length,
            bounds,
        )
    return StabilityVerdict(
        Stability.UNDECIDED,
        {
            "kind": "bracket",
            "value": [bounds.best_lower, bounds.best_upper],
            "length": bounds.max_length,
            "witness": None,
        },
        bounds.max_length,
        bounds,
    )


class RadiusEstimator(LoggingConfigurable):
    """Configurable front end to :func:`estimate_radius`"""

    max_length = Integer(
        12,
        help="""
        Longest word length to search.

        The search stops earlier once the bracket is narrower than target_gap.
        """,
        config=True,
    )

    target_gap = Float(
        1e-3,
        help="Stop once best_upper - best_lower is at most this.",
        config=True,
    )

    node_cap = CountSpecification(
        10_000_000,
        help="""
        Maximum number of search-tree nodes visited per bound and length.

        Accepts suffixes K, M, G (e.g. "10M").
        """,
        config=True,
    )

    margin = Float(
        1e-9,
        help="""
        Margin around 1 inside which the verdict is Undecided.
        """,
        config=True,
    )

    norm = Unicode(
        "2",
        help="""
        Matrix norm for upper bounds: "2" (spectral) or "fro" (Frobenius).

        Verdicts do not depend on the norm, only the tightness of the bounds does.
        """,
        config=True,
    )

    threads = Integer(
        1,
        help="Worker threads for per-length sweeps (partitioned by first symbol).",
        config=True,
    )

    report_direct = Bool(
        False,
        help="Also report the direct (unlifted) constrained norm bound per length.",
        config=True,
    )

    @validate("max_length", "threads")
    def _positive(self, proposal):
        if proposal.value < 1:
            raise TraitError(f"{proposal.trait.name} must be >= 1, got {proposal.value}")
        return proposal.value

    @validate("target_gap", "margin")
    def _positive_float(self, proposal):
        if proposal.value <= 0:
            raise TraitError(f"{proposal.trait.name} must be positive, got {proposal.value}")
        return proposal.value

    @validate("norm")
    def _valid_norm(self, proposal):
        if proposal.value not in NORM_KINDS:
            raise TraitError(f"norm must be one of {NORM_KINDS}, got {proposal.value!r}")
        return proposal.value

    @log_duration
    def estimate(self, system: MatrixSystem) -> SpectralBounds:
        self.log.info(
            "Bounding spectral radius of K=%i d=%i system up to length %i",
            system.size,
            system.dimension,
            self.max_length,
        )
        return estimate_radius(
            system,
            self.max_length,
            self.target_gap,
            cap=self.node_cap,
            norm=self.norm,
            threads=self.threads,
            margin=self.margin,
            direct=self.report_direct,
        )

    def decide(self, bounds: SpectralBounds) -> StabilityVerdict:
        verdict = decide_uniform_stability(bounds, self.margin)
        self.log.info(
            "%s with bracket [%.12g, %.12g] after n=%i",
            verdict.status.value,
            bounds.best_lower,
            bounds.best_upper,
            bounds.max_length,
        )
        return verdict
