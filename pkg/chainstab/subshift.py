"""
Symbolic layer: transition sign matrices and the words they admit.

Words are tuples of 0-based state indices. The 1-based notation used in
system files and reports is produced by :func:`format_word` and read
back by :func:`parse_word`.
"""

from enum import Enum
from typing import Iterator, Sequence, Tuple

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import CountSaturated, EnumerationCapExceeded, InvalidInput

Word = Tuple[int, ...]

# largest count reported; it still fits a signed 64-bit integer
_COUNT_LIMIT = 2**63 - 1


class WordMode(Enum):
    """Which words an enumeration yields"""

    ADMISSIBLE = "admissible"
    PERIODIC = "periodic"
    FREE = "free"


class SignMatrix:
    """A K x K {0,1} matrix with at least one 1 in every row

    Build instances with :func:`validate_sign_matrix`.
    """

    __slots__ = ("entries", "_successors")

    def __init__(self, entries):
        entries = np.array(entries, dtype=np.int8)
        entries.setflags(write=False)
        self.entries = entries
        self._successors = tuple(
            tuple(int(j) for j in np.flatnonzero(row)) for row in entries
        )

    @property
    def size(self):
        return self.entries.shape[0]

    def allows(self, i, j):
        """Whether the 0-based transition i -> j is allowed"""
        return bool(self.entries[i, j])

    def successors(self, i):
        """0-based states reachable from i in one step, ascending"""
        return self._successors[i]

    def tolist(self):
        return self.entries.tolist()

    def __eq__(self, other):
        if not isinstance(other, SignMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    def __repr__(self):
        return f"SignMatrix({self.tolist()})"


def validate_sign_matrix(raw) -> SignMatrix:
    """Validate an integer grid and return it as a SignMatrix

    Every entry must be the integer 0 or 1 (bools and floats are
    rejected) and every row must contain a 1.
    Row numbers in error messages are 1-based.
    """
    if not isinstance(raw, (list, tuple, np.ndarray)) or len(raw) == 0:
        raise InvalidInput("sign matrix must be a non-empty square grid")
    size = len(raw)
    for r, row in enumerate(raw, start=1):
        if not isinstance(row, (list, tuple, np.ndarray)) or len(row) != size:
            raise InvalidInput(
                f"sign matrix row {r} must have {size} entries", location=f"row {r}"
            )
        for value in row:
            if isinstance(value, (bool, np.bool_)) or not isinstance(
                value, (int, np.integer)
            ):
                raise InvalidInput(
                    f"sign matrix row {r} has non-integer entry {value!r}",
                    location=f"row {r}",
                )
            if value not in (0, 1):
                raise InvalidInput(
                    f"sign matrix row {r} has entry {value}, expected 0 or 1",
                    location=f"row {r}",
                )
        if not any(row):
            raise InvalidInput(
                f"sign matrix row {r} has no allowed transition", location=f"row {r}"
            )
    return SignMatrix(raw)


def full_shift(size) -> SignMatrix:
    """The all-ones sign matrix on `size` states"""
    return SignMatrix(np.ones((size, size), dtype=np.int8))


def _check_word(word, s):
    if len(word) == 0:
        raise InvalidInput("words must have length >= 1")
    for i in word:
        if not 0 <= i < s.size:
            raise InvalidInput(f"word index {i + 1} outside 1..{s.size}")


def is_admissible(word: Sequence[int], s: SignMatrix) -> bool:
    """Whether every consecutive pair of `word` is an allowed transition

    Words of length 1 are admissible.
    """
    _check_word(word, s)
    return all(s.allows(a, b) for a, b in zip(word, word[1:]))


def is_periodically_extendable(word: Sequence[int], s: SignMatrix) -> bool:
    """Whether `word` is admissible and may wrap around to its first symbol"""
    return is_admissible(word, s) and s.allows(word[-1], word[0])


def rotations(word: Sequence[int]) -> Iterator[Word]:
    """All cyclic rotations of `word`, starting with the word itself"""
    word = tuple(word)
    for k in range(len(word)):
        yield word[k:] + word[:k]


def enumerate_words(
    s: SignMatrix,
    n: int,
    mode=WordMode.ADMISSIBLE,
    *,
    cap=None,
    first=None,
) -> Iterator[Word]:
    """Yield n-length words of the given mode in lexicographic order

    The walk is depth-first and prunes at the first forbidden edge,
    so its cost follows the tree of admissible prefixes.

    cap: raise EnumerationCapExceeded once more than `cap` words
      would be yielded.
    first: restrict to words starting with this 0-based symbol
      (used to partition the word space between workers).
    """
    mode = WordMode(mode)
    if n < 1:
        raise InvalidInput(f"word length must be >= 1, got {n}")
    k = s.size
    starts = range(k) if first is None else (first,)
    if mode is WordMode.FREE:
        step = lambda i: range(k)  # noqa: E731
    else:
        step = s.successors

    produced = 0
    prefix = []
    stack = [iter(starts)]
    while stack:
        symbol = next(stack[-1], None)
        if symbol is None:
            stack.pop()
            if prefix:
                prefix.pop()
            continue
        if len(prefix) + 1 < n:
            prefix.append(symbol)
            stack.append(iter(step(symbol)))
            continue
        word = (*prefix, symbol)
        if mode is WordMode.PERIODIC and not s.allows(word[-1], word[0]):
            continue
        produced += 1
        if cap is not None and produced > cap:
            raise EnumerationCapExceeded(
                f"enumeration of {mode.value} words of length {n} exceeded cap {cap}",
                cap=cap,
                produced=produced - 1,
            )
        yield word


def is_irreducible(s: SignMatrix) -> bool:
    """Whether the transition graph of `s` is strongly connected"""
    n_components, _ = connected_components(
        s.entries, directed=True, connection="strong"
    )
    return n_components == 1


def count_admissible(s: SignMatrix, n: int) -> int:
    """Number of admissible words of length n (the entry sum of S^(n-1))"""
    if n < 1:
        raise InvalidInput(f"word length must be >= 1, got {n}")
    # python ints never wrap, so the limit check is exact
    successors = [s.successors(i) for i in range(s.size)]
    counts = [1] * s.size
    total = s.size
    for length in range(2, n + 1):
        counts = [sum(counts[j] for j in successors[i]) for i in range(s.size)]
        previous, total = total, sum(counts)
        if total > _COUNT_LIMIT:
            raise CountSaturated(
                f"admissible word count saturates at length {length}",
                length=length - 1,
                count=previous,
            )
    return total


def row_selector(s: SignMatrix, k: int):
    """The K x K {0,1} matrix whose only nonzero row is row k of `s`"""
    selector = np.zeros(s.entries.shape, dtype=np.float64)
    selector[k] = s.entries[k]
    selector.setflags(write=False)
    return selector


def format_word(word: Sequence[int]):
    """1-based list form of a 0-based word, as used in reports"""
    return [i + 1 for i in word]


def parse_word(raw, size) -> Word:
    """Read a 1-based word (list or comma separated string) into a 0-based tuple"""
    if isinstance(raw, str):
        try:
            raw = [int(part) for part in raw.replace(" ", "").split(",") if part]
        except ValueError as e:
            raise InvalidInput(f"cannot parse word {raw!r}") from e
    word = tuple(int(i) - 1 for i in raw)
    if not word:
        raise InvalidInput("words must have length >= 1")
    for i in word:
        if not 0 <= i < size:
            raise InvalidInput(f"word index {i + 1} outside 1..{size}")
    return word
