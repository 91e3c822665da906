"""Miscellaneous utilities"""

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from hashlib import blake2b

from traitlets import Integer, TraitError

from .errors import EnumerationCapExceeded

# values within this relative distance count as ties,
# which are then broken lexicographically by word
TIE_RTOL = 1e-12


def blake2b_hexdigest(b):
    """Compute the 16-byte Blake2 digest of the bytes `b` as hex"""
    return blake2b(b, digest_size=16).hexdigest()


def canonical_json(data):
    """Serialize `data` deterministically (sorted keys, no whitespace)"""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def beats(value, best):
    """Whether `value` is strictly better than the incumbent `best`

    `best` is None when there is no incumbent yet.
    """
    if best is None:
        return True
    return value > best + TIE_RTOL * abs(best)


def reduce_best(candidates):
    """Reduce (value, word) pairs, taken in order, to the best one

    Earlier candidates win ties, so feeding candidates in
    lexicographic order of their words gives the lexicographically
    smallest maximizer. Candidates with word None are skipped.
    """
    best_value, best_word = None, None
    for value, word in candidates:
        if word is None:
            continue
        if beats(value, best_value):
            best_value, best_word = value, word
    return best_value, best_word


def map_partitions(fn, parts, threads=1):
    """Apply `fn` to each item of `parts`, returning results in order

    With threads > 1 the calls run on a thread pool; the order of the
    returned results never depends on scheduling.
    """
    parts = list(parts)
    if threads <= 1 or len(parts) <= 1:
        return [fn(p) for p in parts]
    with ThreadPoolExecutor(min(threads, len(parts))) as pool:
        return list(pool.map(fn, parts))


class NodeBudget:
    """A thread-safe counter of visited nodes with a hard cap"""

    def __init__(self, cap, what="nodes"):
        self.cap = cap
        self.what = what
        self.spent = 0
        self._lock = threading.Lock()

    def spend(self, count=1):
        with self._lock:
            self.spent += count
            spent = self.spent
        if self.cap is not None and spent > self.cap:
            raise EnumerationCapExceeded(
                f"visited more than {self.cap} {self.what}",
                cap=self.cap,
                produced=spent - count,
            )


class CountSpecification(Integer):
    """
    Allow easily specifying large counts with suffixes

    Suffixes allowed are:
      - K -> thousand
      - M -> million
      - G -> billion

    Plain integers and floats in exponent notation ("1e7") are accepted too.
    """

    UNIT_SUFFIXES = {
        "K": 10**3,
        "M": 10**6,
        "G": 10**9,
    }

    def from_string(self, s):
        # suffixes are resolved in validate
        return s

    def validate(self, obj, value):
        """
        Validate that the passed in value is a valid count specification

        It could either be a pure int, or a string with one of the suffixes,
        which is converted into the appropriate pure count.
        """
        try:
            if isinstance(value, (int, float)):
                count = int(value)
            else:
                value = str(value).strip()
                if value[-1:].upper() in self.UNIT_SUFFIXES:
                    count = int(float(value[:-1]) * self.UNIT_SUFFIXES[value[-1].upper()])
                else:
                    count = int(float(value))
        except (ValueError, OverflowError):
            raise TraitError(
                f"{value} is not a valid count specification."
                " Must be an int or a string with suffix K, M, G"
            )
        if count < 1:
            raise TraitError(f"count must be positive, got {count}")
        return count
