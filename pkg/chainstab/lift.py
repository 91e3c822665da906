"""
Matrix systems governed by a sign matrix, and their {0,1}-matrix lift.

The lift of a system {S_1, ..., S_K} with sign matrix s is the free
system {L_1, ..., L_K} of Kd x Kd matrices with

    L_k = R_k (x) S_k,    R_k = e_k^T s_k

where s_k is row k of s and e_k the k-th unit row, so that only block
row k of L_k is nonzero and its block (k, j) is S_k when s_kj = 1.
With this orientation products along forbidden words vanish and
periodic words keep their spectral radius.
"""

from typing import Sequence

import numpy as np

from .errors import InvalidInput
from .linalg import (
    as_matrix,
    is_numerically_zero,
    operator_norm,
    product_along_word,
    spectral_radius,
)
from .subshift import SignMatrix, is_admissible, row_selector


class MatrixSystem:
    """K square d x d matrices and the K x K sign matrix governing them"""

    def __init__(self, matrices: Sequence, sign: SignMatrix):
        matrices = tuple(
            as_matrix(m, name=f"matrix {k}") for k, m in enumerate(matrices, start=1)
        )
        if not matrices:
            raise InvalidInput("a system needs at least one matrix")
        d = matrices[0].shape[0]
        for k, m in enumerate(matrices, start=1):
            if m.shape != (d, d):
                raise InvalidInput(
                    f"matrix {k} has shape {m.shape[0]}x{m.shape[1]}, expected {d}x{d}",
                    location=f"matrix {k}",
                )
        if sign.size != len(matrices):
            raise InvalidInput(
                f"sign matrix is {sign.size}x{sign.size} but there are {len(matrices)} matrices"
            )
        self.matrices = matrices
        self.sign = sign

    @property
    def size(self):
        """Number of states K"""
        return len(self.matrices)

    @property
    def dimension(self):
        """Matrix dimension d"""
        return self.matrices[0].shape[0]

    def scaled(self, factor):
        """The system with every matrix multiplied by `factor`"""
        return MatrixSystem([factor * m for m in self.matrices], self.sign)

    def product(self, word):
        return product_along_word(self.matrices, word)

    def __eq__(self, other):
        if not isinstance(other, MatrixSystem):
            return NotImplemented
        return (
            self.size == other.size
            and self.sign == other.sign
            and all(np.array_equal(a, b) for a, b in zip(self.matrices, other.matrices))
        )

    def __repr__(self):
        return f"<MatrixSystem K={self.size} d={self.dimension}>"


class LiftedSystem:
    """The Kd x Kd lift of a MatrixSystem"""

    def __init__(self, system: MatrixSystem, lifted):
        self.system = system
        self.lifted = tuple(lifted)

    @property
    def size(self):
        return self.system.size

    @property
    def dimension(self):
        """Base dimension d (the lifted matrices are Kd x Kd)"""
        return self.system.dimension

    def product(self, word):
        return product_along_word(self.lifted, word)


def build_lift(system: MatrixSystem) -> LiftedSystem:
    """Lift `system` by placing S_k into the allowed blocks of block row k

    The result equals ``kron(row_selector(sign, k), S_k)`` entry for entry.
    """
    k_size, d = system.size, system.dimension
    lifted = []
    for k, m in enumerate(system.matrices):
        big = np.zeros((k_size * d, k_size * d))
        for j in system.sign.successors(k):
            big[k * d : (k + 1) * d, j * d : (j + 1) * d] = m
        big.setflags(write=False)
        lifted.append(big)
    return LiftedSystem(system, lifted)


def lifted_product(lift: LiftedSystem, word):
    """Product of the lifted matrices along a 0-based word"""
    return lift.product(word)


def check_annihilation(lift: LiftedSystem, word) -> bool:
    """Whether the lifted product along `word` is numerically zero

    This holds for every word that is not admissible.
    """
    if len(word) < 2:
        raise InvalidInput("annihilation is checked on words of length >= 2")
    scale = max(operator_norm(lift.lifted[i]) for i in set(word))
    return is_numerically_zero(lift.product(word), scale=scale)


def lifted_vs_base_radius(system: MatrixSystem, lift: LiftedSystem, word):
    """(s_wrap * rho(base product), rho(lifted product)) for an admissible word

    s_wrap is the sign entry from the last symbol back to the first;
    the two numbers agree, and both vanish when the word does not wrap.
    """
    if not is_admissible(word, system.sign):
        raise InvalidInput("radius comparison needs an admissible word")
    wrap = int(system.sign.allows(word[-1], word[0]))
    base = spectral_radius(system.product(word))
    lifted = spectral_radius(lift.product(word))
    return wrap * base, lifted


def block_pattern(product, size, d):
    """{0,1} K x K matrix marking the blocks of `product` that are not exactly zero"""
    blocks = np.asarray(product).reshape(size, d, size, d)
    return (np.abs(blocks).max(axis=(1, 3)) > 0).astype(np.int64)


def selector_pattern(sign: SignMatrix, word):
    """{0,1} pattern of the product of row selectors along `word`"""
    product = row_selector(sign, word[0])
    for i in word[1:]:
        product = product @ row_selector(sign, i)
    return (product > 0).astype(np.int64)
