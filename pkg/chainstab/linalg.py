"""
Dense real-matrix primitives.

Matrices are plain ``numpy`` float64 arrays, made read-only on
construction by :func:`as_matrix` so they can be shared between worker
threads without copying.
"""

import math
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import InvalidInput, NumericalFailure

# relative threshold below which a product is treated as the zero matrix
ZERO_RTOL = 1e-12

NORM_KINDS = ("2", "fro")


def as_matrix(data, *, name="matrix"):
    """Validate `data` and return it as a read-only 2-d float64 array

    Raises InvalidInput for ragged, empty, non-2-d or non-finite input.
    """
    try:
        a = np.array(data, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise InvalidInput(f"{name} is not a numeric grid: {e}") from e
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise InvalidInput(f"{name} must be a non-empty 2-d grid, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput(f"{name} has non-finite entries")
    a.setflags(write=False)
    return a


def _frozen(a):
    a.setflags(write=False)
    return a


def mat_mul(a, b):
    """Matrix product ``a @ b``"""
    if a.shape[1] != b.shape[0]:
        raise InvalidInput(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    return _frozen(a @ b)


def product_along_word(matrices: Sequence[np.ndarray], word: Sequence[int]):
    """Ordered product ``matrices[w0] @ matrices[w1] @ ...`` along a 0-based word

    The first index of the word is the leftmost factor.
    """
    if len(word) == 0:
        raise InvalidInput("empty word has no product")
    k = len(matrices)
    for i in word:
        if not 0 <= i < k:
            raise InvalidInput(f"word index {i + 1} outside 1..{k}")
    dims = {m.shape for m in matrices}
    if len(dims) != 1 or matrices[0].shape[0] != matrices[0].shape[1]:
        raise InvalidInput("matrices must be square and of equal dimension")
    product = matrices[word[0]]
    for i in word[1:]:
        product = product @ matrices[i]
    return _frozen(np.array(product))


def operator_norm(a, kind="2"):
    """Matrix norm of `a`

    kind "2" is the spectral norm (largest singular value),
    kind "fro" the Frobenius norm.
    """
    if kind == "2":
        return float(np.linalg.norm(a, ord=2))
    elif kind == "fro":
        return float(np.linalg.norm(a, ord="fro"))
    raise InvalidInput(f"unknown norm {kind!r}, expected one of {NORM_KINDS}")


def kron(a, b):
    """Kronecker product: the block matrix whose (i, j) block is ``a[i, j] * b``"""
    return _frozen(np.kron(a, b))


def is_numerically_zero(a, scale=1.0):
    """Whether max |a_ij| <= ZERO_RTOL * scale

    Products of structurally zero blocks are exact zeros,
    so exact zeros always qualify.
    """
    peak = float(np.max(np.abs(a))) if a.size else 0.0
    return peak == 0.0 or peak <= ZERO_RTOL * scale


def _hessenberg_eigenvalues(h, max_sweeps):
    """Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR

    Deflates 1x1 and 2x2 diagonal blocks from the bottom up.
    Returns a list of complex numbers.
    """
    a = [list(map(float, row)) for row in h]
    n = len(a)
    wr = [0.0] * n
    wi = [0.0] * n
    found = [False] * n
    anorm = sum(abs(a[i][j]) for i in range(n) for j in range(max(i - 1, 0), n))
    sweeps = 0
    nn = n - 1
    t = 0.0

    def partial():
        return [complex(wr[i], wi[i]) for i in range(n) if found[i]]

    while nn >= 0:
        its = 0
        while True:
            # look for a single small subdiagonal element
            l = nn
            while l >= 1:
                s = abs(a[l - 1][l - 1]) + abs(a[l][l])
                if s == 0.0:
                    s = anorm
                if abs(a[l][l - 1]) + s == s:
                    a[l][l - 1] = 0.0
                    break
                l -= 1
            x = a[nn][nn]
            if l == nn:
                wr[nn], wi[nn] = x + t, 0.0
                found[nn] = True
                nn -= 1
                break
            y = a[nn - 1][nn - 1]
            w = a[nn][nn - 1] * a[nn - 1][nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z:
                        wr[nn] = x - w / z
                    wi[nn - 1] = wi[nn] = 0.0
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1], wi[nn] = -z, z
                found[nn - 1] = found[nn] = True
                nn -= 2
                break

            if sweeps >= max_sweeps:
                raise NumericalFailure(
                    f"QR iteration did not converge after {sweeps} sweeps",
                    partial=partial(),
                )
            if its in (10, 20):
                # exceptional shift
                t += x
                for i in range(nn + 1):
                    a[i][i] -= x
                s = abs(a[nn][nn - 1]) + abs(a[nn - 1][nn - 2])
                x = y = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            sweeps += 1

            # form the shift and look for two consecutive small subdiagonals
            m = nn - 2
            while m >= l:
                z = a[m][m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1][m] + a[m][m + 1]
                q = a[m + 1][m + 1] - z - r - s
                r = a[m + 2][m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m][m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1][m - 1]) + abs(z) + abs(a[m + 1][m + 1]))
                if u + v == v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i][i - 2] = 0.0
                if i != m + 2:
                    a[i][i - 3] = 0.0

            # double QR step on rows l..nn and columns m..nn
            for k in range(m, nn):
                if k != m:
                    p = a[k][k - 1]
                    q = a[k + 1][k - 1]
                    r = a[k + 2][k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        a[k][k - 1] = -a[k][k - 1]
                else:
                    a[k][k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                for j in range(k, nn + 1):
                    p = a[k][j] + q * a[k + 1][j]
                    if k != nn - 1:
                        p += r * a[k + 2][j]
                        a[k + 2][j] -= p * z
                    a[k + 1][j] -= p * y
                    a[k][j] -= p * x
                for i in range(l, min(nn, k + 3) + 1):
                    p = x * a[i][k] + y * a[i][k + 1]
                    if k != nn - 1:
                        p += z * a[i][k + 2]
                        a[i][k + 2] -= p * r
                    a[i][k + 1] -= p * q
                    a[i][k] -= p

    return [complex(wr[i], wi[i]) for i in range(n)]


def eigenvalues(a):
    """All (possibly complex) eigenvalues of a square matrix

    The matrix is first balanced with permutation, which isolates the
    exact zero rows and columns of block-sparse products, then reduced
    to Hessenberg form and iterated with Francis double-shift QR,
    reading eigenvalues off the 1x1 and 2x2 diagonal blocks.
    At most ``100 * dim`` QR sweeps are attempted before
    NumericalFailure is raised with the eigenvalues found so far.
    """
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInput(f"eigenvalues need a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 1:
        return [complex(a[0, 0])]
    balanced, _ = scipy.linalg.matrix_balance(np.asarray(a), permute=True, scale=True)
    h = balanced if n == 2 else scipy.linalg.hessenberg(balanced)
    return _hessenberg_eigenvalues(h, max_sweeps=100 * n)


def spectral_radius(a):
    """Largest modulus over the eigenvalues of `a`"""
    try:
        return max(abs(ev) for ev in eigenvalues(a))
    except NumericalFailure as e:
        found = e.partial or []
        e.partial = max((abs(ev) for ev in found), default=None)
        raise
