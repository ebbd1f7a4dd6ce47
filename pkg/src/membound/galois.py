"""Prime-field linear algebra and deterministic hashing into field elements.

The filter stores one linear functional over GF(q) (q prime) and tests
whether hashed element rows lie in its kernel.  This module provides:

* ``PrimeField`` / ``FieldVector`` -- validated value types;
* exact field arithmetic (``inv``, ``dot``) on Python integers;
* ``nullspace_of_matrix`` / ``nullspace_vector`` -- a deterministic kernel
  vector in the reduced-row-echelon convention (lowest-index free variable
  set to 1, all other free variables 0), with a bit-packed fast path for
  GF(2);
* ``WordStream`` -- a pure, keyed 64-bit word source (blake2b absorption +
  splitmix64 counter expansion) and rejection sampling of field elements,
  so every hash row is reproducible from (seed, element bytes) alone.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, FieldError

__all__ = [
    "PrimeField",
    "FieldVector",
    "is_prime",
    "inv",
    "dot",
    "nullspace_vector",
    "nullspace_of_matrix",
    "WordStream",
    "sample_field_element",
    "sample_field_elements",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Witness set making Miller-Rabin deterministic for all n < 3.3 * 10**24,
# far beyond the 32-bit moduli used here.
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic primality test (Miller-Rabin, fixed witness set)."""
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class PrimeField:
    """The field of integers modulo a prime ``q``."""

    q: int

    def __post_init__(self) -> None:
        if not isinstance(self.q, int) or not is_prime(self.q):
            raise FieldError(f"modulus {self.q!r} is not prime")

    def check_element(self, a: int) -> int:
        if not isinstance(a, (int, np.integer)) or not (0 <= a < self.q):
            raise FieldError(f"{a!r} is not an element of GF({self.q})")
        return int(a)


@dataclass(frozen=True)
class FieldVector:
    """A fixed-length vector with entries in GF(q)."""

    field: PrimeField
    coords: tuple[int, ...]

    def __post_init__(self) -> None:
        coords = tuple(self.field.check_element(c) for c in self.coords)
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_array(cls, field: PrimeField, arr) -> "FieldVector":
        return cls(field, tuple(int(v) for v in np.asarray(arr).tolist()))

    def as_array(self) -> np.ndarray:
        return np.array(self.coords, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.coords)

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coords)


def inv(field: PrimeField, a: int) -> int:
    """Multiplicative inverse of ``a`` in GF(q); error on 0."""
    a = field.check_element(a)
    if a == 0:
        raise FieldError("0 has no multiplicative inverse")
    return pow(a, -1, field.q)


def dot(x: FieldVector, y: FieldVector) -> int:
    """Inner product in GF(q); operands must share field and length."""
    if x.field != y.field:
        raise FieldError(f"mixed fields GF({x.field.q}) and GF({y.field.q})")
    if len(x) != len(y):
        raise FieldError(f"length mismatch: {len(x)} vs {len(y)}")
    return sum(a * b for a, b in zip(x.coords, y.coords)) % x.field.q


def _nullspace_general(mat: np.ndarray, q: int) -> np.ndarray | None:
    """Kernel vector over GF(q) by forward elimination + back-substitution.

    Arithmetic stays in uint64: every intermediate is < 2**33 for q < 2**32
    because products are reduced mod q before they are combined.
    """
    a = (np.asarray(mat, dtype=np.uint64) % np.uint64(q)).copy()
    k, m = a.shape
    qq = np.uint64(q)
    pivot_rows: list[tuple[int, int]] = []  # (row, pivot column)
    row = 0
    for col in range(m):
        if row == k:
            break
        nz = np.nonzero(a[row:, col])[0]
        if nz.size == 0:
            continue
        pr = row + int(nz[0])
        if pr != row:
            a[[row, pr]] = a[[pr, row]]
        piv_inv = np.uint64(pow(int(a[row, col]), -1, q))
        a[row] = a[row] * piv_inv % qq
        below = a[row + 1 :]
        factors = below[:, col]
        hit = factors != 0
        if hit.any():
            t = factors[hit, None] * a[row][None, :] % qq
            below[hit] = (below[hit] + (qq - t)) % qq
        pivot_rows.append((row, col))
        row += 1
    pivot_cols = {c for _, c in pivot_rows}
    free = next((c for c in range(m) if c not in pivot_cols), None)
    if free is None:
        return None
    y = np.zeros(m, dtype=np.uint64)
    y[free] = 1
    for r, c in reversed(pivot_rows):
        s = int((a[r] * y % qq).sum() % qq)
        y[c] = (q - s) % q
    return y.astype(np.int64)


def _nullspace_gf2(mat: np.ndarray, m: int) -> np.ndarray | None:
    """GF(2) kernel vector with rows packed 64 columns per uint64 word."""
    k = mat.shape[0]
    words = (m + 63) // 64
    packed = np.zeros((k, words), dtype=np.uint64)
    if k:
        bits = (np.asarray(mat, dtype=np.uint64) & np.uint64(1)).astype(np.uint64)
        for w in range(words):
            lo, hi = 64 * w, min(64 * w + 64, m)
            shifts = np.arange(0, hi - lo, dtype=np.uint64)
            packed[:, w] = (bits[:, lo:hi] << shifts[None, :]).sum(
                axis=1, dtype=np.uint64
            )
    pivot_rows: list[tuple[int, int]] = []
    row = 0
    for col in range(m):
        if row == k:
            break
        w, s = col >> 6, np.uint64(col & 63)
        colbits = (packed[row:, w] >> s) & np.uint64(1)
        nz = np.nonzero(colbits)[0]
        if nz.size == 0:
            continue
        pr = row + int(nz[0])
        if pr != row:
            packed[[row, pr]] = packed[[pr, row]]
        below = packed[row + 1 :]
        hit = ((below[:, w] >> s) & np.uint64(1)).astype(bool)
        if hit.any():
            below[hit] ^= packed[row]
        pivot_rows.append((row, col))
        row += 1
    pivot_cols = {c for _, c in pivot_rows}
    free = next((c for c in range(m) if c not in pivot_cols), None)
    if free is None:
        return None
    y_int = 1 << free
    row_ints = {
        r: int.from_bytes(packed[r].tobytes(), "little") for r, _ in pivot_rows
    }
    for r, c in reversed(pivot_rows):
        # Row r is zero on every column before its pivot c, and y's bit at c
        # is still clear, so this parity covers exactly the columns after c.
        if bin(row_ints[r] & y_int).count("1") & 1:
            y_int |= 1 << c
    y = np.zeros(m, dtype=np.int64)
    for c in range(m):
        y[c] = (y_int >> c) & 1
    return y


def nullspace_of_matrix(mat: np.ndarray, q: int) -> np.ndarray | None:
    """First kernel vector of ``mat`` (shape ``(k, m)``) over GF(q).

    Deterministic: equals the reduced-row-echelon solution with the
    lowest-index free variable set to 1 and every other free variable 0.
    Returns None when the columns are linearly independent.  With no rows
    the convention yields the first standard basis vector.
    """
    mat = np.asarray(mat, dtype=np.int64)
    if mat.ndim != 2:
        raise FieldError(f"expected a 2-D matrix, got shape {mat.shape}")
    m = mat.shape[1]
    if m < 1:
        raise FieldError("matrix needs at least one column")
    if q == 2:
        return _nullspace_gf2(mat % 2, m)
    return _nullspace_general(mat, q)


def nullspace_vector(
    field: PrimeField, rows: Sequence[FieldVector], m: int
) -> FieldVector | None:
    """Kernel vector of the stacked ``rows`` in GF(q)^m, or None if full rank.

    ``rows`` may be empty, in which case the convention returns the first
    standard basis vector (1, 0, ..., 0).
    """
    if m < 1:
        raise FieldError("dimension m must be at least 1")
    for r in rows:
        if r.field != field:
            raise FieldError(f"row field GF({r.field.q}) does not match GF({field.q})")
        if len(r) != m:
            raise FieldError(f"row length {len(r)} does not match m={m}")
    mat = (
        np.array([r.coords for r in rows], dtype=np.int64)
        if rows
        else np.zeros((0, m), dtype=np.int64)
    )
    y = nullspace_of_matrix(mat, field.q)
    return None if y is None else FieldVector.from_array(field, y)


def _splitmix64_int(z: int) -> int:
    z &= _MASK64
    z = (z ^ (z >> 30)) * _MIX1 & _MASK64
    z = (z ^ (z >> 27)) * _MIX2 & _MASK64
    return z ^ (z >> 31)


def _splitmix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class WordStream:
    """A pure stream of 64-bit words keyed by ``(seed, label)``.

    The label (an element identifier, or a role tag such as a candidate
    namespace) is absorbed into a 64-bit base with keyed blake2b; individual
    words are then expanded with a splitmix64 counter mix, so any word is
    addressable directly: ``word(i, a)`` is rejection attempt ``a`` of draw
    ``i``.  Equal inputs always produce equal words, on every platform.
    """

    seed: int
    label: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.seed, int) or not (0 <= self.seed < 1 << 64):
            raise DomainError(f"seed {self.seed!r} is not an unsigned 64-bit integer")
        if not isinstance(self.label, bytes):
            raise DomainError("label must be bytes")
        key = self.seed.to_bytes(8, "little") + b"membound.v1"
        digest = hashlib.blake2b(self.label, digest_size=8, key=key).digest()
        object.__setattr__(self, "_base", int.from_bytes(digest, "little"))

    def word(self, index: int, attempt: int = 0) -> int:
        if not (0 <= index < 1 << 56):
            raise DomainError(f"draw index {index!r} out of range")
        if not (0 <= attempt < 256):
            raise DomainError(f"attempt {attempt!r} out of range")
        ctr = (index << 8) | attempt
        return _splitmix64_int(self._base + _GOLDEN * (ctr + 1))

    def words_at(self, indices: np.ndarray, attempt: int = 0) -> np.ndarray:
        ctrs = (indices.astype(np.uint64) << np.uint64(8)) | np.uint64(attempt)
        z = np.uint64(self._base) + np.uint64(_GOLDEN) * (ctrs + np.uint64(1))
        return _splitmix64_array(z)

    def word_block(self, start: int, count: int, attempt: int = 0) -> np.ndarray:
        return self.words_at(np.arange(start, start + count, dtype=np.uint64), attempt)


def _rejection_threshold(q: int) -> int:
    """Largest multiple of q that fits the draw range [0, 2**64)."""
    return q * ((1 << 64) // q)


def sample_field_element(stream: WordStream, field: PrimeField, index: int = 0) -> int:
    """Uniform element of GF(q) from draw ``index``, by rejection sampling.

    Words >= the largest multiple of q below 2**64 are rejected and redrawn
    at the next attempt counter, so the result is exactly uniform.
    """
    threshold = _rejection_threshold(field.q)
    for attempt in range(256):
        w = stream.word(index, attempt)
        if w < threshold:
            return w % field.q
    raise RuntimeError(
        "rejection sampling did not terminate in 256 attempts"
    )  # pragma: no cover - probability < 2**-192


def sample_field_elements(
    stream: WordStream, field: PrimeField, start: int, count: int
) -> np.ndarray:
    """Vectorized ``sample_field_element`` for draws start..start+count-1."""
    q = field.q
    words = stream.word_block(start, count)
    if (1 << 64) % q == 0:  # q = 2: every word is accepted
        return (words % np.uint64(q)).astype(np.int64)
    threshold = np.uint64(_rejection_threshold(q))
    indices = np.arange(start, start + count, dtype=np.uint64)
    for attempt in range(1, 256):
        bad = words >= threshold
        if not bad.any():
            break
        words[bad] = stream.words_at(indices[bad], attempt)
    else:  # pragma: no cover
        raise RuntimeError("rejection sampling did not terminate in 256 attempts")
    return (words % np.uint64(q)).astype(np.int64)
