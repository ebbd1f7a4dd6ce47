"""Two-sided membership filter stored as a single vector over a prime field.

A key set of size ``n`` is compressed into one nonzero vector ``y`` in
GF(q)^m.  Every element hashes to a row in GF(q)^m through a seeded
pseudorandom stream, and a query accepts iff the row is orthogonal to
``y``.  Orthogonality makes the false-positive rate exactly ``1/q`` for
any fixed nonzero ``y``, while the build step chooses ``y`` so that at
least ``ceil((1 - eps_K) * n)`` key rows are satisfied, capping the
false-negative rate at ``eps_K``.

Sizing is information-theoretically tight up to a vanishing slack term:
``m = ceil((n*D + t_n) / log2 q)`` with ``D = KL(Bern(1-eps_K) ||
Bern(1/q))`` bits per key and ``t_n = n**(2/3)``, so the payload spends
``D + o(1)`` bits per key.  With ``eps_K = 0`` the build solves the ``n``
orthogonality equations exactly by Gaussian elimination (a nonzero
solution always exists because ``m > n``); with ``eps_K > 0`` it scans a
deterministic seeded stream of candidate vectors and keeps the first one
that satisfies enough keys.
"""

from __future__ import annotations

import math
import random
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, FileFormatError, TrivialRegimeError
from .galois import (
    FieldVector,
    PrimeField,
    WordStream,
    is_prime,
    nullspace_of_matrix,
    sample_field_elements,
)
from .rate_distortion import optimal_binary

__all__ = [
    "FilterParams",
    "FilterState",
    "BuildReport",
    "MeasuredRates",
    "derive_params",
    "build",
    "query",
    "query_many",
    "serialize",
    "deserialize",
    "measure_rates",
    "random_bytes_sampler",
    "read_keys",
    "wilson_interval",
]

_MAGIC = b"MF"
_VERSION = 1
# magic, version, q, m, n, eps_K numerator, eps_K denominator, seed
_HEADER = struct.Struct("<2sHIIIIIQ")
_MAX_DENOMINATOR = (1 << 32) - 1
_ELEMENT_TAG = b"E"
_CANDIDATE_TAG = b"C"
_BATCH = 4096

# Two-sided 99% normal quantile used for Wilson confidence intervals.
_WILSON_Z99 = 2.5758293035489004


def _as_error_fraction(eps_K) -> Fraction:
    """Canonical exact representation of the target false-negative rate."""
    try:
        frac = Fraction(eps_K).limit_denominator(_MAX_DENOMINATOR)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"eps_K {eps_K!r} is not a number") from exc
    if not 0 <= frac < 1:
        raise DomainError(f"eps_K must lie in [0, 1); got {eps_K!r}")
    return frac


def _prime_reciprocal(eps_N) -> int:
    """The prime q with eps_N == 1/q, or an error for any other target."""
    try:
        frac = Fraction(eps_N).limit_denominator(_MAX_DENOMINATOR)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"eps_N {eps_N!r} is not a number") from exc
    if (
        frac.numerator != 1
        or not is_prime(frac.denominator)
        or float(frac) != float(eps_N)
    ):
        raise DomainError(
            f"eps_N must be the reciprocal of a prime; got {eps_N!r}"
        )
    return frac.denominator


@dataclass(frozen=True)
class FilterParams:
    """Sizing of a filter instance.

    ``eps_K`` is held as an exact rational so the satisfied-key threshold
    and the serialized header are platform-independent.  ``m`` follows the
    sizing rule ``ceil((n*D + t_n)/log2 q)`` whenever ``n >= 1``; the
    degenerate ``n = 0`` instance accepts any positive ``m``.
    """

    n: int
    eps_K: Fraction
    eps_N: float
    q: int
    m: int
    t_n: float
    seed: int
    search_budget: int

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or self.n < 0:
            raise DomainError(f"key count {self.n!r} must be a non-negative integer")
        if not isinstance(self.q, int) or not is_prime(self.q):
            raise DomainError(f"modulus {self.q!r} is not prime")
        object.__setattr__(self, "eps_K", _as_error_fraction(self.eps_K))
        if float(self.eps_N) != 1.0 / self.q:
            raise DomainError(
                f"eps_N {self.eps_N!r} does not equal 1/q for q={self.q}"
            )
        object.__setattr__(self, "eps_N", 1.0 / self.q)
        if self.eps_K + Fraction(1, self.q) >= 1:
            raise TrivialRegimeError(
                f"eps_K + eps_N = {float(self.eps_K) + self.eps_N} >= 1: "
                "an always-accepting tester is optimal and no filter is needed"
            )
        if not isinstance(self.seed, int) or not 0 <= self.seed < 1 << 64:
            raise DomainError(f"seed {self.seed!r} is not an unsigned 64-bit integer")
        if float(self.t_n) != float(self.n) ** (2.0 / 3.0):
            raise DomainError(
                f"slack term t_n={self.t_n!r} must equal n**(2/3)"
            )
        if not isinstance(self.m, int) or self.m < 1:
            raise DomainError(f"coordinate count {self.m!r} must be a positive integer")
        if self.n >= 1 and self.m != _sized_m(self.n, self.eps_K, self.q, self.t_n):
            raise DomainError(
                f"m={self.m} violates the sizing rule for "
                f"(n={self.n}, eps_K={self.eps_K}, q={self.q})"
            )
        if not isinstance(self.search_budget, int) or self.search_budget < 1:
            raise DomainError(
                f"search budget {self.search_budget!r} must be a positive integer"
            )

    @property
    def bits_payload(self) -> int:
        """Exact payload width: the number of bits in q**m - 1."""
        return (self.q**self.m - 1).bit_length()

    @property
    def payload_bytes(self) -> int:
        return (self.bits_payload + 7) // 8

    @property
    def threshold(self) -> int:
        """Minimum number of satisfied key equations: ceil((1-eps_K)*n)."""
        return math.ceil((1 - self.eps_K) * self.n)


def _sized_m(n: int, eps_K: Fraction, q: int, t_n: float) -> int:
    rate = optimal_binary(float(eps_K), 1.0 / q).rate_bits_per_key
    return math.ceil((n * rate + t_n) / math.log2(q))


def derive_params(n: int, eps_K, eps_N, seed: int) -> FilterParams:
    """Size a filter for ``n`` keys at target error rates (eps_K, eps_N).

    ``eps_N`` must be the reciprocal of a prime — the accept set is a
    hyperplane, so only rates of the form 1/q are achievable exactly and
    nothing is silently rounded.  The candidate budget for two-sided
    builds defaults to ``min(q**m - 1, 10**7)``.
    """
    if not isinstance(n, int) or n < 1:
        raise DomainError(f"key count {n!r} must be a positive integer")
    q = _prime_reciprocal(eps_N)
    eps_K = _as_error_fraction(eps_K)
    if eps_K + Fraction(1, q) >= 1:
        raise TrivialRegimeError(
            f"eps_K + eps_N = {float(eps_K) + 1.0 / q} >= 1: "
            "an always-accepting tester is optimal and no filter is needed"
        )
    t_n = float(n) ** (2.0 / 3.0)
    m = _sized_m(n, eps_K, q, t_n)
    return FilterParams(
        n=n,
        eps_K=eps_K,
        eps_N=1.0 / q,
        q=q,
        m=m,
        t_n=t_n,
        seed=seed,
        search_budget=min(q**m - 1, 10**7),
    )


@dataclass(frozen=True)
class FilterState:
    """An immutable built filter: sizing plus the learned vector ``y``."""

    params: FilterParams
    y: FieldVector

    def __post_init__(self) -> None:
        if self.y.field.q != self.params.q:
            raise DomainError(
                f"vector field GF({self.y.field.q}) does not match q={self.params.q}"
            )
        if len(self.y) != self.params.m:
            raise DomainError(
                f"vector length {len(self.y)} does not match m={self.params.m}"
            )
        if self.y.is_zero():
            raise DomainError("the filter vector y must be nonzero")


@dataclass(frozen=True)
class BuildReport:
    """Outcome of a build: how many keys the chosen vector satisfies."""

    satisfied_keys: int
    candidates_tried: int
    bits_payload: int
    success: bool


def _hash_rows(params: FilterParams, elements: Sequence[bytes]) -> np.ndarray:
    """Hash rows in GF(q)^m for each element, as an int64 matrix."""
    field = PrimeField(params.q)
    out = np.empty((len(elements), params.m), dtype=np.int64)
    for i, element in enumerate(elements):
        if not isinstance(element, bytes):
            raise DomainError(f"element {element!r} must be a byte string")
        stream = WordStream(params.seed, _ELEMENT_TAG + element)
        out[i] = sample_field_elements(stream, field, 0, params.m)
    return out


def _dot_many(rows: np.ndarray, y: np.ndarray, q: int) -> np.ndarray:
    """``rows @ y`` mod q for an (k, m) row matrix, overflow-safe."""
    if rows.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    m = rows.shape[1]
    if m * (q - 1) ** 2 < 1 << 62:
        return (rows @ y) % q
    out = np.empty(rows.shape[0], dtype=np.int64)
    for i in range(rows.shape[0]):
        out[i] = sum(int(a) * int(b) for a, b in zip(rows[i], y)) % q
    return out


def _satisfied_counts(rows: np.ndarray, candidates: np.ndarray, q: int) -> np.ndarray:
    """Number of key rows orthogonal to each candidate vector."""
    m = rows.shape[1]
    if m * (q - 1) ** 2 < 1 << 62:
        dots = (candidates @ rows.T) % q
    else:
        dots = np.zeros((candidates.shape[0], rows.shape[0]), dtype=np.int64)
        for j in range(m):
            dots = (dots + np.outer(candidates[:, j], rows[:, j])) % q
    return (dots == 0).sum(axis=1)


def build(
    params: FilterParams, keys: Sequence[bytes]
) -> tuple[FilterState | None, BuildReport]:
    """Choose the filter vector ``y`` for a key set.

    With ``eps_K = 0`` the vector is an exact kernel vector of the key
    rows (it always exists because ``m > n``).  Otherwise candidates are
    drawn from the seeded stream in a fixed order and the first one
    satisfying at least ``ceil((1-eps_K)*n)`` keys wins, so rebuilding
    with the same inputs — even with a concurrent scan, as long as the
    lowest-index success is kept — returns an identical state.  If the
    candidate budget runs out the state is None and the report carries
    ``success=False``.
    """
    keys = list(keys)
    if len(keys) != params.n:
        raise DomainError(f"expected {params.n} keys, got {len(keys)}")
    if len(set(keys)) != len(keys):
        raise DomainError("keys must be distinct")
    field = PrimeField(params.q)
    if params.n == 0:
        y = FieldVector(field, (1,) + (0,) * (params.m - 1))
        return FilterState(params, y), BuildReport(0, 0, params.bits_payload, True)

    rows = _hash_rows(params, keys)
    threshold = params.threshold

    if params.eps_K == 0:
        kernel = nullspace_of_matrix(rows, params.q)
        # m = n + ceil(t_n/log2 q) > n bounds the rank below m, so a
        # nonzero kernel vector always exists.
        satisfied = int((_dot_many(rows, kernel, params.q) == 0).sum())
        state = FilterState(params, FieldVector.from_array(field, kernel))
        return state, BuildReport(
            satisfied, 0, params.bits_payload, satisfied >= threshold
        )

    stream = WordStream(params.seed, _CANDIDATE_TAG)
    budget = params.search_budget
    tried = 0
    cursor = 0  # counts generated candidates, including skipped zero vectors
    best = 0
    while tried < budget:
        want = min(_BATCH, budget - tried)
        block = sample_field_elements(
            stream, field, cursor * params.m, want * params.m
        ).reshape(want, params.m)
        cursor += want
        candidates = block[block.any(axis=1)]
        if candidates.shape[0] == 0:
            continue
        candidates = candidates[: budget - tried]
        counts = _satisfied_counts(rows, candidates, params.q)
        best = max(best, int(counts.max()))
        hits = np.flatnonzero(counts >= threshold)
        if hits.size:
            first = int(hits[0])
            tried += first + 1
            winner = candidates[first]
            satisfied = int((_dot_many(rows, winner, params.q) == 0).sum())
            state = FilterState(params, FieldVector.from_array(field, winner))
            return state, BuildReport(
                satisfied, tried, params.bits_payload, satisfied >= threshold
            )
        tried += candidates.shape[0]
    return None, BuildReport(best, tried, params.bits_payload, False)


def query(state: FilterState, element: bytes) -> int:
    """1 iff the element's hash row is orthogonal to the filter vector."""
    return int(query_many(state, [element])[0])


def query_many(state: FilterState, elements: Sequence[bytes]) -> np.ndarray:
    """Vectorized ``query`` over a sequence of elements."""
    params = state.params
    y = state.y.as_array()
    out = np.empty(len(elements), dtype=np.int64)
    for lo in range(0, len(elements), _BATCH):
        chunk = elements[lo : lo + _BATCH]
        rows = _hash_rows(params, chunk)
        out[lo : lo + len(chunk)] = _dot_many(rows, y, params.q) == 0
    return out


def serialize(state: FilterState) -> bytes:
    """Fixed 32-byte header plus the base-q packing of ``y``.

    The payload is the little-endian encoding of ``sum(y_j * q**j)`` in
    exactly ``ceil(bits_payload / 8)`` bytes, so equal states are
    byte-identical on every platform.
    """
    p = state.params
    header = _HEADER.pack(
        _MAGIC,
        _VERSION,
        p.q,
        p.m,
        p.n,
        p.eps_K.numerator,
        p.eps_K.denominator,
        p.seed,
    )
    value = 0
    for c in reversed(state.y.coords):
        value = value * p.q + c
    return header + value.to_bytes(p.payload_bytes, "little")


def deserialize(data: bytes) -> FilterState:
    """Inverse of ``serialize``; validates the header and payload bounds."""
    if len(data) < _HEADER.size:
        raise FileFormatError(
            f"truncated header: {len(data)} bytes < {_HEADER.size}"
        )
    magic, version, q, m, n, eps_num, eps_den, seed = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise FileFormatError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise FileFormatError(f"unsupported version {version}")
    if eps_den == 0 or eps_num >= eps_den:
        raise FileFormatError(f"invalid eps_K rational {eps_num}/{eps_den}")
    try:
        params = FilterParams(
            n=n,
            eps_K=Fraction(eps_num, eps_den),
            eps_N=1.0 / q if q else 0.0,
            q=q,
            m=m,
            t_n=float(n) ** (2.0 / 3.0),
            seed=seed,
            search_budget=min(q**m - 1, 10**7) if q > 1 else 1,
        )
    except DomainError as exc:
        raise FileFormatError(f"inconsistent header: {exc}") from exc
    payload = data[_HEADER.size :]
    if len(payload) != params.payload_bytes:
        raise FileFormatError(
            f"payload is {len(payload)} bytes, expected {params.payload_bytes}"
        )
    value = int.from_bytes(payload, "little")
    if value >= q**m:
        raise FileFormatError("payload exceeds the base-q capacity of y")
    coords = []
    for _ in range(m):
        coords.append(value % q)
        value //= q
    try:
        return FilterState(params, FieldVector(PrimeField(q), tuple(coords)))
    except DomainError as exc:
        raise FileFormatError(str(exc)) from exc


@dataclass(frozen=True)
class MeasuredRates:
    """Empirical error rates with Wilson 99% confidence intervals."""

    fnr_hat: float
    fpr_hat: float
    fnr_ci: tuple[float, float]
    fpr_ci: tuple[float, float]
    trials: int


def wilson_interval(
    successes: int, total: int, z: float = _WILSON_Z99
) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if total == 0:
        return (0.0, 1.0)
    phat = successes / total
    denom = 1.0 + z * z / total
    center = (phat + z * z / (2 * total)) / denom
    half = z * math.sqrt(phat * (1 - phat) / total + z * z / (4 * total * total))
    half /= denom
    return (max(0.0, center - half), min(1.0, center + half))


def measure_rates(
    tester: Callable[[Sequence[bytes]], Sequence[int]],
    keys: Sequence[bytes],
    nonkey_sampler: Callable[[], bytes],
    trials: int,
) -> MeasuredRates:
    """Empirical FNR over the keys and FPR over sampled non-keys.

    ``tester`` maps a batch of elements to 0/1 answers (for a built
    filter, pass ``functools.partial(query_many, state)``).  Samples that
    collide with the key set are rejected and redrawn, so the FPR is
    measured over genuine non-keys.
    """
    if not isinstance(trials, int) or trials < 1:
        raise DomainError(f"trials {trials!r} must be a positive integer")
    keys = list(keys)
    key_set = set(keys)
    if keys:
        answers = np.asarray(tester(keys), dtype=np.int64)
        misses = int((answers == 0).sum())
        fnr_hat = misses / len(keys)
    else:
        misses = 0
        fnr_hat = 0.0
    nonkeys: list[bytes] = []
    attempts = 0
    while len(nonkeys) < trials:
        candidate = nonkey_sampler()
        attempts += 1
        if attempts > 100 * trials + 100:
            raise DomainError(
                "non-key sampler keeps colliding with the key set"
            )
        if candidate in key_set:
            continue
        nonkeys.append(candidate)
    accepts = int((np.asarray(tester(nonkeys), dtype=np.int64) == 1).sum())
    return MeasuredRates(
        fnr_hat=fnr_hat,
        fpr_hat=accepts / trials,
        fnr_ci=wilson_interval(misses, len(keys)),
        fpr_ci=wilson_interval(accepts, trials),
        trials=trials,
    )


def random_bytes_sampler(seed: int, length: int) -> Callable[[], bytes]:
    """A deterministic stream of random identifiers of a fixed byte length."""
    if length < 1:
        raise DomainError(f"identifier length {length!r} must be positive")
    rng = random.Random(seed)
    return lambda: rng.randbytes(length)


def read_keys(path) -> list[bytes]:
    """Load a key-set file: one key per line, identified by its exact bytes.

    The file is split on LF; the bytes before each LF (including any
    carriage returns or other whitespace) form the element identifier.
    """
    with open(path, "rb") as handle:
        data = handle.read()
    if data.endswith(b"\n"):
        data = data[:-1]
    return data.split(b"\n") if data else []
