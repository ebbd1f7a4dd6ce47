"""Tests for filter sizing, build, query, serialization, and measurement."""

import dataclasses
import functools
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from membound import (
    DomainError,
    FieldVector,
    FileFormatError,
    FilterParams,
    FilterState,
    PrimeField,
    TrivialRegimeError,
    build,
    derive_params,
    deserialize,
    measure_rates,
    query,
    query_many,
    random_bytes_sampler,
    read_keys,
    serialize,
)
from membound.filter import _HEADER, wilson_interval

KEYS12 = [f"key-{i:02d}".encode() for i in range(12)]


@pytest.fixture(scope="module")
def built_12_seed0():
    params = derive_params(12, Fraction(1, 4), 0.5, 0)
    state, report = build(params, KEYS12)
    return params, state, report


@pytest.fixture(scope="module")
def built_1000():
    params = derive_params(1000, 0, 0.5, 3)
    keys = [b"item-%d" % i for i in range(1000)]
    state, report = build(params, keys)
    return params, keys, state, report


class TestDeriveParams:
    def test_one_sided_q2(self):
        params = derive_params(1000, 0, 0.5, 0)
        assert params.q == 2
        assert params.m == 1100
        assert params.t_n == pytest.approx(100.0, rel=1e-12)
        assert params.eps_K == Fraction(0)
        assert params.eps_N == 0.5
        assert params.search_budget == 10**7
        assert params.threshold == 1000
        assert params.bits_payload == 1100
        assert params.payload_bytes == 138

    def test_two_sided_small(self):
        params = derive_params(12, Fraction(1, 4), 0.5, 7)
        assert params.m == 8
        assert params.t_n == 12.0 ** (2.0 / 3.0)
        assert params.threshold == 9
        assert params.search_budget == 255  # 2**8 - 1 < 10**7
        assert params.bits_payload == 8
        assert params.payload_bytes == 1

    def test_one_sided_q3(self):
        params = derive_params(100, 0, 1.0 / 3.0, 0)
        assert params.q == 3
        assert params.m == 114
        assert params.bits_payload == 181  # ceil(114 * log2 3)
        assert params.payload_bytes == 23

    def test_float_eps_K_canonicalized(self):
        assert derive_params(12, 0.25, 0.5, 0).eps_K == Fraction(1, 4)

    def test_non_reciprocal_eps_N_rejected(self):
        for eps_N in (0.3, 0.25, 0.5000001, 0.0, 1.0):
            with pytest.raises(DomainError):
                derive_params(10, 0, eps_N, 0)

    def test_trivial_regime(self):
        with pytest.raises(TrivialRegimeError):
            derive_params(10, 0.6, 0.5, 0)
        with pytest.raises(TrivialRegimeError):
            derive_params(10, 0.5, 0.5, 0)

    def test_key_count_validation(self):
        for n in (0, -1, 1.5):
            with pytest.raises(DomainError):
                derive_params(n, 0, 0.5, 0)

    def test_seed_validation(self):
        for seed in (-1, 1 << 64, 0.5):
            with pytest.raises(DomainError):
                derive_params(10, 0, 0.5, seed)


class TestFilterParams:
    def test_sizing_rule_enforced(self):
        params = derive_params(1000, 0, 0.5, 0)
        with pytest.raises(DomainError):
            dataclasses.replace(params, m=params.m + 1)
        with pytest.raises(DomainError):
            dataclasses.replace(params, m=params.m - 1)

    def test_slack_term_enforced(self):
        params = derive_params(1000, 0, 0.5, 0)
        with pytest.raises(DomainError):
            dataclasses.replace(params, t_n=99.0)

    def test_eps_N_must_be_reciprocal_of_q(self):
        params = derive_params(1000, 0, 0.5, 0)
        with pytest.raises(DomainError):
            dataclasses.replace(params, eps_N=0.25)

    def test_composite_modulus_rejected(self):
        with pytest.raises(DomainError):
            FilterParams(
                n=0, eps_K=0, eps_N=0.25, q=4, m=3, t_n=0.0, seed=0, search_budget=1
            )

    def test_budget_validation(self):
        params = derive_params(12, 0.25, 0.5, 0)
        with pytest.raises(DomainError):
            dataclasses.replace(params, search_budget=0)

    def test_degenerate_empty_instance(self):
        params = FilterParams(
            n=0, eps_K=0, eps_N=0.5, q=2, m=3, t_n=0.0, seed=0, search_budget=1
        )
        assert params.threshold == 0
        assert params.bits_payload == 3

    def test_thresholds(self):
        assert derive_params(12, Fraction(1, 4), 0.5, 0).threshold == 9
        assert derive_params(10, 0, 0.5, 0).threshold == 10
        # ceil((1 - 1/3) * 10) = ceil(6.67) = 7
        assert derive_params(10, Fraction(1, 3), 0.5, 0).threshold == 7


class TestBuild:
    @pytest.mark.parametrize("eps_N,n", [(0.5, 50), (1.0 / 3.0, 20)])
    def test_one_sided_always_succeeds(self, eps_N, n):
        params = derive_params(n, 0, eps_N, 11)
        keys = [b"k%04d" % i for i in range(n)]
        state, report = build(params, keys)
        assert report.success
        assert report.satisfied_keys == n
        assert report.candidates_tried == 0
        assert report.bits_payload == params.bits_payload
        assert not state.y.is_zero()
        assert query_many(state, keys).all()

    def test_duplicate_keys_rejected(self):
        params = derive_params(3, 0, 0.5, 0)
        with pytest.raises(DomainError):
            build(params, [b"a", b"b", b"a"])

    def test_wrong_key_count_rejected(self):
        params = derive_params(3, 0, 0.5, 0)
        with pytest.raises(DomainError):
            build(params, [b"a", b"b"])

    def test_degenerate_empty_build(self):
        params = FilterParams(
            n=0, eps_K=0, eps_N=0.5, q=2, m=4, t_n=0.0, seed=0, search_budget=1
        )
        state, report = build(params, [])
        assert report.success
        assert report.satisfied_keys == 0
        assert state.y.coords == (1, 0, 0, 0)

    def test_two_sided_first_candidate_win(self):
        params = derive_params(12, Fraction(1, 4), 0.5, 7)
        state, report = build(params, KEYS12)
        assert report.success
        assert report.satisfied_keys == 11
        assert report.candidates_tried == 1
        assert state.y.coords == (0, 1, 0, 0, 0, 0, 0, 0)

    def test_two_sided_meets_threshold(self, built_12_seed0):
        params, state, report = built_12_seed0
        assert report.success
        assert report.satisfied_keys >= params.threshold
        assert report.satisfied_keys == 9
        assert report.candidates_tried == 2
        # The report's count and live queries must agree.
        assert int(query_many(state, KEYS12).sum()) == report.satisfied_keys

    def test_two_sided_deterministic_and_budget_independent(self, built_12_seed0):
        params, state, _ = built_12_seed0
        again, _ = build(params, KEYS12)
        assert again == state
        assert serialize(again) == serialize(state)
        bigger = dataclasses.replace(params, search_budget=100_000)
        widened, _ = build(bigger, KEYS12)
        assert widened.y == state.y

    def test_budget_exhaustion_reports_failure(self):
        params = derive_params(12, Fraction(1, 4), 0.5, 0)
        starved = dataclasses.replace(params, search_budget=1)
        state, report = build(starved, KEYS12)
        assert state is None
        assert not report.success
        assert report.candidates_tried == 1
        assert report.satisfied_keys == 6  # best candidate seen, below 9


class TestQuery:
    def test_satisfied_keys_answer_one(self, built_1000):
        _, keys, state, report = built_1000
        assert report.satisfied_keys == 1000
        assert query(state, keys[0]) == 1
        assert query_many(state, keys).all()

    def test_query_many_matches_scalar(self, built_12_seed0):
        _, state, _ = built_12_seed0
        elements = KEYS12 + [b"stranger-%d" % i for i in range(20)]
        batched = query_many(state, elements)
        assert batched.tolist() == [query(state, e) for e in elements]

    def test_hyperplane_accepts_exactly_one_in_q(self):
        # y = (1, 0, 1) over GF(2): rows with row[0] = row[2] pass -> 4 of 8.
        assert self._accept_count(2, (1, 0, 1)) == 4
        rng = np.random.default_rng(3)
        for q in (2, 3, 5):
            for m in (1, 2, 3, 4):
                for _ in range(3):
                    y = tuple(int(v) for v in rng.integers(0, q, size=m))
                    if not any(y):
                        y = (1,) + y[1:]
                    assert self._accept_count(q, y) == q ** (m - 1)

    @staticmethod
    def _accept_count(q, y):
        m = len(y)
        return sum(
            1
            for row in itertools.product(range(q), repeat=m)
            if sum(r * c for r, c in zip(row, y)) % q == 0
        )


def _repack(blob, **overrides):
    fields = dict(
        zip(
            ("magic", "version", "q", "m", "n", "eps_num", "eps_den", "seed"),
            _HEADER.unpack_from(blob),
        )
    )
    fields.update(overrides)
    return _HEADER.pack(*fields.values()) + blob[_HEADER.size :]


class TestSerialization:
    def test_round_trip_one_sided(self, built_1000):
        params, _, state, _ = built_1000
        blob = serialize(state)
        assert len(blob) == _HEADER.size + params.payload_bytes == 32 + 138
        restored = deserialize(blob)
        assert restored == state
        assert serialize(restored) == blob

    def test_round_trip_two_sided(self, built_12_seed0):
        params, state, _ = built_12_seed0
        blob = serialize(state)
        assert len(blob) == 32 + 1
        restored = deserialize(blob)
        assert restored.params == params
        assert restored.y == state.y

    def test_q3_payload_size(self):
        params = derive_params(100, 0, 1.0 / 3.0, 5)
        keys = [b"w%d" % i for i in range(100)]
        state, _ = build(params, keys)
        blob = serialize(state)
        assert len(blob) == 32 + 23
        assert deserialize(blob) == state

    def test_header_fields(self, built_12_seed0):
        params, state, _ = built_12_seed0
        blob = serialize(state)
        magic, version, q, m, n, eps_num, eps_den, seed = _HEADER.unpack_from(blob)
        assert magic == b"MF"
        assert version == 1
        assert (q, m, n) == (2, 8, 12)
        assert Fraction(eps_num, eps_den) == Fraction(1, 4)
        assert seed == 0

    def test_bad_magic(self, built_12_seed0):
        blob = serialize(built_12_seed0[1])
        with pytest.raises(FileFormatError):
            deserialize(b"XX" + blob[2:])

    def test_bad_version(self, built_12_seed0):
        blob = serialize(built_12_seed0[1])
        with pytest.raises(FileFormatError):
            deserialize(_repack(blob, version=2))

    def test_truncated_header(self):
        with pytest.raises(FileFormatError):
            deserialize(b"MF\x01\x00")

    def test_wrong_payload_length(self, built_12_seed0):
        blob = serialize(built_12_seed0[1])
        with pytest.raises(FileFormatError):
            deserialize(blob[:-1])
        with pytest.raises(FileFormatError):
            deserialize(blob + b"\x00")

    def test_tampered_m_breaks_sizing(self, built_12_seed0):
        blob = serialize(built_12_seed0[1])
        with pytest.raises(FileFormatError):
            deserialize(_repack(blob, m=9) + b"\x00" * 100)

    def test_invalid_eps_rational(self, built_12_seed0):
        blob = serialize(built_12_seed0[1])
        with pytest.raises(FileFormatError):
            deserialize(_repack(blob, eps_num=3, eps_den=2))
        with pytest.raises(FileFormatError):
            deserialize(_repack(blob, eps_den=0))

    def test_composite_q(self, built_12_seed0):
        blob = serialize(built_12_seed0[1])
        with pytest.raises(FileFormatError):
            deserialize(_repack(blob, q=4))

    def test_zero_vector_rejected(self):
        header = _HEADER.pack(b"MF", 1, 2, 3, 0, 0, 1, 0)
        with pytest.raises(FileFormatError):
            deserialize(header + b"\x00")

    def test_payload_value_above_capacity(self):
        # q=3, m=1: payload byte must encode a value < 3.
        header = _HEADER.pack(b"MF", 1, 3, 1, 0, 0, 1, 0)
        assert deserialize(header + b"\x02").y.coords == (2,)
        with pytest.raises(FileFormatError):
            deserialize(header + b"\x03")


def _set_tester(key_set):
    return lambda batch: [1 if e in key_set else 0 for e in batch]


class TestMeasureRates:
    def test_oracle_tester_is_perfect(self):
        keys = [b"a", b"b", b"c"]
        rates = measure_rates(
            _set_tester(set(keys)), keys, random_bytes_sampler(0, 8), 500
        )
        assert rates.fnr_hat == 0.0
        assert rates.fpr_hat == 0.0
        assert rates.fpr_ci[0] == 0.0
        assert rates.trials == 500

    def test_constant_answer_testers(self):
        keys = [b"a", b"b"]
        sampler = random_bytes_sampler(1, 8)
        accept = measure_rates(lambda b: [1] * len(b), keys, sampler, 200)
        assert accept.fnr_hat == 0.0
        assert accept.fpr_hat == 1.0
        assert accept.fpr_ci[1] == pytest.approx(1.0, abs=1e-12)
        reject = measure_rates(lambda b: [0] * len(b), keys, sampler, 200)
        assert reject.fnr_hat == 1.0
        assert reject.fpr_hat == 0.0

    def test_built_filter_hits_design_rates(self, built_1000):
        _, keys, state, _ = built_1000
        rates = measure_rates(
            functools.partial(query_many, state),
            keys,
            random_bytes_sampler(1, 8),
            100_000,
        )
        assert rates.fnr_hat == 0.0
        assert abs(rates.fpr_hat - 0.5) <= 3.0 * math.sqrt(0.25 / 100_000)
        assert rates.fpr_ci[0] <= 0.5 <= rates.fpr_ci[1]

    def test_universe_agnostic(self, built_1000):
        _, keys, state, _ = built_1000
        tester = functools.partial(query_many, state)
        short = measure_rates(tester, keys, random_bytes_sampler(2, 8), 20_000)
        long = measure_rates(tester, keys, random_bytes_sampler(2, 64), 20_000)
        assert short.fpr_ci[0] <= long.fpr_ci[1]
        assert long.fpr_ci[0] <= short.fpr_ci[1]

    def test_trials_validation(self):
        with pytest.raises(DomainError):
            measure_rates(lambda b: [0] * len(b), [], random_bytes_sampler(0, 8), 0)

    def test_sampler_collision_guard(self):
        keys = [bytes([i]) for i in range(256)]
        with pytest.raises(DomainError):
            measure_rates(_set_tester(set(keys)), keys, random_bytes_sampler(0, 1), 1)

    def test_sampler_length_validation(self):
        with pytest.raises(DomainError):
            random_bytes_sampler(0, 0)


class TestWilsonInterval:
    def test_empty_is_vacuous(self):
        assert wilson_interval(0, 0) == (0.0, 1.0)

    def test_extremes_clamped(self):
        lo, hi = wilson_interval(100, 100)
        assert hi == 1.0 and 0.9 < lo < 1.0
        lo, hi = wilson_interval(0, 100)
        assert lo == 0.0 and 0.0 < hi < 0.1

    def test_contains_point_estimate_and_symmetric_at_half(self):
        lo, hi = wilson_interval(5000, 10000)
        assert lo < 0.5 < hi
        assert lo + hi == pytest.approx(1.0, abs=1e-12)

    def test_width_shrinks_with_samples(self):
        w = lambda n: (lambda ci: ci[1] - ci[0])(wilson_interval(n // 2, n))
        assert w(100_000) < w(10_000) < w(1_000)


class TestSpaceOptimality:
    def test_per_key_bits_approach_the_rate(self):
        for q in (2, 3):
            rate = math.log2(q)  # optimal_binary(0, 1/q)
            for n in (10**3, 10**4, 10**5):
                params = derive_params(n, 0, 1.0 / q, 0)
                t_n = float(n) ** (2.0 / 3.0)
                bound = rate + t_n * (1 + math.log2(q)) / (n * math.log2(q)) + 8.0 / n
                assert params.bits_payload / n <= bound

    def test_built_report_matches_params(self, built_1000):
        params, _, _, report = built_1000
        assert report.bits_payload == params.bits_payload == 1100


class TestReadKeys:
    def test_round_trip_with_trailing_newline(self, tmp_path):
        path = tmp_path / "keys.txt"
        path.write_bytes(b"alpha\nbeta\ngamma\n")
        assert read_keys(path) == [b"alpha", b"beta", b"gamma"]

    def test_no_trailing_newline(self, tmp_path):
        path = tmp_path / "keys.txt"
        path.write_bytes(b"alpha\nbeta")
        assert read_keys(path) == [b"alpha", b"beta"]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "keys.txt"
        path.write_bytes(b"")
        assert read_keys(path) == []

    def test_exact_bytes_preserved(self, tmp_path):
        path = tmp_path / "keys.txt"
        path.write_bytes(b"a\n\nb\r\n")
        assert read_keys(path) == [b"a", b"", b"b\r"]
