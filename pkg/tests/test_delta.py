from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache

import pytest

from nldistill import build_tables, delta, load_tables, wedge
from nldistill.delta import (
    MemoryBudgetError,
    TableChecksumError,
    TableFormatError,
    TableHeaderError,
    TableVersionError,
    fits_int64,
)

F = Fraction


def naive_delta(p: Fraction):
    """Direct memoized evaluation of the recursion: the independent oracle."""

    @lru_cache(maxsize=None)
    def d(sign: str, m: int, k: int, l: int) -> Fraction:
        if m == 0:
            return F(k * l)
        h = 2 ** (m - 1)
        opt = max if sign == "+" else min
        return opt(
            p * (d(sign, m - 1, i, j) + d(sign, m - 1, k - i, l - j))
            + (F(1, 2) - p) * (d(sign, m - 1, i, l - j) + d(sign, m - 1, k - i, j))
            for i in range(k - min(k, h), min(k, h) + 1)
            for j in range(l - min(l, h), min(l, h) + 1)
        )

    return d


def one_copy_extrema(system) -> tuple[dict, dict]:
    """Brute-force f^T P(.|u,v) g over singleton/arbitrary preimage classes."""
    hi: dict = {}
    lo: dict = {}
    for u, v in itertools.product((0, 1), (0, 1)):
        for fm in range(4):
            for gm in range(4):
                k, l = bin(fm).count("1"), bin(gm).count("1")
                val = sum(
                    system.prob(a, b, u, v)
                    for a in (0, 1) if (fm >> a) & 1
                    for b in (0, 1) if (gm >> b) & 1
                )
                hi[k, l] = max(hi.get((k, l), F(0)), val)
                lo[k, l] = min(lo.get((k, l), F(1)), val)
    return hi, lo


def test_base_level():
    t = build_tables(F(2, 5), 0)
    for k, l in itertools.product((0, 1), (0, 1)):
        assert t.delta("+", 0, k, l) == k * l
        assert t.delta("-", 0, k, l) == k * l


def test_level_one_oracle_values():
    t = build_tables(F(2, 5), 1)
    assert t.delta("+", 1, 1, 1) == F(2, 5)
    assert t.delta("-", 1, 1, 1) == F(1, 10)
    assert t.delta("+", 1, 1, 2) == F(1, 2)
    # and the recursion level 1 equals the one-copy wiring optimum for an
    # isotropic source with this p
    hi, lo = one_copy_extrema(wedge(F(1, 5), 0))
    for k in range(3):
        for l in range(3):
            assert t.delta("+", 1, k, l) == hi[k, l]
            assert t.delta("-", 1, k, l) == lo[k, l]


@pytest.mark.parametrize("p", [F(0), F(1, 7), F(3, 8), F(2, 5), F(1, 2)])
def test_top_corner_is_one(p):
    t = build_tables(p, 3)
    for m in range(4):
        assert t.delta("+", m, 2 ** m, 2 ** m) == 1
        assert t.delta("-", m, 2 ** m, 2 ** m) == 1


@pytest.mark.parametrize("p", [F(0), F(1, 2), F(2, 5), F(1, 7), F(3, 8),
                               F(1929, 15625), F(1234567, 8000000)])
def test_matches_naive_recursion(p):
    n = 3
    t = build_tables(p, n)
    ref = naive_delta(p)
    for sign in "+-":
        for m in range(n + 1):
            for k in range(2 ** m + 1):
                for l in range(2 ** m + 1):
                    assert t.delta(sign, m, k, l) == ref(sign, m, k, l), (sign, m, k, l)


def test_backends_agree():
    a = build_tables(F(2, 5), 4, backend="numba")
    b = build_tables(F(2, 5), 4, backend="numpy")
    assert a == b
    assert a.ops_per_level == b.ops_per_level


def test_int64_guard_picks_object_path():
    p = F(1234567, 8000000)
    assert not fits_int64(p, 3)
    t = build_tables(p, 3)
    assert t.plus[3].dtype == object and t.backend == "numpy"
    assert fits_int64(F(2, 5), 9)


@pytest.mark.parametrize("p", [F(2, 5), F(3, 8), F(1, 7)])
def test_symmetry_monotonicity_range(p):
    n = 4
    t = build_tables(p, n)
    for sign in "+-":
        for m in range(n + 1):
            size = 2 ** m
            for k in range(size + 1):
                assert t.delta(sign, m, k, 0) == 0
                assert t.delta(sign, m, 0, k) == 0
                for l in range(size + 1):
                    v = t.delta(sign, m, k, l)
                    assert v == t.delta(sign, m, l, k)
                    assert 0 <= v <= 1
    for m in range(n + 1):
        size = 2 ** m
        for k in range(size + 1):
            for l in range(size + 1):
                assert t.delta("-", m, k, l) <= t.delta("+", m, k, l)


def test_plus_monotone_in_preimage_size():
    t = build_tables(F(2, 5), 4)
    for m in range(5):
        size = 2 ** m
        for k in range(size):
            for l in range(size + 1):
                assert t.delta("+", m, k, l) <= t.delta("+", m, k + 1, l)


def test_p_flip_invariance():
    # swapping p and 1/2 - p relabels the window only
    a = build_tables(F(2, 5), 3)
    b = build_tables(F(1, 10), 3)
    for sign in "+-":
        for m in range(4):
            for k in range(2 ** m + 1):
                for l in range(2 ** m + 1):
                    assert a.delta(sign, m, k, l) == b.delta(sign, m, k, l)


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        build_tables(F(3, 5), 2)
    with pytest.raises(ValueError):
        build_tables(F(-1, 5), 2)
    with pytest.raises(ValueError):
        build_tables(F(1, 4), -1)


def test_memory_budget_reports_requirement():
    with pytest.raises(MemoryBudgetError) as exc:
        build_tables(F(2, 5), 6, memory_budget=1000)
    assert exc.value.required > 1000
    assert "memory_budget" in str(exc.value)


def test_accessor_range_errors():
    t = build_tables(F(2, 5), 2)
    with pytest.raises(ValueError):
        t.delta("x", 1, 0, 0)
    with pytest.raises(IndexError):
        t.delta("+", 3, 0, 0)
    with pytest.raises(IndexError):
        t.delta("+", 2, 5, 0)
    assert delta(t, "+", 2, 4, 4) == 1


def test_save_load_round_trip(tmp_path):
    t = build_tables(F(2, 5), 3)
    path = tmp_path / "t.nldt"
    t.save(path)
    again = load_tables(path)
    assert again == t
    assert again.delta("+", 3, 3, 5) == t.delta("+", 3, 3, 5)


def test_save_load_object_path(tmp_path):
    t = build_tables(F(1234567, 8000000), 2)
    path = tmp_path / "t.nldt"
    t.save(path)
    assert load_tables(path) == t


def test_load_error_cases(tmp_path):
    t = build_tables(F(2, 5), 2)
    path = tmp_path / "t.nldt"
    t.save(path)
    data = path.read_bytes()

    truncated = tmp_path / "trunc.nldt"
    truncated.write_bytes(data[:-25])
    with pytest.raises(TableChecksumError):
        load_tables(truncated)

    versioned = tmp_path / "version.nldt"
    versioned.write_bytes(data.replace(b"NLDELTA 1", b"NLDELTA 2", 1))
    with pytest.raises(TableVersionError):
        load_tables(versioned)

    wrong_n = tmp_path / "n.nldt"
    wrong_n.write_bytes(data.replace(b"n=2", b"n=1", 1))
    with pytest.raises(TableHeaderError):
        load_tables(wrong_n)

    with pytest.raises(TableHeaderError):
        load_tables(path, expect_n=3)
    with pytest.raises(TableHeaderError):
        load_tables(path, expect_p=F(1, 3))

    garbage = tmp_path / "garbage.nldt"
    garbage.write_bytes(data[: data.index(b"\n", data.index(b"sha256")) + 1]
                        + b"zz:not-a-number")
    with pytest.raises((TableFormatError, TableChecksumError)):
        load_tables(garbage)


def test_malformed_rational_is_distinct(tmp_path):
    # corrupt one payload digit and re-stamp the checksum so only the
    # rational parser can object
    import hashlib

    t = build_tables(F(1, 2), 1)
    path = tmp_path / "t.nldt"
    t.save(path)
    data = path.read_bytes()
    head_end = data.index(b"sha256=")
    payload_start = data.index(b"\n", head_end) + 1
    payload = bytearray(data[payload_start:])
    # entries are netstrings "len:digits"; replace the first digit by a letter
    colon = payload.index(b":")
    payload[colon + 1] = ord("x")
    digest = hashlib.sha256(bytes(payload)).hexdigest().encode()
    fixed = data[:head_end] + b"sha256=" + digest + b"\n" + bytes(payload)
    bad = tmp_path / "bad.nldt"
    bad.write_bytes(fixed)
    with pytest.raises(TableFormatError):
        load_tables(bad)


def test_ops_counts_criterion_window():
    t = build_tables(F(2, 5), 7)
    ops = t.ops_per_level
    for m in (5, 6, 7):
        ratio = ops[m] / ops[m - 1]
        assert 12 <= ratio <= 20
