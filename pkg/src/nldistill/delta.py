"""Dynamic-programming tables for the recursive wiring bounds.

For a parameter p = P(0,0|0,0) of an instance, the tables hold the
grids delta_m_plus(k,l) and delta_m_minus(k,l) for every level
m = 0..n.  Level 0 is k*l on {0,1}^2; level m is the window optimum

    opt_{i,j} p*[d(i,j) + d(k-i,l-j)] + (1/2-p)*[d(i,l-j) + d(k-i,j)]

over i in [k-min(k,2^(m-1)), min(k,2^(m-1))] and j likewise.

Entries are stored as integer numerators over the exact per-level
denominator D_m = (2*den(p))^m, which keeps the whole build in integer
arithmetic: int64 via the numba kernels whenever magnitudes provably
fit, otherwise Python big ints in object arrays.  Only the wedge
k <= min(l, 2^(m-1)) is scanned; the rest of each grid follows from the
(k,l) <-> (l,k) symmetry and the complement identity

    delta_m(2^m - k, 2^m - l) = delta_m(k, l) + 1 - (k + l)/2^m,

which both hold exactly for the recursion (and are cross-checked against
a direct recursive evaluation in the tests).
"""
from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .boxes import RationalLike, rational
from . import kernels

#: int64 kernels are used only while (2*den(p))^n stays below this;
#: every intermediate is then below 8*(2*den(p))^n < 2^63.
INT64_SAFE_LIMIT = 1 << 59

DEFAULT_MEMORY_BUDGET = 2 << 30  # bytes

_MAGIC = "NLDELTA"
_FORMAT_VERSION = 1


class DeltaTableError(Exception):
    """Base class for table build and persistence failures."""


class TableVersionError(DeltaTableError):
    pass


class TableChecksumError(DeltaTableError):
    pass


class TableHeaderError(DeltaTableError):
    pass


class TableFormatError(DeltaTableError):
    pass


class MemoryBudgetError(DeltaTableError):
    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(
            f"table levels need about {required} bytes which exceeds the "
            f"memory budget of {budget} bytes; pass a larger memory_budget"
        )


def fits_int64(p: Fraction, n: int) -> bool:
    return (2 * p.denominator) ** n <= INT64_SAFE_LIMIT


def _estimate_bytes(n: int, int64: bool) -> int:
    per_entry = 8 if int64 else 120  # object arrays: pointer plus a small int
    return sum(2 * (2 ** m + 1) ** 2 * per_entry for m in range(n + 1))


ProgressFn = Callable[[dict], None]


@dataclass(frozen=True)
class DeltaTables:
    """Immutable numerator grids for levels 0..n at parameter p."""

    p: Fraction
    n: int
    plus: tuple[np.ndarray, ...]
    minus: tuple[np.ndarray, ...]
    ops_per_level: Optional[tuple[int, ...]] = field(default=None, compare=False)
    backend: str = field(default="", compare=False)

    def level_denominator(self, m: int) -> int:
        return (2 * self.p.denominator) ** m

    def delta(self, sign: str, m: int, k: int, l: int) -> Fraction:
        """Exact table value delta_m^sign(k, l); sign is "+" or "-"."""
        if sign not in ("+", "-"):
            raise ValueError(f"sign must be '+' or '-', got {sign!r}")
        if not 0 <= m <= self.n:
            raise IndexError(f"level {m} outside 0..{self.n}")
        size = 2 ** m
        if not (0 <= k <= size and 0 <= l <= size):
            raise IndexError(f"(k,l)=({k},{l}) outside the level-{m} grid 0..{size}")
        grid = self.plus[m] if sign == "+" else self.minus[m]
        return Fraction(int(grid[k, l]), self.level_denominator(m))

    def __eq__(self, other) -> bool:
        if not isinstance(other, DeltaTables):
            return NotImplemented
        return (
            self.p == other.p
            and self.n == other.n
            and all(np.array_equal(a, b) for a, b in zip(self.plus, other.plus))
            and all(np.array_equal(a, b) for a, b in zip(self.minus, other.minus))
        )

    __hash__ = None  # type: ignore[assignment]

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        payload = bytearray()
        for m in range(self.n + 1):
            denom = self.level_denominator(m)
            for grid in (self.plus[m], self.minus[m]):
                for value in grid.ravel():
                    f = Fraction(int(value), denom)
                    payload += _netstring(str(f.numerator))
                    payload += _netstring(str(f.denominator))
        digest = hashlib.sha256(bytes(payload)).hexdigest()
        header = (
            f"{_MAGIC} {_FORMAT_VERSION}\n"
            f"n={self.n} p={self.p.numerator}/{self.p.denominator}\n"
            f"sha256={digest}\n"
        ).encode()
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(bytes(payload))


def _netstring(s: str) -> bytes:
    return f"{len(s)}:{s}".encode()


def _read_netstring(buf: bytes, pos: int) -> tuple[str, int]:
    colon = buf.find(b":", pos)
    if colon < 0:
        raise TableFormatError("truncated length prefix in table payload")
    try:
        length = int(buf[pos:colon])
    except ValueError as exc:
        raise TableFormatError(f"bad length prefix near byte {pos}") from exc
    if length < 0:
        raise TableFormatError(f"negative length prefix near byte {pos}")
    end = colon + 1 + length
    if end > len(buf):
        raise TableFormatError("entry extends past end of payload")
    return buf[colon + 1:end].decode(), end


def load_tables(path, expect_p: Optional[Fraction] = None,
                expect_n: Optional[int] = None) -> DeltaTables:
    """Load a table cache file, verifying version, checksum and header."""
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        first, rest = data.split(b"\n", 1)
        second, rest = rest.split(b"\n", 1)
        third, payload = rest.split(b"\n", 1)
    except ValueError as exc:
        raise TableFormatError("file too short for a table header") from exc
    magic = first.decode(errors="replace").split()
    if len(magic) != 2 or magic[0] != _MAGIC:
        raise TableVersionError(f"not a delta table file: {first!r}")
    if magic[1] != str(_FORMAT_VERSION):
        raise TableVersionError(
            f"format version {magic[1]} unsupported (expected {_FORMAT_VERSION})"
        )
    try:
        n_part, p_part = second.decode().split()
        n = int(n_part.removeprefix("n="))
        p = Fraction(p_part.removeprefix("p="))
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise TableHeaderError(f"malformed header line {second!r}") from exc
    if n < 0 or not 0 <= p <= Fraction(1, 2):
        raise TableHeaderError(f"header out of range: n={n}, p={p}")
    if expect_n is not None and n != expect_n:
        raise TableHeaderError(f"file declares n={n}, expected n={expect_n}")
    if expect_p is not None and p != expect_p:
        raise TableHeaderError(f"file declares p={p}, expected p={expect_p}")
    declared = third.decode().removeprefix("sha256=")
    if hashlib.sha256(payload).hexdigest() != declared:
        raise TableChecksumError("payload checksum mismatch (corrupt or truncated)")

    dtype = np.int64 if fits_int64(p, n) else object
    plus, minus = [], []
    pos = 0
    for m in range(n + 1):
        size = 2 ** m
        denom = (2 * p.denominator) ** m
        for grids in (plus, minus):
            grid = np.zeros((size + 1, size + 1), dtype=dtype)
            for k in range(size + 1):
                for l in range(size + 1):
                    num_s, pos = _read_netstring(payload, pos)
                    den_s, pos = _read_netstring(payload, pos)
                    try:
                        num, den = int(num_s), int(den_s)
                    except ValueError as exc:
                        raise TableFormatError(
                            f"malformed rational {num_s!r}/{den_s!r} at level {m}"
                        ) from exc
                    if den <= 0 or denom % den:
                        raise TableFormatError(
                            f"entry {num}/{den} not representable over D_{m}={denom}"
                        )
                    scaled = num * (denom // den)
                    if not 0 <= scaled <= denom:
                        raise TableFormatError(
                            f"entry {num}/{den} outside [0, 1] at level {m}"
                        )
                    grid[k, l] = scaled if dtype is object else np.int64(scaled)
            grid.flags.writeable = False
            grids.append(grid)
    if pos != len(payload):
        raise TableHeaderError(
            "payload longer than the declared n accounts for"
        )
    return DeltaTables(p=p, n=n, plus=tuple(plus), minus=tuple(minus),
                       backend="loaded")


# ---------------------------------------------------------------------------
# Build
# ---------------------------------------------------------------------------

def _complete_grid(grid: np.ndarray, size: int, dppow: int) -> None:
    """Fill a level grid from its computed wedge k <= min(l, size/2)."""
    h = size // 2
    for k in range(h + 1):
        grid[k:, k] = grid[k, k:]
    if h >= 1:
        src = grid[h - 1::-1, h - 1::-1]
        steps = np.add.outer(np.arange(1, h + 1), np.arange(1, h + 1))
        if grid.dtype == object:
            add = steps.astype(object) * dppow
        else:
            add = steps.astype(np.int64) * np.int64(dppow)
        grid[h + 1:, h + 1:] = src + add


def build_tables(p: RationalLike, n: int, *, backend: Optional[str] = None,
                 memory_budget: int = DEFAULT_MEMORY_BUDGET,
                 progress: Optional[ProgressFn] = None) -> DeltaTables:
    """Build delta tables for all levels 0..n at parameter p.

    p must lie in [0, 1/2] (the output-symmetric range; every isotropic
    system satisfies this).  The backend is resolved from the argument,
    the NLDISTILL_BACKEND environment flag, or numba availability; when
    int64 would overflow, the build silently switches to exact Python
    integers on the numpy path.
    """
    p = rational(p)
    if not 0 <= p <= Fraction(1, 2):
        raise ValueError(f"parameter p={p} outside [0, 1/2]")
    if n < 0:
        raise ValueError("n must be >= 0")
    use_int64 = fits_int64(p, n)
    required = _estimate_bytes(n, use_int64)
    if required > memory_budget:
        raise MemoryBudgetError(required, memory_budget)
    requested = kernels.resolve_backend(backend)
    effective = requested if use_int64 else "numpy"

    dp, num = p.denominator, p.numerator
    ca, cb = 2 * num, dp - 2 * num
    dtype = np.int64 if use_int64 else object

    base = np.zeros((2, 2), dtype=dtype)
    base[1, 1] = 1
    base.flags.writeable = False
    plus, minus = [base], [base]
    ops_per_level = [0]
    for m in range(1, n + 1):
        t0 = time.perf_counter()
        size = 2 ** m
        dppow = dp ** m
        gp, ops_p = kernels.fill_wedge(plus[-1], size, ca, cb, True, effective)
        gm, ops_m = kernels.fill_wedge(minus[-1], size, ca, cb, False, effective)
        for g in (gp, gm):
            _complete_grid(g, size, dppow)
            g.flags.writeable = False
        plus.append(gp)
        minus.append(gm)
        ops_per_level.append(ops_p + ops_m)
        if progress is not None:
            progress({
                "event": "level_filled", "m": m, "ops": ops_p + ops_m,
                "seconds": round(time.perf_counter() - t0, 3),
                "backend": effective,
            })
    return DeltaTables(p=p, n=n, plus=tuple(plus), minus=tuple(minus),
                       ops_per_level=tuple(ops_per_level), backend=effective)


def delta(tables: DeltaTables, sign: str, m: int, k: int, l: int) -> Fraction:
    """Module-level accessor mirroring DeltaTables.delta."""
    return tables.delta(sign, m, k, l)


def save_tables(tables: DeltaTables, path) -> None:
    """Module-level mirror of DeltaTables.save."""
    tables.save(path)


def cache_filename(p: Fraction, n: int) -> str:
    return f"delta_p{p.numerator}_{p.denominator}_n{n}.nldt"
