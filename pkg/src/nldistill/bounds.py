"""Upper bounds on distillable nonlocality from the delta tables.

The class bound for a profile (k0, k1, l0, l1) of preimage sizes is

    2 - (k0 + l0)/2^(n-2)
      + 4*[d+(k0,l0) + d+(k0,l1) + d+(k1,l0) - d-(k1,l1)]

evaluated on the level-n tables.  The isotropic bound maximizes this
over all profiles; because the expression has no k0-k1 cross term the
scan decouples into independent k0 and k1 sweeps per (l0, l1), and the
complement symmetry allows restricting k0 to [0, 2^(n-1)] without
changing the maximum.  The general bound reduces any nonsignaling box
to its minimal isotropic envelope first.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from . import kernels
from .boxes import BinarySystem, is_isotropic, nl_value
from .decompose import Decomposition, minimal_isotropic
from .delta import DeltaTables, build_tables


@dataclass(frozen=True)
class ClassProfile:
    """Preimage sizes |f_x^-1(1)|, |g_y^-1(1)| for both inputs."""

    k0: int
    k1: int
    l0: int
    l1: int

    def check(self, n: int) -> None:
        size = 2 ** n
        for name, v in (("k0", self.k0), ("k1", self.k1),
                        ("l0", self.l0), ("l1", self.l1)):
            if not 0 <= v <= size:
                raise ValueError(f"profile {name}={v} outside 0..{size}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.k0, self.k1, self.l0, self.l1)


@dataclass(frozen=True)
class BoundReport:
    raw_bound: Fraction
    clamped_bound: Fraction
    witness_profile: ClassProfile
    n: int
    system: BinarySystem
    system_nl: Fraction
    decomposition: Optional[Decomposition] = None
    backend: str = ""

    def to_json_obj(self) -> dict:
        obj = {
            "n": self.n,
            "raw_bound": str(self.raw_bound),
            "clamped_bound": str(self.clamped_bound),
            "witness_profile": list(self.witness_profile.as_tuple()),
            "system_nl": str(self.system_nl),
            "system": self.system.to_json_obj(),
            "backend": self.backend,
        }
        if self.decomposition is not None:
            obj["decomposition"] = self.decomposition.to_json_obj()
        return obj


def class_bound(tables: DeltaTables, n: int, profile: ClassProfile) -> Fraction:
    """Exact bound value for one class profile."""
    if n < 1 or n > tables.n:
        raise ValueError(f"need 1 <= n <= {tables.n}, got {n}")
    profile.check(n)
    k0, k1, l0, l1 = profile.as_tuple()
    d = tables.delta
    return (
        2
        - Fraction(4 * (k0 + l0), 2 ** n)
        + 4 * (d("+", n, k0, l0) + d("+", n, k0, l1)
               + d("+", n, k1, l0) - d("-", n, k1, l1))
    )


def _scan_inputs(tables: DeltaTables, n: int):
    xp, xm = tables.plus[n], tables.minus[n]
    dpn = tables.p.denominator ** n
    return xp, xm, dpn, tables.level_denominator(n)


def _tables_for(system: BinarySystem, n: int,
                tables: Optional[DeltaTables], backend: Optional[str],
                progress=None) -> DeltaTables:
    p = system.prob(0, 0, 0, 0)
    if tables is not None:
        if tables.p != p:
            raise ValueError(f"tables built for p={tables.p}, system has p={p}")
        if tables.n < n:
            raise ValueError(f"tables only reach level {tables.n} < n={n}")
        return tables
    return build_tables(p, n, backend=backend, progress=progress)


def iso_bound(system: BinarySystem, n: int, *,
              tables: Optional[DeltaTables] = None,
              backend: Optional[str] = None,
              reduced: bool = True,
              progress=None) -> BoundReport:
    """Upper bound on D(n, P) for an isotropic system.

    ``reduced`` restricts the k0 sweep to [0, 2^(n-1)] (complement
    symmetry); the unreduced scan exists for verification.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if is_isotropic(system) is None:
        raise ValueError("the isotropic bound applies to isotropic systems only")
    tables = _tables_for(system, n, tables, backend, progress)
    xp, xm, dpn, denom = _scan_inputs(tables, n)
    eff = tables.backend if tables.backend in ("numba", "numpy") \
        else kernels.resolve_backend(backend)
    if xp.dtype == object:
        eff = "numpy"
    size = 2 ** n
    k0_cap = size // 2 if reduced else size
    best, witness = kernels.iso_scan(xp, xm, dpn, size // 2, k0_cap, size, eff)
    raw = Fraction(4 * best, denom)
    nl, _ = nl_value(system)
    assert raw >= nl, "bound fell below the trivial one-copy protocol"
    return BoundReport(
        raw_bound=raw, clamped_bound=min(raw, Fraction(4)),
        witness_profile=ClassProfile(*witness), n=n, system=system,
        system_nl=nl, backend=eff,
    )


@dataclass(frozen=True)
class ClassGrid:
    """Max class bound per aggregated cell (k0+k1, l0+l1)."""

    n: int
    values: tuple[tuple[Fraction, ...], ...]  # indexed [s_k][s_l]

    @property
    def size(self) -> int:
        return 2 ** (self.n + 1)

    def max_cell(self) -> tuple[Fraction, tuple[int, int]]:
        best, arg = None, (0, 0)
        for sk, row in enumerate(self.values):
            for sl, v in enumerate(row):
                if best is None or v > best:
                    best, arg = v, (sk, sl)
        return best, arg

    def write_csv(self, stream, approx: bool = False) -> None:
        writer = csv.writer(stream)
        header = ["s_k", "s_l", "bound_num", "bound_den"]
        if approx:
            header.append("bound_approx")  # decimal approximation, not exact
        writer.writerow(header)
        for sk, row in enumerate(self.values):
            for sl, v in enumerate(row):
                rec = [sk, sl, v.numerator, v.denominator]
                if approx:
                    rec.append(f"{float(v):.12g}")
                writer.writerow(rec)

    def to_csv(self, approx: bool = False) -> str:
        buf = io.StringIO()
        self.write_csv(buf, approx=approx)
        return buf.getvalue()


def class_grid(system: BinarySystem, n: int, *,
               tables: Optional[DeltaTables] = None,
               backend: Optional[str] = None,
               progress=None) -> ClassGrid:
    """The full aggregated bound surface for an isotropic box."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if is_isotropic(system) is None:
        raise ValueError("the class grid applies to isotropic systems only")
    tables = _tables_for(system, n, tables, backend, progress)
    xp, xm, dpn, denom = _scan_inputs(tables, n)
    eff = tables.backend if tables.backend in ("numba", "numpy") \
        else kernels.resolve_backend(backend)
    if xp.dtype == object:
        eff = "numpy"
    size = 2 ** n
    scaled = kernels.grid_scan(xp, xm, dpn, size // 2, size, eff)
    values = tuple(
        tuple(Fraction(4 * int(scaled[sk, sl]), denom) for sl in range(2 * size + 1))
        for sk in range(2 * size + 1)
    )
    return ClassGrid(n=n, values=values)


def general_bound(system: BinarySystem, n: int, *,
                  tables: Optional[DeltaTables] = None,
                  backend: Optional[str] = None,
                  progress=None) -> BoundReport:
    """General bound: reduce to the minimal isotropic envelope, then bound it."""
    if n < 1:
        raise ValueError("n must be >= 1")
    dec = minimal_isotropic(system)
    nl, _ = nl_value(system)
    if dec.epsilon == 0:
        return BoundReport(
            raw_bound=Fraction(2), clamped_bound=Fraction(2),
            witness_profile=ClassProfile(0, 0, 0, 0), n=n, system=system,
            system_nl=nl, decomposition=dec, backend="",
        )
    report = iso_bound(dec.p_iso, n, tables=tables, backend=backend,
                       progress=progress)
    return BoundReport(
        raw_bound=report.raw_bound, clamped_bound=report.clamped_bound,
        witness_profile=report.witness_profile, n=n, system=system,
        system_nl=nl, decomposition=dec, backend=report.backend,
    )
