"""Deterministic distillation protocols: simulation and exhaustive search.

A protocol on n copies is a wiring per side and protocol input (a
visiting order plus, per step, a truth table from previously observed
outputs to the next box input) together with decision functions
f_0, f_1, g_0, g_1 mapping the n collected bits to one output bit.
Because the copies are independent and nonsignaling, the joint wiring
distribution factorizes as W(a,b) = prod_i P(a_i, b_i | u_i(a), v_i(b)),
with each side's box inputs determined by its own observed bits.

The exhaustive search exploits that the anchor-00 CHSH sum of a protocol
is linear in four independent choices (Alice's per-input wiring plus
decision table, same for Bob), so D(n, P) is a decoupled scan over a
precomputed inner-product table; the complement symmetry removes the
modulus and halves the f_0 space.  The scan runs in exact integers
whenever magnitudes fit in int64, otherwise a double-precision pre-filter
proposes candidates that are re-verified exactly.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations, product
from typing import Optional

import numpy as np

from . import kernels
from .boxes import BinarySystem, is_isotropic, nl_value
from .delta import DeltaTables, build_tables

PREFILTER_MARGIN = 1e-6


# ---------------------------------------------------------------------------
# Protocol data model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WiringPlan:
    """One side's wiring for one protocol input value.

    ``order[t]`` is the box visited at step t; ``steps[t]`` is a truth
    table (bitmask over the t previously observed output bits, first
    observation is the most significant bit) giving the input fed into
    that box.
    """

    order: tuple[int, ...]
    steps: tuple[int, ...]

    def __post_init__(self) -> None:
        n = len(self.order)
        if sorted(self.order) != list(range(n)):
            raise ValueError(f"order {self.order} is not a permutation")
        if len(self.steps) != n:
            raise ValueError("one step table per visited box required")
        for t, mask in enumerate(self.steps):
            if not 0 <= mask < (1 << (1 << t)):
                raise ValueError(f"step {t} table out of range")

    def box_inputs(self, outputs: tuple[int, ...]) -> tuple[int, ...]:
        """Per-box inputs this plan feeds when the boxes output ``outputs``."""
        u = [0] * len(self.order)
        hist = 0
        for t, box in enumerate(self.order):
            u[box] = (self.steps[t] >> hist) & 1
            hist = (hist << 1) | outputs[box]
        return tuple(u)


@dataclass(frozen=True)
class SideStrategy:
    plans: tuple[WiringPlan, WiringPlan]  # for protocol input 0 and 1

    def plan(self, x: int) -> WiringPlan:
        return self.plans[x]


@dataclass(frozen=True)
class Protocol:
    n: int
    alice: SideStrategy
    bob: SideStrategy
    f: tuple[tuple[int, ...], tuple[int, ...]]  # truth tables, length 2^n
    g: tuple[tuple[int, ...], tuple[int, ...]]

    def __post_init__(self) -> None:
        want = 1 << self.n
        for tt in (*self.f, *self.g):
            if len(tt) != want or any(b not in (0, 1) for b in tt):
                raise ValueError(f"decision tables must be 0/1 tuples of length {want}")

    def to_json_obj(self) -> dict:
        def side(s: SideStrategy) -> list[dict]:
            return [
                {
                    "order": list(p.order),
                    "inputs": [
                        [(p.steps[t] >> h) & 1 for h in range(1 << t)]
                        for t in range(len(p.order))
                    ],
                }
                for p in s.plans
            ]

        return {
            "n": self.n,
            "alice": side(self.alice),
            "bob": side(self.bob),
            "f": [list(tt) for tt in self.f],
            "g": [list(tt) for tt in self.g],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Protocol":
        def plan(rec: dict) -> WiringPlan:
            steps = tuple(
                sum(bit << h for h, bit in enumerate(tbl)) for tbl in rec["inputs"]
            )
            return WiringPlan(order=tuple(rec["order"]), steps=steps)

        return cls(
            n=obj["n"],
            alice=SideStrategy(tuple(plan(r) for r in obj["alice"])),
            bob=SideStrategy(tuple(plan(r) for r in obj["bob"])),
            f=tuple(tuple(tt) for tt in obj["f"]),
            g=tuple(tuple(tt) for tt in obj["g"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "Protocol":
        return cls.from_json_obj(json.loads(text))


def trivial_protocol(n: int = 1) -> Protocol:
    """Feed the protocol input into every box, output box 0's bit."""
    plan0 = WiringPlan(order=tuple(range(n)), steps=(0,) * n)
    plan1 = WiringPlan(order=tuple(range(n)),
                       steps=tuple((1 << (1 << t)) - 1 for t in range(n)))
    side = SideStrategy((plan0, plan1))
    table = tuple((a >> (n - 1)) & 1 for a in range(1 << n))
    return Protocol(n=n, alice=side, bob=side, f=(table, table), g=(table, table))


def enumerate_plans(n: int) -> list[WiringPlan]:
    """All deterministic wiring plans for one side and one input value."""
    plans = []
    step_spaces = [range(1 << (1 << t)) for t in range(n)]
    for order in permutations(range(n)):
        for steps in product(*step_spaces):
            plans.append(WiringPlan(order=order, steps=tuple(steps)))
    return plans


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def _bits(value: int, n: int) -> tuple[int, ...]:
    return tuple((value >> (n - 1 - i)) & 1 for i in range(n))


def wiring_grid(system: BinarySystem, plan_a: WiringPlan,
                plan_b: WiringPlan) -> np.ndarray:
    """Exact 2^n x 2^n outcome distribution of one fixed wiring pair."""
    n = len(plan_a.order)
    size = 1 << n
    grid = np.empty((size, size), dtype=object)
    a_inputs = [plan_a.box_inputs(_bits(a, n)) for a in range(size)]
    b_inputs = [plan_b.box_inputs(_bits(b, n)) for b in range(size)]
    for a in range(size):
        abits = _bits(a, n)
        for b in range(size):
            bbits = _bits(b, n)
            w = Fraction(1)
            v = b_inputs[b]
            u = a_inputs[a]
            for i in range(n):
                w *= system.prob(abits[i], bbits[i], u[i], v[i])
            grid[a, b] = w
    return grid


def wiring_distribution(system: BinarySystem, protocol: Protocol,
                        x: int, y: int) -> np.ndarray:
    """W^{xy} for the protocol: both sides condition their plans on x, y."""
    return wiring_grid(system, protocol.alice.plan(x), protocol.bob.plan(y))


def inner_product(f: tuple[int, ...], g: tuple[int, ...],
                  grid: np.ndarray) -> Fraction:
    """<f,g> = (1-2f)^T W (1-2g), exactly.

    In debug mode the expansion identity
    <f,g> = 1 - k/2^(n-1) - l/2^(n-1) + 4 f^T W g is re-verified whenever
    the wiring has uniform output marginals (always the case for wirings
    of isotropic boxes, where the identity is used).
    """
    size = grid.shape[0]
    if len(f) != size or len(g) != size or grid.shape[1] != size:
        raise ValueError("decision table and wiring dimensions differ")
    total = Fraction(0)
    ftwg = Fraction(0)
    row = [Fraction(0)] * size
    col = [Fraction(0)] * size
    for a in range(size):
        sa = 1 - 2 * f[a]
        for b in range(size):
            w = grid[a, b]
            total += sa * (1 - 2 * g[b]) * w
            row[a] += w
            col[b] += w
            if f[a] and g[b]:
                ftwg += w
    if __debug__:
        unif = Fraction(1, size)
        if all(r == unif for r in row) and all(c == unif for c in col):
            k, l = sum(f), sum(g)
            expansion = 1 - Fraction(2 * k, size) - Fraction(2 * l, size) + 4 * ftwg
            assert expansion == total, "inner-product expansion identity failed"
    return total


def nl_protocol(system: BinarySystem, protocol: Protocol) -> Fraction:
    """CHSH value of the box a protocol simulates (max over the 4 anchors)."""
    ips = {}
    for x, y in product((0, 1), (0, 1)):
        grid = wiring_distribution(system, protocol, x, y)
        ips[x, y] = inner_product(protocol.f[x], protocol.g[y], grid)
    best = None
    for x, y in product((0, 1), (0, 1)):
        v = abs(ips[x, y] + ips[1 - x, y] + ips[x, 1 - y] - ips[1 - x, 1 - y])
        if best is None or v > best:
            best = v
    return best


# ---------------------------------------------------------------------------
# Exhaustive search for D(n, P), n <= 2
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SearchResult:
    value: Fraction
    protocol: Protocol
    n: int
    atoms_per_side: int
    cells_scanned: int
    method: str  # "int64" | "bigint" | "prefilter"
    distilled: bool  # value > NL(P)

    def to_json_obj(self) -> dict:
        return {
            "n": self.n,
            "value": str(self.value),
            "distilled": self.distilled,
            "atoms_per_side": self.atoms_per_side,
            "cells_scanned": self.cells_scanned,
            "method": self.method,
            "witness": self.protocol.to_json_obj(),
        }


def _entry_numerators(system: BinarySystem) -> tuple[int, list[int]]:
    denom = math.lcm(*(e.denominator for e in system.table))
    return denom, [int(e * denom) for e in system.table]


def _plan_input_table(plans: list[WiringPlan], n: int) -> list[list[tuple[int, ...]]]:
    size = 1 << n
    return [[plan.box_inputs(_bits(o, n)) for o in range(size)] for plan in plans]


def _sign_matrix(n_tables: int, size: int) -> np.ndarray:
    sf = np.empty((n_tables, size), dtype=np.int64)
    for mask in range(n_tables):
        for a in range(size):
            sf[mask, a] = 1 - 2 * ((mask >> a) & 1)
    return sf


def _ip_table(system: BinarySystem, plans: list[WiringPlan], n: int,
              dtype) -> np.ndarray:
    """T[(plan,f),(plan,g)] = <f,g> scaled by lcm-denominator^n, integer."""
    denom, nums = _entry_numerators(system)
    size = 1 << n
    n_tables = 1 << size
    inputs = _plan_input_table(plans, n)
    sf = _sign_matrix(n_tables, size)
    if dtype is object:
        sf = sf.astype(object)
    n_atoms = len(plans) * n_tables
    t = np.zeros((n_atoms, n_atoms), dtype=dtype)

    def entry(a: int, b: int, x: int, y: int) -> int:
        return nums[x * 8 + y * 4 + a * 2 + b]

    for pa, ua in enumerate(inputs):
        for pb, vb in enumerate(inputs):
            w = np.zeros((size, size), dtype=dtype)
            for a in range(size):
                abits = _bits(a, n)
                u = ua[a]
                for b in range(size):
                    bbits = _bits(b, n)
                    v = vb[b]
                    prod_num = 1
                    for i in range(n):
                        prod_num *= entry(abits[i], bbits[i], u[i], v[i])
                    w[a, b] = prod_num
            block = sf @ w @ sf.T
            t[pa * n_tables:(pa + 1) * n_tables,
              pb * n_tables:(pb + 1) * n_tables] = block
    return t


def _atom_protocol(n: int, plans: list[WiringPlan], n_tables: int,
                   witness: tuple[int, int, int, int]) -> Protocol:
    a0, a1, b0, b1 = witness
    size = 1 << n

    def split(atom: int) -> tuple[WiringPlan, tuple[int, ...]]:
        plan, mask = divmod(atom, n_tables)
        return plans[plan], tuple((mask >> a) & 1 for a in range(size))

    pa0, f0 = split(a0)
    pa1, f1 = split(a1)
    pb0, g0 = split(b0)
    pb1, g1 = split(b1)
    return Protocol(
        n=n,
        alice=SideStrategy((pa0, pa1)),
        bob=SideStrategy((pb0, pb1)),
        f=(f0, f1), g=(g0, g1),
    )


def _prefilter_scan(t: np.ndarray, a0_idx: np.ndarray, scale: int,
                    margin: float) -> tuple[int, tuple[int, int, int, int]]:
    """Float64 pre-filter plus exact re-evaluation of surviving cells.

    Safe for moderate denominators: cells more than ``margin`` (in CHSH
    units) below the float incumbent cannot contain the exact optimum.
    """
    tf = np.asarray([[float(v) for v in row] for row in t]) / float(scale)
    tf_a0 = tf[a0_idx, :]
    n_b = tf.shape[1]
    u = np.empty((n_b, n_b))
    v = np.empty((n_b, n_b))
    for b0 in range(n_b):
        u[b0] = (tf_a0[:, b0][:, None] + tf_a0).max(axis=0)
        v[b0] = (tf[:, b0][:, None] - tf).max(axis=0)
    cells = u + v
    incumbent = cells.max()
    survivors = np.argwhere(cells >= incumbent - margin)
    best: Optional[int] = None
    witness = (0, 0, 0, 0)
    for b0, b1 in survivors:
        a_vals = [int(t[a, b0]) + int(t[a, b1]) for a in a0_idx]
        ai = max(range(len(a_vals)), key=lambda i: (a_vals[i], -i))
        c_vals = [int(t[a, b0]) - int(t[a, b1]) for a in range(t.shape[0])]
        ci = max(range(len(c_vals)), key=lambda i: (c_vals[i], -i))
        cell = a_vals[ai] + c_vals[ci]
        cand = (int(a0_idx[ai]), ci, int(b0), int(b1))
        if best is None or cell > best or (cell == best and cand < witness):
            best, witness = cell, cand
    assert best is not None
    return best, witness


def brute_force_D(system: BinarySystem, n: int, *,
                  complement_reduction: bool = True,
                  backend: Optional[str] = None,
                  method: str = "auto") -> SearchResult:
    """Exact D(n, P) for n in {1, 2} by complete protocol enumeration.

    The complement reduction fixes f_0 on the all-zeros string and drops
    the modulus; disable it to scan the full space with both modulus branches
    (used for cross-checks).  ``method`` is "auto", "exact" or
    "prefilter"; with "auto" the double-precision pre-filter is engaged
    only when the scaled integers would not fit in int64.
    """
    if n not in (1, 2):
        raise ValueError("exhaustive search is feasible for n in {1, 2} only")
    if method not in ("auto", "exact", "prefilter"):
        raise ValueError(f"unknown method {method!r}")
    plans = enumerate_plans(n)
    size = 1 << n
    n_tables = 1 << size
    denom, _ = _entry_numerators(system)
    scale = denom ** n
    use_int64 = 16 * scale < (1 << 62)
    eff_backend = kernels.resolve_backend(backend)
    dtype = np.int64 if use_int64 else object
    t = _ip_table(system, plans, n, dtype)
    n_atoms = t.shape[0]

    if complement_reduction:
        # f_0(0,...,0) = 0: keep atoms whose table mask has bit 0 clear
        a0_idx = np.array([a for a in range(n_atoms) if not (a % n_tables) & 1],
                          dtype=np.int64)
    else:
        a0_idx = np.arange(n_atoms, dtype=np.int64)

    if method == "prefilter" or (method == "auto" and not use_int64):
        best, witness = _prefilter_scan(t, a0_idx, scale, PREFILTER_MARGIN)
        how = "prefilter"
    else:
        best, witness = kernels.bilinear_scan(t, a0_idx, eff_backend)
        how = "int64" if use_int64 else "bigint"

    if not complement_reduction:
        # modulus branch: maximize the negated sum as well
        neg_t = -t
        if how == "prefilter":
            best2, witness2 = _prefilter_scan(neg_t, a0_idx, scale, PREFILTER_MARGIN)
        else:
            best2, witness2 = kernels.bilinear_scan(neg_t, a0_idx, eff_backend)
        if best2 > best:
            best, witness = best2, witness2

    value = Fraction(int(best), scale)
    protocol = _atom_protocol(n, plans, n_tables, witness)
    check = nl_protocol(system, protocol)
    if check != value:
        raise AssertionError(
            f"witness protocol evaluates to {check}, scan reported {value}"
        )
    nl, _ = nl_value(system)
    return SearchResult(
        value=value, protocol=protocol, n=n,
        atoms_per_side=n_atoms, cells_scanned=n_atoms * n_atoms,
        method=how, distilled=value > nl,
    )


# ---------------------------------------------------------------------------
# Sandwich verification against the table bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SandwichViolation:
    plan_a: WiringPlan
    plan_b: WiringPlan
    f: tuple[int, ...]
    g: tuple[int, ...]
    value: Fraction
    lower: Fraction
    upper: Fraction


@dataclass(frozen=True)
class SandwichReport:
    n: int
    checked: int
    exhaustive: bool
    seed: Optional[int]
    violations: tuple[SandwichViolation, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json_obj(self) -> dict:
        return {
            "n": self.n, "checked": self.checked,
            "exhaustive": self.exhaustive, "seed": self.seed,
            "violations": len(self.violations),
        }


def _f_t_w_g(f_mask: int, g_mask: int, grid: np.ndarray) -> Fraction:
    total = Fraction(0)
    size = grid.shape[0]
    for a in range(size):
        if (f_mask >> a) & 1:
            for b in range(size):
                if (g_mask >> b) & 1:
                    total += grid[a, b]
    return total


def sandwich_check(system: BinarySystem, n: int, *,
                   samples: Optional[int] = 10_000, seed: int = 0,
                   tables: Optional[DeltaTables] = None) -> SandwichReport:
    """Verify delta_n^-(k,l) <= f^T W g <= delta_n^+(k,l) on real wirings.

    Always exhaustive for n = 1; for n = 2 a seeded sample of (wiring
    pair, f, g) triples, or the complete 2^16-case enumeration when
    ``samples`` is None.  The system must be isotropic (the sandwich is
    only claimed there).
    """
    if n not in (1, 2):
        raise ValueError("sandwich check supports n in {1, 2}")
    if is_isotropic(system) is None:
        raise ValueError("sandwich property applies to isotropic systems")
    p = system.prob(0, 0, 0, 0)
    if tables is None:
        tables = build_tables(p, n)
    plans = enumerate_plans(n)
    size = 1 << n
    n_tables = 1 << size
    grids = {}

    def grid_for(ia: int, ib: int) -> np.ndarray:
        if (ia, ib) not in grids:
            grids[ia, ib] = wiring_grid(system, plans[ia], plans[ib])
        return grids[ia, ib]

    violations = []
    exhaustive = n == 1 or samples is None
    if exhaustive:
        cases = [
            (ia, ib, fm, gm)
            for ia in range(len(plans)) for ib in range(len(plans))
            for fm in range(n_tables) for gm in range(n_tables)
        ]
        used_seed = None
    else:
        rng = random.Random(seed)
        cases = [
            (rng.randrange(len(plans)), rng.randrange(len(plans)),
             rng.randrange(n_tables), rng.randrange(n_tables))
            for _ in range(samples)
        ]
        used_seed = seed
    for ia, ib, fm, gm in cases:
        grid = grid_for(ia, ib)
        k = fm.bit_count()
        l = gm.bit_count()
        v = _f_t_w_g(fm, gm, grid)
        lo = tables.delta("-", n, k, l)
        hi = tables.delta("+", n, k, l)
        if not lo <= v <= hi:
            violations.append(SandwichViolation(
                plan_a=plans[ia], plan_b=plans[ib],
                f=tuple((fm >> a) & 1 for a in range(size)),
                g=tuple((gm >> b) & 1 for b in range(size)),
                value=v, lower=lo, upper=hi,
            ))
    return SandwichReport(n=n, checked=len(cases), exhaustive=exhaustive,
                          seed=used_seed, violations=tuple(violations))
