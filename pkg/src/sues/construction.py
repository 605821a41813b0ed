"""Recursive interleaved construction of strongly universal exploration sequences.

``S_1 = U_1`` and, for ``n = 2^j``,

    S_n = u_1 B_1 u_2 B_2 ... u_{n-1} B_{n-1} u_n,   B_i = S_{r_i} 0 S_{r_i}^-1 0

where ``u_i`` are the symbols of the family level ``U_n`` and ``r_i`` comes
from the r-schedule.  Because ``r_i`` depends only on ``i``, every ``S_n`` is
a prefix of ``S_{2n}`` and the construction has an infinite limit; all
indexing below is into that limit.

Write ``F(m)`` for the offset at which unit ``m+1`` starts.  Each unit costs
``2 s_{r_i} + 3`` symbols, so ``F(m) = 3m + 2 sum_{i<=m} s_{r_i}``, and the
sum regroups by level: ``s_1 m + sum_{j>=1} (s_{2^j} - s_{2^{j-1}}) c_j(m)``
with ``c_j(m) = #{i <= m : r_i >= 2^j}``.  Both schedules have a closed form
for ``c_j``, so offsets never require materialising a sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .oracle import UesFamily
from .walk import ExplorationSequence

DIVIDES = "divides"
MAGNITUDE = "magnitude"
DEFAULT_CAP = 1 << 31

FWD, INV, FLAT = 0, 1, 2


class ConstructionError(ValueError):
    pass


def period_exponent(j: int, lam: int) -> int:
    """``ceil((lam+1) j / lam)``: level ``2^j`` recurs every ``2^this`` indices."""
    return -(-(lam + 1) * j // lam)


def _iroot_ceil(x: int, k: int) -> int:
    """Smallest ``y >= 0`` with ``y**k >= x``."""
    if x <= 1:
        return x
    y = int(round(x ** (1.0 / k)))
    while y ** k < x:
        y += 1
    while y > 0 and (y - 1) ** k >= x:
        y -= 1
    return y


def magnitude_threshold(j: int, lam: int) -> int:
    """Smallest ``i`` with ``2^((lam+1) j / lam) <= i``."""
    return _iroot_ceil(1 << ((lam + 1) * j), lam)


def r_index(i: int, lam: int, schedule: str = DIVIDES) -> int:
    """Level of the block inserted after base symbol ``i`` (returns ``r_i``)."""
    if i < 1:
        raise ConstructionError("r_index needs i >= 1")
    if lam < 2:
        raise ConstructionError("lambda must be >= 2")
    j = 0
    if schedule == DIVIDES:
        v = (i & -i).bit_length() - 1
        while period_exponent(j + 1, lam) <= v:
            j += 1
    elif schedule == MAGNITUDE:
        while magnitude_threshold(j + 1, lam) <= i:
            j += 1
    else:
        raise ConstructionError(f"unknown schedule {schedule!r}")
    return 1 << j


@dataclass(frozen=True)
class SuesParams:
    lam: int
    family: UesFamily
    schedule: str = DIVIDES
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.lam < 2:
            raise ConstructionError("lambda must be >= 2")
        if self.schedule not in (DIVIDES, MAGNITUDE):
            raise ConstructionError(f"unknown schedule {self.schedule!r}")

    @property
    def d(self) -> int:
        return self.family.d


def ceil_pow2_level(n: int) -> int:
    """Level ``j`` of the smallest power of two ``2^j >= n``."""
    if n < 1:
        raise ConstructionError("n must be positive")
    return (n - 1).bit_length()


@dataclass
class SuesIndexer:
    params: SuesParams
    flat_limit: int = 4096  # streamed blocks up to this length come from a flat list
    _s: list[int] = field(default_factory=lambda: [1], init=False, repr=False)
    _flat: dict = field(default_factory=dict, init=False, repr=False)

    @property
    def d(self) -> int:
        return self.params.d

    @property
    def lam(self) -> int:
        return self.params.lam

    # -- schedule counting -----------------------------------------------------

    def count_ge(self, j: int, m: int) -> int:
        """How many ``1 <= i <= m`` have ``r_i >= 2^j``."""
        if m <= 0:
            return 0
        if j == 0:
            return m
        if self.params.schedule == DIVIDES:
            return m >> period_exponent(j, self.lam)
        return max(0, m - magnitude_threshold(j, self.lam) + 1)

    def r(self, i: int) -> int:
        return r_index(i, self.lam, self.params.schedule)

    def prefix_len(self, m: int) -> int:
        """``F(m)``: offset of unit ``m + 1`` in the infinite sequence."""
        total = self._s[0] * m
        j = 1
        while True:
            c = self.count_ge(j, m)
            if c == 0:
                break
            total += (self.level_length(j) - self.level_length(j - 1)) * c
            j += 1
        return 3 * m + 2 * total

    def level_length(self, j: int) -> int:
        """``s_{2^j} = |S_{2^j}|``."""
        while len(self._s) <= j:
            k = len(self._s)
            self._s.append(self.prefix_len((1 << k) - 1) + 1)
        return self._s[j]

    def length(self, n: int) -> int:
        return self.level_length(ceil_pow2_level(n))

    def _unit_at(self, t: int, last: int | None) -> tuple[int, int]:
        """Unit ``i`` holding offset ``t`` and the offset of ``t`` inside it."""
        if last is None:
            j = 0
            while self.level_length(j) <= t:
                j += 1
            last = 1 << j
        lo, hi = 1, last
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.prefix_len(mid - 1) <= t:
                lo = mid
            else:
                hi = mid - 1
        return lo, t - self.prefix_len(lo - 1)

    def u(self, i: int) -> int:
        """Base symbol ``u_i`` (1-based)."""
        return self.params.family.symbol(i - 1)

    # -- random access ---------------------------------------------------------

    def symbol_at(self, t: int) -> int:
        """Symbol ``t`` (0-based) of the infinite sequence."""
        if t < 0:
            raise ConstructionError("negative index")
        neg = False
        while True:
            i, delta = self._unit_at(t, None)
            if delta == 0:
                sym = self.u(i)
                break
            s = self.level_length(self.r(i).bit_length() - 1)
            if delta <= s:
                t = delta - 1
            elif delta == s + 1 or delta == 2 * s + 2:
                sym = 0
                break
            else:
                t = s - 1 - (delta - s - 2)
                neg = not neg
        return (-sym) % self.d if neg else sym

    def symbols_at(self, ts) -> np.ndarray:
        """Vectorised :meth:`symbol_at` using the same index arithmetic."""
        t = np.array(ts, dtype=np.int64).ravel()
        if t.size and t.min() < 0:
            raise ConstructionError("negative index")
        j_max = 0
        if t.size:
            while self.level_length(j_max) <= t.max():
                j_max += 1
        s_tab = np.array([self.level_length(j) for j in range(j_max + 1)], dtype=np.int64)
        diffs = np.diff(s_tab)
        out = np.zeros(t.shape, dtype=np.int64)
        neg = np.zeros(t.shape, dtype=bool)
        active = np.arange(t.size)
        cur = t.copy()
        while active.size:
            p = cur[active]
            level = np.searchsorted(s_tab, p, side="right")
            lo = np.ones_like(p)
            hi = np.int64(1) << level
            while True:
                open_ = lo < hi
                if not open_.any():
                    break
                mid = (lo + hi + 1) // 2
                ok = self._prefix_vec(mid - 1, diffs) <= p
                lo = np.where(open_ & ok, mid, lo)
                hi = np.where(open_ & ~ok, mid - 1, hi)
            i = lo
            delta = p - self._prefix_vec(i - 1, diffs)
            r_level = self._r_level_vec(i)
            s = s_tab[r_level]
            at_u = delta == 0
            at_zero = (delta == s + 1) | (delta == 2 * s + 2)
            in_fwd = (delta >= 1) & (delta <= s)
            in_inv = delta >= s + 2
            in_inv &= ~at_zero
            done = at_u | at_zero
            if at_u.any():
                out[active[at_u]] = self.params.family.symbols(i[at_u] - 1)
            out[active[at_zero]] = 0
            nxt = p.copy()
            nxt[in_fwd] = delta[in_fwd] - 1
            nxt[in_inv] = s[in_inv] - 1 - (delta[in_inv] - s[in_inv] - 2)
            neg[active[in_inv]] ^= True
            cur[active] = nxt
            active = active[~done]
        out[neg] = (-out[neg]) % self.d
        return out.reshape(np.shape(ts))

    def _prefix_vec(self, m: np.ndarray, diffs: np.ndarray) -> np.ndarray:
        total = self._s[0] * m
        for j in range(1, len(diffs) + 1):
            total = total + diffs[j - 1] * self._count_ge_vec(j, m)
        return 3 * m + 2 * total

    def _count_ge_vec(self, j: int, m: np.ndarray) -> np.ndarray:
        if self.params.schedule == DIVIDES:
            return np.maximum(m, 0) >> period_exponent(j, self.lam)
        return np.maximum(0, m - magnitude_threshold(j, self.lam) + 1)

    def _r_level_vec(self, i: np.ndarray) -> np.ndarray:
        if self.params.schedule == DIVIDES:
            v = np.bitwise_count((i & -i) - 1).astype(np.int64)
            table = np.zeros(64, dtype=np.int64)
            for vv in range(64):
                j = 0
                while period_exponent(j + 1, self.lam) <= vv:
                    j += 1
                table[vv] = j
            return table[v]
        th = []
        j = 1
        top = int(i.max()) if i.size else 1
        while magnitude_threshold(j, self.lam) <= top:
            th.append(magnitude_threshold(j, self.lam))
            j += 1
        return np.searchsorted(np.array(th, dtype=np.int64), i, side="right")

    # -- materialisation -------------------------------------------------------

    def build(self, n: int) -> ExplorationSequence:
        """Materialise ``S_n`` (``n`` is rounded up to a power of two)."""
        j = ceil_pow2_level(n)
        if self.level_length(j) > self.params.cap:
            raise ConstructionError(
                f"|S_{1 << j}| = {self.level_length(j)} exceeds the materialisation cap {self.params.cap}"
            )
        return ExplorationSequence(self.d, self._build_level(j))

    def _build_level(self, j: int) -> np.ndarray:
        d = self.d
        fam = self.params.family
        levels = [np.array([fam.symbol(0)], dtype=np.uint8)]
        blocks: dict[int, np.ndarray] = {}

        def block(r_level: int) -> np.ndarray:
            if r_level not in blocks:
                s = levels[r_level]
                inv = ((d - s[::-1].astype(np.int16)) % d).astype(np.uint8)
                z = np.zeros(1, dtype=np.uint8)
                blocks[r_level] = np.concatenate([s, z, inv, z])
            return blocks[r_level]

        for k in range(1, j + 1):
            half = 1 << (k - 1)
            us = fam.symbols(np.arange(half, 2 * half)).astype(np.uint8)
            pieces = [levels[k - 1]]
            for off, i in enumerate(range(half, 2 * half)):
                pieces.append(block(self.r(i).bit_length() - 1))
                pieces.append(us[off:off + 1])
            levels.append(np.concatenate(pieces))
        return levels[j]

    def window(self, start: int, length: int) -> ExplorationSequence:
        return ExplorationSequence(self.d, self.symbols_at(np.arange(start, start + length)))

    # -- streaming -------------------------------------------------------------

    def _flat_block(self, r: int, kind: int) -> list[int] | None:
        j = r.bit_length() - 1
        if self.level_length(j) > self.flat_limit:
            return None
        key = (j, kind)
        if key not in self._flat:
            s = self._build_level(j).astype(np.int64)
            if kind == INV:
                s = (-s[::-1]) % self.d
            self._flat[key] = s.tolist()
        return self._flat[key]

    def _child(self, kind: int, r: int, offset: int) -> list[list]:
        """Frames that resume emission of ``S_r`` (or its inverse) at ``offset``."""
        flat = self._flat_block(r, kind)
        if flat is not None:
            return [[FLAT, flat, offset]]
        if kind == FWD:
            return self._locate_fwd(r, offset)
        return self._locate_inv(r, offset)

    def _locate_fwd(self, last: int | None, p: int) -> list[list]:
        i, delta = self._unit_at(p, last)
        if delta == 0:
            return [[FWD, last, i, 0]]
        r = self.r(i)
        s = self.level_length(r.bit_length() - 1)
        if delta <= s:
            return [[FWD, last, i, 2]] + self._child(FWD, r, delta - 1)
        if delta == s + 1:
            return [[FWD, last, i, 2]]
        if delta <= 2 * s + 1:
            return [[FWD, last, i, 4]] + self._child(INV, r, delta - s - 2)
        return [[FWD, last, i, 4]]

    def _locate_inv(self, last: int, p: int) -> list[list]:
        q = self.level_length(last.bit_length() - 1) - 1 - p
        i, delta = self._unit_at(q, last)
        if delta == 0:
            return [[INV, last, i, 0]]
        r = self.r(i)
        s = self.level_length(r.bit_length() - 1)
        y = 2 * s + 2 - delta
        if y == 0:
            return [[INV, last, i + 1, 1]]
        if y <= s:
            return [[INV, last, i + 1, 3]] + self._child(FWD, r, y - 1)
        if y == s + 1:
            return [[INV, last, i + 1, 3]]
        return [[INV, last, i, 0]] + self._child(INV, r, y - s - 2)

    def stream(self, start: int = 0) -> Iterator[int]:
        """Symbols ``start, start+1, ...`` of the infinite sequence, O(1) amortised each."""
        if start < 0:
            raise ConstructionError("negative index")
        stack = self._locate_fwd(None, start)
        d = self.d
        u = self.u
        r = self.r
        while True:
            f = stack[-1]
            kind = f[0]
            if kind == FLAT:
                lst, pos = f[1], f[2]
                stack.pop()
                yield from lst[pos:] if pos else lst
                continue
            last, i, ph = f[1], f[2], f[3]
            if kind == FWD:
                if ph == 0:
                    yield u(i)
                    if i == last:
                        stack.pop()
                    else:
                        f[3] = 1
                elif ph == 1:
                    f[3] = 2
                    stack.extend(self._child(FWD, r(i), 0))
                elif ph == 2:
                    yield 0
                    f[3] = 3
                elif ph == 3:
                    f[3] = 4
                    stack.extend(self._child(INV, r(i), 0))
                else:
                    yield 0
                    f[2] = i + 1
                    f[3] = 0
            else:
                if ph == 0:
                    yield (-u(i)) % d
                    if i == 1:
                        stack.pop()
                    else:
                        f[3] = 1
                elif ph == 1:
                    yield 0
                    f[3] = 2
                elif ph == 2:
                    f[3] = 3
                    stack.extend(self._child(FWD, r(i - 1), 0))
                elif ph == 3:
                    yield 0
                    f[3] = 4
                else:
                    f[2] = i - 1
                    f[3] = 0
                    stack.extend(self._child(INV, r(i - 1), 0))


def sues_length(j: int, lam: int = 2, schedule: str = DIVIDES) -> int:
    """``s_{2^j}``; independent of the family, since every ``|U_{2^j}| = 2^j``."""
    from .oracle import UesBlock

    fam = UesFamily(3, (UesBlock((0,), 1),))
    return SuesIndexer(SuesParams(lam, fam, schedule)).level_length(j)


def build_sues(n: int, params: SuesParams) -> ExplorationSequence:
    return SuesIndexer(params).build(n)


def symbol_at(t: int, params: SuesParams) -> int:
    return SuesIndexer(params).symbol_at(t)


def stream(params: SuesParams, start: int = 0) -> Iterator[int]:
    return SuesIndexer(params).stream(start)
