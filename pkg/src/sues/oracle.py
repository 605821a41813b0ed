"""Brute-force universal exploration sequences.

The oracle quantifies over a finite world: every catalog topology of every
size up to ``n``, every per-vertex port labeling (or a seeded sample), and
every start edge.  All walks of one check run side by side in numpy arrays
of half-edge ids, where half-edge ``v*d + p`` stands for port ``p`` of
vertex ``v`` and a walker's state is the half-edge it entered through.

A vertex counts as visited once the walker stands on it, i.e. the head of
the start edge and the heads of all later edges.  The tail of the start
edge does not count.
"""

from __future__ import annotations

import hashlib
import random
import re
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._pool import chunks, pmap
from .graphs import (
    CatalogMissing,
    DirectedPortEdge,
    GraphError,
    LabeledGraph,
    catalog_sizes,
    labeling_count,
    labeling_perms,
    load_catalog,
    permutations_of,
    random_labeling,
)
from .walk import ExplorationSequence, SequenceError

# exhaustive runs above this many simultaneous walks must be sampled instead
MAX_WALKS = 20_000_000


class OracleError(ValueError):
    pass


# -- environments ------------------------------------------------------------


@lru_cache(maxsize=None)
def _perm_arrays(d: int) -> tuple[np.ndarray, np.ndarray]:
    perms = np.array(permutations_of(d), dtype=np.int64)
    inv = np.argsort(perms, axis=1)
    return perms, inv


def labeled_rotations(adj: Sequence[Sequence[int]], d: int, labelings: np.ndarray) -> np.ndarray:
    """Local half-edge rotation tables, one row per labeling id.

    ``out[e, v*d + p] == w*d + q`` iff port p of v is port q of w.
    """
    a = np.array([sorted(x) for x in adj], dtype=np.int64)
    n = a.shape[0]
    back = np.empty_like(a)  # back[v, k]: position of v in the sorted list of a[v, k]
    for v in range(n):
        for k in range(d):
            back[v, k] = list(a[a[v, k]]).index(v)
    perms, inv = _perm_arrays(d)
    base = len(perms)
    labs = np.asarray(labelings, dtype=object if n * np.log2(base) >= 62 else np.int64)
    digits = np.empty((len(labs), n), dtype=np.int64)
    rest = labs.copy()
    for v in range(n - 1, -1, -1):
        digits[:, v] = (rest % base).astype(np.int64)
        rest = rest // base
    slot = perms[digits]  # (E, n, d): sorted-neighbour index on port p
    w = a[np.arange(n)[None, :, None], slot]
    k_at_w = back[np.arange(n)[None, :, None], slot]
    e_idx = np.arange(len(labs))[:, None, None]
    q = inv[digits[e_idx, w], k_at_w]
    return (w * d + q).reshape(len(labs), n * d)


@dataclass(frozen=True)
class EnvSpec:
    """A slice of the oracle's world: some labelings of one catalog topology."""

    size: int
    topology: int
    labelings: tuple[int, ...] | range


def world_specs(d: int, n: int, mode: str = "exhaustive", count: int = 16, seed: int = 0) -> list[EnvSpec]:
    if d < 3:
        raise OracleError("UES semantics need d >= 3")
    sizes = catalog_sizes(d, n)
    if not sizes:
        raise OracleError(f"no connected {d}-regular graph has at most {n} vertices")
    specs = []
    rng = random.Random(seed)
    for m in sizes:
        tops = load_catalog(d, m)
        for t in range(len(tops)):
            if mode == "exhaustive":
                specs.append(EnvSpec(m, t, range(labeling_count(d, m))))
            elif mode == "sampled":
                labs = sorted(random_labeling(d, m, rng) for _ in range(count))
                specs.append(EnvSpec(m, t, tuple(labs)))
            else:
                raise OracleError(f"unknown mode {mode!r}")
    return specs


def split_specs(specs: list[EnvSpec], parts: int) -> list[list[EnvSpec]]:
    """Cut specs into about ``parts`` shards by labeling range, preserving order."""
    if parts <= 1:
        return [specs]
    pieces = []
    for s in specs:
        k = max(1, parts * len(s.labelings) // max(1, sum(len(x.labelings) for x in specs)))
        for lo, hi in chunks(0, len(s.labelings), k):
            pieces.append(EnvSpec(s.size, s.topology, s.labelings[lo:hi]))
    return [[p] for p in pieces]


class Environments:
    """A stacked rotation table for many labeled graphs of one degree."""

    def __init__(self, d: int, specs: Iterable[EnvSpec]):
        self.d = d
        self.specs = list(specs)
        tables, size, topo, lab = [], [], [], []
        for s in self.specs:
            labs = np.array(list(s.labelings), dtype=np.int64)
            if not len(labs):
                continue
            tables.append(labeled_rotations(load_catalog(d, s.size)[s.topology], d, labs))
            size.append(np.full(len(labs), s.size))
            topo.append(np.full(len(labs), s.topology))
            lab.append(labs)
        if not tables:
            raise OracleError("empty environment set")
        self.size = np.concatenate(size)
        self.topology = np.concatenate(topo)
        self.labeling = np.concatenate(lab)
        halfedges = self.size * d
        self.base = np.concatenate([[0], np.cumsum(halfedges)[:-1]]).astype(np.int64)
        self.rot = np.concatenate(
            [(t + b[:, None]).ravel() for t, b in zip(tables, _split_like(self.base, tables))]
        )
        self.vbase = self.base // d
        self.full = (np.int64(1) << self.size.astype(np.int64)) - 1

    @classmethod
    def world(cls, d: int, n: int, mode: str = "exhaustive", count: int = 16, seed: int = 0):
        specs = world_specs(d, n, mode, count, seed)
        total = sum(len(s.labelings) * s.size * d for s in specs)
        if total > MAX_WALKS:
            raise OracleError(f"{total} walks exceed the exhaustive limit; use sampled mode")
        return cls(d, specs)

    def __len__(self) -> int:
        return len(self.size)

    @property
    def walk_count(self) -> int:
        return int((self.size * self.d).sum())

    def start_states(self) -> "States":
        d = self.d
        per = self.size * d
        env = np.repeat(np.arange(len(self)), per)
        offs = np.arange(len(env)) - np.repeat(np.cumsum(per) - per, per)
        h = self.rot[self.base[env] + offs]
        visited = np.int64(1) << (h // d - self.vbase[env])
        return States(env, offs, h, visited)

    def step(self, st: "States", symbol: int) -> "States":
        d = self.d
        port = st.h % d
        h = self.rot[st.h - port + (port + symbol) % d]
        visited = st.visited | (np.int64(1) << (h // d - self.vbase[st.env]))
        return States(st.env, st.start, h, visited)

    def uncovered(self, st: "States") -> "States":
        keep = st.visited != self.full[st.env]
        return st.take(keep)

    def unvisited_counts(self, st: "States") -> np.ndarray:
        return np.bitwise_count(self.full[st.env] & ~st.visited)

    def run(self, symbols, st: "States | None" = None, prune_every: int = 16) -> "States":
        """Advance every walk through ``symbols``; returns the walks still missing a vertex."""
        st = self.start_states() if st is None else st
        st = self.uncovered(st)
        for i, t in enumerate(np.asarray(symbols, dtype=np.int64).tolist()):
            if not len(st):
                break
            st = self.step(st, t)
            if i % prune_every == prune_every - 1:
                st = self.uncovered(st)
        return self.uncovered(st)

    def graph(self, env: int) -> LabeledGraph:
        size, t, lab = int(self.size[env]), int(self.topology[env]), int(self.labeling[env])
        adj = load_catalog(self.d, size)[t]
        return LabeledGraph.from_adjacency(adj, labeling_perms(lab, self.d, size), True, t, lab)


def _split_like(arr, tables):
    out, i = [], 0
    for t in tables:
        out.append(arr[i:i + len(t)])
        i += len(t)
    return out


@dataclass
class States:
    env: np.ndarray
    start: np.ndarray  # local half-edge id of the start port (v*d + p at the tail)
    h: np.ndarray
    visited: np.ndarray

    def __len__(self) -> int:
        return len(self.env)

    def take(self, mask) -> "States":
        return States(self.env[mask], self.start[mask], self.h[mask], self.visited[mask])

    def fingerprint(self) -> bytes:
        """Order-free digest of the walk states; ``h`` is global, so it fixes the environment."""
        codes = np.sort(self.h << 32 | self.visited)
        return hashlib.blake2b(codes.tobytes(), digest_size=16).digest()


# -- verification ------------------------------------------------------------


@dataclass(frozen=True)
class Counterexample:
    size: int
    topology: int
    labeling: int
    start: DirectedPortEdge
    unvisited: int

    def graph(self, d: int) -> LabeledGraph:
        adj = load_catalog(d, self.size)[self.topology]
        return LabeledGraph.from_adjacency(
            adj, labeling_perms(self.labeling, d, self.size), True, self.topology, self.labeling
        )

    def replay(self, seq: ExplorationSequence) -> bool:
        """True iff walking ``seq`` from the recorded start still misses ``unvisited``."""
        from .walk import execute

        g = self.graph(seq.d)
        trace = execute(g, seq, self.start)
        return self.unvisited not in trace.vertices[1:]


@dataclass(frozen=True)
class UesVerdict:
    is_ues: bool
    counterexample: Counterexample | None
    walks_checked: int
    mode: str
    seed: int | None = None

    def __bool__(self) -> bool:
        return self.is_ues


def _first_failure(envs: Environments, failing: States):
    if not len(failing):
        return None
    key = failing.env * (envs.size.max() * envs.d) + failing.start
    i = int(np.argmin(key))
    env, start = int(failing.env[i]), int(failing.start[i])
    missing = int(envs.full[env] & ~failing.visited[i])
    unvisited = (missing & -missing).bit_length() - 1
    return (int(envs.size[env]), int(envs.topology[env]), int(envs.labeling[env]), start, unvisited)


def _verify_shard(task):
    d, specs, symbols = task
    envs = Environments(d, specs)
    failing = envs.run(symbols)
    return envs.walk_count, _first_failure(envs, failing)


def verify_ues(
    seq: ExplorationSequence | Sequence[int],
    d: int,
    n: int,
    mode: str = "exhaustive",
    count: int = 16,
    seed: int = 0,
    workers: int = 1,
    envs: Environments | None = None,
) -> UesVerdict:
    """Check that ``seq`` explores every world graph of size at most ``n``.

    ``envs`` may carry a prebuilt world to avoid rebuilding tables when many
    sequences are checked against the same environments.
    """
    if isinstance(seq, ExplorationSequence):
        if seq.d != d:
            raise SequenceError(f"alphabet mismatch: sequence d={seq.d}, expected {d}")
        symbols = seq.symbols
    else:
        symbols = ExplorationSequence(d, seq).symbols
    if envs is not None:
        walks, fail = envs.walk_count, _first_failure(envs, envs.run(symbols))
    else:
        specs = world_specs(d, n, mode, count, seed)
        total = sum(len(s.labelings) * s.size * d for s in specs)
        if mode == "exhaustive" and total > MAX_WALKS * max(1, workers):
            raise OracleError(f"{total} walks exceed the exhaustive limit; use sampled mode")
        parts = max(workers, total // MAX_WALKS + 1)
        shards = split_specs(specs, parts) if parts > 1 else [specs]
        results = pmap(_verify_shard, [(d, sh, symbols) for sh in shards], workers)
        walks = sum(r[0] for r in results)
        fails = [r[1] for r in results if r[1] is not None]
        fail = min(fails) if fails else None
    cex = None
    if fail is not None:
        size, t, lab, start, unvisited = fail
        adj = load_catalog(d, size)[t]
        g = LabeledGraph.from_adjacency(adj, labeling_perms(lab, d, size), True, t, lab)
        cex = Counterexample(size, t, lab, g.edge(start // d, start % d), unvisited)
    return UesVerdict(fail is None, cex, walks, mode, seed if mode == "sampled" else None)


# -- search ------------------------------------------------------------------


@dataclass(frozen=True)
class SearchResult:
    status: str  # "found" | "none" | "budget"
    sequence: ExplorationSequence | None
    refuted_below: int  # no UES exists of any length < refuted_below (>= 1)
    nodes: int
    minimal: bool = True

    @property
    def found(self) -> bool:
        return self.status == "found"


class _Budget(Exception):
    pass


class _Searcher:
    def __init__(self, envs: Environments, budget: int | None, cache_size: int):
        self.envs = envs
        self.budget = budget
        self.cache_size = cache_size
        self.cache: OrderedDict[bytes, int] = OrderedDict()
        self.hits = 0
        self.nodes = 0
        self.stride = int(envs.size.max() * envs.d) * len(envs)

    def _cached_fail(self, key: bytes, remaining: int) -> bool:
        if key in self.cache and self.cache[key] >= remaining:
            self.cache.move_to_end(key)
            self.hits += 1
            return True
        return False

    def _remember(self, key: bytes, remaining: int) -> None:
        if self.cache_size <= 0:
            return
        self.cache[key] = max(remaining, self.cache.get(key, -1))
        self.cache.move_to_end(key)
        while len(self.cache) > self.cache_size:
            self.cache.popitem(last=False)

    def dfs(self, st: States, prefix: list[int], remaining: int) -> list[int] | None:
        if not len(st):
            return prefix
        if remaining == 0:
            return None
        if int(self.envs.unvisited_counts(st).max()) > remaining:
            return None
        self.nodes += 1
        if self.budget is not None and self.nodes > self.budget:
            raise _Budget
        key = st.fingerprint() if self.cache_size > 0 else b""
        if key and self._cached_fail(key, remaining):
            return None
        for t in range(self.envs.d):
            child = self.envs.uncovered(self.envs.step(st, t))
            found = self.dfs(child, prefix + [t], remaining - 1)
            if found is not None:
                return found
        if key:
            self._remember(key, remaining)
        return None


def _search_task(task):
    d, n, length, first, budget, cache_size = task
    envs = Environments.world(d, n)
    s = _Searcher(envs, budget, cache_size)
    st = envs.uncovered(envs.start_states())
    try:
        if length == 0:
            return (None if len(st) else []), s.nodes, False
        child = envs.uncovered(envs.step(st, first))
        return s.dfs(child, [first], length - 1), s.nodes, False
    except _Budget:
        return None, s.nodes, True


def search_ues(
    d: int,
    n: int,
    max_len: int,
    budget: int | None = None,
    strategy: str = "ids",
    workers: int = 1,
    cache_size: int = 4096,
) -> SearchResult:
    """Shortest (then lexicographically first) UES of length at most ``max_len``.

    Iterative deepening over lengths; each length is split into one subtree
    per first symbol, searched with its own failure cache so that the node
    counts and the answer are the same for any worker count.  The bound
    "a walk gains at most one new vertex per step" prunes hopeless prefixes.
    ``budget`` caps the nodes expanded per subtree.
    """
    if d < 3:
        raise OracleError("UES semantics need d >= 3")
    if n <= d:
        raise OracleError(f"no connected {d}-regular simple graph on at most {n} vertices")
    if strategy == "greedy":
        return _greedy(d, n, max_len)
    if strategy != "ids":
        raise OracleError(f"unknown strategy {strategy!r}")
    Environments.world(d, n)  # fail fast on missing catalogs / oversize worlds
    nodes = 0
    for length in range(1, max_len + 1):
        tasks = [(d, n, length, t, budget, cache_size) for t in range(d)]
        results = pmap(_search_task, tasks, workers)
        for found, k, exhausted in results:
            nodes += k
            if exhausted:
                return SearchResult("budget", None, length, nodes)
            if found is not None:
                return SearchResult("found", ExplorationSequence(d, found), length, nodes)
    return SearchResult("none", None, max_len + 1, nodes)


def _greedy(d: int, n: int, max_len: int, mode: str = "exhaustive") -> SearchResult:
    """Extend one symbol at a time, minimising the total number of unvisited vertices."""
    envs = Environments.world(d, n, mode)
    st = envs.uncovered(envs.start_states())
    out: list[int] = []
    while len(st) and len(out) < max_len:
        best = None
        for t in range(d):
            child = envs.uncovered(envs.step(st, t))
            score = (int(envs.unvisited_counts(child).sum()), len(child))
            if best is None or score < best[0]:
                best = (score, t, child)
        out.append(best[1])
        st = best[2]
    if len(st):
        return SearchResult("none", None, 1, len(out), minimal=False)
    return SearchResult("found", ExplorationSequence(d, out), 1, len(out), minimal=False)


# -- prefix-chained families ---------------------------------------------------


@dataclass(frozen=True)
class UesBlock:
    symbols: tuple[int, ...]
    coverage: int


@dataclass(frozen=True)
class UesFamily:
    """Prefix-chained UESs ``U_{2^j}``; levels past the last block reuse it.

    Level 0 is ``U_1``.  For ``j >= 1`` the second half of ``U_{2^j}`` is
    block ``j`` padded with zeros to length ``2^(j-1)``.
    """

    d: int
    blocks: tuple[UesBlock, ...]
    _prefix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.blocks:
            raise OracleError("family needs at least one block")
        parts = [np.array(self.blocks[0].symbols[:1] or (0,), dtype=np.uint8)]
        for j in range(1, len(self.blocks)):
            parts.append(_padded(self.blocks[j].symbols, 1 << (j - 1)))
        prefix = np.concatenate(parts)
        prefix.setflags(write=False)
        object.__setattr__(self, "_prefix", prefix)

    @property
    def levels(self) -> int:
        return len(self.blocks)

    def block(self, j: int) -> UesBlock:
        return self.blocks[min(j, len(self.blocks) - 1)]

    def coverage(self, j: int) -> int:
        return max(b.coverage for b in self.blocks[: min(j, len(self.blocks) - 1) + 1])

    def min_level(self, n_target: int) -> int:
        for j, b in enumerate(self.blocks):
            if b.coverage >= n_target:
                return j
        raise OracleError(
            f"family coverage {self.coverage(len(self.blocks))} is below n_target={n_target}"
        )

    def sequence(self, j: int) -> ExplorationSequence:
        """``U_{2^j}`` materialised."""
        return ExplorationSequence(self.d, self.symbols(np.arange(1 << j)))

    def symbol(self, i: int) -> int:
        """Symbol ``i`` (0-based) of the infinite limit of the family."""
        if i < len(self._prefix):
            return int(self._prefix[i])
        j = i.bit_length()
        last = self.blocks[-1].symbols
        off = i - (1 << (j - 1))
        return last[off] if off < len(last) else 0

    def symbols(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        out = np.zeros(idx.shape, dtype=np.int64)
        near = idx < len(self._prefix)
        out[near] = self._prefix[idx[near]]
        far = ~near
        if far.any():
            fi = idx[far]
            top = np.floor(np.log2(fi)).astype(np.int64)
            top += (np.int64(1) << (top + 1)) <= fi
            top -= (np.int64(1) << top) > fi
            off = fi - (np.int64(1) << top)
            last = np.array(self.blocks[-1].symbols or (0,), dtype=np.int64)
            inside = off < len(self.blocks[-1].symbols)
            vals = np.zeros(len(fi), dtype=np.int64)
            vals[inside] = last[off[inside]]
            out[far] = vals
        return out


def _padded(symbols, length: int) -> np.ndarray:
    out = np.zeros(length, dtype=np.uint8)
    out[: len(symbols)] = symbols
    return out


def build_prefix_family(
    base_blocks: Sequence[tuple[Sequence[int], int]],
    d: int,
    levels: int | None = None,
    verify: bool = False,
) -> UesFamily:
    """Chain ``(sequence, coverage)`` blocks into a :class:`UesFamily`.

    Block ``j`` must fit in ``2^(j-1)`` symbols (block 0 is cut to one
    symbol), and declared coverage may not decrease.  Missing levels up to
    ``levels`` repeat the last block.  With ``verify`` every block whose
    coverage exceeds ``d`` is checked exhaustively first.
    """
    if not base_blocks:
        raise OracleError("no base blocks")
    blocks = []
    for j, (seq, cov) in enumerate(base_blocks):
        syms = tuple(int(x) for x in seq)
        if any(not 0 <= x < d for x in syms):
            raise OracleError(f"block {j} has a symbol outside 0..{d - 1}")
        if j == 0:
            syms = syms[:1] or (0,)
        elif len(syms) > 1 << (j - 1):
            raise OracleError(f"block {j} has length {len(syms)} > {1 << (j - 1)}")
        if blocks and cov < blocks[-1].coverage:
            raise OracleError(f"coverage regression at level {j}: {cov} < {blocks[-1].coverage}")
        if verify and cov > d and not verify_ues(syms if syms else [0], d, cov):
            raise OracleError(f"block {j} is not a UES for size {cov}")
        blocks.append(UesBlock(syms, int(cov)))
    if levels is not None:
        while len(blocks) < levels:
            j = len(blocks)
            last = blocks[-1]
            if len(last.symbols) > 1 << (j - 1):
                raise OracleError(f"block for level {j} does not fit")
            blocks.append(UesBlock(last.symbols, last.coverage))
    return UesFamily(d, tuple(blocks))


def family_from_ues(word: Sequence[int], d: int, coverage: int) -> UesFamily:
    """Family whose first levels hold prefixes of ``word`` and whose top level holds it whole.

    Prefix blocks get coverage ``d``: no simple d-regular graph has ``d`` or
    fewer vertices, so the claim is vacuous.
    """
    word = [int(x) for x in word]
    top = max(1, (max(1, len(word)) - 1).bit_length() + 1)
    blocks = [(word[:1], d)]
    for j in range(1, top):
        blocks.append((word[: 1 << (j - 1)], d))
    blocks.append((word, coverage))
    return build_prefix_family(blocks, d)


@lru_cache(maxsize=None)
def searched_family(d: int = 3, n: int = 4, max_len: int = 12) -> UesFamily:
    """Family built around the shortest UES the oracle finds for ``(d, n)``."""
    res = search_ues(d, n, max_len)
    if not res.found:
        raise OracleError(f"no UES of length <= {max_len} for d={d} n={n}")
    return family_from_ues(res.sequence.tolist(), d, n)


# -- family archive ------------------------------------------------------------

_FAM_HEADER = re.compile(r"^family\s+d=(\d+)\s+levels=(\d+)\s*$")
_LEVEL = re.compile(r"^level\s+(\d+)\s+coverage=(\d+)\s+len=(\d+)\s*$")


def format_family(fam: UesFamily) -> str:
    lines = [f"family d={fam.d} levels={fam.levels}"]
    for j, b in enumerate(fam.blocks):
        lines.append(f"level {j} coverage={b.coverage} len={len(b.symbols)}")
        lines.append(" ".join(map(str, b.symbols)))
    lines.append("coverage " + " ".join(f"{j}:{fam.coverage(j)}" for j in range(fam.levels)))
    return "\n".join(lines) + "\n"


def parse_family(text: str) -> UesFamily:
    lines = text.splitlines()
    m = _FAM_HEADER.match(lines[0].strip()) if lines else None
    if not m:
        raise OracleError("bad family header")
    d, levels = int(m.group(1)), int(m.group(2))
    blocks = []
    i = 1
    for j in range(levels):
        lm = _LEVEL.match(lines[i].strip())
        if not lm or int(lm.group(1)) != j:
            raise OracleError(f"bad level record at line {i + 1}")
        syms = [int(x) for x in lines[i + 1].split()]
        if len(syms) != int(lm.group(3)):
            raise OracleError(f"level {j} length mismatch")
        blocks.append((syms, int(lm.group(2))))
        i += 2
    fam = build_prefix_family(blocks, d)
    table = lines[i].split()
    if table[0] != "coverage":
        raise OracleError("missing coverage table")
    declared = {int(k): int(v) for k, v in (x.split(":") for x in table[1:])}
    if declared != {j: fam.coverage(j) for j in range(levels)}:
        raise OracleError("coverage table disagrees with the level records")
    return fam


def write_family(path: str | Path, fam: UesFamily) -> None:
    Path(path).write_text(format_family(fam))


def read_family(path: str | Path) -> UesFamily:
    return parse_family(Path(path).read_text())


__all__ = [
    "CatalogMissing",
    "Counterexample",
    "Environments",
    "GraphError",
    "OracleError",
    "SearchResult",
    "UesBlock",
    "UesFamily",
    "UesVerdict",
    "build_prefix_family",
    "family_from_ues",
    "format_family",
    "parse_family",
    "read_family",
    "search_ues",
    "searched_family",
    "verify_ues",
    "write_family",
]
