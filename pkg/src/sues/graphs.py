"""Port-labeled d-regular graphs.

A graph is stored as its rotation map: ``rot[v][p] == (w, q)`` means the
p-th edge of ``v`` is the q-th edge of ``w``.  Port numbers are local to a
vertex and need not agree across the two endpoints of an edge.

Labelings of a fixed topology are indexed in mixed radix: vertex 0 is the
most significant digit, and each digit is the lexicographic rank of that
vertex's permutation of its (sorted) neighbours.  Labeling 0 therefore
numbers every vertex's ports by increasing neighbour id.
"""

from __future__ import annotations

import itertools
import math
import os
import random
import re
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Sequence

Rotation = tuple[tuple[tuple[int, int], ...], ...]
Adjacency = tuple[tuple[int, ...], ...]

CATALOG_ENV = "SUES_CATALOG_DIR"


class GraphError(ValueError):
    """Raised for malformed graphs and unsupported graph parameters."""


class CatalogMissing(GraphError):
    pass


@dataclass(frozen=True)
class DirectedPortEdge:
    """A directed edge ``tail -> head`` together with the port it occupies at ``head``."""

    tail: int
    head: int
    entry_port: int


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: str = ""
    witness: tuple[int, int] | None = None

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class LabeledGraph:
    n: int
    d: int
    rot: Rotation
    connected: bool = False
    # provenance inside a catalog; not part of graph identity
    topology: int | None = field(default=None, compare=False)
    labeling: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.d < 2:
            raise GraphError(f"need n >= 1 and d >= 2, got n={self.n} d={self.d}")
        if (self.n * self.d) % 2:
            raise GraphError(f"n*d must be even, got n={self.n} d={self.d}")
        if len(self.rot) != self.n or any(len(row) != self.d for row in self.rot):
            raise GraphError("rotation map must have n rows of d ports")

    def port(self, v: int, p: int) -> tuple[int, int]:
        return self.rot[v][p]

    def edge(self, v: int, p: int) -> DirectedPortEdge:
        """The edge leaving ``v`` through port ``p``."""
        w, q = self.rot[v][p]
        return DirectedPortEdge(v, w, q)

    def reverse(self, e: DirectedPortEdge) -> DirectedPortEdge:
        tail, exit_port = self.rot[e.head][e.entry_port]
        return DirectedPortEdge(e.head, tail, exit_port)

    def is_edge(self, e: DirectedPortEdge) -> bool:
        if not (0 <= e.head < self.n and 0 <= e.entry_port < self.d):
            return False
        return self.rot[e.head][e.entry_port][0] == e.tail

    def start_edges(self) -> Iterator[DirectedPortEdge]:
        for v in range(self.n):
            for p in range(self.d):
                yield self.edge(v, p)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return tuple(w for w, _ in self.rot[v])

    def adjacency(self) -> Adjacency:
        return tuple(tuple(sorted(self.neighbors(v))) for v in range(self.n))

    def is_connected(self) -> bool:
        return len(_reachable(self, 0)) == self.n

    @classmethod
    def from_adjacency(
        cls,
        adj: Sequence[Sequence[int]],
        perms: Sequence[Sequence[int]] | None = None,
        connected: bool = True,
        topology: int | None = None,
        labeling: int | None = None,
    ) -> "LabeledGraph":
        """Build a rotation map from neighbour lists.

        ``perms[v][p]`` selects which of ``v``'s sorted neighbours sits on
        port ``p``; omitted means the identity at every vertex.
        """
        nbrs = [sorted(a) for a in adj]
        n = len(nbrs)
        d = len(nbrs[0]) if n else 0
        if any(len(a) != d for a in nbrs):
            raise GraphError("adjacency is not regular")
        if perms is None:
            perms = [tuple(range(d))] * n
        port_of = [dict() for _ in range(n)]
        for v in range(n):
            for p in range(d):
                w = nbrs[v][perms[v][p]]
                if w in port_of[v]:
                    raise GraphError(f"parallel edge {v}-{w}")
                port_of[v][w] = p
        rot = []
        for v in range(n):
            row = []
            for p in range(d):
                w = nbrs[v][perms[v][p]]
                if v not in port_of[w]:
                    raise GraphError(f"adjacency not symmetric at {v}-{w}")
                row.append((w, port_of[w][v]))
            rot.append(tuple(row))
        return cls(n, d, tuple(rot), connected, topology, labeling)

    def to_text(self) -> str:
        lines = [f"graph d={self.d} n={self.n}"]
        for v, row in enumerate(self.rot):
            lines.append(f"{v}: " + " ".join(f"({w},{q})" for w, q in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, connected: bool = True) -> "LabeledGraph":
        g = _parse_graph_lines([ln for ln in text.splitlines() if ln.strip()], connected)
        verdict = validate(g)
        if not verdict:
            raise GraphError(f"invalid graph: {verdict.reason} at {verdict.witness}")
        return g


_HEADER = re.compile(r"^graph\s+d=(\d+)\s+n=(\d+)\s*$")
_PAIR = re.compile(r"\((\d+),(\d+)\)")


def _parse_graph_lines(lines: list[str], connected: bool) -> LabeledGraph:
    if not lines:
        raise GraphError("empty graph record")
    m = _HEADER.match(lines[0].strip())
    if not m:
        raise GraphError(f"bad graph header: {lines[0]!r}")
    d, n = int(m.group(1)), int(m.group(2))
    if len(lines) != n + 1:
        raise GraphError(f"expected {n} vertex lines, got {len(lines) - 1}")
    rot = []
    for v, line in enumerate(lines[1:]):
        label, _, rest = line.partition(":")
        if label.strip() != str(v):
            raise GraphError(f"vertex lines out of order at {line!r}")
        pairs = [(int(a), int(b)) for a, b in _PAIR.findall(rest)]
        if len(pairs) != d:
            raise GraphError(f"vertex {v} lists {len(pairs)} ports, expected {d}")
        rot.append(tuple(pairs))
    return LabeledGraph(n, d, tuple(rot), connected)


def _reachable(g: LabeledGraph, src: int) -> set[int]:
    seen = {src}
    todo = deque([src])
    while todo:
        v = todo.popleft()
        for w, _ in g.rot[v]:
            if 0 <= w < g.n and w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


def validate(g: LabeledGraph) -> Verdict:
    """Check range, involution, simplicity and (if claimed) connectivity."""
    for v in range(g.n):
        for p in range(g.d):
            w, q = g.rot[v][p]
            if not (0 <= w < g.n and 0 <= q < g.d):
                return Verdict(False, "port out of range", (v, p))
            if g.rot[w][q] != (v, p):
                return Verdict(False, "rotation map is not an involution", (v, p))
            if w == v:
                return Verdict(False, "self-loop", (v, p))
    for v in range(g.n):
        seen: dict[int, int] = {}
        for p, (w, _) in enumerate(g.rot[v]):
            if w in seen:
                return Verdict(False, "parallel edge", (v, p))
            seen[w] = p
    if g.connected:
        reach = _reachable(g, 0)
        if len(reach) != g.n:
            v = min(set(range(g.n)) - reach)
            return Verdict(False, "not connected", (v, 0))
    return Verdict(True)


# -- labelings ---------------------------------------------------------------


@lru_cache(maxsize=None)
def permutations_of(d: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.permutations(range(d)))


@lru_cache(maxsize=None)
def _perm_rank(d: int) -> dict[tuple[int, ...], int]:
    return {p: i for i, p in enumerate(permutations_of(d))}


def labeling_count(d: int, n: int) -> int:
    return math.factorial(d) ** n


def labeling_digits(labeling: int, d: int, n: int) -> list[int]:
    base = math.factorial(d)
    if not 0 <= labeling < base**n:
        raise GraphError(f"labeling id {labeling} out of range")
    digits = []
    for _ in range(n):
        labeling, r = divmod(labeling, base)
        digits.append(r)
    return digits[::-1]


def labeling_perms(labeling: int, d: int, n: int) -> list[tuple[int, ...]]:
    perms = permutations_of(d)
    return [perms[x] for x in labeling_digits(labeling, d, n)]


def labeling_id(perms: Sequence[Sequence[int]]) -> int:
    d = len(perms[0])
    rank = _perm_rank(d)
    base = math.factorial(d)
    out = 0
    for p in perms:
        out = out * base + rank[tuple(p)]
    return out


def random_labeling(d: int, n: int, rng: random.Random) -> int:
    perms = []
    for _ in range(n):
        p = list(range(d))
        rng.shuffle(p)
        perms.append(p)
    return labeling_id(perms)


# -- catalogs ----------------------------------------------------------------


def catalog_dir() -> Path:
    override = os.environ.get(CATALOG_ENV)
    if override:
        return Path(override)
    return Path(str(resources.files("sues") / "data"))


def catalog_path(d: int, n: int, directory: Path | None = None) -> Path:
    return (directory or catalog_dir()) / f"catalog_d{d}_n{n}.txt"


def format_catalog(d: int, n: int, topologies: Iterable[Adjacency]) -> str:
    topologies = list(topologies)
    parts = [f"# catalog d={d} n={n} count={len(topologies)}"]
    for adj in topologies:
        parts.append(LabeledGraph.from_adjacency(adj).to_text().rstrip("\n"))
    return "\n\n".join(parts) + "\n"


_CATALOG_HEADER = re.compile(r"^#\s*catalog\s+d=(\d+)\s+n=(\d+)\s+count=(\d+)\s*$")


def parse_catalog(text: str) -> tuple[int, int, tuple[Adjacency, ...]]:
    blocks = [b for b in re.split(r"\n\s*\n", text.strip()) if b.strip()]
    if not blocks:
        raise GraphError("empty catalog")
    first = blocks[0].splitlines()
    m = _CATALOG_HEADER.match(first[0].strip())
    if not m:
        raise GraphError(f"bad catalog header: {first[0]!r}")
    d, n, count = (int(x) for x in m.groups())
    records = []
    if len(first) > 1:
        records.append(first[1:])
        blocks = blocks[1:]
    else:
        blocks = blocks[1:]
    records.extend(b.splitlines() for b in blocks)
    out = []
    for rec in records:
        g = _parse_graph_lines([ln for ln in rec if ln.strip()], connected=True)
        verdict = validate(g)
        if not verdict:
            raise GraphError(f"invalid catalog graph: {verdict.reason} at {verdict.witness}")
        if (g.d, g.n) != (d, n):
            raise GraphError("catalog record does not match header")
        out.append(g.adjacency())
    if len(out) != count:
        raise GraphError(f"catalog header claims {count} records, found {len(out)}")
    return d, n, tuple(out)


@lru_cache(maxsize=None)
def _load_catalog_cached(path: str) -> tuple[int, int, tuple[Adjacency, ...]]:
    return parse_catalog(Path(path).read_text())


def load_catalog(d: int, n: int) -> tuple[Adjacency, ...]:
    """Topologies of all connected d-regular simple graphs on ``n`` vertices."""
    if d < 2 or n < 1 or (n * d) % 2:
        raise CatalogMissing(f"no catalog entry for d={d} n={n}")
    path = catalog_path(d, n)
    if not path.exists():
        raise CatalogMissing(f"no catalog entry for d={d} n={n}")
    cd, cn, tops = _load_catalog_cached(str(path))
    if (cd, cn) != (d, n):
        raise GraphError(f"{path} holds d={cd} n={cn}")
    return tops


def catalog_sizes(d: int, n: int) -> list[int]:
    """Sizes <= n that can host a connected d-regular simple graph."""
    return [m for m in range(d + 1, n + 1) if (m * d) % 2 == 0]


def enumerate_labeled(
    d: int,
    n: int,
    labeling_mode: str = "exhaustive",
    count: int = 1,
    seed: int = 0,
) -> Iterator[tuple[int, int, LabeledGraph]]:
    """Yield ``(topology index, labeling id, graph)`` over the catalog for ``(d, n)``."""
    if d < 3:
        raise GraphError("enumeration needs d >= 3")
    tops = load_catalog(d, n)
    if labeling_mode == "exhaustive":
        total = labeling_count(d, n)
        for t, adj in enumerate(tops):
            for lab in range(total):
                yield t, lab, LabeledGraph.from_adjacency(
                    adj, labeling_perms(lab, d, n), True, t, lab
                )
    elif labeling_mode == "sampled":
        rng = random.Random(seed)
        for t, adj in enumerate(tops):
            for _ in range(count):
                lab = random_labeling(d, n, rng)
                yield t, lab, LabeledGraph.from_adjacency(
                    adj, labeling_perms(lab, d, n), True, t, lab
                )
    else:
        raise GraphError(f"unknown labeling mode {labeling_mode!r}")


def enumerate_graphs(d: int, n: int, labeling_mode: str = "exhaustive",
                     count: int = 1, seed: int = 0) -> Iterator[LabeledGraph]:
    for _, _, g in enumerate_labeled(d, n, labeling_mode, count, seed):
        yield g


def _circulant(d: int, n: int) -> set[tuple[int, int]]:
    """Connected d-regular graph: offsets 1..d/2, plus the antipode for odd d."""
    offs = list(range(1, d // 2 + 1))
    edges = {tuple(sorted((v, (v + k) % n))) for v in range(n) for k in offs}
    if d % 2:
        edges |= {(v, v + n // 2) for v in range(n // 2)}
    return edges


def random_graph(d: int, n: int, seed: int, swaps: int | None = None) -> LabeledGraph:
    """A connected d-regular simple graph with random ports.

    Starts from a circulant graph and applies random double-edge swaps, each
    of which preserves degrees and simplicity; ports are shuffled per vertex.
    """
    if d < 3:
        raise GraphError("random_graph needs d >= 3")
    if (n * d) % 2 or n <= d:
        raise GraphError(f"no simple {d}-regular graph on {n} vertices")
    rng = random.Random(seed)
    edges = _circulant(d, n)
    pool = sorted(edges)
    swaps = 20 * len(pool) if swaps is None else swaps
    tries = 0
    while True:
        # complete graphs admit no swap, so bound the attempts, not the successes
        while tries < swaps:
            tries += 1
            i, j = rng.randrange(len(pool)), rng.randrange(len(pool))
            (a, b), (c, e) = pool[i], pool[j]
            if rng.random() < 0.5:
                c, e = e, c
            new1, new2 = tuple(sorted((a, c))), tuple(sorted((b, e)))
            if a == c or b == e or new1 in edges or new2 in edges or new1 == new2:
                continue
            edges -= {pool[i], pool[j]}
            edges |= {new1, new2}
            pool[i], pool[j] = new1, new2
        adj = [[] for _ in range(n)]
        for a, b in sorted(edges):
            adj[a].append(b)
            adj[b].append(a)
        perms = []
        for _v in range(n):
            p = list(range(d))
            rng.shuffle(p)
            perms.append(tuple(p))
        g = LabeledGraph.from_adjacency(adj, perms, connected=True)
        if g.is_connected():
            assert validate(g)
            return g
        swaps += len(pool)  # keep mixing until connected
