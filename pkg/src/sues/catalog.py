"""Generate the shipped topology catalogs.

Every labeled connected d-regular simple graph on n vertices whose vertex 0
is adjacent to exactly ``1..d`` is enumerated (every isomorphism class has
such a member), then reduced to a canonical form: the lexicographically
smallest upper-triangle adjacency word over all vertex relabelings.

Run ``python -m sues.catalog [outdir]`` to regenerate the data files.
"""

from __future__ import annotations

import itertools
import sys
from functools import lru_cache
from pathlib import Path

import numpy as np

from .graphs import Adjacency, catalog_dir, format_catalog

SHIPPED = ((3, 4), (3, 6), (3, 8), (4, 5), (4, 6))


def _labeled_graphs(d: int, n: int):
    deg = [0] * n
    adj = [set() for _ in range(n)]

    def fill(v):
        if v == n:
            yield [sorted(a) for a in adj]
            return
        need = d - deg[v]
        if v == 0:
            choices = [tuple(range(1, d + 1))]
        else:
            pool = [w for w in range(v + 1, n) if deg[w] < d]
            choices = itertools.combinations(pool, need) if need > 0 else [()]
        for chosen in choices:
            if len(chosen) != need:
                continue
            for w in chosen:
                adj[v].add(w)
                adj[w].add(v)
                deg[v] += 1
                deg[w] += 1
            yield from fill(v + 1)
            for w in chosen:
                adj[v].discard(w)
                adj[w].discard(v)
                deg[v] -= 1
                deg[w] -= 1

    yield from fill(0)


def _connected(adj) -> bool:
    seen = {0}
    stack = [0]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(adj)


@lru_cache(maxsize=None)
def _perm_table(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.int64)


def canonical_code(adj) -> tuple[int, tuple[int, ...]]:
    """Minimal adjacency word and one relabeling achieving it (``perm[new] = old``)."""
    n = len(adj)
    a = np.zeros((n, n), dtype=np.int64)
    for v, ws in enumerate(adj):
        a[v, list(ws)] = 1
    perms = _perm_table(n)
    iu, ju = np.triu_indices(n, 1)
    bits = a[perms[:, iu], perms[:, ju]]
    weights = (1 << np.arange(len(iu) - 1, -1, -1, dtype=np.int64))
    codes = bits @ weights
    k = int(np.argmin(codes))
    return int(codes[k]), tuple(int(x) for x in perms[k])


def relabel(adj, perm) -> Adjacency:
    new_of = {old: new for new, old in enumerate(perm)}
    out = [None] * len(adj)
    for old, ws in enumerate(adj):
        out[new_of[old]] = tuple(sorted(new_of[w] for w in ws))
    return tuple(out)


def generate_topologies(d: int, n: int) -> list[Adjacency]:
    """One representative per isomorphism class, ordered by canonical code."""
    found: dict[int, Adjacency] = {}
    for adj in _labeled_graphs(d, n):
        if not _connected(adj):
            continue
        code, perm = canonical_code(adj)
        if code not in found:
            found[code] = relabel(adj, perm)
    return [found[c] for c in sorted(found)]


def write_catalogs(outdir: Path, cases=SHIPPED) -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for d, n in cases:
        path = outdir / f"catalog_d{d}_n{n}.txt"
        path.write_text(format_catalog(d, n, generate_topologies(d, n)))
        paths.append(path)
    return paths


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else catalog_dir()
    for p in write_catalogs(target):
        print(p)
