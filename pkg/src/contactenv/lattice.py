"""Finite boxes of the d-dimensional integer lattice with nearest-neighbour edges.

Sites are the points of ``[-L, L]^d`` indexed row-major; edges are unordered
nearest-neighbour pairs, grouped by axis and then row-major over their lower
endpoint.  These fixed total orders on sites and edges give deterministic
tie-breaking to everything built on top (event generation, set dumps, CSV
rows).

A box is a truncation of the infinite lattice, not a torus: recovery clocks
act on every site, but infection arrows only emanate from the open interior
``(-L, L)^d``.  Consumers that need to know whether that truncation mattered
check the boundary-touched flag the engine records.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

DEFAULT_CELL_BUDGET = 50_000_000


class SizingError(ValueError):
    """A requested object would exceed the configured memory budget."""


class Ball(NamedTuple):
    indices: np.ndarray
    clipped: bool


@dataclass(eq=False)
class GraphView:
    """Immutable view of one lattice box.

    Alongside the raw site/edge tables this carries the adjacency structures
    the event loops index millions of times per run, pre-converted to plain
    tuples (CPython indexes tuples of ints far faster than ndarray scalars).
    """

    dimension: int
    half_width: int
    n_sites: int
    n_edges: int
    coords: np.ndarray           # (n_sites, d) int32, row-major order
    edge_ends: np.ndarray        # (n_edges, 2) int32 site ids, ends[e,0] < ends[e,1]
    degree: np.ndarray           # (n_sites,) int32
    growth_exponent: float       # 0 for every box this module produces

    # loop tables, filled by build_box
    site_nbrs: tuple = ()        # per site: tuple of neighbour site ids
    site_edges: tuple = ()       # per site: tuple of incident edge ids (aligned with site_nbrs)
    dir_src: tuple = ()          # directed pair 2e+o -> source site
    dir_dst: tuple = ()
    dir_edge: tuple = ()
    line_nbrs: tuple = ()        # per edge: tuple of edge ids sharing an endpoint
    norm_inf: tuple = ()         # per site: max |coordinate|
    _edge_lookup: dict = None
    _shape: tuple = ()
    _strides: tuple = ()

    @property
    def interior_line_degree(self) -> int:
        """Line-graph degree of an interior edge: 4d - 2."""
        return 4 * self.dimension - 2

    def site_index(self, coord: Sequence[int]) -> int:
        L = self.half_width
        if len(coord) != self.dimension:
            raise ValueError(f"coordinate has {len(coord)} components, box is {self.dimension}-dimensional")
        i = 0
        for c, stride in zip(coord, self._strides):
            if not -L <= c <= L:
                raise ValueError(f"coordinate {tuple(coord)} outside box [-{L},{L}]^{self.dimension}")
            i += (c + L) * stride
        return i

    def site_coord(self, index: int) -> tuple:
        return tuple(int(v) for v in self.coords[index])

    def edge_between(self, a: int, b: int) -> int:
        """Edge id of the unordered pair {a, b}; raises if not adjacent."""
        key = (a, b) if a < b else (b, a)
        try:
            return self._edge_lookup[key]
        except KeyError:
            raise ValueError(f"sites {a} and {b} are not nearest neighbours") from None

    def origin(self) -> int:
        return self.site_index((0,) * self.dimension)

    def is_interior(self, site: int) -> bool:
        return self.norm_inf[site] < self.half_width

    def cube_sites(self, center: Sequence[int], n: int) -> np.ndarray:
        """Site ids of ``center + [-n, n]^d``; the cube must lie in the box."""
        c = np.asarray(center, dtype=np.int64)
        L = self.half_width
        if np.any(np.abs(c) + n > L):
            raise ValueError(f"cube around {tuple(int(v) for v in c)} with radius {n} leaves the box")
        axes = [np.arange(v - n, v + n + 1) for v in c]
        mesh = np.meshgrid(*axes, indexing="ij")
        flat = np.stack([m.ravel() for m in mesh], axis=1) + L
        idx = np.zeros(len(flat), dtype=np.int64)
        for k, stride in enumerate(self._strides):
            idx += flat[:, k] * stride
        return np.sort(idx).astype(np.int32)


def build_box(d: int, L: int, *, cell_budget: int = DEFAULT_CELL_BUDGET) -> GraphView:
    """Construct the box [-L, L]^d with nearest-neighbour edges.

    Raises SizingError when d*(2L+1)^d exceeds ``cell_budget``.
    """
    if d < 1 or L < 1:
        raise ValueError(f"need d >= 1 and L >= 1, got d={d}, L={L}")
    side = 2 * L + 1
    n_sites = side ** d
    cells = d * n_sites
    if cells > cell_budget:
        raise SizingError(
            f"d*(2L+1)^d = {d}*{side}^{d} = {cells} exceeds the cell budget {cell_budget}")

    shape = (side,) * d
    idx = np.arange(n_sites)
    coords = (np.stack(np.unravel_index(idx, shape), axis=1) - L).astype(np.int32)
    strides = tuple(int(np.prod(shape[k + 1:], dtype=np.int64)) for k in range(d))

    ends = []
    for axis in range(d):
        lower = idx[coords[:, axis] < L]
        upper = lower + strides[axis]
        ends.append(np.stack([lower, upper], axis=1))
    edge_ends = np.concatenate(ends, axis=0).astype(np.int32)
    n_edges = len(edge_ends)
    assert n_edges == d * side ** (d - 1) * 2 * L

    nbrs = [[] for _ in range(n_sites)]
    incident = [[] for _ in range(n_sites)]
    for e, (a, b) in enumerate(edge_ends):
        a = int(a); b = int(b)
        nbrs[a].append(b); incident[a].append(e)
        nbrs[b].append(a); incident[b].append(e)

    dir_src, dir_dst, dir_edge = [], [], []
    for e, (a, b) in enumerate(edge_ends):
        dir_src += [int(a), int(b)]
        dir_dst += [int(b), int(a)]
        dir_edge += [e, e]

    line_nbrs = []
    for e, (a, b) in enumerate(edge_ends):
        seen = [x for x in incident[int(a)] + incident[int(b)] if x != e]
        line_nbrs.append(tuple(sorted(set(seen))))

    lookup = {}
    for e, (a, b) in enumerate(edge_ends):
        lookup[(int(a), int(b))] = e

    g = GraphView(
        dimension=d,
        half_width=L,
        n_sites=n_sites,
        n_edges=n_edges,
        coords=coords,
        edge_ends=edge_ends,
        degree=np.array([len(v) for v in nbrs], dtype=np.int32),
        growth_exponent=0.0,
        site_nbrs=tuple(tuple(v) for v in nbrs),
        site_edges=tuple(tuple(v) for v in incident),
        dir_src=tuple(dir_src),
        dir_dst=tuple(dir_dst),
        dir_edge=tuple(dir_edge),
        line_nbrs=tuple(line_nbrs),
        norm_inf=tuple(int(v) for v in np.abs(coords).max(axis=1)),
        _edge_lookup=lookup,
        _shape=shape,
        _strides=strides,
    )
    return g


def graph_distance(g: GraphView, x: int, y: int) -> int:
    """Graph distance between two sites: the l1 distance of their coordinates."""
    return int(np.abs(g.coords[x] - g.coords[y]).sum())


def ball(g: GraphView, center: int, radius: int, kind: str = "site") -> Ball:
    """Ball of the given radius around a site ("site") or an edge ("line").

    The result is clipped to the box; ``clipped`` is set when the same ball on
    the infinite lattice would have contained sites or edges the box lacks.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    kind = {"site-ball": "site", "line-ball-around-edge": "line"}.get(kind, kind)
    if kind == "site":
        nbrs = g.site_nbrs
        full_degree = 2 * g.dimension
        n_nodes = g.n_sites
    elif kind == "line":
        nbrs = g.line_nbrs
        full_degree = g.interior_line_degree
        n_nodes = g.n_edges
    else:
        raise ValueError(f"kind must be 'site' or 'line', got {kind!r}")
    if not 0 <= center < n_nodes:
        raise ValueError(f"center {center} out of range for kind {kind!r}")

    dist = {center: 0}
    frontier = [center]
    clipped = False
    for r in range(radius):
        nxt = []
        for u in frontier:
            local = nbrs[u]
            if len(local) < full_degree:
                clipped = True
            for v in local:
                if v not in dist:
                    dist[v] = r + 1
                    nxt.append(v)
        frontier = nxt
        if not frontier:
            break
    return Ball(np.array(sorted(dist), dtype=np.int32), clipped)


def l1_ball_sites(g: GraphView, center: int, radius: int) -> np.ndarray:
    """Fast path for site balls: sites at l1 distance <= radius from center."""
    diff = np.abs(g.coords.astype(np.int64) - g.coords[center].astype(np.int64)).sum(axis=1)
    return np.flatnonzero(diff <= radius).astype(np.int32)
