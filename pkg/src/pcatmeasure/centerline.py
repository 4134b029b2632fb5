"""Skeleton graphs, landmark detection and arc-length walks along centerlines."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage as ndi

from .errors import ShortCenterlineError
from .volume_io import BinaryMask, VoxelGrid

OFFSETS_26 = np.array(
    [o for o in itertools.product((-1, 0, 1), repeat=3) if o != (0, 0, 0)], dtype=np.int64
)
_ARC_TOL_MM = 1e-9


@dataclass(frozen=True, eq=False)
class SkeletonGraph:
    """Centerline voxels with 26-neighbor adjacency.

    Nodes are sorted by x-fastest linear index, so node id order is the
    tie-breaking order. ``neighbors[n]`` lists node ids adjacent to ``n``.
    """

    nodes: np.ndarray
    neighbors: tuple[tuple[int, ...], ...]
    shape: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    _lookup: dict = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self._lookup is None:
            lookup = {tuple(int(c) for c in p): n for n, p in enumerate(self.nodes)}
            object.__setattr__(self, "_lookup", lookup)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(nb) for nb in self.neighbors], dtype=np.int64)

    @property
    def endpoints(self) -> list[int]:
        return [n for n, nb in enumerate(self.neighbors) if len(nb) == 1]

    def node_id(self, ijk: Sequence[int]) -> int:
        try:
            return self._lookup[tuple(int(c) for c in ijk)]
        except KeyError:
            raise KeyError(f"voxel {tuple(ijk)} is not a centerline node") from None

    def ijk(self, node: int) -> tuple[int, int, int]:
        return tuple(int(c) for c in self.nodes[node])  # type: ignore[return-value]

    def world(self, node_ids) -> np.ndarray:
        return np.asarray(self.origin) + self.nodes[node_ids] * np.asarray(self.spacing)

    def step_mm(self, a: int, b: int) -> float:
        d = (self.nodes[a] - self.nodes[b]) * np.asarray(self.spacing)
        return float(np.sqrt(np.dot(d, d)))

    def linear_index(self, node: int) -> int:
        return int(np.ravel_multi_index(tuple(self.nodes[node]), self.shape, order="F"))

    def subgraph(self, keep: Iterable[int]) -> "SkeletonGraph":
        keep = sorted(set(keep))
        new_id = {old: new for new, old in enumerate(keep)}
        neighbors = tuple(
            tuple(new_id[m] for m in self.neighbors[old] if m in new_id) for old in keep
        )
        nodes = self.nodes[keep] if keep else np.empty((0, 3), dtype=np.int64)
        return SkeletonGraph(nodes, neighbors, self.shape, self.spacing, self.origin)

    def components(self) -> list[list[int]]:
        """Connected node sets, largest first (ties by smallest node id)."""
        seen = np.zeros(len(self), dtype=bool)
        comps = []
        for start in range(len(self)):
            if seen[start]:
                continue
            seen[start] = True
            stack, comp = [start], []
            while stack:
                n = stack.pop()
                comp.append(n)
                for m in self.neighbors[n]:
                    if not seen[m]:
                        seen[m] = True
                        stack.append(m)
            comps.append(sorted(comp))
        comps.sort(key=lambda c: (-len(c), c[0]))
        return comps

    def distances_from(self, source: int) -> np.ndarray:
        """Shortest arc distance (mm) along the graph from ``source``; inf if unreachable."""
        dist = np.full(len(self), np.inf)
        dist[source] = 0.0
        heap = [(0.0, source)]
        while heap:
            d, n = heapq.heappop(heap)
            if d > dist[n]:
                continue
            for m in self.neighbors[n]:
                nd = d + self.step_mm(n, m)
                if nd < dist[m]:
                    dist[m] = nd
                    heapq.heappush(heap, (nd, m))
        return dist

    def shortest_path(self, source: int, target: int) -> list[int]:
        dist = self.distances_from(source)
        if not np.isfinite(dist[target]):
            raise ValueError("target not reachable from source")
        path = [target]
        while path[-1] != source:
            n = path[-1]
            # predecessor: a neighbor lying on a shortest path, smallest id first
            prev = min(
                (m for m in self.neighbors[n]
                 if abs(dist[m] + self.step_mm(m, n) - dist[n]) <= 1e-9),
                key=lambda m: (dist[m], m),
            )
            path.append(prev)
        return path[::-1]

    def to_json_dict(self) -> dict:
        world = self.world(np.arange(len(self))) if len(self) else np.empty((0, 3))
        return {
            "shape": list(self.shape),
            "spacing": list(self.spacing),
            "origin": list(self.origin),
            "nodes": [
                {
                    "id": n,
                    "ijk": list(self.ijk(n)),
                    "world_mm": [round(float(v), 6) for v in world[n]],
                    "degree": len(self.neighbors[n]),
                    "neighbors": list(self.neighbors[n]),
                }
                for n in range(len(self))
            ],
        }


def build_graph(skeleton: BinaryMask, simplify: bool = True) -> SkeletonGraph:
    """Graph of 26-adjacent skeleton voxels.

    With ``simplify`` an edge is dropped when its two voxels are also joined
    through a common neighbor by two strictly shorter steps. This turns the
    triangles that 26-adjacency creates at every corner of a one-voxel-wide
    curve back into a path, so node degree counts branches rather than
    diagonal shortcuts. Connectivity is unchanged.
    """
    pts = np.argwhere(skeleton.data)
    if len(pts) == 0:
        raise ShortCenterlineError("no centerline: skeleton is empty")
    lin = np.ravel_multi_index(tuple(pts.T), skeleton.dims, order="F")
    pts = pts[np.argsort(lin, kind="stable")]

    lo = pts.min(axis=0) - 1
    lookup = np.full(tuple(pts.max(axis=0) - lo + 2), -1, dtype=np.int64)
    local = pts - lo
    lookup[tuple(local.T)] = np.arange(len(pts))

    nbrs: list[set[int]] = [set() for _ in range(len(pts))]
    sqlen: dict[tuple[int, int], int] = {}
    for off in OFFSETS_26:
        hit = lookup[tuple((local + off).T)]
        src = np.flatnonzero(hit >= 0)
        ln = int(np.dot(off, off))
        for a, b in zip(src.tolist(), hit[src].tolist()):
            nbrs[a].add(b)
            sqlen[(a, b)] = ln

    if simplify:
        drop = []
        for (a, b), ln in sqlen.items():
            if ln == 1 or a > b:
                continue
            for c in nbrs[a] & nbrs[b]:
                if sqlen[(a, c)] < ln and sqlen[(c, b)] < ln:
                    drop.append((a, b))
                    break
        for a, b in drop:
            nbrs[a].discard(b)
            nbrs[b].discard(a)

    neighbors = tuple(tuple(sorted(s)) for s in nbrs)
    return SkeletonGraph(pts.astype(np.int64), neighbors, skeleton.dims, skeleton.spacing, skeleton.origin)


def _leaf_branch(adj: dict[int, set[int]], end: int) -> tuple[list[int], int | None]:
    """Nodes from an endpoint up to (excluding) the first junction, and that junction."""
    branch, prev, cur = [end], None, end
    while True:
        nxt = [m for m in adj[cur] if m != prev]
        if len(nxt) != 1:
            return branch, None
        prev, cur = cur, nxt[0]
        if len(adj[cur]) >= 3:
            return branch, cur
        if len(adj[cur]) == 1:
            return branch + [cur], None
        branch.append(cur)


def prune_spurs(graph: SkeletonGraph, min_length_mm: float) -> SkeletonGraph:
    """Remove leaf branches shorter than ``min_length_mm``, shortest first,
    until none remain. A branch's length runs from its endpoint to the
    junction it hangs off. Branches without a junction are never removed.
    """
    if min_length_mm < 0:
        raise ValueError("min_length_mm must be >= 0")
    adj = {n: set(nb) for n, nb in enumerate(graph.neighbors)}
    if min_length_mm == 0:
        return graph

    while True:
        best = None
        for end in sorted(n for n, nb in adj.items() if len(nb) == 1):
            branch, junction = _leaf_branch(adj, end)
            if junction is None:
                continue
            steps = branch + [junction]
            length = sum(graph.step_mm(a, b) for a, b in zip(steps, steps[1:]))
            if length < min_length_mm and (best is None or length < best[0]):
                best = (length, branch)
        if best is None:
            break
        for n in best[1]:
            for m in adj.pop(n):
                if m in adj:
                    adj[m].discard(n)
    return graph.subgraph(adj.keys())


def find_bifurcations(graph: SkeletonGraph, ostium: int | None = None) -> list[int]:
    """Node ids with three or more centerline neighbors.

    Ordered by arc distance from ``ostium`` when given (unreachable nodes
    last), else by linear index. Ties fall back to linear index.
    """
    junctions = [n for n, nb in enumerate(graph.neighbors) if len(nb) >= 3]
    if ostium is None:
        return sorted(junctions, key=graph.linear_index)
    dist = graph.distances_from(ostium)
    return sorted(junctions, key=lambda n: (dist[n], graph.linear_index(n)))


def locate_ostium(graph: SkeletonGraph, aorta: BinaryMask | None = None) -> int:
    """Endpoint where the vessel leaves the aorta.

    With an aorta mask: the endpoint closest to an aorta voxel center (zero
    when inside the aorta). Without one: the most superior endpoint, then
    the most rightward. Remaining ties go to the smallest linear index.
    """
    ends = graph.endpoints
    if not ends:
        raise ShortCenterlineError("no centerline endpoint: cannot place the ostium")
    world = graph.world(ends)
    lin = [graph.linear_index(n) for n in ends]
    if aorta is not None and aorta.data.any():
        surface = aorta.data & ~ndi.binary_erosion(aorta.data)
        surf_world = np.asarray(aorta.origin) + np.argwhere(surface) * np.asarray(aorta.spacing)
        dists = []
        for n, w in zip(ends, world):
            if aorta.data[graph.ijk(n)]:
                dists.append(0.0)
            else:
                d = surf_world - w
                dists.append(float(np.sqrt(np.min(np.einsum("ij,ij->i", d, d)))))
        return ends[min(range(len(ends)), key=lambda k: (dists[k], lin[k]))]
    return ends[min(range(len(ends)), key=lambda k: (-world[k, 2], -world[k, 0], lin[k]))]


@dataclass(frozen=True, eq=False)
class CenterlinePath:
    """Ordered centerline points with cumulative arc length (mm, from the
    first point) and vessel radius (mm) at each point."""

    points: np.ndarray
    arc_length: np.ndarray
    radius: np.ndarray
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    truncated: bool = False
    start_offset_mm: float = 0.0
    node_ids: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.points)

    @property
    def length_mm(self) -> float:
        return float(self.arc_length[-1]) if len(self.arc_length) else 0.0

    @property
    def world_points(self) -> np.ndarray:
        return np.asarray(self.origin) + self.points * np.asarray(self.spacing)

    @property
    def diameter(self) -> np.ndarray:
        return 2.0 * self.radius

    def to_json_dict(self) -> dict:
        return {
            "n_points": len(self),
            "length_mm": round(self.length_mm, 6),
            "start_offset_mm": round(self.start_offset_mm, 6),
            "truncated": self.truncated,
            "start_ijk": [int(v) for v in self.points[0]] if len(self) else None,
            "end_ijk": [int(v) for v in self.points[-1]] if len(self) else None,
            "mean_radius_mm": round(float(self.radius.mean()), 6) if len(self) else None,
        }


def _greedy_trace(graph, start, blocked, max_mm):
    """Follow unblocked neighbors (smallest id first) for up to ``max_mm``."""
    trace, seen, arc = [start], set(blocked) | {start}, 0.0
    while arc < max_mm:
        nxt = [m for m in graph.neighbors[trace[-1]] if m not in seen]
        if not nxt:
            break
        arc += graph.step_mm(trace[-1], nxt[0])
        trace.append(nxt[0])
        seen.add(nxt[0])
    return trace


def _choose_branch(graph, path, candidates, visited, radius_of, lookahead_mm):
    """Main-vessel policy: larger mean radius over the next ``lookahead_mm``,
    then the smaller turning angle, then the smaller node id."""
    cur = path[-1]
    back = path[max(0, len(path) - 4)]
    w = graph.world([back, cur])
    incoming = w[1] - w[0]
    scored = []
    for c in candidates:
        blocked = visited | (set(candidates) - {c})
        trace = _greedy_trace(graph, c, blocked, lookahead_mm)
        score = float(np.mean([radius_of(n) for n in trace]))
        out = graph.world(trace[-1]) - w[1]
        denom = np.linalg.norm(incoming) * np.linalg.norm(out)
        angle = float(np.arccos(np.clip(np.dot(incoming, out) / denom, -1, 1))) if denom > 0 else 0.0
        scored.append((score, angle, c))
    best = scored[0]
    for s in scored[1:]:
        if s[0] > best[0] + 1e-9 or (abs(s[0] - best[0]) <= 1e-9 and (s[1], s[2]) < (best[1], best[2])):
            best = s
    return best[2]


def trace_branch(
    graph: SkeletonGraph,
    start: int,
    radius_of,
    via: Sequence[int] = (),
    exclude: Iterable[int] = (),
    lookahead_mm: float = 3.0,
) -> list[int]:
    """Walk from ``start`` (forced through ``via``) until the branch ends,
    taking the main-vessel branch at each junction. Nodes in ``exclude`` are
    never entered; side-branch entry nodes are closed once passed."""
    path = [start, *via]
    visited = set(exclude) | set(path)
    while True:
        cands = [m for m in graph.neighbors[path[-1]] if m not in visited]
        if not cands:
            return path
        nxt = cands[0] if len(cands) == 1 else _choose_branch(
            graph, path, cands, visited, radius_of, lookahead_mm)
        visited.update(cands)
        path.append(nxt)


def cumulative_arc(graph: SkeletonGraph, nodes: Sequence[int]) -> np.ndarray:
    steps = [graph.step_mm(a, b) for a, b in zip(nodes, nodes[1:])]
    return np.concatenate([[0.0], np.cumsum(steps)])


def path_from_nodes(
    graph: SkeletonGraph, nodes: Sequence[int], dt: VoxelGrid,
    truncated: bool = False, start_offset_mm: float = 0.0,
) -> CenterlinePath:
    nodes = list(nodes)
    pts = graph.nodes[nodes]
    return CenterlinePath(
        points=pts,
        arc_length=cumulative_arc(graph, nodes),
        radius=np.asarray(dt.data[tuple(pts.T)], dtype=np.float64),
        spacing=graph.spacing,
        origin=graph.origin,
        truncated=truncated,
        start_offset_mm=start_offset_mm,
        node_ids=tuple(nodes),
    )


def walk_segment(
    graph: SkeletonGraph,
    start: int | Sequence[int],
    skip_mm: float,
    length_mm: float,
    dt: VoxelGrid,
    *,
    via: Sequence[int] = (),
    exclude: Iterable[int] = (),
    lookahead_mm: float = 3.0,
) -> CenterlinePath:
    """Centerline points lying between ``skip_mm`` and ``skip_mm + length_mm``
    of arc length from ``start``.

    ``start`` is a node id or a voxel index triple. The path is truncated
    (and flagged) when the branch ends early; a skip longer than the whole
    branch is an error.
    """
    if skip_mm < 0 or length_mm < 0:
        raise ValueError("skip_mm and length_mm must be >= 0")
    if not isinstance(start, (int, np.integer)):
        start = graph.node_id(start)
    elif not 0 <= start < len(graph):
        raise KeyError(f"node {start} not in graph")
    start = int(start)

    radius_at = dt.data
    nodes = trace_branch(
        graph, start, lambda n: float(radius_at[graph.ijk(n)]),
        via=via, exclude=exclude, lookahead_mm=lookahead_mm,
    )
    arc = cumulative_arc(graph, nodes)
    total = float(arc[-1])
    if skip_mm > total + _ARC_TOL_MM:
        raise ShortCenterlineError(
            f"centerline is {total:.2f} mm long, shorter than the {skip_mm:g} mm offset"
        )
    end_mm = skip_mm + length_mm
    keep = np.flatnonzero((arc >= skip_mm - _ARC_TOL_MM) & (arc <= end_mm + _ARC_TOL_MM))
    if len(keep) == 0:
        # the skip lands between two points more than length_mm apart
        keep = np.flatnonzero(arc >= skip_mm - _ARC_TOL_MM)[:1]
    truncated = total < end_mm - _ARC_TOL_MM
    sel = [nodes[k] for k in keep]
    return path_from_nodes(graph, sel, dt, truncated=truncated, start_offset_mm=float(arc[keep[0]]))
