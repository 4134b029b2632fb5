"""Pericoronary fat measurement around the right and left coronary arteries.

RPCAT: the right coronary centerline is walked from the ostium, the first
``skip_mm`` are discarded and the next ``segment_mm`` kept. LPCAT: the left
main runs from the ostium to the first bifurcation and is kept whole, plus
``segment_mm`` along each of the two widest daughter branches. In both cases
a sphere whose radius equals the local vessel diameter is placed on every
centerline point, and the union of spheres is intersected with the fat HU
window.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import centerline as cl
from .errors import ConfigError, NoBifurcationError, ShortCenterlineError, SplitFailedError
from .morphology import connected_components, distance_transform, skeletonize
from .volume_io import BinaryMask, VoxelGrid

log = logging.getLogger(__name__)

# Sphere inclusion slack, absorbs rounding in the distance computation.
INCLUSION_TOL_MM = 1e-9

REGION_MODES = ("sphere", "annulus")
LPCAT_BUDGETS = ("per-branch", "combined")


@dataclass(frozen=True)
class HuWindow:
    """Closed HU interval ``[lo, hi]`` defining adipose tissue."""

    lo: float = -190.0
    hi: float = -30.0

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ConfigError(f"HU window needs lo < hi, got [{self.lo}, {self.hi}]")

    def contains(self, values: np.ndarray) -> np.ndarray:
        return (values >= self.lo) & (values <= self.hi)

    def bin_edges(self, width: float = 5.0) -> np.ndarray:
        n = int(np.ceil((self.hi - self.lo) / width - 1e-9))
        edges = self.lo + width * np.arange(n + 1, dtype=np.float64)
        edges[-1] = self.hi
        return edges


@dataclass(frozen=True)
class ProtocolParams:
    skip_mm: float = 10.0
    segment_mm: float = 40.0
    window: HuWindow = field(default_factory=HuWindow)
    spur_mm: float = 3.0
    min_component_voxels: int = 100
    region_mode: str = "sphere"
    annulus_mm: float = 5.0
    lm_search_mm: float = 40.0
    lpcat_budget: str = "per-branch"
    lookahead_mm: float = 3.0
    histogram_bin_hu: float = 5.0

    def __post_init__(self) -> None:
        for name in ("skip_mm", "segment_mm", "spur_mm", "annulus_mm", "lm_search_mm", "lookahead_mm"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.histogram_bin_hu <= 0:
            raise ConfigError("histogram_bin_hu must be > 0")
        if self.min_component_voxels < 1:
            raise ConfigError("min_component_voxels must be >= 1")
        if self.region_mode not in REGION_MODES:
            raise ConfigError(f"region_mode must be one of {REGION_MODES}")
        if self.lpcat_budget not in LPCAT_BUDGETS:
            raise ConfigError(f"lpcat_budget must be one of {LPCAT_BUDGETS}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = [self.window.lo, self.window.hi]
        return d


@dataclass(frozen=True, eq=False)
class PcatRegion:
    mask: BinaryMask
    paths: dict[str, cl.CenterlinePath]
    territory: str
    landmarks: dict = field(default_factory=dict)

    @property
    def truncated(self) -> bool:
        return any(p.truncated for p in self.paths.values())

    def union(self, other: "PcatRegion", territory: str | None = None) -> "PcatRegion":
        self.mask.check_geometry(other.mask, "regions")
        return PcatRegion(
            self.mask.with_data(self.mask.data | other.mask.data),
            {**self.paths, **other.paths},
            territory or self.territory,
            {**self.landmarks, **other.landmarks},
        )


@dataclass(frozen=True, eq=False)
class PcatMeasurement:
    territory: str
    mean_attenuation: float | None
    volume_ml: float
    voxel_count: int
    histogram: np.ndarray
    bin_edges: np.ndarray
    voxel_volume_mm3: float
    truncated: bool = False
    region_voxels: int = 0
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "territory": self.territory,
            "mean_attenuation_hu": self.mean_attenuation,
            "volume_ml": self.volume_ml,
            "voxel_count": self.voxel_count,
            "region_voxels": self.region_voxels,
            "voxel_volume_mm3": self.voxel_volume_mm3,
            "truncated": self.truncated,
            "histogram": {
                "bin_edges_hu": [float(e) for e in self.bin_edges],
                "counts": [int(c) for c in self.histogram],
            },
            "details": self.details,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PcatMeasurement":
        return cls(
            territory=d["territory"],
            mean_attenuation=d["mean_attenuation_hu"],
            volume_ml=d["volume_ml"],
            voxel_count=d["voxel_count"],
            histogram=np.asarray(d["histogram"]["counts"], dtype=np.int64),
            bin_edges=np.asarray(d["histogram"]["bin_edges_hu"], dtype=np.float64),
            voxel_volume_mm3=d["voxel_volume_mm3"],
            truncated=d.get("truncated", False),
            region_voxels=d.get("region_voxels", 0),
            details=d.get("details", {}),
        )


def _sweep_radii(path: cl.CenterlinePath, mode: str, annulus_mm: float) -> np.ndarray:
    if mode == "sphere":
        return 2.0 * path.radius
    if mode == "annulus":
        return path.radius + annulus_mm
    raise ConfigError(f"unknown region mode {mode!r}")


def sweep_region(
    path: cl.CenterlinePath,
    vessel_mask: BinaryMask,
    mode: str = "sphere",
    annulus_mm: float = 5.0,
    territory: str = "RCA",
) -> PcatRegion:
    """Union of balls around the path points.

    In ``sphere`` mode each ball's radius is the local vessel diameter
    (twice the distance-transform radius); in ``annulus`` mode it reaches
    ``annulus_mm`` beyond the vessel wall. Vessel voxels stay in the region;
    the HU window drops contrast-filled lumen later.
    """
    out = np.zeros(vessel_mask.dims, dtype=bool)
    dims = np.asarray(vessel_mask.dims)
    sp = np.asarray(vessel_mask.spacing)
    for p, reach in zip(path.points, _sweep_radii(path, mode, annulus_mm)):
        reach = float(reach) + INCLUSION_TOL_MM
        half = np.floor(reach / sp).astype(np.int64)
        lo = np.maximum(p - half, 0)
        hi = np.minimum(p + half + 1, dims)
        dx, dy, dz = (((np.arange(lo[a], hi[a]) - p[a]) * sp[a]) ** 2 for a in range(3))
        d2 = dx[:, None, None] + dy[None, :, None] + dz[None, None, :]
        out[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] |= np.sqrt(d2) <= reach
    return PcatRegion(vessel_mask.with_data(out), {territory: path}, territory)


def measure(
    region: PcatRegion, image: VoxelGrid, window: HuWindow = HuWindow(), bin_hu: float = 5.0
) -> PcatMeasurement:
    """Mean HU and volume of the region voxels inside the HU window."""
    image.check_geometry(region.mask, "image and region")
    values = np.asarray(image.data[region.mask.data], dtype=np.float64)
    fat = values[window.contains(values)]
    count = int(fat.size)
    edges = window.bin_edges(bin_hu)
    hist, _ = np.histogram(fat, bins=edges)
    return PcatMeasurement(
        territory=region.territory,
        mean_attenuation=float(np.mean(fat)) if count else None,
        volume_ml=count * image.voxel_volume_mm3 / 1000.0,
        voxel_count=count,
        histogram=hist.astype(np.int64),
        bin_edges=edges,
        voxel_volume_mm3=image.voxel_volume_mm3,
        truncated=region.truncated,
        region_voxels=int(np.count_nonzero(region.mask.data)),
        details={
            "paths": {k: p.to_json_dict() for k, p in sorted(region.paths.items())},
            "landmarks": region.landmarks,
        },
    )


@dataclass(frozen=True, eq=False)
class Centerline:
    """Everything derived from one artery mask before region building."""

    skeleton: BinaryMask
    graph: cl.SkeletonGraph
    ostium: int
    dt: VoxelGrid


def extract_centerline(
    vessel_mask: BinaryMask, aorta_mask: BinaryMask | None, params: ProtocolParams
) -> Centerline:
    """Thin, graph, keep the largest piece, prune spurs, place the ostium."""
    if not vessel_mask.data.any():
        raise ShortCenterlineError("vessel mask is empty")
    if aorta_mask is not None:
        vessel_mask.check_geometry(aorta_mask, "vessel and aorta masks")
    skel = skeletonize(vessel_mask)
    graph = cl.build_graph(skel)
    comps = graph.components()
    if len(comps) > 1:
        log.debug("keeping largest of %d skeleton pieces", len(comps))
        graph = graph.subgraph(comps[0])
    graph = cl.prune_spurs(graph, params.spur_mm)
    ostium = cl.locate_ostium(graph, aorta_mask)
    return Centerline(skel, graph, ostium, distance_transform(vessel_mask))


def _landmark(c: Centerline, node: int) -> dict:
    return {
        "ijk": list(c.graph.ijk(node)),
        "world_mm": [round(float(v), 6) for v in c.graph.world(node)],
    }


def rpcat_region(
    rca_mask: BinaryMask,
    aorta_mask: BinaryMask | None = None,
    params: ProtocolParams = ProtocolParams(),
    centerline: Centerline | None = None,
) -> PcatRegion:
    c = centerline or extract_centerline(rca_mask, aorta_mask, params)
    path = cl.walk_segment(
        c.graph, c.ostium, params.skip_mm, params.segment_mm, c.dt,
        lookahead_mm=params.lookahead_mm,
    )
    region = sweep_region(path, rca_mask, params.region_mode, params.annulus_mm, "RCA")
    return PcatRegion(region.mask, region.paths, "RCA", {"ostium": _landmark(c, c.ostium)})


def measure_rpcat(
    image: VoxelGrid,
    rca_mask: BinaryMask,
    aorta_mask: BinaryMask | None = None,
    params: ProtocolParams = ProtocolParams(),
) -> PcatMeasurement:
    image.check_geometry(rca_mask, "image and RCA mask")
    region = rpcat_region(rca_mask, aorta_mask, params)
    return measure(region, image, params.window, params.histogram_bin_hu)


def _cluster(graph: cl.SkeletonGraph, seed: int) -> set[int]:
    """Junction nodes (degree >= 3) connected to ``seed``."""
    deg = graph.degrees
    cluster, stack = {seed}, [seed]
    while stack:
        for m in graph.neighbors[stack.pop()]:
            if deg[m] >= 3 and m not in cluster:
                cluster.add(m)
                stack.append(m)
    return cluster


def _path_within(graph: cl.SkeletonGraph, nodes: set[int], a: int, b: int) -> list[int]:
    """Fewest-hop path from a to b through ``nodes`` (a excluded, b included)."""
    prev = {a: None}
    queue = [a]
    for n in queue:
        if n == b:
            break
        for m in graph.neighbors[n]:
            if m in nodes and m not in prev:
                prev[m] = n
                queue.append(m)
    out = []
    n = b
    while n != a:
        out.append(n)
        n = prev[n]
    return out[::-1]


def daughter_branches(c: Centerline, bifurcation: int, lm_nodes: Sequence[int]) -> list[tuple[list[int], set[int]]]:
    """Branches leaving a junction, as (forced prefix from the junction, entry nodes).

    Junction voxels that touch each other form one bifurcation; exits whose
    first voxels touch are one branch.
    """
    g = c.graph
    cluster = _cluster(g, bifurcation)
    lm = set(lm_nodes)
    entries: dict[int, int] = {}
    for u in sorted(cluster):
        for v in g.neighbors[u]:
            if v not in cluster and v not in lm and v not in entries:
                entries[v] = u

    groups: list[set[int]] = []
    for v in sorted(entries):
        touching = [grp for grp in groups if any(w in g.neighbors[v] for w in grp)]
        merged = {v}.union(*touching) if touching else {v}
        groups = [grp for grp in groups if grp not in touching] + [merged]

    out = []
    for grp in sorted(groups, key=min):
        v = min(grp)
        prefix = _path_within(g, cluster, bifurcation, entries[v]) + [v]
        out.append((prefix, grp))
    return out


def lpcat_region(
    lca_mask: BinaryMask,
    aorta_mask: BinaryMask | None = None,
    params: ProtocolParams = ProtocolParams(),
    centerline: Centerline | None = None,
) -> PcatRegion:
    c = centerline or extract_centerline(lca_mask, aorta_mask, params)
    g = c.graph
    dist = g.distances_from(c.ostium)
    candidates = [b for b in cl.find_bifurcations(g, c.ostium) if dist[b] <= params.lm_search_mm]
    if not candidates:
        raise NoBifurcationError(
            f"LM bifurcation not detected within {params.lm_search_mm:g} mm of the ostium"
        )
    bif = candidates[0]
    lm_nodes = g.shortest_path(c.ostium, bif)
    lm_path = cl.path_from_nodes(g, lm_nodes, c.dt)

    branches = daughter_branches(c, bif, lm_nodes)
    if len(branches) < 2:
        raise NoBifurcationError("LM bifurcation has fewer than two daughter branches")

    radius_at = c.dt.data
    blocked_base = set(lm_nodes) | _cluster(g, bif)
    scored = []
    for prefix, entry in branches:
        others = set().union(*(e for _, e in branches if e is not entry))
        exclude = (blocked_base | others) - {bif} - set(prefix)
        nodes = cl.trace_branch(
            g, bif, lambda n: float(radius_at[g.ijk(n)]),
            via=prefix, exclude=exclude, lookahead_mm=params.lookahead_mm,
        )
        arc = cl.cumulative_arc(g, nodes)
        head = [n for n, a in zip(nodes[1:], arc[1:]) if a <= params.lookahead_mm] or nodes[1:2]
        score = float(np.mean([radius_at[g.ijk(n)] for n in head]))
        scored.append((score, prefix, exclude))
    scored.sort(key=lambda s: (-s[0], s[1][-1]))

    budget = params.segment_mm if params.lpcat_budget == "per-branch" else params.segment_mm / 2.0
    daughters = []
    for _, prefix, exclude in scored[:2]:
        p = cl.walk_segment(
            g, bif, 0.0, budget, c.dt, via=prefix, exclude=exclude, lookahead_mm=params.lookahead_mm,
        )
        daughters.append(p)
    # anterior-running daughter is reported as LAD; a naming convention only
    daughters.sort(key=lambda p: -p.world_points[-1][1])
    named = {"LM": lm_path, "LAD": daughters[0], "LCX": daughters[1]}

    mask = np.zeros(lca_mask.dims, dtype=bool)
    for name, path in named.items():
        part = sweep_region(path, lca_mask, params.region_mode, params.annulus_mm, name)
        mask |= part.mask.data
    landmarks = {"ostium": _landmark(c, c.ostium), "bifurcation": _landmark(c, bif),
                 "lm_length_mm": round(lm_path.length_mm, 6), "lpcat_budget": params.lpcat_budget}
    return PcatRegion(lca_mask.with_data(mask), named, "LCA", landmarks)


def measure_lpcat(
    image: VoxelGrid,
    lca_mask: BinaryMask,
    aorta_mask: BinaryMask | None = None,
    params: ProtocolParams = ProtocolParams(),
) -> PcatMeasurement:
    image.check_geometry(lca_mask, "image and LCA mask")
    region = lpcat_region(lca_mask, aorta_mask, params)
    return measure(region, image, params.window, params.histogram_bin_hu)


def _component_ostium(points: np.ndarray, mask: BinaryMask, aorta_tree: cKDTree | None) -> np.ndarray:
    world = np.asarray(mask.origin) + points * np.asarray(mask.spacing)
    if aorta_tree is not None:
        d, _ = aorta_tree.query(world)
        return world[int(np.argmin(d))]
    # argwhere is C-ordered; the lexsort below gives max z, then max x, then
    # smallest x-fastest linear index
    lin = np.ravel_multi_index(tuple(points.T), mask.dims, order="F")
    k = np.lexsort((lin, -world[:, 0], -world[:, 2]))[0]
    return world[k]


def split_arteries(
    coronary_mask: BinaryMask,
    aorta_mask: BinaryMask | None = None,
    min_component_voxels: int = 100,
    rca_seed: Sequence[float] | None = None,
) -> tuple[BinaryMask, BinaryMask]:
    """Separate a binary coronary tree into (RCA, LCA).

    The two largest 26-connected components of at least
    ``min_component_voxels`` voxels are kept. The one whose ostium lies
    further right and anterior is the RCA, unless ``rca_seed`` (world mm)
    is given, in which case the component nearest the seed is the RCA.
    """
    if not coronary_mask.data.any():
        raise SplitFailedError("component split failed: coronary mask is empty")
    if aorta_mask is not None:
        coronary_mask.check_geometry(aorta_mask, "coronary and aorta masks")
    lab = connected_components(coronary_mask, 26)
    large = [label for label, size in lab.component_sizes if size >= min_component_voxels]
    if len(large) < 2:
        raise SplitFailedError(
            f"component split failed: {len(large)} component(s) of >= {min_component_voxels} voxels"
        )
    if len(large) > 2:
        log.warning("%d large coronary components; keeping the two largest", len(large))
    a, b = large[:2]
    pts = {k: np.argwhere(lab.labels.data == k) for k in (a, b)}

    if rca_seed is not None:
        seed = np.asarray(rca_seed, dtype=float)
        near = {}
        for k, p in pts.items():
            w = np.asarray(coronary_mask.origin) + p * np.asarray(coronary_mask.spacing)
            near[k] = float(np.min(np.linalg.norm(w - seed, axis=1)))
        rca = a if near[a] <= near[b] else b
    else:
        tree = ref = None
        if aorta_mask is not None and aorta_mask.data.any():
            apts = np.argwhere(aorta_mask.data)
            aw = np.asarray(aorta_mask.origin) + apts * np.asarray(aorta_mask.spacing)
            tree, ref = cKDTree(aw), aw.mean(axis=0)
        ost = {k: _component_ostium(p, coronary_mask, tree) for k, p in pts.items()}
        if ref is None:
            ref = (ost[a] + ost[b]) / 2.0
        right_anterior = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
        score = {k: float(np.dot(ost[k] - ref, right_anterior)) for k in (a, b)}
        rca = a if score[a] >= score[b] else b
    lca = b if rca == a else a
    return lab.mask(rca), lab.mask(lca)
