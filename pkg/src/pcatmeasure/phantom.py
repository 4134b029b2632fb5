"""Synthetic CCTA-like volumes with analytically known vessel geometry.

A phantom is a set of polylines (vessel axes) with a lumen of fixed radius,
an adipose shell around it and a uniform background, plus an optional
spherical aorta. Every voxel is classified by its exact distance to the
nearest polyline segment.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .volume_io import BinaryMask, VoxelGrid

Point = tuple[float, float, float]


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    vessels: list[list[Point]]
    lumen_radius_mm: float = 1.5
    shell_mm: float = 3.0
    hu_lumen: float = 400.0
    hu_fat: float = -100.0
    hu_background: float = 50.0
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    aorta_center: Point | None = None
    aorta_radius_mm: float | None = None
    # labels written into the coronary mask, one per vessel; all 1 if empty
    vessel_labels: list[int] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.lumen_radius_mm <= 0:
            raise ValueError("lumen radius must be > 0")
        if self.shell_mm < 0:
            raise ValueError("shell thickness must be >= 0")
        if not -190 <= self.hu_fat <= -30:
            raise ValueError("fat HU must lie in [-190, -30]")
        for name in ("hu_lumen", "hu_background"):
            if -190 <= getattr(self, name) <= -30:
                raise ValueError(f"{name} must lie outside [-190, -30]")
        if (self.aorta_center is None) != (self.aorta_radius_mm is None):
            raise ValueError("aorta needs both center and radius")
        if self.vessel_labels and len(self.vessel_labels) != len(self.vessels):
            raise ValueError("one label per vessel polyline")
        for line in self.vessels:
            if len(line) < 2:
                raise ValueError("a vessel polyline needs at least 2 points")

    @property
    def extent_mm(self) -> np.ndarray:
        return np.asarray(self.origin) + (np.asarray(self.dims) - 1) * np.asarray(self.spacing)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PhantomSpec":
        d = json.loads(text)
        d["dims"] = tuple(d["dims"])
        d["spacing"] = tuple(d["spacing"])
        d["origin"] = tuple(d["origin"])
        d["vessels"] = [[tuple(p) for p in line] for line in d["vessels"]]
        if d.get("aorta_center") is not None:
            d["aorta_center"] = tuple(d["aorta_center"])
        return cls(**d)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "PhantomSpec":
        return cls.from_json(Path(path).read_text())


def _segment_distance(coords, a, b):
    """Distance from points (given as per-axis broadcastable arrays) to segment ab."""
    d = b - a
    dd = float(np.dot(d, d))
    rel = [c - a[k] for k, c in enumerate(coords)]
    if dd == 0:
        return np.sqrt(sum(r * r for r in rel))
    t = np.clip(sum(r * d[k] for k, r in enumerate(rel)) / dd, 0.0, 1.0)
    return np.sqrt(sum((r - t * d[k]) ** 2 for k, r in enumerate(rel)))


def polyline_distance(spec: PhantomSpec, lines: list[list[Point]], reach: float) -> np.ndarray:
    """Exact distance to the nearest segment, computed within ``reach`` mm of
    each segment (inf elsewhere)."""
    sp = np.asarray(spec.spacing)
    org = np.asarray(spec.origin)
    dims = np.asarray(spec.dims)
    out = np.full(spec.dims, np.inf)
    for line in lines:
        for a, b in zip(line, line[1:]):
            a, b = np.asarray(a, float), np.asarray(b, float)
            lo = np.maximum(np.floor((np.minimum(a, b) - reach - org) / sp).astype(int), 0)
            hi = np.minimum(np.ceil((np.maximum(a, b) + reach - org) / sp).astype(int) + 1, dims)
            if np.any(hi <= lo):
                continue
            coords = [
                (org[k] + np.arange(lo[k], hi[k]) * sp[k]).reshape([-1 if j == k else 1 for j in range(3)])
                for k in range(3)
            ]
            box = (slice(lo[0], hi[0]), slice(lo[1], hi[1]), slice(lo[2], hi[2]))
            np.minimum(out[box], _segment_distance(coords, a, b), out=out[box])
    return out


def _check_inside(spec: PhantomSpec) -> None:
    lo, hi = np.asarray(spec.origin), spec.extent_mm
    for line in spec.vessels:
        for p in line:
            if np.any(np.asarray(p) < lo - 1e-9) or np.any(np.asarray(p) > hi + 1e-9):
                raise ValueError(f"vessel point {p} lies outside the grid [{lo}, {hi}]")


def _rasterize(spec: PhantomSpec):
    _check_inside(spec)
    reach = spec.lumen_radius_mm + spec.shell_mm
    image = np.full(spec.dims, spec.hu_background, dtype=np.float32)
    vessel = np.zeros(spec.dims, dtype=bool)
    fat = np.zeros(spec.dims, dtype=bool)
    label_map = np.zeros(spec.dims, dtype=np.uint8)
    for line, label in zip(spec.vessels, spec.vessel_labels or [1] * len(spec.vessels)):
        dist = polyline_distance(spec, [line], reach)
        lumen = dist <= spec.lumen_radius_mm
        vessel |= lumen
        label_map[lumen] = label
        fat |= dist <= reach
    image[fat] = spec.hu_fat
    image[vessel] = spec.hu_lumen

    aorta = np.zeros(spec.dims, dtype=bool)
    if spec.aorta_center is not None:
        coords = [
            (spec.origin[k] + np.arange(spec.dims[k]) * spec.spacing[k] - spec.aorta_center[k])
            .reshape([-1 if j == k else 1 for j in range(3)])
            for k in range(3)
        ]
        aorta = (coords[0] ** 2 + coords[1] ** 2 + coords[2] ** 2) <= spec.aorta_radius_mm**2
        image[aorta] = spec.hu_lumen
        vessel &= ~aorta
        label_map[aorta] = 0
    return image, vessel, aorta, label_map


def render(spec: PhantomSpec) -> tuple[VoxelGrid, BinaryMask, BinaryMask]:
    """Rasterize to (image HU, vessel lumen mask, aorta mask).

    Voxels within the lumen radius of an axis are lumen, within lumen plus
    shell are fat, else background. The aorta sphere overrides with lumen HU
    and is excluded from the vessel mask.
    """
    image, vessel, aorta, _ = _rasterize(spec)
    return (
        VoxelGrid(image, spec.spacing, spec.origin),
        BinaryMask(vessel, spec.spacing, spec.origin),
        BinaryMask(aorta, spec.spacing, spec.origin),
    )


def render_labels(spec: PhantomSpec) -> VoxelGrid:
    """Coronary label map: each polyline's lumen carries its vessel label."""
    return VoxelGrid(_rasterize(spec)[3], spec.spacing, spec.origin)


# ---------------------------------------------------------------- presets


def straight_tube(
    n: int = 256,
    spacing: float = 0.5,
    length_mm: float = 60.0,
    lumen_radius_mm: float = 1.5,
    shell_mm: float = 3.0,
) -> PhantomSpec:
    """Vertical tube through voxel centers; the ostium is its upper end."""
    c = (n // 2) * spacing
    top = c + length_mm / 2
    bottom = top - length_mm
    return PhantomSpec(
        dims=(n, n, n), spacing=(spacing,) * 3,
        vessels=[[(c, c, top), (c, c, bottom)]],
        lumen_radius_mm=lumen_radius_mm, shell_mm=shell_mm,
        meta={"kind": "straight", "ostium": [c, c, top], "length_mm": length_mm},
    )


def _y_lines(top, lm_mm, daughter_mm, angle_deg, azimuth_deg=90.0):
    top = np.asarray(top, float)
    branch = top + np.array([0.0, 0.0, -lm_mm])
    a, phi = math.radians(angle_deg), math.radians(azimuth_deg)
    horiz = np.array([math.cos(phi), math.sin(phi), 0.0])
    d1 = branch + daughter_mm * (math.sin(a) * horiz + np.array([0, 0, -math.cos(a)]))
    d2 = branch + daughter_mm * (-math.sin(a) * horiz + np.array([0, 0, -math.cos(a)]))
    as_pt = lambda v: tuple(float(x) for x in v)  # noqa: E731
    return [[as_pt(top), as_pt(branch), as_pt(d1)], [as_pt(branch), as_pt(d2)]], branch


def y_phantom(
    spacing: float = 0.5,
    lm_mm: float = 10.0,
    daughter_mm: float = 50.0,
    angle_deg: float = 40.0,
    lumen_radius_mm: float = 1.5,
    shell_mm: float = 3.0,
    margin_mm: float = 8.0,
) -> PhantomSpec:
    """Left-main-like trunk running down (-z) that splits into two daughters
    spreading along +y and -y."""
    spread = daughter_mm * math.sin(math.radians(angle_deg))
    drop = lm_mm + daughter_mm * math.cos(math.radians(angle_deg))
    size = np.array([2 * margin_mm, 2 * (spread + margin_mm), drop + 2 * margin_mm])
    dims = tuple(int(math.ceil(s / spacing)) + 1 for s in size)
    # snap the trunk onto voxel centers
    cx = round(margin_mm / spacing) * spacing
    cy = round((spread + margin_mm) / spacing) * spacing
    cz = round((drop + margin_mm) / spacing) * spacing
    lines, branch = _y_lines((cx, cy, cz), lm_mm, daughter_mm, angle_deg)
    return PhantomSpec(
        dims=dims, spacing=(spacing,) * 3, vessels=lines,
        lumen_radius_mm=lumen_radius_mm, shell_mm=shell_mm,
        meta={"kind": "y", "ostium": [cx, cy, cz], "branch_point": [float(v) for v in branch],
              "lm_mm": lm_mm, "daughter_mm": daughter_mm},
    )


def coronary_phantom(
    spacing: float = 0.5,
    lumen_radius_mm: float = 1.5,
    shell_mm: float = 3.0,
    aorta_radius_mm: float = 12.0,
    rca_mm: float = 60.0,
    lm_mm: float = 10.0,
    daughter_mm: float = 50.0,
    merged: bool = False,
) -> PhantomSpec:
    """Aorta sphere with an RCA-like tube leaving its right-anterior side and
    an LCA-like Y leaving its left-posterior side.

    Labels: 1 = RCA, 2 = LCA. With ``merged`` a bridge joins the two trees
    so they form a single connected component.
    """
    R = aorta_radius_mm
    lead = 6.0
    c = np.zeros(3)
    diag = np.array([1.0, 1.0, 0.0]) / math.sqrt(2.0)
    # start inside the aorta so the lumen meets it without a gap
    r0 = c + (R - 0.5) * diag
    r1 = c + (R + lead) * diag
    r2 = r1 + np.array([0.0, 0.0, -(rca_mm - lead)])
    l0 = c - (R - 0.5) * diag
    l1 = c - (R + lead) * diag
    (lca_a, lca_b), branch = _y_lines(l1, lm_mm, daughter_mm, 40.0, azimuth_deg=135.0)
    as_pt = lambda v: tuple(float(x) for x in v)  # noqa: E731
    vessels = [[as_pt(r0), as_pt(r1), as_pt(r2)], [as_pt(l0)] + lca_a, lca_b]
    labels = [1, 2, 2]
    if merged:
        vessels.append([as_pt(r1 + np.array([0.0, 0.0, -20.0])), as_pt(branch)])
        labels.append(1)

    pad = lumen_radius_mm + shell_mm + 4.0
    pts = np.array([p for line in vessels for p in line] + [c - R, c + R])
    lo = np.floor((pts.min(axis=0) - pad) / spacing) * spacing
    hi = pts.max(axis=0) + pad
    dims = tuple(int(v) for v in np.ceil((hi - lo) / spacing).astype(int) + 1)
    return PhantomSpec(
        dims=dims, spacing=(spacing,) * 3, origin=as_pt(lo), vessels=vessels,
        lumen_radius_mm=lumen_radius_mm, shell_mm=shell_mm,
        aorta_center=as_pt(c), aorta_radius_mm=R, vessel_labels=labels,
        meta={"kind": "coronary", "merged": merged, "rca_ostium": list(as_pt(r0)),
              "lca_ostium": list(as_pt(l0)), "branch_point": list(as_pt(branch))},
    )


PRESETS = {"straight": straight_tube, "y": y_phantom, "coronary": coronary_phantom}
