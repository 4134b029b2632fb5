"""Deliberately naive reference implementations used only by the tests.

Nothing here imports production geometry code: distances, arc lengths,
sphere membership and HU classification are recomputed from scratch with
plain loops or full broadcasting. They are slow on purpose.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

# voxels whose center sits exactly on a sphere surface count as inside;
# this slack only absorbs floating-point rounding of that distance
TIE_MM = 1e-9


def exact_sq(offset, spacing) -> Fraction:
    return sum(Fraction(int(d)) ** 2 * Fraction(float(s)) ** 2 for d, s in zip(offset, spacing))


def brute_edt(mask: np.ndarray, spacing) -> np.ndarray:
    """All-pairs minimum distance from each foreground voxel to any background voxel.

    Candidates are screened in floating point, then the minimum is settled
    in exact rational arithmetic and rounded once.
    """
    sp = np.asarray(spacing, dtype=np.float64)
    fg = np.argwhere(mask)
    bg = np.argwhere(~mask)
    out = np.zeros(mask.shape, dtype=np.float64)
    if len(fg) == 0:
        return out
    if len(bg) == 0:
        out[mask] = np.inf
        return out
    bgw = bg * sp
    for p in fg:
        d = bgw - p * sp
        sq = np.sum(d * d, axis=1)
        near = np.flatnonzero(sq <= sq.min() * (1 + 1e-9))
        best = min(exact_sq(bg[n] - p, spacing) for n in near)
        out[tuple(p)] = math.sqrt(float(best))
    return out


def sphere_count(radius_mm: float, spacing, tol: float = TIE_MM) -> int:
    """Number of voxel centers within ``radius_mm`` of a voxel center, by enumeration."""
    n = [int(math.ceil(radius_mm / s)) + 1 for s in spacing]
    count = 0
    for i, j, k in itertools.product(*(range(-m, m + 1) for m in n)):
        d = math.sqrt((i * spacing[0]) ** 2 + (j * spacing[1]) ** 2 + (k * spacing[2]) ** 2)
        if d <= radius_mm + tol:
            count += 1
    return count


def nearest_background_mm(mask: np.ndarray, spacing, p, reach_vox: int = 12) -> float:
    """Distance from voxel ``p`` to the nearest background voxel center, by
    scanning a cube around it (the cube is widened until it finds one)."""
    sp = np.asarray(spacing, dtype=np.float64)
    p = np.asarray(p)
    r = reach_vox
    while True:
        lo = np.maximum(p - r, 0)
        hi = np.minimum(p + r + 1, mask.shape)
        sub = mask[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
        bg = np.argwhere(~sub) + lo
        if len(bg):
            d = (bg - p) * sp
            best = math.sqrt(float(np.min(np.sum(d * d, axis=1))))
            # only trust it when no closer voxel can lie outside the cube
            if best <= r * sp.min() or (lo == 0).all() and (hi == mask.shape).all():
                return best
        r *= 2


def sweep(shape, spacing, points, reach_mm) -> np.ndarray:
    """Voxels whose center lies within ``reach_mm[n]`` of ``points[n]`` for some n.

    Straight O(voxels x points) loop over a box that provably holds every
    sphere (the path bounding box grown by the largest reach).
    """
    out = np.zeros(shape, dtype=bool)
    if len(points) == 0:
        return out
    sp = np.asarray(spacing, dtype=np.float64)
    pts = np.asarray(points)
    reach = np.asarray(reach_mm, dtype=np.float64)
    grow = np.ceil(reach.max() / sp).astype(int) + 1
    lo = np.maximum(pts.min(axis=0) - grow, 0)
    hi = np.minimum(pts.max(axis=0) + grow + 1, shape)
    idx = np.stack(np.meshgrid(*(np.arange(lo[a], hi[a]) for a in range(3)), indexing="ij"), -1)
    w = idx * sp
    inside = np.zeros(idx.shape[:3], dtype=bool)
    for p, r in zip(pts, reach):
        d = w - p * sp
        inside |= np.sqrt(np.sum(d * d, axis=-1)) <= r + TIE_MM
    out[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = inside
    return out


def polyline_distance(shape, spacing, origin, polyline, reach_mm: float) -> np.ndarray:
    """World distance from voxel centers to a polyline, segment by segment.

    Computed inside the polyline's bounding box grown by ``reach_mm``; voxels
    outside it are farther than ``reach_mm`` and get ``inf``.
    """
    sp, org = np.asarray(spacing, float), np.asarray(origin, float)
    pl = np.asarray(polyline, float)
    lo = np.maximum(np.floor((pl.min(axis=0) - reach_mm - org) / sp).astype(int) - 1, 0)
    hi = np.minimum(np.ceil((pl.max(axis=0) + reach_mm - org) / sp).astype(int) + 2, shape)
    idx = np.stack(np.meshgrid(*(np.arange(lo[a], hi[a]) for a in range(3)), indexing="ij"), -1)
    w = org + idx * sp
    best = np.full(idx.shape[:3], np.inf)
    for a, b in zip(pl, pl[1:]):
        ab = b - a
        t = np.clip(np.sum((w - a) * ab, axis=-1) / np.dot(ab, ab), 0.0, 1.0)
        foot = a + t[..., None] * ab
        best = np.minimum(best, np.linalg.norm(w - foot, axis=-1))
    out = np.full(tuple(shape), np.inf)
    out[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = best
    return out


def straight_rpcat_voxels(spec, skeleton: np.ndarray, skip_mm: float, segment_mm: float,
                          window=(-190.0, -30.0), factor: float = 2.0):
    """Fat voxels of the right-coronary protocol on a straight single-tube phantom.

    Takes the centerline voxels as given. Everything after that is
    recomputed: the ostium is the most superior centerline voxel, points
    are ordered along the tube axis, arc length is re-summed, radii come
    from ``nearest_background_mm`` on an independently rasterized lumen,
    and HU labels come from an independent distance-to-axis classification.
    Returns (fat voxel mask, ordered points kept, their radii).
    """
    if spec.meta.get("kind") != "straight":
        raise ValueError("unsupported phantom shape: only straight tubes")
    line = spec.vessels[0]
    dist = polyline_distance(spec.dims, spec.spacing, spec.origin, line,
                             spec.lumen_radius_mm + spec.shell_mm + 1.0)
    lumen = dist <= spec.lumen_radius_mm
    fat = (dist > spec.lumen_radius_mm) & (dist <= spec.lumen_radius_mm + spec.shell_mm)
    hu = np.where(lumen, spec.hu_lumen, np.where(fat, spec.hu_fat, spec.hu_background))

    pts = np.argwhere(skeleton)
    w = np.asarray(spec.origin) + pts * np.asarray(spec.spacing)
    top = max(line, key=lambda q: q[2])
    bottom = min(line, key=lambda q: q[2])
    axis = np.asarray(bottom, float) - np.asarray(top, float)
    order = np.argsort(w @ axis, kind="stable")
    pts, w = pts[order], w[order]

    arc = [0.0]
    for a, b in zip(w, w[1:]):
        arc.append(arc[-1] + math.sqrt(float(np.sum((b - a) ** 2))))
    keep = [n for n, s in enumerate(arc) if skip_mm - TIE_MM <= s <= skip_mm + segment_mm + TIE_MM]
    kept = pts[keep]
    radii = np.array([nearest_background_mm(lumen, spec.spacing, p) for p in kept])
    region = sweep(spec.dims, spec.spacing, kept, factor * radii)
    in_window = (hu >= window[0]) & (hu <= window[1])
    return region & in_window, kept, radii


def _segment_dist(w, a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    ab = b - a
    t = np.clip((w - a) @ ab / np.dot(ab, ab), 0.0, 1.0)
    return np.linalg.norm(w - (a + t[:, None] * ab), axis=1)


def y_lpcat_voxels(spec, skeleton: np.ndarray, segment_mm: float, window=(-190.0, -30.0),
                   factor: float = 2.0):
    """Fat voxels of the left-coronary protocol on a Y phantom.

    Each centerline voxel is assigned to the nearest analytic segment
    (trunk or one of the two daughters); the junction voxel ends the trunk.
    The trunk is kept whole; each daughter is ordered outward and cut at
    ``segment_mm`` of arc measured from the junction. Radii, HU labels and the sweep are computed
    as in :func:`straight_rpcat_voxels`.
    Returns (fat voxel mask, {name: kept points}).
    """
    if spec.meta.get("kind") != "y":
        raise ValueError("unsupported phantom shape: only Y phantoms")
    (top, branch, d1), (_, d2) = spec.vessels
    dist = polyline_distance(spec.dims, spec.spacing, spec.origin, [top, branch, d1],
                             spec.lumen_radius_mm + spec.shell_mm + 1.0)
    dist = np.minimum(dist, polyline_distance(spec.dims, spec.spacing, spec.origin, [branch, d2],
                                              spec.lumen_radius_mm + spec.shell_mm + 1.0))
    lumen = dist <= spec.lumen_radius_mm
    fat = (dist > spec.lumen_radius_mm) & (dist <= spec.lumen_radius_mm + spec.shell_mm)
    hu = np.where(lumen, spec.hu_lumen, np.where(fat, spec.hu_fat, spec.hu_background))

    pts = np.argwhere(skeleton)
    w = np.asarray(spec.origin) + pts * np.asarray(spec.spacing)
    segs = [(top, branch), (branch, d1), (branch, d2)]
    owner = np.argmin(np.stack([_segment_dist(w, a, b) for a, b in segs]), axis=0)

    # the junction touches voxels of all three arms; the closest such voxel
    # to the analytic branch point joins the trunk as its last voxel
    where = {tuple(p): n for n, p in enumerate(pts)}
    touching = []
    for n, p in enumerate(pts):
        arms = set()
        for off in itertools.product((-1, 0, 1), repeat=3):
            m = where.get(tuple(p + off))
            if m is not None and m != n:
                arms.add(int(owner[m]))
        if arms == {0, 1, 2}:
            touching.append(n)
    junction = min(touching, key=lambda n: float(np.linalg.norm(w[n] - np.asarray(branch))))
    owner[junction] = 0

    def ordered(k):
        a, b = (np.asarray(v, float) for v in segs[k])
        sel = np.flatnonzero(owner == k)
        return sel[np.argsort(w[sel] @ (b - a), kind="stable")]

    lm = ordered(0)
    assert lm[-1] == junction
    kept = {"LM": pts[lm]}
    for name, k in (("D1", 1), ("D2", 2)):
        idx = ordered(k)
        prev, arc, keep = w[lm[-1]], 0.0, []
        for n in idx:
            arc += math.sqrt(float(np.sum((w[n] - prev) ** 2)))
            prev = w[n]
            if arc > segment_mm + TIE_MM:
                break
            keep.append(n)
        kept[name] = pts[keep]
    region = np.zeros(spec.dims, dtype=bool)
    for p in kept.values():
        radii = np.array([nearest_background_mm(lumen, spec.spacing, q) for q in p])
        region |= sweep(spec.dims, spec.spacing, p, factor * radii)
    in_window = (hu >= window[0]) & (hu <= window[1])
    return region & in_window, kept


def expected_pcat_volume(spec, skeleton: np.ndarray, skip_mm: float = 10.0, segment_mm: float = 40.0,
                         window=(-190.0, -30.0)) -> float:
    """Oracle fat volume (ml): the right-coronary protocol on a straight
    phantom, the left-coronary protocol on a Y phantom."""
    kind = spec.meta.get("kind")
    if kind == "straight":
        fat, _, _ = straight_rpcat_voxels(spec, skeleton, skip_mm, segment_mm, window)
    elif kind == "y":
        fat, _ = y_lpcat_voxels(spec, skeleton, segment_mm, window)
    else:
        raise ValueError(f"unsupported phantom shape: {kind!r}")
    voxel_mm3 = spec.spacing[0] * spec.spacing[1] * spec.spacing[2]
    return int(fat.sum()) * voxel_mm3 / 1000.0
