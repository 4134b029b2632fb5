"""Topology-preserving 3D curve thinning.

Border voxels are peeled in six directional sub-iterations per pass, in the
fixed order +z, -z, +y, -y, +x, -x. A sub-iteration first collects its
candidates: voxels whose face neighbor in that direction is background and
that are deletable at that moment. Candidates are then deleted one at a time,
shallowest first (depth = Euclidean distance to the background of the input,
in voxels), ties in x-fastest linear order, each re-tested just before
deletion. Shallow-first order keeps the surviving curve near the medial axis.

A voxel is deleted only if it is a simple point under (26, 6) connectivity
and is not a curve endpoint (one foreground neighbor). While peeling, a voxel
at least as deep as all its remaining neighbors is also kept if its (at most
three) neighbors are mutually adjacent, the tip of a two-voxel-wide ribbon,
or if deleting it would leave a neighbor with a single neighbor, which would
start a spur. A final peel without these tip rules removes the small tufts
they leave behind.

Deleting simple points one at a time never changes the number of objects,
cavities or tunnels, so components are preserved exactly. Passes repeat
until one full pass deletes nothing, which also makes the result a fixpoint.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy import ndimage as ndi

# positions in a 3x3x3 block, index = 9*(di+1) + 3*(dj+1) + (dk+1)
_OFFS = [o for o in itertools.product((-1, 0, 1), repeat=3)]
_CENTER = 13
_POW = np.array([1 << b for b in range(27)], dtype=np.int64).reshape(3, 3, 3)


def _adjacency(max_sq: int, positions: list[int]) -> dict[int, list[int]]:
    pos = set(positions)
    adj = {}
    for a in positions:
        ai = np.array(_OFFS[a])
        adj[a] = [
            b for b in positions
            if b != a and 0 < int(np.sum((np.array(_OFFS[b]) - ai) ** 2)) <= max_sq and b in pos
        ]
    return adj


_N26 = [p for p in range(27) if p != _CENTER]
_N18 = [p for p in _N26 if sum(abs(c) for c in _OFFS[p]) <= 2]
_N6 = [p for p in _N26 if sum(abs(c) for c in _OFFS[p]) == 1]
_ADJ26 = _adjacency(3, _N26)
_ADJ6_IN_18 = _adjacency(1, _N18)

_simple_cache: dict[int, bool] = {}


def _count_components(members: set[int], adj: dict[int, list[int]], seeds) -> int:
    seen: set[int] = set()
    count = 0
    for s in seeds:
        if s in seen or s not in members:
            continue
        count += 1
        stack = [s]
        seen.add(s)
        while stack:
            n = stack.pop()
            for m in adj[n]:
                if m in members and m not in seen:
                    seen.add(m)
                    stack.append(m)
    return count


def is_simple(config: int) -> bool:
    """Simple-point test for a 27-bit neighborhood code (bit 13 = center).

    Simple iff the 26-neighborhood holds exactly one 26-connected foreground
    component and exactly one 6-connected background component (within the
    18-neighborhood) that touches the center through a face.
    """
    config &= ~(1 << _CENTER)
    hit = _simple_cache.get(config)
    if hit is not None:
        return hit
    fg = {p for p in _N26 if config >> p & 1}
    bg = {p for p in _N18 if not config >> p & 1}
    simple = (
        _count_components(fg, _ADJ26, _N26) == 1
        and _count_components(bg, _ADJ6_IN_18, _N6) == 1
    )
    _simple_cache[config] = simple
    return simple


def _neighborhood_code(vol: np.ndarray, i: int, j: int, k: int) -> int:
    return int(np.sum(_POW[vol[i - 1:i + 2, j - 1:j + 2, k - 1:k + 2]]))


_tuft_cache: dict[int, bool] = {}


def _is_tuft_end(config: int) -> bool:
    """At most three foreground neighbors, all mutually 26-adjacent: the tip
    of a line or of a two-voxel-wide ribbon."""
    hit = _tuft_cache.get(config)
    if hit is None:
        fg = [p for p in _N26 if config >> p & 1]
        hit = len(fg) <= 3 and all(b in _ADJ26[a] for a, b in itertools.combinations(fg, 2))
        _tuft_cache[config] = hit
    return hit


def _deletable(vol, counts, depth, i, j, k, protect_tips: bool) -> bool:
    code = _neighborhood_code(vol, i, j, k) & ~(1 << _CENTER)
    if code & (code - 1) == 0:  # zero or one neighbor: isolated voxel or line end
        return False
    block = (slice(i - 1, i + 2), slice(j - 1, j + 2), slice(k - 1, k + 2))
    if protect_tips and depth[i, j, k] >= depth[block][vol[block]].max():
        if _is_tuft_end(code):
            return False
        # a neighbor left with a single neighbor would become a new line end
        if np.any((counts[block] == 2) & vol[block]):
            return False
    return is_simple(code)


_DIRECTIONS = [(0, 0, 1), (0, 0, -1), (0, 1, 0), (0, -1, 0), (1, 0, 0), (-1, 0, 0)]


def _peel(vol: np.ndarray, depth: np.ndarray, protect_tips: bool) -> None:
    shape = vol.shape
    counts = ndi.convolve(vol.astype(np.int16), np.ones((3, 3, 3), np.int16), mode="constant") - vol
    changed = True
    while changed:
        changed = False
        for d in _DIRECTIONS:
            shifted = np.zeros_like(vol)
            src = tuple(slice(max(-o, 0), shape[a] - max(o, 0)) for a, o in enumerate(d))
            dst = tuple(slice(max(o, 0), shape[a] - max(-o, 0)) for a, o in enumerate(d))
            shifted[src] = vol[dst]
            border = np.argwhere(vol & ~shifted)
            if len(border) == 0:
                continue
            order = np.lexsort((border[:, 0], border[:, 1], border[:, 2], depth[tuple(border.T)]))
            candidates = [p for p in border[order].tolist() if _deletable(vol, counts, depth, *p, protect_tips)]
            for i, j, k in candidates:
                if _deletable(vol, counts, depth, i, j, k, protect_tips):
                    vol[i, j, k] = False
                    counts[i - 1:i + 2, j - 1:j + 2, k - 1:k + 2] -= 1
                    counts[i, j, k] += 1
                    changed = True


def thin(mask: np.ndarray) -> np.ndarray:
    """Thin a boolean volume to one-voxel-wide curves (see module docstring)."""
    vol = np.pad(np.asarray(mask, dtype=bool), 1)
    depth = ndi.distance_transform_edt(vol)
    _peel(vol, depth, protect_tips=True)
    _peel(vol, depth, protect_tips=False)
    return vol[1:-1, 1:-1, 1:-1]
