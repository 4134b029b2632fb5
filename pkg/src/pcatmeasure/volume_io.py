"""Volume containers and NIfTI-1 I/O.

Arrays are indexed ``data[i, j, k]`` with ``i`` the fastest-varying axis on
disk, i.e. the x-fastest linear order of the NIfTI format. After loading, the
grid axes point Right, Anterior, Superior (RAS+) and the world position of a
voxel is ``origin + ijk * spacing``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import nibabel as nib
import numpy as np

from .errors import GeometryMismatchError, VolumeIOError

# Header floats are stored in float32, so geometry read from two files that
# describe the same grid can disagree in the last few bits.
GEOMETRY_ATOL_MM = 1e-4


def _triple(values: Sequence[float], name: str) -> tuple[float, float, float]:
    out = tuple(float(v) for v in values)
    if len(out) != 3:
        raise ValueError(f"{name} must have 3 components, got {len(out)}")
    return out  # type: ignore[return-value]


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """A 3D scalar field with anisotropic physical spacing (mm)."""

    data: np.ndarray
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ValueError(f"expected 3D data, got shape {data.shape}")
        if min(data.shape) < 1:
            raise ValueError(f"dims must be positive, got {data.shape}")
        spacing = _triple(self.spacing, "spacing")
        if not all(np.isfinite(s) and s > 0 for s in spacing):
            raise ValueError(f"spacing must be strictly positive, got {spacing}")
        data = self._coerce(data)
        if data.flags.writeable:
            data = data.view()
            data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", _triple(self.origin, "origin"))

    @staticmethod
    def _coerce(data: np.ndarray) -> np.ndarray:
        return data

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.data.shape)  # type: ignore[return-value]

    @property
    def voxel_volume_mm3(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz

    def same_geometry(self, other: "VoxelGrid") -> bool:
        return (
            self.dims == other.dims
            and np.allclose(self.spacing, other.spacing, rtol=0, atol=GEOMETRY_ATOL_MM)
            and np.allclose(self.origin, other.origin, rtol=0, atol=GEOMETRY_ATOL_MM)
        )

    def check_geometry(self, other: "VoxelGrid", what: str = "volumes") -> None:
        if not self.same_geometry(other):
            raise GeometryMismatchError(
                f"{what} differ in geometry: dims {self.dims} vs {other.dims}, "
                f"spacing {self.spacing} vs {other.spacing}, "
                f"origin {self.origin} vs {other.origin}"
            )

    def with_data(self, data: np.ndarray) -> "VoxelGrid":
        return VoxelGrid(data, self.spacing, self.origin)

    def as_mask(self, label: int | None = None) -> "BinaryMask":
        """Foreground mask: ``data == label``, or ``data != 0`` when label is None."""
        fg = self.data != 0 if label is None else self.data == label
        return BinaryMask(fg, self.spacing, self.origin)

    def index_to_world(self, ijk: Sequence[int]) -> np.ndarray:
        idx = np.asarray(ijk)
        if idx.shape[-1] != 3:
            raise ValueError("index must have 3 components")
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.dims)):
            raise IndexError(f"index {tuple(idx.tolist())} outside dims {self.dims}")
        return np.asarray(self.origin) + idx * np.asarray(self.spacing)

    def world_to_nearest_index(self, xyz: Sequence[float]) -> tuple[int, int, int]:
        rel = (np.asarray(xyz, dtype=float) - np.asarray(self.origin)) / np.asarray(self.spacing)
        idx = np.rint(rel).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.dims)):
            raise IndexError(f"world point {tuple(xyz)} maps outside the grid")
        return tuple(int(v) for v in idx)  # type: ignore[return-value]

    def linear_index(self, ijk) -> np.ndarray | int:
        """x-fastest linear index, the tie-breaking order used throughout."""
        idx = np.asarray(ijk)
        return np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), self.dims, order="F")


class BinaryMask(VoxelGrid):
    """A VoxelGrid whose data is boolean."""

    @staticmethod
    def _coerce(data: np.ndarray) -> np.ndarray:
        return data if data.dtype == bool else data != 0

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.data))

    def with_data(self, data: np.ndarray) -> "BinaryMask":
        return BinaryMask(data, self.spacing, self.origin)


def _affine(grid: VoxelGrid) -> np.ndarray:
    affine = np.diag([*grid.spacing, 1.0])
    affine[:3, 3] = grid.origin
    return affine


def _from_float32(value: float) -> float:
    """Header geometry is stored as float32; report the shortest decimal that
    rounds to the stored value, so 0.4 written comes back as 0.4."""
    return float(np.format_float_positional(np.float32(value), unique=True, trim="0"))


def load_volume(path: str | Path) -> VoxelGrid:
    """Read a NIfTI-1 volume, apply scl_slope/scl_inter, reorient to RAS+."""
    path = Path(path)
    if not path.is_file():
        raise VolumeIOError(f"no such file: {path}")
    try:
        img = nib.load(str(path))
    except Exception as exc:
        raise VolumeIOError(f"malformed volume {path}: {exc}") from exc
    if not isinstance(img, nib.Nifti1Image):
        raise VolumeIOError(f"malformed volume {path}: not a NIfTI-1 file")

    shape = img.shape
    if len(shape) == 4 and shape[3] == 1:
        img = img.slicer[..., 0]
    elif len(shape) != 3:
        raise VolumeIOError(f"{path}: expected a single-frame 3D volume, got shape {shape}")

    # nibabel quietly replaces zero pixdims with 1 on load; check the raw header
    try:
        with nib.openers.ImageOpener(str(path)) as fh:
            raw = nib.Nifti1Header.from_fileobj(fh, check=False)
    except Exception as exc:
        raise VolumeIOError(f"malformed volume {path}: {exc}") from exc
    zooms = [float(z) for z in raw["pixdim"][1:4]]
    norms = np.linalg.norm(img.affine[:3, :3], axis=0)
    if any(not np.isfinite(z) or z <= 0 for z in [*zooms, *norms]):
        raise VolumeIOError(f"{path}: non-positive voxel spacing {tuple(zooms)}")

    try:
        img = nib.as_closest_canonical(img)
        data = np.asanyarray(img.dataobj)
    except Exception as exc:
        raise VolumeIOError(f"malformed volume {path}: {exc}") from exc

    # Closest-canonical keeps any oblique rotation in the affine; only the
    # axis-aligned part (column norms and translation) is used.
    affine = img.affine
    spacing = [_from_float32(v) for v in np.linalg.norm(affine[:3, :3], axis=0)]
    origin = [_from_float32(v) for v in affine[:3, 3]]
    return VoxelGrid(np.asarray(data), tuple(spacing), tuple(origin))


def load_mask(path: str | Path, label: int | None = None) -> BinaryMask:
    return load_volume(path).as_mask(label)


def save_volume(grid: VoxelGrid, path: str | Path, dtype=None) -> Path:
    """Write ``grid`` as NIfTI-1 (gzip when the name ends in .gz).

    Masks are written as uint8. Other data keep their dtype unless ``dtype``
    is given; no intensity scaling is applied.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.asarray(grid.data)
    if dtype is not None:
        data = data.astype(dtype)
    elif data.dtype == bool:
        data = data.astype(np.uint8)
    img = nib.Nifti1Image(data, _affine(grid))
    img.header.set_xyzt_units("mm")
    img.header.set_slope_inter(1.0, 0.0)
    img.set_qform(_affine(grid), code=1)
    img.set_sform(_affine(grid), code=1)
    try:
        nib.save(img, str(path))
    except Exception as exc:
        raise VolumeIOError(f"cannot write {path}: {exc}") from exc
    return path
