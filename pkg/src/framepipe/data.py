"""Datasets, access patterns, frame indexing and dimension classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    DimOutOfRange,
    MissingDims,
    NdimsMismatch,
    OrdinalOutOfRange,
    OverlappingDims,
    UnknownPattern,
)


class DType(enum.Enum):
    """Element types a container can hold. Values are the on-disk codes."""

    U16 = 1
    F32 = 2
    F64 = 3

    @property
    def byte_size(self) -> int:
        return {DType.U16: 2, DType.F32: 4, DType.F64: 8}[self]

    @property
    def numpy(self) -> np.dtype:
        # little-endian on disk regardless of host
        return np.dtype({DType.U16: "<u2", DType.F32: "<f4", DType.F64: "<f8"}[self])

    @classmethod
    def from_numpy(cls, dtype) -> DType:
        kind = np.dtype(dtype)
        for member in cls:
            if member.numpy == kind.newbyteorder("<"):
                return member
        raise ValueError(f"unsupported dtype {kind}")


@dataclass(frozen=True)
class Pattern:
    """A named split of a dataset's dimensions into core and slice roles.

    ``slice_dims[0]`` is the fastest-changing dimension when frames are
    enumerated.
    """

    name: str
    core_dims: tuple[int, ...]
    slice_dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "core_dims", tuple(int(d) for d in self.core_dims))
        object.__setattr__(self, "slice_dims", tuple(int(d) for d in self.slice_dims))

    @property
    def ndims(self) -> int:
        return len(self.core_dims) + len(self.slice_dims)

    def role(self, dim: int) -> str:
        """Return 'core', 'slice' (first slice dim) or 'other'."""
        if dim in self.core_dims:
            return "core"
        if self.slice_dims and self.slice_dims[0] == dim:
            return "slice"
        return "other"


def check_pattern(ndims: int, pattern: Pattern) -> None:
    dims = list(pattern.core_dims) + list(pattern.slice_dims)
    for d in dims:
        if d < 0 or d >= ndims:
            raise DimOutOfRange(f"{pattern.name}: dimension {d} outside 0..{ndims - 1}")
    if len(set(dims)) != len(dims):
        raise OverlappingDims(f"{pattern.name}: repeated dimension in {dims}")
    if len(dims) != ndims:
        missing = sorted(set(range(ndims)) - set(dims))
        raise MissingDims(f"{pattern.name}: dimensions {missing} not assigned")


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    shape: tuple[int, ...]
    dtype: DType
    axis_labels: tuple[str, ...]
    patterns: Mapping[str, Pattern] = field(default_factory=dict)
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "axis_labels", tuple(self.axis_labels))
        object.__setattr__(self, "patterns", dict(self.patterns))
        object.__setattr__(self, "metadata", dict(self.metadata))
        if not self.name:
            raise ValueError("dataset name must be non-empty")
        if any(s < 1 for s in self.shape):
            raise ValueError(f"{self.name}: extents must be positive, got {self.shape}")
        if len(self.axis_labels) != len(self.shape):
            raise ValueError(
                f"{self.name}: {len(self.axis_labels)} axis labels for {len(self.shape)} dims"
            )
        for key, pattern in self.patterns.items():
            if key != pattern.name:
                raise ValueError(f"pattern table key {key!r} != pattern name {pattern.name!r}")
            check_pattern(self.ndims, pattern)

    @property
    def ndims(self) -> int:
        return len(self.shape)

    @property
    def nbytes(self) -> int:
        return math.prod(self.shape) * self.dtype.byte_size

    def pattern(self, name: str) -> Pattern:
        try:
            return self.patterns[name]
        except KeyError:
            raise UnknownPattern(f"{self.name} has no pattern {name!r}") from None

    def replace(self, **changes) -> DatasetDescriptor:
        values = dict(
            name=self.name,
            shape=self.shape,
            dtype=self.dtype,
            axis_labels=self.axis_labels,
            patterns=self.patterns,
            metadata=self.metadata,
        )
        values.update(changes)
        return DatasetDescriptor(**values)


@dataclass(frozen=True)
class PluginDatasetView:
    """How one plugin accesses one dataset: pattern, frames per call, padding.

    ``padding`` maps dimension index to pad width. Only the first slice
    dimension of the pattern may be padded.
    """

    dataset_name: str
    pattern_name: str
    frames: int = 1
    padding: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "padding", {int(k): int(v) for k, v in dict(self.padding).items() if v})
        if self.frames < 1:
            raise ValueError("frames per call must be >= 1")
        if any(v < 0 for v in self.padding.values()):
            raise ValueError("pad widths must be nonnegative")

    def check(self, descriptor: DatasetDescriptor) -> Pattern:
        pattern = descriptor.pattern(self.pattern_name)
        for dim, width in self.padding.items():
            if dim in pattern.core_dims:
                raise ValueError(f"cannot pad core dimension {dim} of {pattern.name}")
            if not pattern.slice_dims or dim != pattern.slice_dims[0]:
                raise ValueError(f"only the first slice dimension may be padded, got {dim}")
        return pattern

    def pad_width(self, pattern: Pattern) -> int:
        if not pattern.slice_dims:
            return 0
        return self.padding.get(pattern.slice_dims[0], 0)


class DimClass(enum.Enum):
    """Unordered pair of the roles a dimension plays under two patterns."""

    CoreCore = ("core", "core")
    CoreSlice = ("core", "slice")
    CoreOther = ("core", "other")
    SliceSlice = ("slice", "slice")
    SliceOther = ("slice", "other")
    OtherOther = ("other", "other")

    @classmethod
    def from_roles(cls, a: str, b: str) -> DimClass:
        rank = {"core": 0, "slice": 1, "other": 2}
        pair = tuple(sorted((a, b), key=rank.__getitem__))
        return cls(pair)


def validate_pattern(descriptor: DatasetDescriptor, pattern: Pattern) -> None:
    """Raise a PatternError subclass unless ``pattern`` partitions the dims."""
    check_pattern(descriptor.ndims, pattern)


def _slice_extents(shape: Sequence[int], pattern: Pattern) -> list[int]:
    return [shape[d] for d in pattern.slice_dims]


def frame_count(descriptor: DatasetDescriptor, pattern_name: str) -> int:
    pattern = descriptor.pattern(pattern_name)
    return math.prod(_slice_extents(descriptor.shape, pattern))


def frame_coords(descriptor: DatasetDescriptor, pattern_name: str, ordinal: int) -> tuple[int, ...]:
    """Slice-dim indices of frame ``ordinal``, in ``slice_dims`` order."""
    pattern = descriptor.pattern(pattern_name)
    n = frame_count(descriptor, pattern_name)
    if not 0 <= ordinal < n:
        raise OrdinalOutOfRange(f"ordinal {ordinal} outside [0, {n})")
    coords = []
    for extent in _slice_extents(descriptor.shape, pattern):
        ordinal, digit = divmod(ordinal, extent)
        coords.append(digit)
    return tuple(coords)


def frame_coord_table(shape: Sequence[int], pattern: Pattern, ordinals) -> np.ndarray:
    """Vectorised ``frame_coords``: array of shape (len(ordinals), n_slice)."""
    rest = np.asarray(ordinals, dtype=np.int64)
    out = np.empty((rest.size, len(pattern.slice_dims)), dtype=np.int64)
    for k, extent in enumerate(_slice_extents(shape, pattern)):
        rest, out[:, k] = np.divmod(rest, extent)
    return out


def classify_dims(now: Pattern, next: Pattern) -> list[DimClass]:
    if now.ndims != next.ndims:
        raise NdimsMismatch(f"{now.name} has {now.ndims} dims, {next.name} has {next.ndims}")
    return [DimClass.from_roles(now.role(d), next.role(d)) for d in range(now.ndims)]
