"""Chunked on-disk container with pattern-aligned frame I/O, and run manifests.

File layout (all integers little-endian)::

    header      magic "SAVUCNT1", u32 version, u8 dtype code, u8 ndims,
                u64 shape[ndims], u64 chunk_shape[ndims],
                u16-prefixed UTF-8 dataset name,
                u8 label count, u16-prefixed UTF-8 labels,
                u8 pattern count, each {u16-prefixed name,
                u8 n_core, u8 core dims..., u8 n_slice, u8 slice dims...}
    index       u64 per chunk, row-major over the chunk grid, 0 = unwritten
    payload     one full-size chunk per grid slot, row-major within the chunk

Chunk ``k`` always lives at ``payload_start + k * chunk_nbytes``; edge chunks
are zero-padded to full size.
"""

from __future__ import annotations

import io
import itertools
import json
import math
import os
import struct
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import DatasetDescriptor, DType, Pattern, frame_coord_table
from .errors import (
    BadMagic,
    ContainerFormatError,
    InvalidChunkShape,
    IoFailure,
    OrdinalOutOfRange,
    ShapeMismatch,
    UnsupportedVersion,
)

MAGIC = b"SAVUCNT1"
VERSION = 1
MAX_NDIMS = 8


@dataclass(frozen=True)
class ContainerHeader:
    descriptor: DatasetDescriptor
    chunk_shape: tuple[int, ...]
    version: int = VERSION

    @property
    def grid(self) -> tuple[int, ...]:
        return tuple(-(-s // c) for s, c in zip(self.descriptor.shape, self.chunk_shape))

    @property
    def n_chunks(self) -> int:
        return math.prod(self.grid)

    @property
    def chunk_nbytes(self) -> int:
        return math.prod(self.chunk_shape) * self.descriptor.dtype.byte_size

    def encode(self) -> bytes:
        d = self.descriptor
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(struct.pack("<IBB", self.version, d.dtype.value, d.ndims))
        buf.write(struct.pack(f"<{d.ndims}Q", *d.shape))
        buf.write(struct.pack(f"<{d.ndims}Q", *self.chunk_shape))
        _put_str(buf, d.name)
        buf.write(struct.pack("<B", len(d.axis_labels)))
        for label in d.axis_labels:
            _put_str(buf, label)
        buf.write(struct.pack("<B", len(d.patterns)))
        for p in d.patterns.values():
            _put_str(buf, p.name)
            buf.write(struct.pack(f"<B{len(p.core_dims)}B", len(p.core_dims), *p.core_dims))
            buf.write(struct.pack(f"<B{len(p.slice_dims)}B", len(p.slice_dims), *p.slice_dims))
        return buf.getvalue()

    @classmethod
    def decode(cls, stream) -> ContainerHeader:
        magic = stream.read(len(MAGIC))
        if magic != MAGIC:
            raise BadMagic(f"not a container (magic {magic!r})")
        raw = stream.read(4)
        if len(raw) < 4:
            raise UnsupportedVersion("header truncated before version field")
        (version,) = struct.unpack("<I", raw)
        if version != VERSION:
            raise UnsupportedVersion(f"container version {version}, expected {VERSION}")
        try:
            code, ndims = _take(stream, "<BB")
            if ndims > MAX_NDIMS:
                raise ContainerFormatError(f"ndims {ndims} exceeds {MAX_NDIMS}")
            shape = _take(stream, f"<{ndims}Q")
            chunks = _take(stream, f"<{ndims}Q")
            name = _get_str(stream)
            (n_labels,) = _take(stream, "<B")
            labels = [_get_str(stream) for _ in range(n_labels)]
            (n_patterns,) = _take(stream, "<B")
            patterns = {}
            for _ in range(n_patterns):
                pname = _get_str(stream)
                (nc,) = _take(stream, "<B")
                core = _take(stream, f"<{nc}B")
                (ns,) = _take(stream, "<B")
                sl = _take(stream, f"<{ns}B")
                patterns[pname] = Pattern(pname, core, sl)
            descriptor = DatasetDescriptor(name, shape, DType(code), labels, patterns)
        except (struct.error, ValueError) as exc:
            raise ContainerFormatError(f"corrupt header: {exc}") from exc
        return cls(descriptor, tuple(chunks), version)


def _put_str(buf, text: str) -> None:
    raw = text.encode("utf-8")
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)


def _take(stream, fmt: str) -> tuple:
    size = struct.calcsize(fmt)
    raw = stream.read(size)
    if len(raw) != size:
        raise struct.error("header truncated")
    return struct.unpack(fmt, raw)


def _get_str(stream) -> str:
    (n,) = _take(stream, "<H")
    raw = stream.read(n)
    if len(raw) != n:
        raise struct.error("header truncated")
    return raw.decode("utf-8")


def check_chunk_shape(shape: Sequence[int], chunk_shape: Sequence[int]) -> tuple[int, ...]:
    chunk_shape = tuple(int(c) for c in chunk_shape)
    if len(chunk_shape) != len(shape):
        raise InvalidChunkShape(f"chunk rank {len(chunk_shape)} != data rank {len(shape)}")
    if len(shape) > MAX_NDIMS:
        raise InvalidChunkShape(f"at most {MAX_NDIMS} dimensions supported")
    for c, s in zip(chunk_shape, shape):
        if not 1 <= c <= s:
            raise InvalidChunkShape(f"chunk shape {chunk_shape} outside [1, {tuple(shape)}]")
    return chunk_shape


class StorageHandle:
    """An open container. Safe for concurrent use from several threads."""

    def __init__(self, path, header: ContainerHeader, writable: bool, fd: int):
        self.path = Path(path)
        self.header = header
        self.writable = writable
        self._fd = fd
        self._index_start = len(header.encode())
        self._payload_start = self._index_start + 8 * header.n_chunks
        raw = os.pread(fd, 8 * header.n_chunks, self._index_start)
        if len(raw) != 8 * header.n_chunks:
            raise ContainerFormatError(f"{path}: chunk index truncated")
        self._index = list(struct.unpack(f"<{header.n_chunks}Q", raw))
        self._counter_lock = threading.Lock()
        self._chunk_locks = [threading.Lock() for _ in range(header.n_chunks)]
        self.chunks_read = 0
        self.chunks_written = 0

    @property
    def descriptor(self) -> DatasetDescriptor:
        return self.header.descriptor

    @property
    def closed(self) -> bool:
        return self._fd < 0

    def close(self) -> None:
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __repr__(self):
        return f"StorageHandle({str(self.path)!r}, {self.descriptor.name!r}, chunks={self.header.chunk_shape})"

    def _count(self, read: int = 0, written: int = 0) -> None:
        with self._counter_lock:
            self.chunks_read += read
            self.chunks_written += written

    def _slot(self, key: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(key), self.header.grid))

    def _load_chunk(self, slot: int) -> np.ndarray:
        dtype = self.descriptor.dtype.numpy
        offset = self._index[slot]
        if offset == 0:
            return np.zeros(self.header.chunk_shape, dtype=dtype)
        raw = os.pread(self._fd, self.header.chunk_nbytes, offset)
        if len(raw) != self.header.chunk_nbytes:
            raise IoFailure(f"{self.path}: short read of chunk {slot}")
        return np.frombuffer(raw, dtype=dtype).reshape(self.header.chunk_shape).copy()

    def _store_chunk(self, slot: int, chunk: np.ndarray) -> None:
        offset = self._payload_start + slot * self.header.chunk_nbytes
        data = np.ascontiguousarray(chunk, dtype=self.descriptor.dtype.numpy).tobytes()
        if os.pwrite(self._fd, data, offset) != len(data):
            raise IoFailure(f"{self.path}: short write of chunk {slot}")
        if self._index[slot] == 0:
            self._index[slot] = offset
            os.pwrite(self._fd, struct.pack("<Q", offset), self._index_start + 8 * slot)

    def read_all(self) -> np.ndarray:
        """Whole array in storage order (test and copy helper; not counted)."""
        shape, chunks = self.descriptor.shape, self.header.chunk_shape
        out = np.zeros(shape, dtype=self.descriptor.dtype.numpy)
        for key in itertools.product(*(range(g) for g in self.header.grid)):
            chunk = self._load_chunk(self._slot(key))
            dst = tuple(slice(k * c, min((k + 1) * c, s)) for k, c, s in zip(key, chunks, shape))
            out[dst] = chunk[tuple(slice(0, d.stop - d.start) for d in dst)]
        return out

    def write_all(self, data: np.ndarray) -> None:
        data = np.asarray(data)
        if data.shape != self.descriptor.shape:
            raise ShapeMismatch(f"array {data.shape} != dataset {self.descriptor.shape}")
        shape, chunks = self.descriptor.shape, self.header.chunk_shape
        for key in itertools.product(*(range(g) for g in self.header.grid)):
            src = tuple(slice(k * c, min((k + 1) * c, s)) for k, c, s in zip(key, chunks, shape))
            chunk = np.zeros(chunks, dtype=self.descriptor.dtype.numpy)
            chunk[tuple(slice(0, d.stop - d.start) for d in src)] = data[src]
            slot = self._slot(key)
            with self._chunk_locks[slot]:
                self._store_chunk(slot, chunk)
            self._count(written=1)


def create_container(path, descriptor: DatasetDescriptor, chunk_shape) -> StorageHandle:
    chunk_shape = check_chunk_shape(descriptor.shape, chunk_shape)
    header = ContainerHeader(descriptor, chunk_shape)
    encoded = header.encode()
    total = len(encoded) + 8 * header.n_chunks + header.n_chunks * header.chunk_nbytes
    try:
        fd = os.open(path, os.O_RDWR | os.O_CREAT | os.O_TRUNC, 0o644)
        os.pwrite(fd, encoded + bytes(8 * header.n_chunks), 0)
        os.ftruncate(fd, total)
    except OSError as exc:
        raise IoFailure(f"cannot create {path}: {exc}") from exc
    return StorageHandle(path, header, True, fd)


def read_header(path) -> ContainerHeader:
    try:
        with open(path, "rb") as stream:
            return ContainerHeader.decode(stream)
    except IoFailure:
        raise
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def open_container(path, writable: bool = False) -> StorageHandle:
    header = read_header(path)
    try:
        fd = os.open(path, os.O_RDWR if writable else os.O_RDONLY)
    except OSError as exc:
        raise IoFailure(f"cannot open {path}: {exc}") from exc
    return StorageHandle(path, header, writable, fd)


def _ordinals(handle: StorageHandle, pattern: Pattern, start: int, count: int) -> np.ndarray:
    n = math.prod(handle.descriptor.shape[d] for d in pattern.slice_dims)
    if not 0 <= start < n:
        raise OrdinalOutOfRange(f"start ordinal {start} outside [0, {n})")
    if count < 1:
        raise ValueError("frame count must be >= 1")
    return np.arange(start, min(start + count, n))


def _resolve(handle: StorageHandle, pattern) -> Pattern:
    if isinstance(pattern, str):
        return handle.descriptor.pattern(pattern)
    return handle.descriptor.pattern(pattern.name)


def _groups(handle: StorageHandle, pattern: Pattern, coords: np.ndarray):
    """Group frames by the chunk-grid cell they occupy along the slice dims.

    Yields (frame positions, local slice indices, slice chunk key).
    """
    if not pattern.slice_dims:
        yield np.arange(len(coords)), coords, ()
        return
    slice_chunks = np.array([handle.header.chunk_shape[d] for d in pattern.slice_dims], dtype=np.int64)
    keys = coords // slice_chunks
    local = coords - keys * slice_chunks
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    for g, key in enumerate(uniq):
        members = np.flatnonzero(inverse == g)
        yield members, local[members], tuple(int(k) for k in key)


def _core_cells(handle: StorageHandle, pattern: Pattern):
    """Yield (grid index per core dim, destination slices per core dim)."""
    shape, chunks = handle.descriptor.shape, handle.header.chunk_shape
    ranges = [range(handle.header.grid[d]) for d in pattern.core_dims]
    for combo in itertools.product(*ranges):
        dst = []
        for d, k in zip(pattern.core_dims, combo):
            dst.append(slice(k * chunks[d], min((k + 1) * chunks[d], shape[d])))
        yield combo, dst


def _chunk_key(pattern: Pattern, ndims: int, slice_key, core_key) -> list[int]:
    key = [0] * ndims
    for d, k in zip(pattern.slice_dims, slice_key):
        key[d] = k
    for d, k in zip(pattern.core_dims, core_key):
        key[d] = k
    return key


def gather_frames(handle: StorageHandle, pattern: Pattern, coords: np.ndarray) -> np.ndarray:
    """Read frames at explicit slice coordinates (rows of ``coords``).

    Returns an array of shape ``(len(coords), *core extents)`` with core axes
    in ``pattern.core_dims`` order. Every distinct chunk touched is read once
    and counted once.
    """
    desc = handle.descriptor
    core_shape = [desc.shape[d] for d in pattern.core_dims]
    out = np.empty((len(coords), *core_shape), dtype=desc.dtype.numpy)
    order = list(pattern.slice_dims) + list(pattern.core_dims)
    touched = 0
    for members, local, slice_key in _groups(handle, pattern, coords):
        for core_key, dst in _core_cells(handle, pattern):
            chunk = handle._load_chunk(handle._slot(_chunk_key(pattern, desc.ndims, slice_key, core_key)))
            view = chunk.transpose(order)
            picked = view[tuple(local.T)] if len(pattern.slice_dims) else view[np.newaxis]
            src = tuple(slice(0, s.stop - s.start) for s in dst)
            out[(members, *dst)] = picked[(slice(None), *src)]
            touched += 1
    handle._count(read=touched)
    return out


def read_frames(handle: StorageHandle, pattern, start: int, count: int, padding: int = 0) -> np.ndarray:
    """Read ``count`` frames starting at ``start`` (clipped to the last frame).

    ``padding`` extra frames are added on both sides along the first slice
    dimension, replicating the edge frame at dataset boundaries. A padded
    batch must not wrap across a higher slice dimension.
    """
    pattern = _resolve(handle, pattern)
    ordinals = _ordinals(handle, pattern, start, count)
    coords = frame_coord_table(handle.descriptor.shape, pattern, ordinals)
    if padding:
        if not pattern.slice_dims:
            raise ValueError("pattern has no slice dimension to pad")
        if len(coords) and np.any(coords[:, 1:] != coords[0, 1:]):
            raise ValueError("padded batch wraps across a higher slice dimension")
        extent = handle.descriptor.shape[pattern.slice_dims[0]]
        first = np.arange(coords[0, 0] - padding, coords[-1, 0] + padding + 1)
        padded = np.empty((len(first), coords.shape[1]), dtype=np.int64)
        padded[:, 0] = np.clip(first, 0, extent - 1)
        padded[:, 1:] = coords[0, 1:]
        coords = padded
    return gather_frames(handle, pattern, coords)


def read_ordinals(handle: StorageHandle, pattern, ordinals) -> np.ndarray:
    """Read arbitrary (not necessarily consecutive) frames, unpadded."""
    pattern = _resolve(handle, pattern)
    coords = frame_coord_table(handle.descriptor.shape, pattern, ordinals)
    return gather_frames(handle, pattern, coords)


def write_frames(handle: StorageHandle, pattern, start: int, block: np.ndarray) -> None:
    """Write ``block`` (frames along axis 0) starting at frame ``start``.

    Partially covered chunks are read, merged and rewritten under that
    chunk's lock, so concurrent writers of disjoint frames never clobber
    each other.
    """
    if not handle.writable:
        raise IoFailure(f"{handle.path} is open read-only")
    pattern = _resolve(handle, pattern)
    desc = handle.descriptor
    block = np.asarray(block)
    core_shape = tuple(desc.shape[d] for d in pattern.core_dims)
    if block.ndim != 1 + len(core_shape) or block.shape[1:] != core_shape:
        raise ShapeMismatch(f"block {block.shape} does not match (m, *{core_shape})")
    ordinals = _ordinals(handle, pattern, start, block.shape[0])
    if len(ordinals) != block.shape[0]:
        raise OrdinalOutOfRange(f"{block.shape[0]} frames from {start} overrun the dataset")
    coords = frame_coord_table(desc.shape, pattern, ordinals)
    block = block.astype(desc.dtype.numpy, copy=False)
    order = list(pattern.slice_dims) + list(pattern.core_dims)
    written = 0
    for members, local, slice_key in _groups(handle, pattern, coords):
        for core_key, dst in _core_cells(handle, pattern):
            slot = handle._slot(_chunk_key(pattern, desc.ndims, slice_key, core_key))
            src = tuple(slice(0, s.stop - s.start) for s in dst)
            with handle._chunk_locks[slot]:
                chunk = handle._load_chunk(slot)
                view = chunk.transpose(order)
                values = block[(members, *dst)]
                if len(pattern.slice_dims):
                    view[(*local.T, *src)] = values
                else:
                    view[src] = values[0]
                handle._store_chunk(slot, chunk)
            written += 1
    handle._count(written=written)


# run manifest


@dataclass
class OutputRecord:
    dataset: str
    path: str
    role: str  # "initial" | "intermediate" | "final"


@dataclass
class PluginRecord:
    index: int
    name: str
    params: dict
    outputs: list[OutputRecord] = field(default_factory=list)

    @property
    def intermediate(self) -> bool:
        return any(o.role == "intermediate" for o in self.outputs)


@dataclass
class RunManifest:
    run_id: str
    inputs: list[str]
    plugins: list[PluginRecord] = field(default_factory=list)
    final_outputs: list[OutputRecord] = field(default_factory=list)
    status: str = "complete"
    error: str | None = None
    io: list[dict] = field(default_factory=list)  # per-container chunk counters

    def to_dict(self) -> dict:
        doc = asdict(self)
        for rec, raw in zip(self.plugins, doc["plugins"]):
            raw["intermediate"] = rec.intermediate
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> RunManifest:
        plugins = [
            PluginRecord(p["index"], p["name"], p["params"], [OutputRecord(**o) for o in p["outputs"]])
            for p in doc["plugins"]
        ]
        finals = [OutputRecord(**o) for o in doc["final_outputs"]]
        return cls(
            doc["run_id"], list(doc["inputs"]), plugins, finals, doc["status"], doc.get("error"), doc.get("io", [])
        )

    def paths(self) -> Iterable[str]:
        for rec in self.plugins:
            for out in rec.outputs:
                yield out.path
        for out in self.final_outputs:
            yield out.path


MANIFEST_NAME = "manifest.json"


def write_manifest(manifest: RunManifest, output_dir) -> Path:
    if not manifest.plugins:
        raise ValueError("a run records at least one loader and one saver")
    missing = [p for p in manifest.paths() if not Path(p).exists()]
    if missing:
        raise IoFailure(f"manifest references missing files: {missing}")
    path = Path(output_dir) / MANIFEST_NAME
    try:
        path.write_text(json.dumps(manifest.to_dict(), indent=2, default=_jsonable) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def read_manifest(path) -> RunManifest:
    return RunManifest.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serialisable")
