"""The container saver: creates every container a run writes."""

from __future__ import annotations

from pathlib import Path

from ..plugin import Saver, register
from ..storage import create_container, read_frames, write_frames


@register
class ContainerSaver(Saver):
    """Writes chunked containers.

    Out-datasets are created here before each plugin runs. At the end of a
    run, datasets that came straight from a loader and were never replaced
    are copied into the output directory so the output is self-contained.
    """

    def create(self, path, descriptor, chunk_shape):
        return create_container(path, descriptor, chunk_shape)

    def copy(self, handle, path, chunk_shape, budget: int = 1_000_000):
        desc = handle.descriptor
        pattern = next(iter(desc.patterns.values()))
        frame_bytes = desc.dtype.byte_size
        for d in pattern.core_dims:
            frame_bytes *= desc.shape[d]
        n = 1
        for d in pattern.slice_dims:
            n *= desc.shape[d]
        batch = max(1, budget // frame_bytes)
        out = self.create(Path(path), desc, chunk_shape)
        for start in range(0, n, batch):
            write_frames(out, pattern, start, read_frames(handle, pattern, start, batch))
        return out
