"""Generic plugins for combining and passing through datasets."""

from __future__ import annotations

import numpy as np

from ..data import DType
from ..errors import ShapeMismatch
from ..plugin import Param, Plugin, register

EPS = 1e-6


@register
class DatasetRatio(Plugin):
    """``num / max(den, eps)`` where the denominator repeats over extra frames."""

    nr_in_datasets = 2
    parameters = (
        Param("pattern", "list", "SINOGRAM", "pattern name, or [numerator, denominator] names"),
        Param("frames", "int", 1, "frames per process call"),
    )

    def setup(self, in_data, out_data):
        pattern = self.params["pattern"]
        names = [pattern, pattern] if isinstance(pattern, str) else list(pattern)
        if len(names) != 2:
            raise ValueError(f"pattern must name 1 or 2 patterns, got {pattern!r}")
        in_data[0].set_view(names[0], self.params["frames"])
        in_data[1].set_view(names[1], self.params["frames"])
        out_data[0].create_like(in_data[0], DType.F32)
        out_data[0].set_view(names[0], self.params["frames"])

    def process(self, blocks):
        num, den = (b.astype(np.float64) for b in blocks)
        try:
            den = np.broadcast_to(den, num.shape)
        except ValueError:
            raise ShapeMismatch(f"denominator {den.shape} does not broadcast to {num.shape}") from None
        return (num / np.maximum(den, EPS)).astype(np.float32)


@register
class Identity(Plugin):
    """Copies frames unchanged, keeping the dtype."""

    parameters = (
        Param("pattern", "str", "PROJECTION", "access pattern"),
        Param("frames", "int", 1, "frames per process call"),
    )

    def setup(self, in_data, out_data):
        in_data[0].set_view(self.params["pattern"], self.params["frames"])
        out_data[0].create_like(in_data[0])
        out_data[0].set_view(self.params["pattern"], self.params["frames"])

    def process(self, blocks):
        return blocks[0].copy()
