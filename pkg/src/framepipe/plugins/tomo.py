"""Full-field tomography plugins: correction, linearisation, filtering, FBP."""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..data import DType, Pattern
from ..errors import AnglesMismatch, InvalidSpec, ShapeMismatch
from ..plugin import Param, Plugin, register

EPS = 1e-6


def _broadcast(block: np.ndarray, like: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.broadcast_to(block, like.shape)
    except ValueError:
        raise ShapeMismatch(f"{what} block {block.shape} does not broadcast to {like.shape}") from None


@register
class DarkFlatCorrect(Plugin):
    """``(raw - dark) / max(flat - dark, eps)``. In-datasets: raw, dark, flat."""

    nr_in_datasets = 3
    parameters = (
        Param("pattern", "str", "PROJECTION", "access pattern"),
        Param("frames", "int", 1, "frames per process call"),
    )

    def setup(self, in_data, out_data):
        raw, dark, flat = in_data
        raw.set_view(self.params["pattern"], self.params["frames"])
        dark.set_view(self.params["pattern"])
        flat.set_view(self.params["pattern"])
        out_data[0].create_like(raw, DType.F32)
        out_data[0].set_view(self.params["pattern"], self.params["frames"])

    def process(self, blocks):
        raw, dark, flat = (b.astype(np.float64) for b in blocks)
        dark = _broadcast(dark, raw, "dark")
        flat = _broadcast(flat, raw, "flat")
        return ((raw - dark) / np.maximum(flat - dark, EPS)).astype(np.float32)


@register
class MinusLog(Plugin):
    """``-ln(max(v, eps))``."""

    parameters = (
        Param("pattern", "str", "SINOGRAM", "access pattern"),
        Param("frames", "int", 1, "frames per process call"),
    )

    def process(self, blocks):
        return (-np.log(np.maximum(blocks[0].astype(np.float64), EPS))).astype(np.float32)


@register
class MedianFilter(Plugin):
    """3x3x3 median: one frame either side along the first slice dim, 3x3 in the frame.

    Edges replicate the nearest value.
    """

    parameters = (
        Param("pattern", "str", "SINOGRAM", "access pattern"),
        Param("frames", "int", 4, "frames per process call"),
    )

    def setup(self, in_data, out_data):
        src = in_data[0]
        pattern = src.descriptor.pattern(self.params["pattern"])
        if len(pattern.core_dims) != 2 or not pattern.slice_dims:
            raise ShapeMismatch(f"median filter needs 2 core dims and a slice dim, {pattern.name} has "
                                f"core {pattern.core_dims} slice {pattern.slice_dims}")
        src.set_view(pattern.name, self.params["frames"], {pattern.slice_dims[0]: 1})
        out_data[0].create_like(src, DType.F32)
        out_data[0].set_view(pattern.name, self.params["frames"])

    def process(self, blocks):
        block = np.pad(blocks[0].astype(np.float32), ((0, 0), (1, 1), (1, 1)), mode="edge")
        windows = sliding_window_view(block, (3, 3, 3))
        m = windows.shape[0]
        return np.median(windows.reshape(m, *windows.shape[1:3], 27), axis=-1).astype(np.float32)


def ramp_kernel(size: int) -> np.ndarray:
    """Frequency response of the band-limited spatial ramp, unit sample spacing."""
    n = np.arange(size)
    n = np.where(n < size // 2, n, n - size)
    h = np.zeros(size)
    h[0] = 0.25
    odd = n % 2 == 1
    h[odd] = -1.0 / (math.pi * n[odd]) ** 2
    return np.real(np.fft.fft(h))


def filter_rows(sino: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Ramp-filter each row of ``sino`` (n_theta, n_x) with zero padding."""
    size = kernel.size
    spectrum = np.fft.fft(sino, n=size, axis=-1) * kernel
    return np.real(np.fft.ifft(spectrum, axis=-1))[:, : sino.shape[-1]]


@register
class FbpRecon(Plugin):
    """Filtered back-projection of each sinogram onto a square grid.

    Sinogram frames are (x, theta); each output frame is an (x_out, y_out)
    slice. Reconstructed values are per unit length when ``pixel_size`` is
    the detector bin width.
    """

    parameters = (
        Param("pattern", "str", "SINOGRAM", "sinogram access pattern"),
        Param("frames", "int", 1, "frames per process call"),
        Param("center", "float", None, "rotation axis in detector bins (default n_x / 2)"),
        Param("out_size", "int", None, "reconstruction grid size (default n_x)"),
        Param("pixel_size", "float", None, "detector bin width (default from metadata, else 1)"),
    )

    def setup(self, in_data, out_data):
        src = in_data[0]
        desc = src.descriptor
        pattern = desc.pattern(self.params["pattern"])
        if len(pattern.core_dims) != 2:
            raise ShapeMismatch(f"{pattern.name} must have two core dims (x, theta)")
        x_dim, t_dim = pattern.core_dims
        self.n_x, self.n_theta = desc.shape[x_dim], desc.shape[t_dim]
        self.angles = self._angles(desc.metadata.get("angles"))
        size = self.params["out_size"] or self.n_x
        if int(size) < 1:
            raise InvalidSpec(f"out_size must be positive, got {size}")
        k = len(pattern.slice_dims)
        shape = tuple(desc.shape[d] for d in pattern.slice_dims) + (size, size)
        labels = tuple(desc.axis_labels[d] for d in pattern.slice_dims) + ("y_out", "x_out")
        slice_pattern = Pattern("SLICE", (k + 1, k), tuple(range(k)))
        self.pixel = float(self.params["pixel_size"] or desc.metadata.get("pixel_size", 1.0))
        src.set_view(pattern.name, self.params["frames"])
        out_data[0].create(shape, DType.F32, labels, [slice_pattern], {"pixel_size": self.pixel})
        out_data[0].set_view("SLICE", self.params["frames"])

    def _angles(self, angles) -> np.ndarray:
        if angles is None:
            return np.arange(self.n_theta) * (math.pi / self.n_theta)
        angles = np.asarray(angles, dtype=np.float64)
        if angles.shape != (self.n_theta,):
            raise AnglesMismatch(f"{angles.size} angles for {self.n_theta} projections")
        expected = np.arange(self.n_theta) * (math.pi / self.n_theta)
        if not np.allclose(angles, expected, atol=1e-9):
            raise AnglesMismatch("angles must be uniform over [0, 180) degrees")
        return angles

    def pre_process(self):
        n_x = self.n_x
        size = self.params["out_size"] or n_x
        center = self.params["center"] if self.params["center"] is not None else n_x / 2
        pad = 1 << max(1, math.ceil(math.log2(2 * n_x)))
        self.kernel = ramp_kernel(pad)
        self.scale = math.pi / self.n_theta / self.pixel

        # grid in detector-bin units, centred on the rotation axis
        c = np.arange(size) + 0.5 - size / 2
        yy, xx = np.meshgrid(c * n_x / size, c * n_x / size, indexing="ij")
        t = xx[None] * np.cos(self.angles)[:, None, None] + yy[None] * np.sin(self.angles)[:, None, None]
        u = t + center - 0.5
        i0 = np.floor(u).astype(np.int64)
        w = u - i0
        width = n_x + 2  # one zero guard bin each side
        rows = np.arange(self.n_theta)[:, None, None] * width
        lo = np.clip(i0 + 1, 0, width - 1)
        hi = np.clip(i0 + 2, 0, width - 1)
        self.w_lo = np.where((i0 + 1 == lo), 1.0 - w, 0.0)
        self.w_hi = np.where((i0 + 2 == hi), w, 0.0)
        self.i_lo, self.i_hi = rows + lo, rows + hi

    def reconstruct(self, sino: np.ndarray) -> np.ndarray:
        """One (n_x, n_theta) sinogram to an (y, x) image."""
        q = filter_rows(np.asarray(sino, dtype=np.float64).T, self.kernel)
        guarded = np.zeros((self.n_theta, self.n_x + 2))
        guarded[:, 1:-1] = q
        flat = guarded.ravel()
        return (flat[self.i_lo] * self.w_lo + flat[self.i_hi] * self.w_hi).sum(axis=0) * self.scale

    def process(self, blocks):
        # one frame at a time so results do not depend on the batch size
        return np.stack([self.reconstruct(frame).T for frame in blocks[0]]).astype(np.float32)
