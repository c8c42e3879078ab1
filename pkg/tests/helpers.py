"""Chain builders and in-memory oracles shared by the test modules."""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import median_filter

from framepipe.plugins.loaders import SyntheticTomoLoader
from framepipe.process_list import ProcessList

EPS = 1e-6


def full_chain(**loader) -> ProcessList:
    """loader -> dark/flat -> minus log -> median -> FBP -> saver."""
    pl = ProcessList()
    pl.add("SyntheticTomoLoader", loader)
    pl.add("DarkFlatCorrect", {"in_datasets": ["tomo", "dark", "flat"], "out_datasets": ["tomo"]})
    pl.add("MinusLog", {"in_datasets": ["tomo"]})
    pl.add("MedianFilter", {"in_datasets": ["tomo"]})
    pl.add("FbpRecon", {"in_datasets": ["tomo"], "out_datasets": ["recon"]})
    pl.add("ContainerSaver")
    return pl


def raw_counts(**loader) -> np.ndarray:
    """Detector counts as the loader should store them, (theta, y, x) U16."""
    src = SyntheticTomoLoader(loader)
    p = src.params
    counts = p["dark_level"] + (p["I0"] - p["dark_level"]) * np.exp(-src.integrals())
    return np.rint(counts).astype(np.uint16)


def fbp_oracle(sino: np.ndarray, pixel_size: float, center: float | None = None) -> np.ndarray:
    """Direct FBP of one (theta, x) sinogram into a (y, x) image, written independently of the plugin."""
    n_theta, n_x = sino.shape
    center = n_x / 2 if center is None else center
    pad = 1 << max(1, math.ceil(math.log2(2 * n_x)))
    # spatial ramp taps, circularly arranged
    taps = np.zeros(pad)
    for k in range(pad):
        n = k if k < pad // 2 else k - pad
        if n == 0:
            taps[k] = 0.25
        elif n % 2:
            taps[k] = -1.0 / (math.pi * n) ** 2
    response = np.fft.fft(taps).real
    grid = np.arange(n_x) + 0.5 - n_x / 2
    yy, xx = np.meshgrid(grid, grid, indexing="ij")
    image = np.zeros((n_x, n_x))
    bins = np.arange(-1, n_x + 1)
    for k in range(n_theta):
        row = np.zeros(pad)
        row[:n_x] = sino[k]
        q = np.fft.ifft(np.fft.fft(row) * response).real[:n_x]
        guarded = np.concatenate([[0.0], q, [0.0]])
        theta = k * math.pi / n_theta
        u = xx * math.cos(theta) + yy * math.sin(theta) + center - 0.5
        image += np.interp(u, bins, guarded, left=0.0, right=0.0)
    return image * math.pi / n_theta / pixel_size


def in_memory_chain(**loader) -> dict[str, np.ndarray]:
    """The full chain as whole-array numpy, returning every stage."""
    src = SyntheticTomoLoader(loader)
    p = src.params
    raw = raw_counts(**loader).astype(np.float64)
    dark, flat = float(p["dark_level"]), float(p["I0"])
    corrected = ((raw - dark) / max(flat - dark, EPS)).astype(np.float32)
    absorption = (-np.log(np.maximum(corrected.astype(np.float64), EPS))).astype(np.float32)
    filtered = median_filter(absorption, size=3, mode="nearest")
    recon = np.stack([
        fbp_oracle(filtered[:, y, :].astype(np.float64), 1.0 / p["n_x"]) for y in range(p["n_y"])
    ])
    return {"raw": raw, "corrected": corrected, "absorption": absorption, "filtered": filtered, "recon": recon}


def disk_image(n: int, disks) -> np.ndarray:
    """Analytic density on an n x n grid of pixel centres, (y, x)."""
    c = (np.arange(n) + 0.5) / n
    yy, xx = np.meshgrid(c, c, indexing="ij")
    image = np.zeros((n, n))
    for cx, cy, r, density in disks:
        image += density * (((xx - cx) ** 2 + (yy - cy) ** 2) <= r * r)
    return image


def inscribed(n: int) -> np.ndarray:
    c = (np.arange(n) + 0.5) / n
    yy, xx = np.meshgrid(c, c, indexing="ij")
    return (xx - 0.5) ** 2 + (yy - 0.5) ** 2 <= 0.25
