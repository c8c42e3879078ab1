"""Loaders: a synthetic parallel-beam scan and raw containers on disk."""

from __future__ import annotations

import math

import numpy as np

from ..data import DatasetDescriptor, DType, Pattern, frame_coord_table
from ..errors import InvalidSpec
from ..plugin import Loader, Param, register
from ..storage import open_container, read_header, write_frames

TRANSMISSION_FLOOR = 0.01


def detector_offsets(n_x: int) -> np.ndarray:
    """Bin centres in unit-square units, zero on the rotation axis."""
    return (np.arange(n_x) + 0.5 - n_x / 2) / n_x


def uniform_angles(n_theta: int) -> np.ndarray:
    return np.arange(n_theta) * (math.pi / n_theta)


def disk_sinogram(disks, angles, offsets) -> np.ndarray:
    """Analytic line integrals, shape (n_theta, n_x).

    Each disk is ``(cx, cy, r, density)`` in unit-square coordinates; a ray
    at offset ``s`` crosses a disk whose centre projects to ``t`` along a
    chord of length ``2*sqrt(r**2 - (s - t)**2)``.
    """
    out = np.zeros((len(angles), len(offsets)))
    for cx, cy, r, density in disks:
        t = (cx - 0.5) * np.cos(angles) + (cy - 0.5) * np.sin(angles)
        d2 = r * r - (offsets[None, :] - t[:, None]) ** 2
        out += density * 2.0 * np.sqrt(np.clip(d2, 0.0, None))
    return out


def check_disks(disks) -> list[tuple[float, float, float, float]]:
    checked = []
    for disk in disks:
        if len(disk) != 4:
            raise InvalidSpec(f"disk needs (cx, cy, r, density), got {disk!r}")
        cx, cy, r, density = (float(v) for v in disk)
        if not r > 0:
            raise InvalidSpec(f"disk radius must be positive, got {r}")
        if not all(math.isfinite(v) for v in (cx, cy, density)):
            raise InvalidSpec(f"non-finite disk parameters {disk!r}")
        checked.append((cx, cy, r, density))
    return checked


@register
class SyntheticTomoLoader(Loader):
    """Projections of a disk phantom, stored as raw U16 detector counts.

    Counts follow ``dark + (flat - dark) * exp(-p)`` so that dark/flat
    correction followed by minus-log recovers the scaled integrals ``p``.
    With ``n_scans > 1`` a trailing scan dimension is added.
    """

    parameters = (
        Param("name", "str", "tomo", "name of the projection dataset"),
        Param("dark_name", "str", "dark", "dark-field dataset name ('' to skip dark and flat)"),
        Param("flat_name", "str", "flat", "flat-field dataset name"),
        Param("n_theta", "int", 90, "number of angles over [0, 180) degrees"),
        Param("n_y", "int", 64, "detector rows"),
        Param("n_x", "int", 64, "detector columns"),
        Param("n_scans", "int", 1, "repeated scans; > 1 adds a fourth dimension"),
        Param("disks", "list", [[0.5, 0.5, 0.3, 1.0]], "phantom disks [cx, cy, r, density]"),
        Param("I0", "int", 50000, "flat-field counts"),
        Param("dark_level", "int", 1000, "dark-field counts"),
        Param("y_gradient", "float", 0.0, "relative density change from first to last row"),
        Param("scan_gradient", "float", 0.0, "relative density change per scan"),
    )

    def _check(self):
        p = self.params
        for key in ("n_theta", "n_y", "n_x", "n_scans"):
            if int(p[key]) < 1:
                raise InvalidSpec(f"{key} must be >= 1")
        if not 0 <= p["dark_level"] < p["I0"] <= np.iinfo(np.uint16).max:
            raise InvalidSpec("need 0 <= dark_level < I0 <= 65535")
        return check_disks(p["disks"])

    def _shape(self):
        p = self.params
        shape = (p["n_theta"], p["n_y"], p["n_x"])
        return shape + ((p["n_scans"],) if p["n_scans"] > 1 else ())

    def row_weights(self) -> np.ndarray:
        n_y = self.params["n_y"]
        return 1.0 + self.params["y_gradient"] * (np.arange(n_y) / max(n_y - 1, 1))

    def scan_weights(self) -> np.ndarray:
        return 1.0 + self.params["scan_gradient"] * np.arange(self.params["n_scans"])

    def integrals(self) -> np.ndarray:
        """Scaled line integrals of the whole scan, shape like the dataset."""
        p = self.params
        sino = disk_sinogram(self._check(), uniform_angles(p["n_theta"]), detector_offsets(p["n_x"]))
        full = sino[:, None, :] * self.row_weights()[None, :, None]
        if p["n_scans"] > 1:
            full = full[..., None] * self.scan_weights()
        return full * self.attenuation_scale(sino)

    def attenuation_scale(self, sino: np.ndarray | None = None) -> float:
        p = self.params
        if sino is None:
            sino = disk_sinogram(self._check(), uniform_angles(p["n_theta"]), detector_offsets(p["n_x"]))
        peak = float(sino.max()) * float(self.row_weights().max()) * float(self.scan_weights().max())
        limit = -math.log(TRANSMISSION_FLOOR)
        return 1.0 if peak <= limit else limit / peak

    def describe(self, path):
        self._check()
        p = self.params
        shape = self._shape()
        metadata = {
            "angles": uniform_angles(p["n_theta"]).tolist(),
            "pixel_size": 1.0 / p["n_x"],
            "attenuation_scale": self.attenuation_scale(),
        }
        if len(shape) == 3:
            labels = ("theta", "y", "x")
            patterns = [Pattern("PROJECTION", (2, 1), (0,)), Pattern("SINOGRAM", (2, 0), (1,))]
        else:
            labels = ("theta", "y", "x", "scan")
            patterns = [Pattern("PROJECTION", (2, 1), (0, 3)), Pattern("SINOGRAM", (2, 0), (1, 3))]
        out = [DatasetDescriptor(p["name"], shape, DType.U16, labels, {q.name: q for q in patterns}, metadata)]
        if p["dark_name"]:
            flat = [Pattern("PROJECTION", (1, 0), ())]
            for name in (p["dark_name"], p["flat_name"]):
                out.append(DatasetDescriptor(name, (p["n_y"], p["n_x"]), DType.U16, ("y", "x"),
                                             {q.name: q for q in flat}))
        return out

    def load(self, descriptor, create):
        p = self.params
        handle = create(descriptor)
        if descriptor.name in (p["dark_name"], p["flat_name"]) and descriptor.name != p["name"]:
            level = p["dark_level"] if descriptor.name == p["dark_name"] else p["I0"]
            handle.write_all(np.full(descriptor.shape, level, dtype=np.uint16))
            return handle

        sino = disk_sinogram(self._check(), uniform_angles(p["n_theta"]), detector_offsets(p["n_x"]))
        scale = self.attenuation_scale(sino)
        rows, scans = self.row_weights(), self.scan_weights()
        pattern = descriptor.pattern("PROJECTION")
        n = math.prod(descriptor.shape[d] for d in pattern.slice_dims)
        batch = max(1, 1_000_000 // (p["n_x"] * p["n_y"] * 8))
        for start in range(0, n, batch):
            ordinals = np.arange(start, min(start + batch, n))
            coords = frame_coord_table(descriptor.shape, pattern, ordinals)
            theta = coords[:, 0]
            weight = scans[coords[:, 1]] if coords.shape[1] > 1 else np.ones(len(ordinals))
            # block layout (m, x, y)
            integral = scale * sino[theta][:, :, None] * rows[None, None, :] * weight[:, None, None]
            counts = p["dark_level"] + (p["I0"] - p["dark_level"]) * np.exp(-integral)
            write_frames(handle, pattern, start, np.rint(counts).astype(np.uint16))
        return handle


@register
class RawContainerLoader(Loader):
    """Registers a dataset stored in an existing container. Reads only the header."""

    takes_path = True
    parameters = (Param("path", "str", "", "container file (defaults to the next data path)"),)

    def describe(self, path):
        self._path = path
        return [read_header(path).descriptor]

    def load(self, descriptor, create):
        return open_container(self._path)
