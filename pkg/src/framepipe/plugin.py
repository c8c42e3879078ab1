"""Plugin base classes, parameter schemas and the name registry."""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass
from typing import Any, ClassVar, Mapping, Sequence

import numpy as np

from .data import DatasetDescriptor, DType, Pattern, PluginDatasetView
from .errors import UnknownParam, UnknownPlugin


class Driver(enum.Enum):
    CPU = "cpu"
    ACCELERATOR = "accelerator"


@dataclass(frozen=True)
class Param:
    name: str
    type: str  # int | float | str | bool | list
    default: Any
    doc: str = ""


IO_PARAMS = (
    Param("in_datasets", "list", [], "names of the datasets to process"),
    Param("out_datasets", "list", [], "names of the datasets to create (defaults to in_datasets)"),
)


class PluginDataset:
    """A dataset as seen by one plugin while it is plugged in.

    In-datasets arrive with a descriptor; out-datasets start as a bare name
    and are completed by :meth:`create` or :meth:`create_like` during setup.
    """

    def __init__(self, name: str, descriptor: DatasetDescriptor | None = None):
        self.name = name
        self.descriptor = descriptor
        self.pattern: str | None = None
        self.frames = 1
        self.padding: dict[int, int] = {}

    def __repr__(self):
        return f"PluginDataset({self.name!r}, pattern={self.pattern!r}, frames={self.frames})"

    def set_view(self, pattern: str, frames: int = 1, padding: Mapping[int, int] | None = None) -> None:
        self.pattern = pattern
        self.frames = int(frames)
        self.padding = dict(padding or {})

    def create(self, shape, dtype: DType, axis_labels, patterns: Sequence[Pattern], metadata=None) -> None:
        self.descriptor = DatasetDescriptor(
            self.name, shape, dtype, axis_labels, {p.name: p for p in patterns}, metadata or {}
        )

    def create_like(self, other: PluginDataset, dtype: DType | None = None) -> None:
        src = other.descriptor
        self.descriptor = src.replace(name=self.name, dtype=dtype or src.dtype)

    @property
    def view(self) -> PluginDatasetView:
        return PluginDatasetView(self.name, self.pattern, self.frames, self.padding)

    def pattern_obj(self) -> Pattern:
        return self.descriptor.pattern(self.pattern)


class Plugin:
    """Base class for processing plugins.

    Subclasses must implement :meth:`process`. It receives one block per
    in-dataset, frames along axis 0 (plus any padding frames), and returns
    one block per out-dataset holding exactly the unpadded frames.
    """

    kind: ClassVar[str] = "processing"
    nr_in_datasets: ClassVar[int] = 1
    nr_out_datasets: ClassVar[int] = 1
    driver: ClassVar[Driver] = Driver.CPU
    parameters: ClassVar[tuple[Param, ...]] = ()

    def __init__(self, params: Mapping[str, Any] | None = None):
        self.params = self.defaults()
        for key, value in (params or {}).items():
            if key not in self.params:
                raise UnknownParam(f"{self.plugin_name()} has no parameter {key!r}")
            self.params[key] = value
        self.in_data: list[PluginDataset] = []
        self.out_data: list[PluginDataset] = []

    @classmethod
    def plugin_name(cls) -> str:
        return cls.__name__

    @classmethod
    def schema(cls) -> tuple[Param, ...]:
        if cls.kind == "processing":
            return IO_PARAMS + cls.parameters
        return cls.parameters

    @classmethod
    def defaults(cls) -> dict[str, Any]:
        return {p.name: copy.deepcopy(p.default) for p in cls.schema()}

    def setup(self, in_data: list[PluginDataset], out_data: list[PluginDataset]) -> None:
        """Default: same pattern for every dataset, outputs shaped like the first input."""
        pattern = self.params.get("pattern")
        frames = self.params.get("frames", 1)
        for ds in in_data:
            ds.set_view(pattern, frames)
        for ds in out_data:
            ds.create_like(in_data[0], DType.F32)
            ds.set_view(pattern, frames)

    def pre_process(self) -> None:
        pass

    def process(self, blocks: list[np.ndarray]) -> list[np.ndarray] | np.ndarray:
        raise NotImplementedError

    def post_process(self) -> None:
        pass


class Loader(Plugin):
    """Registers datasets. Data is produced or opened only in :meth:`load`."""

    kind = "loader"
    nr_in_datasets = 0
    nr_out_datasets = 0
    takes_path: ClassVar[bool] = False

    def describe(self, path: str | None) -> list[DatasetDescriptor]:
        raise NotImplementedError

    def load(self, descriptor: DatasetDescriptor, create) -> object:
        """Produce ``descriptor``'s data.

        ``create(descriptor)`` returns a fresh writable handle when the loader
        has to materialise data. Returns the handle holding the dataset.
        """
        raise NotImplementedError


class Saver(Plugin):
    """Creates and fills every container written during a run."""

    kind = "saver"
    nr_in_datasets = 0
    nr_out_datasets = 0


_REGISTRY: dict[str, type[Plugin]] = {}


def register(cls: type[Plugin]) -> type[Plugin]:
    _REGISTRY[cls.plugin_name()] = cls
    return cls


def get_plugin(name: str) -> type[Plugin]:
    from . import plugins  # noqa: F401  populates the registry

    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownPlugin(f"no plugin named {name!r}") from None


def available_plugins() -> dict[str, type[Plugin]]:
    from . import plugins  # noqa: F401

    return dict(sorted(_REGISTRY.items()))
