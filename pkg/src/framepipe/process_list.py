"""Process lists: the ordered, parameterised plugin chain of a run."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import BadIndex, UnknownParam
from .plugin import get_plugin


@dataclass
class PluginEntry:
    index: int
    name: str
    params: dict[str, Any] = field(default_factory=dict)
    active: bool = True

    def to_dict(self) -> dict:
        return {"index": self.index, "name": self.name, "active": self.active, "params": self.params}


@dataclass
class ProcessList:
    entries: list[PluginEntry] = field(default_factory=list)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def active(self) -> list[PluginEntry]:
        return [e for e in self.entries if e.active]

    def to_dict(self) -> dict:
        return {"plugins": [e.to_dict() for e in self.entries]}

    @classmethod
    def from_dict(cls, doc: dict) -> ProcessList:
        if not isinstance(doc, dict) or not isinstance(doc.get("plugins"), list):
            raise ValueError('process list must be an object with a "plugins" array')
        entries = [
            PluginEntry(int(p["index"]), str(p["name"]), dict(p.get("params", {})), bool(p.get("active", True)))
            for p in doc["plugins"]
        ]
        if [e.index for e in entries] != list(range(1, len(entries) + 1)):
            raise ValueError("plugin indices must be 1..n in order")
        return cls(entries)

    @classmethod
    def load(cls, path) -> ProcessList:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    # editing

    def _reindex(self) -> None:
        for i, entry in enumerate(self.entries, start=1):
            entry.index = i

    def _position(self, index: int) -> int:
        if not 1 <= index <= len(self.entries):
            raise BadIndex(f"index {index} outside 1..{len(self.entries)}")
        return index - 1

    def add(self, name: str, params: dict | None = None, position: int | None = None) -> PluginEntry:
        cls = get_plugin(name)
        values = cls.defaults()
        for key, value in (params or {}).items():
            if key not in values:
                raise UnknownParam(f"{name} has no parameter {key!r}")
            values[key] = value
        entry = PluginEntry(0, name, values)
        if position is None:
            self.entries.append(entry)
        else:
            self.entries.insert(position - 1, entry)
        self._reindex()
        return entry

    def remove(self, index: int) -> PluginEntry:
        entry = self.entries.pop(self._position(index))
        self._reindex()
        return entry

    def move(self, src: int, dst: int) -> None:
        entry = self.entries.pop(self._position(src))
        if not 1 <= dst <= len(self.entries) + 1:
            self.entries.insert(src - 1, entry)
            raise BadIndex(f"target index {dst} outside 1..{len(self.entries)}")
        self.entries.insert(dst - 1, entry)
        self._reindex()

    def set_param(self, index: int, key: str, value: Any) -> None:
        entry = self.entries[self._position(index)]
        if key not in get_plugin(entry.name).defaults():
            raise UnknownParam(f"{entry.name} has no parameter {key!r}")
        entry.params[key] = value

    def set_active(self, index: int, active: bool) -> None:
        self.entries[self._position(index)].active = active
