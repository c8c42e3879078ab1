"""Process-list validation and execution.

:func:`plan_chain` walks the process list without touching data. It calls
every ``setup`` and tracks which dataset names are available after each
plugin. :func:`run_chain` then does the real work, one plugin at a time,
on a pool of worker threads.
"""

from __future__ import annotations

import contextlib
import math
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .chunking import DEFAULT_BUDGET, OptimizerInputs, chunk_cost, optimize_chunks
from .data import DatasetDescriptor, Pattern, frame_count
from .errors import (
    FramepipeError,
    NoAccelerators,
    PluginFailure,
    ShapeMismatch,
    UnknownDataset,
    UnknownPattern,
    UnknownParam,
    UnknownPlugin,
    ValidationFailed,
)
from .plugin import Driver, Loader, Plugin, PluginDataset, Saver, get_plugin
from .process_list import PluginEntry, ProcessList
from .storage import (
    OutputRecord,
    PluginRecord,
    RunManifest,
    StorageHandle,
    read_frames,
    read_ordinals,
    write_frames,
    write_manifest,
)

CHUNK_POLICIES = ("optimized", "transposed", "mismatched")
PHASES = ("load", "setup", "pre", "process", "write", "post")


# event log


@dataclass(frozen=True)
class LogEvent:
    timestamp_us: int
    worker: int
    plugin_index: int
    plugin_name: str
    phase: str
    frames: int
    duration_us: int

    def line(self) -> str:
        return "\t".join(
            str(v)
            for v in (
                self.timestamp_us,
                self.worker,
                self.plugin_index,
                self.plugin_name,
                self.phase,
                self.frames,
                self.duration_us,
            )
        )


class EventLog:
    """Append-only, thread-safe collection of :class:`LogEvent`."""

    def __init__(self):
        self._t0 = time.perf_counter_ns()
        self._lock = threading.Lock()
        self.events: list[LogEvent] = []

    def _now_us(self) -> int:
        return (time.perf_counter_ns() - self._t0) // 1000

    @contextlib.contextmanager
    def span(self, worker: int, index: int, name: str, phase: str, frames: int = 0) -> Iterator[None]:
        start = self._now_us()
        try:
            yield
        finally:
            end = self._now_us()
            event = LogEvent(start, worker, index, name, phase, frames, max(0, end - start))
            with self._lock:
                self.events.append(event)

    def write(self, path) -> None:
        with self._lock:
            events = sorted(self.events, key=lambda e: (e.timestamp_us, e.worker))
        Path(path).write_text("".join(e.line() + "\n" for e in events), encoding="utf-8")


# validation


@dataclass
class ReportEntry:
    index: int
    plugin: str
    kind: str  # structure | unknown-plugin | param | loader | count | name | pattern | frames | setup
    message: str

    def __str__(self):
        return f"[{self.index}] {self.plugin}: {self.kind}: {self.message}"


@dataclass
class Binding:
    entry: PluginEntry
    plugin: Plugin
    in_names: list[str] = field(default_factory=list)
    out_names: list[str] = field(default_factory=list)
    descriptors: list[DatasetDescriptor] = field(default_factory=list)  # loaders only
    path: str | None = None  # loaders only

    @property
    def index(self) -> int:
        return self.entry.index

    @property
    def name(self) -> str:
        return self.entry.name


@dataclass
class ChainPlan:
    loaders: list[Binding] = field(default_factory=list)
    processing: list[Binding] = field(default_factory=list)
    saver: Binding | None = None
    report: list[ReportEntry] = field(default_factory=list)
    history: list[list[str]] = field(default_factory=list)


def _io_names(plugin: Plugin) -> tuple[list[str], list[str]]:
    ins = list(plugin.params.get("in_datasets") or [])
    outs = list(plugin.params.get("out_datasets") or [])
    if not outs and plugin.nr_out_datasets == plugin.nr_in_datasets:
        outs = list(ins)
    return ins, outs


def plan_chain(process_list: ProcessList, data_paths: Sequence[str] = (), log: EventLog | None = None) -> ChainPlan:
    """Symbolically execute the chain and collect every inconsistency."""
    plan = ChainPlan()
    report = plan.report
    entries = process_list.active()
    if not entries:
        report.append(ReportEntry(0, "-", "structure", "process list has no active plugins"))
        return plan

    instances: list[tuple[PluginEntry, Plugin | None]] = []
    for entry in entries:
        try:
            instances.append((entry, get_plugin(entry.name)(entry.params)))
        except UnknownPlugin as exc:
            report.append(ReportEntry(entry.index, entry.name, "unknown-plugin", str(exc)))
            instances.append((entry, None))
        except UnknownParam as exc:
            report.append(ReportEntry(entry.index, entry.name, "param", str(exc)))
            instances.append((entry, None))

    kinds = [p.kind if p is not None else None for _, p in instances]
    first, last = instances[0][0], instances[-1][0]
    if kinds[0] not in (None, "loader"):
        report.append(ReportEntry(first.index, first.name, "structure", "process list must start with a loader"))
    if kinds[-1] not in (None, "saver"):
        report.append(ReportEntry(last.index, last.name, "structure", "process list must end with a saver"))
    seen_other = False
    for pos, ((entry, _), kind) in enumerate(zip(instances, kinds)):
        if kind == "loader" and seen_other:
            report.append(ReportEntry(entry.index, entry.name, "structure", "loaders must precede all other plugins"))
        if kind not in (None, "loader"):
            seen_other = True
        if kind == "saver" and pos != len(instances) - 1:
            report.append(ReportEntry(entry.index, entry.name, "structure", "the saver must be the last plugin"))

    available: dict[str, DatasetDescriptor | None] = {}
    paths = list(data_paths)
    for entry, plugin in instances:
        if plugin is None:
            continue
        if plugin.kind == "loader":
            binding = Binding(entry, plugin)
            if plugin.takes_path:
                binding.path = plugin.params.get("path") or (paths.pop(0) if paths else None)
                if not binding.path:
                    report.append(ReportEntry(entry.index, entry.name, "loader", "no data path available"))
                    continue
            try:
                descriptors = plugin.describe(binding.path)
            except (FramepipeError, OSError, ValueError) as exc:
                report.append(ReportEntry(entry.index, entry.name, "loader", str(exc)))
                continue
            for desc in descriptors:
                if desc.name in available:
                    report.append(ReportEntry(entry.index, entry.name, "name", f"dataset {desc.name!r} already exists"))
                else:
                    available[desc.name] = desc
            binding.descriptors = descriptors
            binding.out_names = [d.name for d in descriptors]
            plan.loaders.append(binding)
        elif plugin.kind == "saver":
            plan.saver = Binding(entry, plugin)
    if paths:
        report.append(ReportEntry(0, "-", "loader", f"unused data paths: {paths}"))
    plan.history.append(list(available))

    for entry, plugin in instances:
        if plugin is None or plugin.kind != "processing":
            continue
        binding = _plan_processing(entry, plugin, available, report, log)
        plan.processing.append(binding)
        plan.history.append(list(available))
    return plan


def _plan_processing(entry, plugin, available, report, log) -> Binding:
    def flag(kind, message):
        report.append(ReportEntry(entry.index, entry.name, kind, message))

    ins, outs = _io_names(plugin)
    binding = Binding(entry, plugin, ins, outs)
    ok = True
    if len(ins) != plugin.nr_in_datasets:
        flag("count", f"expects {plugin.nr_in_datasets} in_datasets, got {len(ins)} {ins}")
        ok = False
    if len(outs) != plugin.nr_out_datasets:
        flag("count", f"expects {plugin.nr_out_datasets} out_datasets, got {len(outs)} {outs}")
        ok = False
    for name in ins:
        if name not in available:
            flag("name", f"in_dataset {name!r} is not available (have {sorted(available)})")
            ok = False
    if len(set(outs)) != len(outs):
        flag("name", f"duplicate out_datasets {outs}")
        ok = False
    for name in outs:
        if name in available and name not in ins:
            flag("name", f"out_dataset {name!r} would clash with an existing dataset")
            ok = False
    if ok and any(available[n] is None for n in ins):
        ok = False  # upstream already reported

    if ok:
        plugin.in_data = [PluginDataset(n, available[n]) for n in ins]
        plugin.out_data = [PluginDataset(n) for n in outs]
        span = log.span(0, entry.index, entry.name, "setup") if log else contextlib.nullcontext()
        try:
            with span:
                plugin.setup(plugin.in_data, plugin.out_data)
        except Exception as exc:  # a broken setup is a process-list error, not a crash
            flag("setup", f"setup failed: {exc!r}")
            ok = False
    if ok:
        ok = _check_views(plugin, flag)

    for name in outs:
        out = next((d for d in plugin.out_data if d.name == name), None) if ok else None
        available[name] = out.descriptor if out is not None else None
    return binding


def _check_views(plugin: Plugin, flag) -> bool:
    ok = True
    missing: set[tuple[str, str]] = set()
    for ds in plugin.in_data + plugin.out_data:
        if ds.descriptor is None:
            flag("setup", f"setup did not create out_dataset {ds.name!r}")
            ok = False
            continue
        if ds.pattern is None:
            flag("pattern", f"no access pattern requested for {ds.name!r}")
            ok = False
            continue
        try:
            ds.view.check(ds.descriptor)
        except UnknownPattern:
            if (ds.name, ds.pattern) not in missing:  # an out-dataset copied from its input repeats the gap
                flag(
                    "pattern",
                    f"pattern {ds.pattern!r} not available for {ds.name!r} (has {sorted(ds.descriptor.patterns)})",
                )
            missing.add((ds.name, ds.pattern))
            ok = False
        except ValueError as exc:
            flag("pattern", f"{ds.name!r}: {exc}")
            ok = False
    if not ok:
        return False

    core_counts: dict[str, int] = {}
    for ds in plugin.in_data:
        n_core = len(ds.pattern_obj().core_dims)
        if core_counts.setdefault(ds.pattern, n_core) != n_core:
            flag("pattern", f"pattern {ds.pattern!r} has differing core dimension counts across datasets")
            ok = False

    driving = plugin.in_data[0]
    n = frame_count(driving.descriptor, driving.pattern)
    for ds in plugin.in_data[1:]:
        c = frame_count(ds.descriptor, ds.pattern)
        if n % c:
            flag("frames", f"{ds.name!r} has {c} frames, which does not divide {n}")
            ok = False
        elif ds.padding and c != n:
            flag("frames", f"padded view {ds.name!r} cannot be broadcast")
            ok = False
    for ds in plugin.out_data:
        c = frame_count(ds.descriptor, ds.pattern)
        if c != n:
            flag("frames", f"out_dataset {ds.name!r} has {c} frames, in_dataset has {n}")
            ok = False
    return ok


def check_plugin_list(process_list: ProcessList, data_paths: Sequence[str] = ()) -> list[ReportEntry]:
    return plan_chain(process_list, data_paths).report


# execution


@dataclass
class RunOptions:
    n_workers: int = 1
    n_accelerators: int = 0
    inter_dir: str | Path | None = None
    cache_bytes: int = DEFAULT_BUDGET
    log_path: str | Path | None = None
    run_id: str | None = None
    chunk_policy: str = "optimized"  # "transposed" and "mismatched" are baselines for comparison


@dataclass
class DatasetState:
    descriptor: DatasetDescriptor
    handle: StorageHandle
    path: Path
    role: str  # initial | intermediate | final


@dataclass
class RunContext:
    output_dir: Path
    inter_dir: Path
    n_workers: int
    n_accelerators: int
    cache_bytes: int
    log: EventLog
    chunk_policy: str = "optimized"
    available: dict[str, DatasetState] = field(default_factory=dict)
    pending: dict[str, DatasetState] = field(default_factory=dict)
    handles: list[DatasetState] = field(default_factory=list)


def partition_frames(n_frames: int, n_workers: int) -> list[range]:
    """Contiguous, balanced split; earlier workers take the extra frame."""
    if n_workers < 1:
        raise ValueError("need at least one worker")
    base, extra = divmod(n_frames, n_workers)
    ranges, start = [], 0
    for w in range(n_workers):
        size = base + (1 if w < extra else 0)
        ranges.append(range(start, start + size))
        start += size
    return ranges


def frames_per_worker(n_frames: int, n_workers: int) -> int:
    return max(1, -(-n_frames // n_workers))


def gate_workers(driver: Driver, n_workers: int, n_accelerators: int) -> list[int]:
    if driver is Driver.ACCELERATOR:
        if n_accelerators < 1:
            raise NoAccelerators("plugin needs an accelerator but none are available")
        return list(range(min(n_workers, n_accelerators)))
    return list(range(n_workers))


def replace_dataset(ctx: RunContext, name: str) -> None:
    """Make the freshly written out-dataset ``name`` the available one."""
    try:
        state = ctx.pending.pop(name)
    except KeyError:
        raise UnknownDataset(f"no pending out_dataset named {name!r}") from None
    old = ctx.available.get(name)
    if old is not None:
        old.handle.close()
    ctx.available[name] = state


@dataclass(frozen=True)
class Access:
    """One way a dataset is read or written: pattern, frames per call, workers."""

    pattern: Pattern
    frames: int
    workers: int

    def f_p(self, shape) -> int:
        n = math.prod(shape[d] for d in self.pattern.slice_dims)
        return frames_per_worker(n, self.workers)


def select_chunks(descriptor: DatasetDescriptor, now: Access, next: Access | None, budget: int,
                  policy: str = "optimized") -> tuple[int, ...]:
    next = next or now
    shape = descriptor.shape
    eb = descriptor.dtype.byte_size
    inputs = OptimizerInputs(shape, eb, now.pattern, next.pattern, now.frames, now.f_p(shape), next.f_p(shape), budget)
    if policy == "optimized":
        return optimize_chunks(inputs).chunk_shape
    if policy == "transposed":
        # one frame of whichever registered pattern makes the coming reads most expensive
        worst, worst_cost = None, -1
        for q in descriptor.patterns.values():
            candidate = frame_chunk(shape, q, eb, budget)
            cost = chunk_cost(shape, candidate, next.pattern, next.frames)
            if cost > worst_cost:
                worst, worst_cost = candidate, cost
        return worst
    if policy == "mismatched":
        # optimizer output for the pattern that suits the coming reads least
        worst, worst_cost = None, -1
        for q in descriptor.patterns.values():
            alt = Access(q, 1, 1)
            candidate = optimize_chunks(
                OptimizerInputs(shape, eb, q, q, 1, alt.f_p(shape), alt.f_p(shape), budget)
            ).chunk_shape
            cost = chunk_cost(shape, candidate, next.pattern, next.frames)
            if cost > worst_cost:
                worst, worst_cost = candidate, cost
        return worst
    raise ValueError(f"unknown chunk policy {policy!r}")


def frame_chunk(shape, pattern: Pattern, element_bytes: int, budget: int) -> tuple[int, ...]:
    """A chunk holding exactly one frame of ``pattern``, halved until it fits."""
    chunk = [1] * len(shape)
    for d in pattern.core_dims:
        chunk[d] = shape[d]
    while math.prod(chunk) * element_bytes > budget:
        d = max(pattern.core_dims, key=lambda k: chunk[k])
        chunk[d] = -(-chunk[d] // 2)
    return tuple(chunk)


def _active_count(plugin: Plugin, ctx: RunContext) -> int:
    if plugin.driver is Driver.ACCELERATOR:
        return max(1, min(ctx.n_workers, ctx.n_accelerators))
    return ctx.n_workers


def _first_consumer(plan: ChainPlan, name: str, after: int) -> Binding | None:
    for b in plan.processing:
        if b.index > after and name in b.in_names:
            return b
    return None


def _consumer_access(binding: Binding, name: str, ctx: RunContext) -> Access:
    ds = binding.plugin.in_data[binding.in_names.index(name)]
    return Access(ds.pattern_obj(), ds.frames, _active_count(binding.plugin, ctx))


def _final_access(descriptor: DatasetDescriptor, pattern: Pattern | None = None, frames: int = 1) -> Access:
    # final outputs get a layout that does not depend on the worker count
    pattern = pattern or next(iter(descriptor.patterns.values()))
    return Access(pattern, frames, 1)


def _batches(lo: int, hi: int, m: int, row: int | None):
    s = lo
    while s < hi:
        e = min(s + m, hi)
        if row:
            e = min(e, (s // row + 1) * row)
        yield s, e - s
        s = e


def execute_plugin(binding: Binding, ctx: RunContext) -> None:
    """Pre-process, partitioned frame loop across workers, barrier, post-process."""
    plugin, index, name = binding.plugin, binding.index, binding.name
    log = ctx.log
    active = gate_workers(plugin.driver, ctx.n_workers, ctx.n_accelerators)

    in_states = [ctx.available[n] for n in binding.in_names]
    out_states = [ctx.pending[n] for n in binding.out_names]
    in_views = [(ds, ds.pattern_obj(), st.handle) for ds, st in zip(plugin.in_data, in_states)]
    out_views = [(ds, ds.pattern_obj(), st.handle) for ds, st in zip(plugin.out_data, out_states)]
    driving_ds, driving_pattern, _ = in_views[0]
    n = frame_count(driving_ds.descriptor, driving_ds.pattern)
    m = driving_ds.frames
    counts = [frame_count(ds.descriptor, ds.pattern) for ds, _, _ in in_views]
    pads = [ds.view.pad_width(p) for ds, p, _ in in_views]
    rows = [ds.descriptor.shape[p.slice_dims[0]] for (ds, p, _), pad in zip(in_views, pads) if pad]
    row = math.lcm(*rows) if rows else None

    try:
        with log.span(0, index, name, "pre"):
            plugin.pre_process()
    except Exception as exc:
        raise PluginFailure(index, exc) from exc

    errors: list[BaseException] = []

    def work(worker: int, frames: range) -> None:
        cache: dict[int, np.ndarray] = {}
        try:
            for start, count in _batches(frames.start, frames.stop, m, row):
                blocks = []
                with log.span(worker, index, name, "load", count):
                    for k, (ds, pattern, handle) in enumerate(in_views):
                        if counts[k] == n:
                            blocks.append(read_frames(handle, pattern, start, count, pads[k]))
                        elif counts[k] == 1:
                            if k not in cache:
                                cache[k] = read_frames(handle, pattern, 0, 1)
                            blocks.append(np.broadcast_to(cache[k], (count, *cache[k].shape[1:])))
                        else:
                            ordinals = np.arange(start, start + count) % counts[k]
                            blocks.append(read_ordinals(handle, pattern, ordinals))
                with log.span(worker, index, name, "process", count):
                    result = plugin.process(blocks)
                if isinstance(result, np.ndarray):
                    result = [result]
                if len(result) != len(out_views):
                    raise ShapeMismatch(f"process returned {len(result)} blocks for {len(out_views)} outputs")
                with log.span(worker, index, name, "write", count):
                    for block, (ds, pattern, handle) in zip(result, out_views):
                        write_frames(handle, pattern, start, block)
        except BaseException as exc:
            errors.append(exc)

    threads = [
        threading.Thread(target=work, args=(w, part), name=f"{name}-w{w}")
        for w, part in zip(active, partition_frames(n, len(active)))
        if len(part)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()  # end barrier
    if errors:
        raise PluginFailure(index, errors[0]) from errors[0]

    try:
        with log.span(0, index, name, "post"):
            plugin.post_process()
    except Exception as exc:
        raise PluginFailure(index, exc) from exc


def _container_name(index: int, name: str) -> str:
    return f"p{index}_{name}.cnt"


def run_chain(data_paths: Sequence[str], process_list: ProcessList, output_dir, options: RunOptions | None = None,
              ) -> RunManifest:
    options = options or RunOptions()
    log = EventLog()
    plan = plan_chain(process_list, data_paths, log)
    if plan.report:
        raise ValidationFailed(plan.report)
    if options.n_workers < 1:
        raise ValueError("n_workers must be >= 1")
    if options.chunk_policy not in CHUNK_POLICIES:
        raise ValueError(f"chunk_policy must be one of {CHUNK_POLICIES}")
    for b in plan.processing:
        if b.plugin.driver is Driver.ACCELERATOR and options.n_accelerators < 1:
            raise NoAccelerators(f"plugin {b.index} ({b.name}) needs an accelerator; none configured")

    output_dir = Path(output_dir)
    inter_dir = Path(options.inter_dir) if options.inter_dir else output_dir
    output_dir.mkdir(parents=True, exist_ok=True)
    inter_dir.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(output_dir, inter_dir, options.n_workers, options.n_accelerators, options.cache_bytes, log,
                     options.chunk_policy)
    saver: Saver = plan.saver.plugin
    manifest = RunManifest(options.run_id or uuid.uuid4().hex[:12], [str(Path(p).resolve()) for p in data_paths])
    records = {e.index: PluginRecord(e.index, e.name, dict(e.params)) for e in process_list.active()}

    try:
        for binding in plan.loaders:
            _run_loader(binding, plan, ctx, saver, records[binding.index])
        for binding in plan.processing:
            _run_processing(binding, plan, ctx, saver, records[binding.index])
        _run_saver(plan.saver, ctx, records[plan.saver.index])
    except PluginFailure as exc:
        manifest.status, manifest.error = "failed", str(exc)
        raise
    finally:
        for state in ctx.handles:
            manifest.io.append({
                "dataset": state.descriptor.name,
                "path": str(state.path),
                "chunks_read": state.handle.chunks_read,
                "chunks_written": state.handle.chunks_written,
            })
            state.handle.close()
        manifest.plugins = [records[e.index] for e in process_list.active()]
        for rec in manifest.plugins:
            rec.outputs = [o for o in rec.outputs if Path(o.path).exists()]
        manifest.final_outputs = [o for rec in manifest.plugins for o in rec.outputs if o.role == "final"]
        write_manifest(manifest, output_dir)
        if options.log_path:
            log.write(options.log_path)
    return manifest


def _run_loader(binding: Binding, plan: ChainPlan, ctx: RunContext, saver: Saver, record: PluginRecord) -> None:
    loader: Loader = binding.plugin
    for desc in binding.descriptors:
        consumer = _first_consumer(plan, desc.name, binding.index)
        if consumer is not None:
            access = _consumer_access(consumer, desc.name, ctx)
        else:
            access = _final_access(desc)
        path = ctx.inter_dir / _container_name(binding.index, desc.name)

        def create(d, _path=path, _access=access):
            chunks = select_chunks(d, _access, None, ctx.cache_bytes, ctx.chunk_policy)
            return saver.create(_path, d, chunks)

        with ctx.log.span(0, binding.index, binding.name, "load"):
            handle = loader.load(desc, create)
        state = DatasetState(desc, handle, Path(handle.path), "initial")
        ctx.available[desc.name] = state
        ctx.handles.append(state)
        record.outputs.append(OutputRecord(desc.name, str(Path(handle.path).resolve()), "initial"))


def _run_processing(binding: Binding, plan: ChainPlan, ctx: RunContext, saver: Saver, record: PluginRecord) -> None:
    plugin = binding.plugin
    for ds in plugin.out_data:
        now = Access(ds.pattern_obj(), ds.frames, _active_count(plugin, ctx))
        consumer = _first_consumer(plan, ds.name, binding.index)
        if consumer is None:
            role, root = "final", ctx.output_dir
            now = nxt = _final_access(ds.descriptor, now.pattern, now.frames)
        else:
            role, root = "intermediate", ctx.inter_dir
            nxt = _consumer_access(consumer, ds.name, ctx)
        chunks = select_chunks(ds.descriptor, now, nxt, ctx.cache_bytes, ctx.chunk_policy)
        path = root / _container_name(binding.index, ds.name)
        handle = saver.create(path, ds.descriptor, chunks)
        state = DatasetState(ds.descriptor, handle, path, role)
        ctx.pending[ds.name] = state
        ctx.handles.append(state)
        record.outputs.append(OutputRecord(ds.name, str(path.resolve()), role))

    execute_plugin(binding, ctx)
    for name in binding.out_names:
        replace_dataset(ctx, name)


def _run_saver(binding: Binding, ctx: RunContext, record: PluginRecord) -> None:
    """Copy loader datasets that survived to the end into the output directory."""
    saver: Saver = binding.plugin
    survivors = [(n, st) for n, st in ctx.available.items() if st.role == "initial"]
    for name, state in survivors:
        desc = state.descriptor
        chunks = select_chunks(desc, _final_access(desc), None, ctx.cache_bytes, ctx.chunk_policy)
        path = ctx.output_dir / _container_name(binding.index, name)
        with ctx.log.span(0, binding.index, binding.name, "write"):
            handle = saver.copy(state.handle, path, chunks, ctx.cache_bytes)
        copied = DatasetState(desc, handle, path, "final")
        ctx.available[name] = copied
        ctx.handles.append(copied)
        record.outputs.append(OutputRecord(name, str(path.resolve()), "final"))
