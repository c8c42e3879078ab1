"""Event-log parsing and per-worker timeline rendering."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import astuple, dataclass, fields
from pathlib import Path

from .errors import MalformedLog

# lifecycle order within one plugin on one worker
PHASE_RANK = {"setup": 0, "pre": 1, "load": 2, "process": 2, "write": 2, "post": 3}
PHASE_MARK = {"setup": "s", "pre": "p", "load": "l", "process": "#", "write": "w", "post": "o"}


@dataclass(frozen=True)
class ProfileRow:
    worker: int
    plugin_index: int
    plugin_name: str
    phase: str
    start_us: int
    duration_us: int
    frames: int = 0

    @property
    def end_us(self) -> int:
        return self.start_us + self.duration_us


def parse_log(text: str) -> list[ProfileRow]:
    """Parse tab-separated event lines; rows come back sorted per worker by time."""
    rows = []
    last_rank: dict[tuple[int, int], tuple[int, str]] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 7:
            raise MalformedLog(line_no, f"expected 7 tab-separated fields, got {len(parts)}")
        ts, worker, index, name, phase, frames, duration = parts
        try:
            ts, worker, index, frames, duration = (int(v) for v in (ts, worker, index, frames, duration))
        except ValueError:
            raise MalformedLog(line_no, "non-integer numeric field") from None
        if phase not in PHASE_RANK:
            raise MalformedLog(line_no, f"unknown phase {phase!r}")
        if min(ts, worker, frames, duration) < 0:
            raise MalformedLog(line_no, "negative value")
        key = (worker, index)
        rank = PHASE_RANK[phase]
        prev = last_rank.get(key)
        if prev is not None and rank < prev[0]:
            raise MalformedLog(line_no, f"phase {phase!r} of plugin {index} on worker {worker} after {prev[1]!r}")
        last_rank[key] = (rank, phase)
        rows.append(ProfileRow(worker, index, name, phase, ts, duration, frames))
    rows.sort(key=lambda r: (r.worker, r.start_us))
    return rows


def read_log(path) -> list[ProfileRow]:
    return parse_log(Path(path).read_text(encoding="utf-8"))


def phase_totals(rows) -> dict[tuple[int, str, str], int]:
    """Summed duration per (plugin index, plugin name, phase)."""
    totals: dict[tuple[int, str, str], int] = defaultdict(int)
    for r in rows:
        totals[(r.plugin_index, r.plugin_name, r.phase)] += r.duration_us
    return dict(totals)


def to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f.name for f in fields(ProfileRow)])
    for r in rows:
        writer.writerow(astuple(r))
    return buf.getvalue()


def _ms(us: int) -> str:
    return f"{us / 1000:.1f} ms"


def render_text(rows, width: int = 60) -> str:
    """One lane per worker, one bar per plugin, scaled to the whole run."""
    if not rows:
        return "no events"
    t0 = min(r.start_us for r in rows)
    span = max(max(r.end_us for r in rows) - t0, 1)
    label_width = max(len(f"[{r.plugin_index}] {r.plugin_name}") for r in rows)

    lanes: dict[int, dict[tuple[int, str], list[ProfileRow]]] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        lanes[r.worker][(r.plugin_index, r.plugin_name)].append(r)

    out = [f"total {_ms(span)}  ({width} columns; " +
           " ".join(f"{m}={p}" for p, m in PHASE_MARK.items()) + ")"]
    for worker in sorted(lanes):
        out.append(f"worker {worker}")
        for (index, name), events in sorted(lanes[worker].items()):
            bar = [" "] * width
            for e in events:
                lo = int((e.start_us - t0) / span * width)
                hi = max(lo + 1, int((e.end_us - t0) / span * width))
                for col in range(min(lo, width - 1), min(hi, width)):
                    bar[col] = PHASE_MARK[e.phase]
            busy = sum(e.duration_us for e in events)
            label = f"[{index}] {name}".ljust(label_width)
            out.append(f"  {label} |{''.join(bar)}| {_ms(busy)}")
    return "\n".join(out)


def plot_timeline(rows, path) -> None:
    """Gantt chart of the rows as an image file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    colors = dict(zip(PHASE_MARK, plt.get_cmap("tab10").colors))
    fig, ax = plt.subplots(figsize=(10, 1 + 0.6 * max(1, len({r.worker for r in rows}))))
    t0 = min((r.start_us for r in rows), default=0)
    for r in rows:
        ax.broken_barh([((r.start_us - t0) / 1000, max(r.duration_us, 1) / 1000)], (r.worker - 0.4, 0.8),
                       facecolors=colors[r.phase])
    ax.set_xlabel("time (ms)")
    ax.set_ylabel("worker")
    workers = sorted({r.worker for r in rows})
    ax.set_yticks(workers)
    handles = [plt.Rectangle((0, 0), 1, 1, color=c) for c in colors.values()]
    ax.legend(handles, list(colors), ncol=len(colors), loc="upper center", bbox_to_anchor=(0.5, 1.25),
              frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
