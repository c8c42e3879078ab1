"""framepipe command line: process-list configurator, runner, profiler, chunk explainer.

Exit codes: 0 success, 1 usage or I/O error, 2 process list failed
validation, 3 a plugin failed while running.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click

from . import profiler
from .chunking import DEFAULT_BUDGET, OptimizerInputs, explain
from .data import DType, Pattern
from .engine import CHUNK_POLICIES, RunOptions, check_plugin_list, frames_per_worker, run_chain
from .errors import FramepipeError, PluginFailure
from .plugin import available_plugins, get_plugin
from .process_list import ProcessList

EXIT_USAGE, EXIT_VALIDATION, EXIT_PLUGIN = 1, 2, 3


class _Group(click.Group):
    """Maps click usage errors and library errors onto the documented exit codes."""

    def main(self, args=None, prog_name=None, **extra):
        extra["standalone_mode"] = False
        try:
            code = super().main(args=args, prog_name=prog_name, **extra)
        except click.exceptions.Abort:
            click.echo("aborted", err=True)
            sys.exit(EXIT_USAGE)
        except click.ClickException as exc:
            exc.show()
            sys.exit(EXIT_USAGE)
        except (FramepipeError, OSError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_USAGE)
        sys.exit(code if isinstance(code, int) else 0)


def _value(text: str):
    """JSON if it parses, otherwise the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


@click.group(cls=_Group)
def cli():
    """Out-of-core plugin pipeline over chunked containers."""


# configurator


@cli.group()
def config():
    """Create and edit process-list files."""


list_arg = click.argument("list_file", type=click.Path(dir_okay=False))


def _load(path) -> ProcessList:
    try:
        return ProcessList.load(path)
    except FileNotFoundError:
        raise click.ClickException(f"no process list at {path}") from None
    except json.JSONDecodeError as exc:
        raise click.ClickException(f"{path} is not valid JSON: {exc}") from None


@config.command("new")
@list_arg
@click.option("--force", is_flag=True, help="Overwrite an existing file.")
def config_new(list_file, force):
    """Write an empty process list."""
    if Path(list_file).exists() and not force:
        raise click.ClickException(f"{list_file} exists (use --force)")
    ProcessList().save(list_file)
    click.echo(f"created {list_file}")


@config.command("add")
@list_arg
@click.argument("plugin")
@click.option("--at", "position", type=int, help="Insert at this index instead of appending.")
@click.option("--set", "settings", multiple=True, metavar="KEY=VALUE", help="Override a default.")
def config_add(list_file, plugin, position, settings):
    """Append PLUGIN with its default parameters."""
    plist = _load(list_file)
    params = {}
    for item in settings:
        key, sep, raw = item.partition("=")
        if not sep:
            raise click.BadParameter(f"expected KEY=VALUE, got {item!r}", param_hint="--set")
        params[key] = _value(raw)
    if position is not None and not 1 <= position <= len(plist) + 1:
        raise click.BadParameter(f"position must be in 1..{len(plist) + 1}", param_hint="--at")
    entry = plist.add(plugin, params, position)
    plist.save(list_file)
    click.echo(f"added {entry.index} {entry.name}")


@config.command("remove")
@list_arg
@click.argument("index", type=int)
def config_remove(list_file, index):
    """Remove the entry at INDEX and renumber."""
    plist = _load(list_file)
    entry = plist.remove(index)
    plist.save(list_file)
    click.echo(f"removed {index} {entry.name}")


@config.command("move")
@list_arg
@click.argument("src", type=int)
@click.argument("dst", type=int)
def config_move(list_file, src, dst):
    """Move the entry at SRC so it ends up at DST."""
    plist = _load(list_file)
    plist.move(src, dst)
    plist.save(list_file)
    click.echo(f"moved {src} -> {dst}")


@config.command("set")
@list_arg
@click.argument("index", type=int)
@click.argument("param")
@click.argument("value")
def config_set(list_file, index, param, value):
    """Set PARAM of entry INDEX. VALUE is parsed as JSON when possible."""
    plist = _load(list_file)
    plist.set_param(index, param, _value(value))
    plist.save(list_file)
    click.echo(f"set {index}.{param} = {json.dumps(_value(value))}")


@config.command("toggle")
@list_arg
@click.argument("index", type=int)
@click.option("--on/--off", default=None, help="Force a state instead of flipping it.")
def config_toggle(list_file, index, on):
    """Activate or deactivate entry INDEX."""
    plist = _load(list_file)
    entry = plist.entries[index - 1] if 1 <= index <= len(plist) else None
    state = (not entry.active) if (on is None and entry is not None) else on
    plist.set_active(index, bool(state))
    plist.save(list_file)
    click.echo(f"{index} {'on' if state else 'off'}")


@config.command("show")
@list_arg
def config_show(list_file):
    """Print entries with their parameters."""
    plist = _load(list_file)
    if not len(plist):
        click.echo("(empty)")
    for entry in plist:
        flag = "" if entry.active else "  (inactive)"
        click.echo(f"{entry.index:>3}  {entry.name}{flag}")
        for key, value in entry.params.items():
            click.echo(f"       {key} = {json.dumps(value)}")


@config.command("plugins")
@click.argument("name", required=False)
def config_plugins(name):
    """List registered plugins, or the parameter schema of NAME."""
    if name is None:
        for pname, cls in available_plugins().items():
            click.echo(f"{pname:<22} {cls.kind}")
        return
    cls = get_plugin(name)
    click.echo(f"{name} ({cls.kind}, {cls.nr_in_datasets} in, {cls.nr_out_datasets} out, {cls.driver.value})")
    for p in cls.schema():
        click.echo(f"  {p.name:<14} {p.type:<6} default={json.dumps(p.default)}  {p.doc}")


@config.command("check")
@list_arg
@click.argument("data", nargs=-1, type=click.Path(exists=True))
def config_check(list_file, data):
    """Validate the list against DATA without running anything."""
    report = check_plugin_list(_load(list_file), list(data))
    for entry in report:
        click.echo(str(entry))
    if report:
        sys.exit(EXIT_VALIDATION)
    click.echo("ok")


# runner


@cli.command()
@click.argument("data", nargs=-1, type=click.Path(exists=True))
@click.argument("process_list", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_dir", type=click.Path(file_okay=False))
@click.option("--workers", default=1, show_default=True, type=click.IntRange(1))
@click.option("--accelerators", default=0, show_default=True, type=click.IntRange(0))
@click.option("--inter-dir", type=click.Path(file_okay=False), help="Where intermediate containers go.")
@click.option("--cache-bytes", default=DEFAULT_BUDGET, show_default=True, type=click.IntRange(1),
              help="Chunk byte budget.")
@click.option("--log", "log_path", type=click.Path(dir_okay=False), help="Event log (default OUTPUT_DIR/run.log).")
@click.option("--chunk-policy", type=click.Choice(CHUNK_POLICIES), default="optimized", show_default=True)
def run(data, process_list, output_dir, workers, accelerators, inter_dir, cache_bytes, log_path, chunk_policy):
    """Run PROCESS_LIST over DATA, writing results to OUTPUT_DIR."""
    plist = _load(process_list)
    report = check_plugin_list(plist, list(data))
    if report:
        click.echo("process list failed validation:", err=True)
        for entry in report:
            click.echo(f"  {entry}", err=True)
        sys.exit(EXIT_VALIDATION)
    options = RunOptions(
        n_workers=workers,
        n_accelerators=accelerators,
        inter_dir=inter_dir,
        cache_bytes=cache_bytes,
        log_path=log_path or str(Path(output_dir) / "run.log"),
        chunk_policy=chunk_policy,
    )
    try:
        manifest = run_chain(list(data), plist, output_dir, options)
    except PluginFailure as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_PLUGIN)
    click.echo(str(Path(output_dir) / "manifest.json"))
    for out in manifest.final_outputs:
        click.echo(f"  {out.dataset}\t{out.path}")


# profiler


@cli.command()
@click.argument("log", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["text", "csv"]), default="text", show_default=True)
@click.option("--plot", type=click.Path(dir_okay=False), help="Also render the timeline to an image file.")
def profile(log, fmt, plot):
    """Summarise an event log per worker and plugin."""
    rows = profiler.read_log(log)
    if not rows:
        click.echo("no events")
        return
    click.echo(profiler.render_text(rows) if fmt == "text" else profiler.to_csv(rows), nl=fmt == "text")
    if plot:
        profiler.plot_timeline(rows, plot)
        click.echo(f"wrote {plot}", err=True)


# chunk optimizer


def _pattern(text: str, name: str) -> Pattern:
    """``"2,1/0"`` is core dims (2, 1) and slice dims (0,)."""
    core, sep, sl = text.partition("/")
    if not sep:
        raise click.BadParameter(f"expected CORE/SLICE such as 2,1/0, got {text!r}")
    dims = lambda s: tuple(int(v) for v in s.split(",") if v.strip())  # noqa: E731
    try:
        return Pattern(name, dims(core), dims(sl))
    except ValueError:
        raise click.BadParameter(f"bad dimension list in {text!r}") from None


@cli.group()
def chunks():
    """Chunk-shape tools."""


@chunks.command("explain")
@click.option("--shape", required=True, help="Extents, e.g. 180,128,160.")
@click.option("--dtype", type=click.Choice([d.name.lower() for d in DType]), default="f32", show_default=True)
@click.option("--now", "now_text", required=True, help="Current pattern as CORE/SLICE, e.g. 2,1/0.")
@click.option("--next", "next_text", help="Next pattern (default: same as --now).")
@click.option("--frames", default=1, show_default=True, type=click.IntRange(1))
@click.option("--workers", default=1, show_default=True, type=click.IntRange(1))
@click.option("--budget", default=DEFAULT_BUDGET, show_default=True, type=click.IntRange(1))
def chunks_explain(shape, dtype, now_text, next_text, frames, workers, budget):
    """Show how the chunk shape for one dataset is chosen."""
    try:
        extents = tuple(int(v) for v in shape.split(","))
    except ValueError:
        raise click.BadParameter(f"bad shape {shape!r}", param_hint="--shape") from None
    now = _pattern(now_text, "now")
    nxt = _pattern(next_text, "next") if next_text else Pattern("next", now.core_dims, now.slice_dims)

    def f_p(p: Pattern) -> int:
        return frames_per_worker(math.prod(extents[d] for d in p.slice_dims), workers)

    inputs = OptimizerInputs(extents, DType[dtype.upper()].byte_size, now, nxt, frames, f_p(now), f_p(nxt), budget)
    click.echo(explain(inputs))


def main() -> None:
    cli.main(prog_name="framepipe")


if __name__ == "__main__":
    main()
