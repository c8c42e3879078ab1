import itertools
import struct
import threading
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, HealthCheck, strategies as st

from framepipe.data import DatasetDescriptor, DType, Pattern, frame_count, frame_coords
from framepipe.errors import (
    BadMagic,
    InvalidChunkShape,
    IoFailure,
    ShapeMismatch,
    UnsupportedVersion,
)
from framepipe.storage import (
    OutputRecord,
    PluginRecord,
    RunManifest,
    create_container,
    open_container,
    read_frames,
    read_header,
    read_manifest,
    write_frames,
    write_manifest,
)

PROJ = Pattern("PROJECTION", (2, 1), (0,))
SINO = Pattern("SINOGRAM", (2, 0), (1,))


def desc(shape, patterns=(PROJ, SINO), dtype=DType.F32, name="tomo"):
    labels = [f"d{i}.px" for i in range(len(shape))]
    return DatasetDescriptor(name, shape, dtype, labels, {p.name: p for p in patterns})


def frame_oracle(array, pattern, ordinal):
    """Direct numpy indexing of one frame, core axes in core_dims order."""
    d = DatasetDescriptor("o", array.shape, DType.F64, ["a"] * array.ndim, {pattern.name: pattern})
    index = [slice(None)] * array.ndim
    for dim, k in zip(pattern.slice_dims, frame_coords(d, pattern.name, ordinal)):
        index[dim] = k
    sub = array[tuple(index)]
    remaining = [dim for dim in range(array.ndim) if dim in pattern.core_dims]
    return sub.transpose([remaining.index(dim) for dim in pattern.core_dims])


def test_index_slots(tmp_path):
    with create_container(tmp_path / "a.cnt", desc((4, 4), [Pattern("P", (1,), (0,))]), (2, 2)) as h:
        assert h.header.n_chunks == 4
    with create_container(tmp_path / "b.cnt", desc((3, 5), [Pattern("P", (1,), (0,))]), (2, 2)) as h:
        assert h.header.grid == (2, 3) and h.header.n_chunks == 6
    with pytest.raises(InvalidChunkShape):
        create_container(tmp_path / "c.cnt", desc((3, 5), [Pattern("P", (1,), (0,))]), (0, 2))
    with pytest.raises(InvalidChunkShape):
        create_container(tmp_path / "c.cnt", desc((3, 5), [Pattern("P", (1,), (0,))]), (4, 2))


def test_header_bytes_exact(tmp_path):
    d = DatasetDescriptor("ab", (3, 5), DType.U16, ["x", "y"], {"P": Pattern("P", (1,), (0,))})
    expected = (
        b"SAVUCNT1"
        + struct.pack("<IBB", 1, 1, 2)
        + struct.pack("<2Q", 3, 5)
        + struct.pack("<2Q", 2, 2)
        + b"\x02\x00ab"
        + b"\x02" + b"\x01\x00x" + b"\x01\x00y"
        + b"\x01" + b"\x01\x00P" + b"\x01\x01" + b"\x01\x00"
    )
    with create_container(tmp_path / "h.cnt", d, (2, 2)):
        pass
    raw = (tmp_path / "h.cnt").read_bytes()
    assert raw[: len(expected)] == expected
    assert raw[len(expected) : len(expected) + 48] == bytes(48)  # 6 zeroed index slots
    assert len(raw) == len(expected) + 48 + 6 * 2 * 2 * 2


def test_header_round_trip_and_errors(tmp_path):
    d = desc((4, 3, 2), [PROJ, SINO, Pattern("ALL", (0, 1, 2), ())])
    with create_container(tmp_path / "a.cnt", d, (1, 3, 2)):
        pass
    header = read_header(tmp_path / "a.cnt")
    assert header.descriptor == d.replace(metadata={})
    assert header.chunk_shape == (1, 3, 2)
    raw = (tmp_path / "a.cnt").read_bytes()
    (tmp_path / "short").write_bytes(raw[:5])
    with pytest.raises(BadMagic):
        read_header(tmp_path / "short")
    (tmp_path / "nover").write_bytes(raw[:10])
    with pytest.raises(UnsupportedVersion):
        read_header(tmp_path / "nover")
    (tmp_path / "v2").write_bytes(raw[:8] + struct.pack("<I", 2) + raw[12:])
    with pytest.raises(UnsupportedVersion):
        read_header(tmp_path / "v2")
    with pytest.raises(IoFailure):
        read_header(tmp_path / "absent")


def test_constant_read(tmp_path):
    d = desc((4, 2, 3))
    with create_container(tmp_path / "a.cnt", d, (2, 1, 3)) as h:
        h.write_all(np.full(d.shape, 7.5))
        block = read_frames(h, "SINOGRAM", 0, 1)
        assert block.shape == (1, 3, 4)  # (x, theta)
        assert np.all(block == 7.5)


def test_padded_read_replicates_edges(tmp_path):
    d = desc((4, 2, 3))
    data = np.arange(24, dtype=np.float32).reshape(d.shape)
    with create_container(tmp_path / "a.cnt", d, (2, 1, 2)) as h:
        h.write_all(data)
        block = read_frames(h, "SINOGRAM", 0, 2, padding=1)
        assert block.shape == (4, 3, 4)
        expect_y = [0, 0, 1, 1]
        for k, y in enumerate(expect_y):
            np.testing.assert_array_equal(block[k], data[:, y, :].T)


def test_padded_read_rejects_wrap(tmp_path):
    d = desc((2, 3, 2, 2), [Pattern("SINOGRAM", (2, 0), (1, 3))])
    with create_container(tmp_path / "a.cnt", d, (1, 1, 1, 1)) as h:
        read_frames(h, "SINOGRAM", 0, 3, padding=1)
        with pytest.raises(ValueError):
            read_frames(h, "SINOGRAM", 2, 2, padding=1)


def test_unwritten_reads_zero_and_shape_mismatch(tmp_path):
    d = desc((4, 2, 3))
    with create_container(tmp_path / "a.cnt", d, (1, 2, 3)) as h:
        write_frames(h, "PROJECTION", 0, np.ones((1, 3, 2)))
        np.testing.assert_array_equal(read_frames(h, "PROJECTION", 1, 1), np.zeros((1, 3, 2)))
        np.testing.assert_array_equal(read_frames(h, "PROJECTION", 0, 1), np.ones((1, 3, 2)))
        with pytest.raises(ShapeMismatch):
            write_frames(h, "PROJECTION", 0, np.ones((1, 2, 3)))


def test_read_only_handle_refuses_writes(tmp_path):
    d = desc((2, 2, 2))
    create_container(tmp_path / "a.cnt", d, (1, 2, 2)).close()
    with open_container(tmp_path / "a.cnt") as h:
        with pytest.raises(IoFailure):
            write_frames(h, "PROJECTION", 0, np.ones((1, 2, 2)))


def test_last_batch_clipped(tmp_path):
    d = desc((5, 2, 3))
    with create_container(tmp_path / "a.cnt", d, (2, 2, 3)) as h:
        assert read_frames(h, "PROJECTION", 3, 4).shape == (2, 3, 2)


@st.composite
def layouts(draw):
    ndims = draw(st.integers(1, 4))
    shape = tuple(draw(st.lists(st.integers(1, 5), min_size=ndims, max_size=ndims)))
    chunks = tuple(draw(st.integers(1, s)) for s in shape)
    dims = draw(st.permutations(range(ndims)))
    n_core = draw(st.integers(0, ndims))
    pattern = Pattern("P", dims[:n_core], dims[n_core:])
    m = draw(st.integers(1, 4))
    workers = draw(st.integers(1, 3))
    return shape, chunks, pattern, m, workers


@settings(max_examples=60, suppress_health_check=[HealthCheck.function_scoped_fixture], deadline=None)
@given(layouts(), st.integers(0, 2**32 - 1))
def test_round_trip_any_partition(tmp_path, layout, seed):
    shape, chunks, pattern, m, workers = layout
    d = desc(shape, [pattern], DType.F64)
    data = np.random.default_rng(seed).normal(size=shape)
    n = frame_count(d, "P")
    path = tmp_path / f"rt_{seed}.cnt"
    with create_container(path, d, chunks) as h:
        bounds = np.linspace(0, n, workers + 1).astype(int)

        def work(lo, hi):
            for s in range(lo, hi, m):
                frames = np.stack([frame_oracle(data, pattern, k) for k in range(s, min(s + m, hi))])
                write_frames(h, "P", s, frames)

        threads = [threading.Thread(target=work, args=(lo, hi)) for lo, hi in zip(bounds[:-1], bounds[1:])]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        np.testing.assert_array_equal(h.read_all(), data)
        for s in range(0, n, m):
            got = read_frames(h, "P", s, m)
            want = np.stack([frame_oracle(data, pattern, k) for k in range(s, min(s + m, n))])
            np.testing.assert_array_equal(got, want)


def brute_force_chunks_for_frame(shape, chunks, pattern, coords):
    """Enumerate every grid cell and test it against the frame hyperslab."""
    lo, hi = [0] * len(shape), list(shape)
    for dim, k in zip(pattern.slice_dims, coords):
        lo[dim], hi[dim] = k, k + 1
    count = 0
    for key in itertools.product(*(range(-(-s // c)) for s, c in zip(shape, chunks))):
        if all(k * c < h and (k + 1) * c > l for k, c, l, h in zip(key, chunks, lo, hi)):
            count += 1
    return count


@settings(max_examples=60, suppress_health_check=[HealthCheck.function_scoped_fixture], deadline=None)
@given(layouts())
def test_single_frame_chunk_accounting(tmp_path, layout):
    shape, chunks, pattern, _, _ = layout
    d = desc(shape, [pattern], DType.U16)
    with create_container(tmp_path / "acc.cnt", d, chunks) as h:
        for k in range(frame_count(d, "P")):
            before = h.chunks_read
            read_frames(h, "P", k, 1)
            coords = frame_coords(d, "P", k)
            assert h.chunks_read - before == brute_force_chunks_for_frame(shape, chunks, pattern, coords)


def test_frame_shaped_chunk_reads_one(tmp_path):
    d = desc((6, 4, 5))
    with create_container(tmp_path / "a.cnt", d, (1, 4, 5)) as h:
        for k in range(6):
            read_frames(h, "PROJECTION", k, 1)
        assert h.chunks_read == 6


def test_edge_chunk_padding_never_leaks(tmp_path):
    d = desc((3, 5, 5))
    data = np.arange(75, dtype=np.float32).reshape(d.shape)
    with create_container(tmp_path / "a.cnt", d, (2, 4, 4)) as h:
        h.write_all(data)
        # poison the out-of-bounds part of every edge chunk
        for key in itertools.product(*(range(g) for g in h.header.grid)):
            slot = h._slot(key)
            chunk = h._load_chunk(slot)
            lo = [k * c for k, c in zip(key, h.header.chunk_shape)]
            mask = np.ones(chunk.shape, bool)
            mask[tuple(slice(0, max(0, s - l)) for s, l in zip(d.shape, lo))] = False
            chunk[mask] = -1.0
            h._store_chunk(slot, chunk)
        np.testing.assert_array_equal(h.read_all(), data)
        for name in ("PROJECTION", "SINOGRAM"):
            n = frame_count(d, name)
            got = read_frames(h, name, 0, n)
            want = np.stack([frame_oracle(data, d.pattern(name), k) for k in range(n)])
            np.testing.assert_array_equal(got, want)


def manifest_for(tmp_path, n_plugins=3, inter_dir=None):
    inter = Path(inter_dir or tmp_path)
    inter.mkdir(exist_ok=True)
    records = [PluginRecord(1, "SyntheticTomoLoader", {}, [])]
    for i in range(n_plugins):
        role = "final" if i == n_plugins - 1 else "intermediate"
        root = tmp_path if role == "final" else inter
        p = root / f"p{i + 2}_tomo.cnt"
        p.write_bytes(b"x")
        records.append(PluginRecord(i + 2, "Identity", {}, [OutputRecord("tomo", str(p), role)]))
    records.append(PluginRecord(n_plugins + 2, "ContainerSaver", {}, []))
    finals = [o for r in records for o in r.outputs if o.role == "final"]
    return RunManifest("run", [], records, finals)


def test_manifest_counts_and_round_trip(tmp_path):
    m = manifest_for(tmp_path)
    path = write_manifest(m, tmp_path)
    back = read_manifest(path)
    assert len([r for r in back.plugins if r.name == "Identity"]) == 3
    assert len(back.final_outputs) == 1
    assert back == m


def test_manifest_intermediate_dir(tmp_path):
    m = manifest_for(tmp_path, inter_dir=tmp_path / "scratch")
    write_manifest(m, tmp_path)
    inter = [o.path for r in m.plugins for o in r.outputs if o.role == "intermediate"]
    assert inter and all(Path(p).parent == tmp_path / "scratch" for p in inter)


def test_manifest_rejects_empty_and_missing(tmp_path):
    with pytest.raises(ValueError):
        write_manifest(RunManifest("r", []), tmp_path)
    m = manifest_for(tmp_path)
    Path(m.final_outputs[0].path).unlink()
    with pytest.raises(IoFailure):
        write_manifest(m, tmp_path)
