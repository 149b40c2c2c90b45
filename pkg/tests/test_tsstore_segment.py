"""Sealed segment files: layout, round trip, compression bound."""

import pytest

from miniops.records import SeriesKey
from miniops.tsstore.segment import MAGIC, SealedSegment, SegmentFormatError, write_segment


def test_roundtrip_multi_series(tmp_path):
    path = tmp_path / "p.seg"
    s1 = SeriesKey.of("cpu.load", server="s1")
    s2 = SeriesKey.of("cpu.load", server="s2", client="acme")
    series = {
        s1: [(1000, 0.5), (2000, 0.75), (3000, 0.25)],
        s2: [(1500, 10.0)],
    }
    write_segment(path, 0, 3_600_000, series)
    seg = SealedSegment(path)
    assert seg.t0 == 0 and seg.t1 == 3_600_000
    assert set(seg.series_keys()) == {s1, s2}
    assert seg.read_series(s1) == series[s1]
    assert seg.read_series(s2) == series[s2]
    assert seg.read_series(SeriesKey.of("cpu.load", server="nope")) == []


def test_magic_present_head_and_tail(tmp_path):
    path = tmp_path / "p.seg"
    write_segment(path, 0, 1000, {SeriesKey.of("m", server="s"): [(1, 1.0)]})
    data = path.read_bytes()
    assert data[:5] == MAGIC == b"MOPS1"
    assert data[-5:] == MAGIC


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "p.seg"
    path.write_bytes(b"XXXXX" + b"\x00" * 64)
    with pytest.raises(SegmentFormatError):
        SealedSegment(path)


def test_compression_bound_01hz_monotone_counter(tmp_path):
    """600 samples at 0.1 Hz, monotone counter: at most a quarter of raw size."""
    points = [(i * 10_000, float(200 + i)) for i in range(600)]
    path = tmp_path / "p.seg"
    size = write_segment(path, 0, 6_000_000, {SeriesKey.of("proc.count", server="s1"): points})
    assert size <= 0.25 * 16 * len(points)


def test_empty_partition_roundtrip(tmp_path):
    path = tmp_path / "p.seg"
    write_segment(path, 0, 1000, {})
    seg = SealedSegment(path)
    assert seg.series_keys() == []
