"""Trace parsing and synthetic generator tests."""

import pytest

from ftlsim.workload import TraceError, expand, parse_msr, synth


class TestParseMsr:
    def test_single_valid_record(self):
        events = list(parse_msr("128166372003061629,src1,0,Write,8192,4096,551\n"))
        assert len(events) == 1
        ev = events[0]
        assert ev.op == "w"
        assert ev.lpa == 2
        assert ev.pages == 1
        assert ev.timestamp_ns == 128166372003061629 * 100

    def test_multi_page_request(self):
        (ev,) = parse_msr("1,h,0,Read,4096,16384,10\n")
        assert ev.op == "r" and ev.lpa == 1 and ev.pages == 4

    def test_unaligned_request_covers_touched_pages(self):
        (ev,) = parse_msr("1,h,0,Write,6000,4096,10\n")
        assert ev.lpa == 1 and ev.pages == 2

    def test_empty_input(self):
        assert list(parse_msr("")) == []

    def test_zero_size_rejected(self):
        assert list(parse_msr("1,h,0,Write,4096,0,10\n")) == []
        with pytest.raises(TraceError):
            list(parse_msr("1,h,0,Write,4096,0,10\n", strict=True))

    def test_malformed_line_skipped_unless_strict(self):
        text = "garbage\n1,h,0,Write,0,4096,10\n"
        assert len(list(parse_msr(text))) == 1
        with pytest.raises(TraceError):
            list(parse_msr(text, strict=True))


class TestSynth:
    def test_sequential(self):
        lpas = [ev.lpa for ev in synth("sequential", 256, 1 << 20)]
        assert lpas == list(range(256))

    def test_strided(self):
        lpas = [ev.lpa for ev in synth("strided", 4, 1 << 20, stride=2)]
        assert lpas == [0, 2, 4, 6]

    def test_wraps_at_span(self):
        lpas = [ev.lpa for ev in synth("sequential", 10, 8)]
        assert lpas == [0, 1, 2, 3, 4, 5, 6, 7, 0, 1]

    @pytest.mark.parametrize("kind", ["random", "zipf", "mixed"])
    def test_seed_reproducibility(self, kind):
        a = synth(kind, 5000, 1 << 16, seed=42, read_ratio=0.3)
        b = synth(kind, 5000, 1 << 16, seed=42, read_ratio=0.3)
        assert a == b
        c = synth(kind, 5000, 1 << 16, seed=43, read_ratio=0.3)
        assert a != c

    def test_zipf_is_skewed(self):
        from collections import Counter

        lpas = Counter(ev.lpa for ev in synth("zipf", 20000, 1 << 16, seed=1))
        top = sum(n for _, n in lpas.most_common(20))
        assert top > 20000 * 0.05  # head carries well above uniform share

    def test_all_lpas_in_range(self):
        for kind in ("sequential", "random", "strided", "zipf", "mixed"):
            for ev in synth(kind, 2000, 500, seed=3):
                assert 0 <= ev.lpa < 500

    def test_read_ratio(self):
        evs = synth("random", 10000, 1 << 16, seed=7, read_ratio=0.5)
        reads = sum(1 for ev in evs if ev.op == "r")
        assert 4000 < reads < 6000

    def test_unknown_kind(self):
        with pytest.raises(TraceError):
            synth("pareto", 10, 100)


class TestExpand:
    def test_multi_page_split_and_wrap(self):
        events = list(parse_msr("1,h,0,Write,4096,12288,10\n"))
        pairs = list(expand(events, logical_pages=3))
        assert pairs == [("w", 1), ("w", 2), ("w", 0)]

    def test_in_range_unchanged(self):
        events = synth("sequential", 4, 100)
        assert [lpa for _, lpa in expand(events, 1 << 20)] == [0, 1, 2, 3]
