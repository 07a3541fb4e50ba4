"""Trace sources: MSR-format block traces and seeded synthetic generators.

Events are page-granular after expansion: a trace record covering several
pages becomes one event per page.  All generators are deterministic for a
given seed so runs can be replayed bit for bit.
"""

from __future__ import annotations

import csv
import io
from typing import Iterator, NamedTuple

import numpy as np

SYNTH_KINDS = ("sequential", "random", "strided", "zipf", "mixed")


class TraceEvent(NamedTuple):
    timestamp_ns: int
    op: str  # 'r' or 'w'
    lpa: int
    pages: int


class TraceError(ValueError):
    pass


def parse_msr(lines, page_size: int = 4096, strict: bool = False) -> Iterator[TraceEvent]:
    """Parse MSR Cambridge style CSV records:
    timestamp, hostname, disk, type, offset_bytes, size_bytes, response_us.
    Timestamps are 100ns ticks.  Malformed lines are skipped unless strict."""
    if isinstance(lines, (str, bytes)):
        lines = io.StringIO(lines if isinstance(lines, str) else lines.decode())
    for lineno, row in enumerate(csv.reader(lines), 1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        try:
            ts = int(row[0]) * 100
            op = row[3].strip().lower()
            if op in ("read", "r"):
                op = "r"
            elif op in ("write", "w"):
                op = "w"
            else:
                raise ValueError(f"bad op {row[3]!r}")
            offset = int(row[4])
            size = int(row[5])
            if offset < 0 or size <= 0:
                raise ValueError("negative offset or empty request")
        except (ValueError, IndexError) as exc:
            if strict:
                raise TraceError(f"line {lineno}: {exc}") from exc
            continue
        lpa = offset // page_size
        last = (offset + size - 1) // page_size
        yield TraceEvent(ts, op, lpa, last - lpa + 1)


def synth(
    kind: str,
    count: int,
    pages: int,
    seed: int = 0,
    stride: int = 2,
    theta: float = 0.99,
    read_ratio: float = 0.0,
    start_lpa: int = 0,
) -> list:
    """Generate `count` single-page events over an LPA space of `pages`."""
    if kind not in SYNTH_KINDS:
        raise TraceError(f"unknown synthetic kind {kind!r}")
    rng = np.random.default_rng(seed)
    if kind == "sequential":
        lpas = (start_lpa + np.arange(count)) % pages
    elif kind == "strided":
        lpas = (start_lpa + np.arange(count) * stride) % pages
    elif kind == "random":
        lpas = rng.integers(0, pages, size=count)
    elif kind == "zipf":
        # rank-frequency law over the page population, sampled by CDF inversion
        n = min(pages, 1 << 16)
        weights = 1.0 / np.arange(1, n + 1) ** theta
        cdf = np.cumsum(weights)
        cdf /= cdf[-1]
        ranks = np.searchsorted(cdf, rng.random(count))
        # spread hot ranks across the space deterministically
        lpas = (ranks * 2654435761) % pages
    else:  # mixed: half sequential runs, half random
        lpas = rng.integers(0, pages, size=count)
        pos = start_lpa
        i = 0
        run = 0
        while i < count:
            if run == 0:
                if rng.random() < 0.5:
                    run = int(rng.integers(8, 64))
                    pos = int(rng.integers(0, pages))
                else:
                    i += 1
                    continue
            lpas[i] = pos % pages
            pos += 1
            run -= 1
            i += 1
    if read_ratio > 0.0:
        reads = rng.random(count) < read_ratio
    else:
        reads = None
    out = []
    ts = 0
    for i, lpa in enumerate(lpas):
        op = "r" if reads is not None and reads[i] else "w"
        out.append(TraceEvent(ts, op, int(lpa), 1))
        ts += 1000
    return out


def expand(events, logical_pages: int) -> Iterator[tuple]:
    """Flatten multi-page events into (op, lpa) pairs, wrapping LPAs into
    the device's logical space."""
    for ev in events:
        op = ev.op
        base = ev.lpa
        for k in range(ev.pages):
            yield op, (base + k) % logical_pages
