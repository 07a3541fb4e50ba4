"""Gamma-bounded piecewise linear fitting of (LPA, PPA) batches.

A fitted segment predicts ppa = ceil(K * x + I) where x is the LPA offset
within the segment's 256-LPA group, K is a binary16 slope and I an intercept
in absolute PPA units.  Approximate segments guarantee |prediction - ppa| <=
gamma for every member; accurate segments predict exactly and their members
form an arithmetic LPA progression so membership is decidable from the slope
alone (stride = ceil(1/K)).

The learner is a two-phase greedy: maximal stride runs (constant LPA step,
PPA step exactly 1, at least RUN_MIN members) become accurate segments, and
the leftover stretches are fitted with a streaming feasible-slope cone.  Run
extraction does not depend on gamma, which keeps the output monotone: a wider
gamma never yields more segments or more CRB bytes on the same input.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

GROUP_SIZE = 256
# Minimum members for the run-extraction phase.  Shorter runs are cheaper to
# keep inside an approximate segment's CRB run (1 byte/member) than as an
# extra 8-byte segment.
RUN_MIN = 8
# Exact runs of this many points or more always stay their own segment;
# approximate segments may absorb at most shorter ones (see _dp_stretch).
PROTECTED_RUN = 4
# Extra cost charged to an approximate piece when choosing the partition.
# An absorbed exact run keeps paying conflict bytes after its neighbours
# are overwritten, so approximate only wins when it saves more than that
# worst-case penalty.  Not part of the reported memory accounting.
ABSORB_PENALTY = 3

_PACK_H = struct.Struct("<H")
_PACK_E = struct.Struct("<e")
_PACK_F = struct.Struct("<f")


class MappingPoint(NamedTuple):
    lpa: int
    ppa: int


def _f32(value: float) -> float:
    """Round to the nearest binary32, the storage precision of intercepts."""
    return _PACK_F.unpack(_PACK_F.pack(value))[0]


def decode_slope(bits: int) -> float:
    return float(_PACK_E.unpack(_PACK_H.pack(bits))[0])


def quantize_slope(slope: float, accurate: bool = True) -> int:
    """Quantize a slope in [0, 1] to binary16 bits.

    The mantissa LSB doubles as the segment type flag (0 = accurate,
    1 = approximate), so the nearest half-float with the required parity is
    chosen.  Relative decode error stays below 2**-8.
    """
    if not 0.0 <= slope <= 1.0:
        raise ValueError(f"slope out of range [0, 1]: {slope}")
    bits = _PACK_H.unpack(_PACK_E.pack(slope))[0]
    flag = 0 if accurate else 1
    if bits & 1 == flag:
        return bits
    best = None
    for cand in (bits - 1, bits + 1):
        if cand < 0:
            continue
        err = abs(decode_slope(cand) - slope)
        if best is None or err < best[0]:
            best = (err, cand)
    assert best is not None
    return best[1]


@dataclass(frozen=True)
class FittedSegment:
    """One learned segment, still carrying its member LPAs.

    start_lpa is absolute; length is last_member - start_lpa (0 for a
    single-point segment).  slope is the decoded binary16 value, intercept is
    binary32-rounded and in absolute PPA units at group offset 0.
    """

    start_lpa: int
    length: int
    slope_bits: int
    slope: float
    intercept: float
    members: tuple

    @property
    def accurate(self) -> bool:
        return (self.slope_bits & 1) == 0

    @property
    def stride(self) -> int:
        if self.length == 0:
            return 1
        return math.ceil(1.0 / self.slope)

    def predict(self, lpa: int) -> int:
        x = lpa % GROUP_SIZE
        return math.ceil(self.slope * x + self.intercept)


def requantize_check(
    segment: FittedSegment,
    points: Sequence,
    gamma: int,
    bounds: Optional[tuple] = None,
) -> bool:
    """Re-verify a segment against its members after slope quantization.

    Accurate segments must predict every member exactly and the stride
    derived from the quantized slope must reproduce the member set.
    Approximate segments must keep every member within gamma.  When bounds
    (min_ppa, max_ppa) are given, every prediction must also land inside.
    """
    k = segment.slope
    intercept = segment.intercept
    base = segment.start_lpa - segment.start_lpa % GROUP_SIZE
    for lpa, ppa in points:
        pred = math.ceil(k * (lpa - base) + intercept)
        if segment.accurate:
            if pred != ppa:
                return False
        elif abs(pred - ppa) > gamma:
            return False
        if bounds is not None and not bounds[0] <= pred <= bounds[1]:
            return False
    if segment.accurate and segment.length > 0:
        stride = segment.members[1] - segment.members[0]
        if math.ceil(1.0 / k) != stride:
            return False
        if segment.length % stride != 0:
            return False
    return True


_ACC_SLOPE_CACHE: dict = {}


def _accurate_slope_bits(stride: int) -> Optional[int]:
    """Even-LSB binary16 slope k with ceil(1/k) == stride, minimizing k.

    Needs k >= 1/stride (so the stride round-trips) while keeping the total
    prediction drift over a group below 1 page; returns None when binary16
    cannot represent such a slope.
    """
    bits = _ACC_SLOPE_CACHE.get(stride)
    if stride in _ACC_SLOPE_CACHE:
        return bits
    target = 1.0 / stride
    base = _PACK_H.unpack(_PACK_E.pack(target))[0] & ~1
    best = None
    for cand in (base - 2, base, base + 2, base + 4):
        if cand < 0:
            continue
        k = decode_slope(cand)
        if k < target or k > 1.0:
            continue
        if stride > 1 and k >= 1.0 / (stride - 1):
            continue
        if best is None or k < best[1]:
            best = (cand, k)
    result = best[0] if best else None
    _ACC_SLOPE_CACHE[stride] = result
    return result


def _single_point(base: int, x: int, y: int) -> FittedSegment:
    return FittedSegment(base + x, 0, 0, 0.0, float(y), (base + x,))


def _fit_run(base, pts, stride) -> Optional[FittedSegment]:
    """Fit an accurate segment over an arithmetic run (PPA step exactly 1)."""
    bits = _accurate_slope_bits(stride)
    if bits is None:
        return None
    k = decode_slope(bits)
    x0, y0 = pts[0]
    span = pts[-1][0] - x0
    # k >= 1/stride, so predictions drift upward along the run; anchor the
    # intercept so the last member lands exactly and the drift stays < 1.
    drift = span * k - span / stride
    if drift >= 0.9:
        return None
    intercept = _f32(y0 - k * x0 - drift)
    seg = FittedSegment(
        base + x0, span, bits, k, intercept, tuple(base + x for x, _ in pts)
    )
    if not requantize_check(seg, [(base + x, y) for x, y in pts], 0):
        return None
    return seg


def _fit_approximate(base, pts, gamma, lo, hi, bounds) -> Optional[FittedSegment]:
    x0, y0 = pts[0]
    k_mid = (lo + hi) / 2.0
    if k_mid <= 0.0:
        return None
    bits = quantize_slope(min(k_mid, 1.0), accurate=False)
    k = decode_slope(bits)
    if k > 1.0 or k <= 0.0:
        bits -= 2
        if bits < 0:
            return None
        k = decode_slope(bits)
    # The cone corridor is centred half a page below each PPA so that the
    # ceil in predict() lands on the PPA itself rather than one past it.
    intercept = _f32(y0 - 0.5 - k * x0)
    seg = FittedSegment(
        base + x0,
        pts[-1][0] - x0,
        bits,
        k,
        intercept,
        tuple(base + x for x, _ in pts),
    )
    if not requantize_check(seg, [(base + x, y) for x, y in pts], gamma, bounds):
        return None
    return seg


def _learn_stretch(base, pts, gamma, bounds, out) -> None:
    """Fit one leftover stretch (group-relative points).

    gamma=0 uses the streaming cone with the stride rule; gamma>0 picks the
    partition with the fewest encoded bytes (see _dp_stretch), which makes
    table size non-increasing as gamma widens.
    """
    if gamma > 0:
        _dp_stretch(base, pts, gamma, bounds, out)
        return
    n = len(pts)
    start = 0
    while start < n:
        x0, y0 = pts[start]
        lo, hi = 0.0, 1.0
        end = start
        stride = None
        prev_x, prev_y = x0, y0
        for i in range(start + 1, n):
            x, y = pts[i]
            ylo, yhi = y - gamma, y + gamma
            if bounds is not None:
                if ylo < bounds[0]:
                    ylo = bounds[0]
                if yhi > bounds[1]:
                    yhi = bounds[1]
            dx = x - x0
            nlo = (ylo - y0) / dx
            nhi = (yhi - y0) / dx
            if nlo > lo:
                lo = nlo
            if nhi < hi:
                hi = nhi
            if lo > hi:
                break
            if gamma == 0:
                # Exact mode only keeps arithmetic progressions so that the
                # resulting segments stay accurate (stride-decidable).
                step = x - prev_x
                if y - prev_y != 1 or (stride is not None and step != stride):
                    break
                stride = step
            prev_x, prev_y = x, y
            end = i
        _emit(base, pts[start : end + 1], gamma, lo, hi, bounds, out)
        start = end + 1


def _dp_stretch(base, pts, gamma, bounds, out) -> None:
    """Byte-minimal partition of a leftover stretch into segments.

    A piece costs 8 bytes when it is a single point or an exact run
    (constant LPA stride, PPA step exactly 1) and 9 + len bytes as an
    approximate segment (8-byte encoding plus its conflict-resolution run).
    Both piece families are prefix-closed, and every line feasible at gamma
    stays feasible at any wider gamma, so the optimum found here is
    non-increasing in gamma for the same input.

    Exact runs of PROTECTED_RUN or more points are never folded into an
    approximate segment: the 8-byte run encoding is already at least as
    small, and an absorbed run keeps paying per-member conflict bytes after
    neighbouring members are overwritten.  The constraint depends only on
    the run structure, not on gamma, so it preserves the monotonicity above.
    """
    n = len(pts)
    # run_ext[j]: furthest i such that pts[j..i] is an exact run.
    run_ext = [j for j in range(n)]
    for j in range(n):
        i = j
        stride = None
        while i + 1 < n and pts[i + 1][1] - pts[i][1] == 1:
            step = pts[i + 1][0] - pts[i][0]
            if stride is None:
                stride = step
            elif step != stride:
                break
            i += 1
        run_ext[j] = i
    # cone_cap[j]: furthest index an approximate piece starting at j may
    # reach without fully containing a protected run (suffix minimum).
    cone_cap = [n - 1] * n
    cap = n - 1
    for j in range(n - 1, -1, -1):
        if run_ext[j] - j + 1 >= PROTECTED_RUN:
            here = j + PROTECTED_RUN - 2
            if here < cap:
                cap = here
        cone_cap[j] = cap
    # cone_ext[j]: furthest i such that a gamma-feasible line covers pts[j..i].
    cone_ext = [j] * n
    for j in range(n):
        x0, y0 = pts[j]
        lo, hi = 0.0, 1.0
        end = j
        for i in range(j + 1, cone_cap[j] + 1):
            x, y = pts[i]
            ylo, yhi = y - gamma, y + gamma
            if bounds is not None:
                if ylo < bounds[0]:
                    ylo = bounds[0]
                if yhi > bounds[1]:
                    yhi = bounds[1]
            dx = x - x0
            nlo = (ylo - y0) / dx
            nhi = (yhi - y0) / dx
            if nlo > lo:
                lo = nlo
            if nhi < hi:
                hi = nhi
            if lo > hi:
                break
            end = i
        cone_ext[j] = end
    # dp[i] = (bytes, segments) for the best partition of pts[:i];
    # ties prefer fewer segments so wider gamma never returns more of them.
    inf = (1 << 60, 1 << 60)
    dp = [inf] * (n + 1)
    dp[0] = (0, 0)
    back = [0] * (n + 1)
    for j in range(n):
        bj, sj = dp[j]
        if bj >= inf[0]:
            continue
        top = max(run_ext[j], cone_ext[j])
        for i in range(j, top + 1):
            if i <= run_ext[j]:
                cost = 8
            elif i <= cone_ext[j]:
                cost = 9 + (i - j + 1) + ABSORB_PENALTY
            else:
                continue
            cand = (bj + cost, sj + 1)
            if cand < dp[i + 1]:
                dp[i + 1] = cand
                back[i + 1] = j
    cuts = []
    i = n
    while i > 0:
        j = back[i]
        cuts.append((j, i))
        i = j
    for j, i in reversed(cuts):
        piece = pts[j:i]
        lo, hi = _piece_cone(piece, gamma, bounds) if len(piece) > 1 else (0.0, 1.0)
        _emit(base, piece, gamma, lo, hi, bounds, out)


def _piece_cone(pts, gamma, bounds):
    """Feasible-slope interval for an approximate fit over pts."""
    x0, y0 = pts[0]
    lo, hi = 0.0, 1.0
    for x, y in pts[1:]:
        ylo, yhi = y - gamma, y + gamma
        if bounds is not None:
            if ylo < bounds[0]:
                ylo = bounds[0]
            if yhi > bounds[1]:
                yhi = bounds[1]
        dx = x - x0
        nlo = (ylo - y0) / dx
        nhi = (yhi - y0) / dx
        if nlo > lo:
            lo = nlo
        if nhi < hi:
            hi = nhi
    return lo, hi


def _emit(base, pts, gamma, lo, hi, bounds, out) -> None:
    if len(pts) == 1:
        out.append(_single_point(base, pts[0][0], pts[0][1]))
        return
    strides = {pts[i + 1][0] - pts[i][0] for i in range(len(pts) - 1)}
    steps = {pts[i + 1][1] - pts[i][1] for i in range(len(pts) - 1)}
    if len(strides) == 1 and steps == {1}:
        seg = _fit_run(base, pts, strides.pop())
        if seg is not None:
            out.append(seg)
            return
    seg = _fit_approximate(base, pts, gamma, lo, hi, bounds)
    if seg is not None:
        out.append(seg)
        return
    # Quantization pushed a prediction out of tolerance; split and refit.
    mid = len(pts) // 2
    _learn_stretch(base, pts[:mid], gamma, bounds, out)
    _learn_stretch(base, pts[mid:], gamma, bounds, out)


def _learn_group(base, pts, gamma, bounds, out) -> None:
    n = len(pts)
    pending_start = 0
    i = 0
    while i < n:
        # Maximal run starting at i: constant LPA stride, PPA step exactly 1.
        j = i
        stride = None
        while j + 1 < n and pts[j + 1][1] - pts[j][1] == 1:
            step = pts[j + 1][0] - pts[j][0]
            if stride is None:
                stride = step
            elif step != stride:
                break
            j += 1
        if j - i + 1 >= RUN_MIN:
            seg = _fit_run(base, pts[i : j + 1], stride)
            if seg is not None:
                if pending_start < i:
                    _learn_stretch(base, pts[pending_start:i], gamma, bounds, out)
                out.append(seg)
                i = j + 1
                pending_start = i
                continue
        i += 1
    if pending_start < n:
        _learn_stretch(base, pts[pending_start:], gamma, bounds, out)


def learn_segments(
    points: Sequence,
    gamma: int,
    bounds: Optional[tuple] = None,
) -> list:
    """Fit segments over a batch of (lpa, ppa) pairs sorted by LPA.

    Segments never cross a 256-LPA group boundary.  When bounds
    (min_ppa, max_ppa) are supplied, every prediction of every returned
    segment is guaranteed to land inside them; the FTL uses this to pin
    predictions to the flash block that holds the batch.

    Returns segments in LPA order; their member tuples partition the input.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    out: list = []
    group_pts: list = []
    group_id = None
    prev_lpa = None
    for lpa, ppa in points:
        if prev_lpa is not None and lpa <= prev_lpa:
            raise ValueError("batch LPAs must be strictly increasing")
        prev_lpa = lpa
        gid = lpa // GROUP_SIZE
        if gid != group_id:
            if group_pts:
                base = group_id * GROUP_SIZE
                _learn_group(base, group_pts, gamma, bounds, out)
            group_id = gid
            group_pts = []
        group_pts.append((lpa % GROUP_SIZE, ppa))
    if group_pts:
        _learn_group(group_id * GROUP_SIZE, group_pts, gamma, bounds, out)
    return out
