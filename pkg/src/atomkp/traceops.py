"""Horizontal trace processing: segmentation, alignment, desync repair.

The pipeline mirrors how a horizontal attack preprocesses one long capture:

1. ``segment`` cuts the trace into per-block sub-traces (one per executed
   Add1/Add2/Dbl), padded on both sides with adjacent NOP samples.  It uses
   the sidecar markers when present and otherwise infers block boundaries
   from the self-describing NOP gap lengths.
2. ``align`` removes constant offsets by cross-correlating every sub-trace
   against an anchor (by default the first doubling) and shifting within the
   padding.
3. ``detect_desync``/``repair`` find *local* desynchronisation: pipeline
   stalls that shift the remainder of one block by 5 or 1 clock cycles.
   A windowed local-lag estimator tracks each member against its key-bit
   triplet's doubling; a persistent lag step marks an event, whose sign
   says whether the member or the anchor stalled; a fine scan with a
   two-hypothesis residual test pins the start; the region is removed and
   the process iterates to a fixpoint.

All window sizes, steps and thresholds live in :class:`AnalysisConfig`;
sample-count parameters describing *block content* scale with the trace's
recorded cost scale, while stall-sized parameters do not (stalls are always
``stall_cycles * samples_per_cycle`` samples long).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, signal

from .blocks import CANONICAL_KINDS
from .errors import (EmptyInput, NoConvergence, OutOfBounds,
                     SegmentationError, ShiftExceedsPadding)

_NOP_CLASS_FOR_GAP = {1000: "Add1", 2000: "Add2", 3000: "Dbl"}


@dataclass
class SubTrace:
    """One block's samples cut out of a parent trace.

    ``samples`` includes ``pad`` NOP samples on each side of the block
    content; ``origin_offset`` is where index 0 sat in the parent trace.
    ``applied_shift`` accumulates alignment shifts (positive = content was
    moved right) and ``removal_log`` records (start, length, stall_cycles)
    of every repaired region, in the coordinates at removal time.
    """

    block_class: str
    key_bit_index: int
    samples: np.ndarray
    origin_offset: int
    pad: int
    applied_shift: int = 0
    removal_log: list = field(default_factory=list)

    @property
    def ident(self) -> str:
        return f"{self.block_class.lower()}:{self.key_bit_index}"


@dataclass
class AnalysisConfig:
    """Tunables for segmentation, alignment and desync repair."""

    samples_per_cycle: int = 50
    pad_samples: int = 50000
    align_window: int = 200000
    align_max_lag: int | None = None     # defaults to pad_samples
    detect_window: int = 6000
    detect_step: int = 250
    detect_persistence: int = 3
    detect_max_lag: int = 2000
    refine_min_t: float = 4.0            # t-statistic to accept a lag switch
    repair_max_iter: int = 64
    min_gap_run: int = 1000              # segmentation: shortest real NOP gap

    @classmethod
    def from_meta(cls, meta: dict) -> "AnalysisConfig":
        """Scale the content-sized defaults by the trace's cost scale."""
        scale = int(meta.get("scale", 1))
        spc = int(meta.get("samples_per_cycle", 50))
        return cls(samples_per_cycle=spc,
                   pad_samples=max(spc, 50000 // scale),
                   align_window=max(1000, 200000 // scale))


@dataclass
class DesyncEvent:
    """A detected stall: ``subtrace`` owns it at ``start`` (current coords)."""

    subtrace: SubTrace
    start: int
    stall_cycles: int
    length: int
    observed_in: str       # ident of the member whose lag series showed it


@dataclass
class AlignmentResult:
    anchor: str
    shifts: dict
    residual_lags: dict = field(default_factory=dict)


# -- segmentation ------------------------------------------------------------


def segment(trace, cfg: AnalysisConfig | None = None) -> list:
    """Cut a trace into padded per-block sub-traces.

    Uses sidecar block markers when available, otherwise infers boundaries
    from the NOP gap structure.  Raises SegmentationError when the trace
    cannot be cut (no padding room, no gaps, unclassifiable gaps).
    """
    if cfg is None:
        cfg = AnalysisConfig.from_meta(trace.meta)
    markers = trace.block_markers()
    if not markers:
        markers = _infer_markers(trace, cfg)
    n = trace.num_samples
    pad = cfg.pad_samples
    out = []
    for m in markers:
        lo = m["start"] - pad
        hi = m["start"] + m["length"] + pad
        if lo < 0 or hi > n:
            raise SegmentationError(
                f"block at {m['start']} lacks {pad} samples of NOP padding")
        out.append(SubTrace(
            block_class=m["block_class"],
            key_bit_index=m["key_bit_index"],
            samples=np.array(trace.samples[lo:hi], dtype=np.float32),
            origin_offset=lo,
            pad=pad,
        ))
    if not out:
        raise SegmentationError("no blocks found")
    return out


def _scaled_costs(meta) -> tuple | None:
    """(block cycles, {nop count: gap cycles}) from sidecar cost fields."""
    try:
        scale = int(meta["scale"])
        ops = meta["op_cycles"]
        block = sum(max(1, int(ops[k]) // scale) for k in CANONICAL_KINDS)
        gaps = {int(c): max(1, int(v) // scale)
                for c, v in meta["nop_cycles"].items()}
    except (KeyError, TypeError, ValueError):
        return None
    if set(gaps) != set(_NOP_CLASS_FOR_GAP) or scale < 1:
        return None
    return block, gaps


def _infer_markers(trace, cfg: AnalysisConfig) -> list:
    """Reconstruct block markers from amplitude structure.

    A block's trailing subtraction sits at NOP amplitude, so a threshold
    alone puts the right edge one quiet op early.  When the sidecar carries
    the cost model the uniform block length is known exactly: quiet-to-loud
    onsets give block starts, every block is snapped to that length, and
    the remaining spacing identifies the NOP gap class.  Without a cost
    model, gap-length ratios (roughly 1 : 2 : 3) classify the gaps and the
    block spans run from loud onset to the next quiet run.
    """
    x = trace.samples
    if x.size == 0:
        raise SegmentationError("empty trace")
    spc = cfg.samples_per_cycle
    smooth = ndimage.uniform_filter1d(x.astype(np.float32), max(2, spc),
                                      mode="nearest")
    lo, hi = np.percentile(smooth, [5.0, 95.0])
    if hi - lo < 1e-6:
        raise SegmentationError("trace has no amplitude structure to segment")
    quiet = smooth < (lo + hi) / 2.0

    costs = _scaled_costs(trace.meta)
    min_run = cfg.min_gap_run
    if costs is not None:
        # intra-block quiet runs top out near two addition ops; real gaps
        # start at the 1000-NOP cost, so 70% of it cleanly separates them
        min_run = max(min_run, int(0.7 * min(costs[1].values()) * spc))

    # maximal quiet runs long enough to be real gaps (stall segments are
    # only a few cycles and never reach the run floor)
    edges = np.flatnonzero(np.diff(quiet.astype(np.int8)))
    bounds = np.concatenate(([0], edges + 1, [x.size]))
    gaps = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        if quiet[a] and b - a >= min_run:
            gaps.append((int(a), int(b)))
    if len(gaps) < (1 if costs is not None else 2):
        raise SegmentationError("found no NOP gaps to segment on")

    if costs is not None:
        return _markers_by_block_length(x, gaps, costs, spc)

    shortest = min(b - a for a, b in gaps)
    def classify(length):
        r = length / shortest
        if r < 1.5:
            return 1000
        if r < 2.5:
            return 2000
        if r < 3.6:
            return 3000
        raise SegmentationError(f"gap of {length} samples does not match any "
                                "NOP class")

    markers = []
    key_bit = 1
    for (a0, b0), (a1, b1) in zip(gaps[:-1], gaps[1:]):
        if a1 <= b0:
            continue
        cls = _NOP_CLASS_FOR_GAP[classify(b1 - a1)]
        markers.append({"block_class": cls, "key_bit_index": key_bit,
                        "start": b0, "length": a1 - b0})
        if cls == "Dbl":
            key_bit += 1
    if not markers:
        raise SegmentationError("no blocks between gaps")
    return markers


def _markers_by_block_length(x, gaps, costs, spc: int) -> list:
    block_cycles, gap_cycles = costs
    block_len = block_cycles * spc
    onsets = [b for _, b in gaps if b < x.size]
    if gaps[0][0] > 0:
        onsets.insert(0, 0)      # trace starts mid-content, no lead gap
    if not onsets:
        raise SegmentationError("no blocks between gaps")
    markers = []
    key_bit = 1
    for i, start in enumerate(onsets):
        end = start + block_len
        follow = onsets[i + 1] if i + 1 < len(onsets) else x.size
        if end > follow:
            raise SegmentationError(f"block at {start} is truncated")
        g = follow - end
        count = min(gap_cycles, key=lambda c: abs(g - gap_cycles[c] * spc))
        if abs(g - gap_cycles[count] * spc) > max(2 * spc,
                                                  0.3 * gap_cycles[count] * spc):
            raise SegmentationError(f"gap of {g} samples after the block at "
                                    f"{start} does not match any NOP class")
        cls = _NOP_CLASS_FOR_GAP[count]
        markers.append({"block_class": cls, "key_bit_index": key_bit,
                        "start": start, "length": block_len})
        if cls == "Dbl":
            key_bit += 1
    return markers


# -- centring / correlation ---------------------------------------------------


def mean_center(x) -> np.ndarray:
    """x minus its mean, computed in float64 (|mean of result| <= 1e-9)."""
    x = np.asarray(x)
    if x.size == 0:
        raise EmptyInput("cannot centre an empty series")
    x = x.astype(np.float64)
    return x - x.mean()


def optimal_shift(anchor, target, max_lag: int | None = None) -> int:
    """Lag that best matches ``target`` onto ``anchor``.

    Returns s such that target[i - s] lines up with anchor[i]: a positive s
    means the target's content leads the anchor and must be moved right.
    The full cross-correlation of the mean-centred windows is normalised by
    overlap length; ties resolve to the smallest |s|.
    """
    a = mean_center(anchor)
    t = mean_center(target)
    n = min(a.size, t.size)
    a, t = a[:n], t[:n]
    c = signal.correlate(a, t, mode="full", method="fft")
    lags = np.arange(-(n - 1), n)
    counts = n - np.abs(lags)
    score = c / counts
    if max_lag is not None:
        keep = np.abs(lags) <= max_lag
        score, lags = score[keep], lags[keep]
    order = np.lexsort((np.abs(lags), -score))
    return int(lags[order[0]])


def _apply_shift(st: SubTrace, s: int):
    if s == 0:
        return
    x = st.samples
    out = np.empty_like(x)
    if s > 0:
        out[s:] = x[:-s]
        out[:s] = x[0]
    else:
        u = -s
        out[:-u] = x[u:]
        out[-u:] = x[-1]
    st.samples = out
    st.applied_shift += s


def align(subtraces, anchor: str = "dbl:1",
          cfg: AnalysisConfig | None = None) -> AlignmentResult:
    """Shift every sub-trace onto the anchor member (in place).

    Raises ShiftExceedsPadding when a required shift is larger than the
    sub-trace padding (content would fall off the array).
    """
    cfg = cfg or AnalysisConfig()
    by_id = {st.ident: st for st in subtraces}
    if anchor not in by_id:
        raise ValueError(f"anchor {anchor!r} not among sub-traces "
                         f"({sorted(by_id)})")
    ref = by_id[anchor]
    w = min(cfg.align_window, min(len(st.samples) for st in subtraces))
    result = AlignmentResult(anchor=anchor, shifts={})
    for st in subtraces:
        if st is ref:
            result.shifts[st.ident] = 0
            continue
        max_lag = cfg.align_max_lag if cfg.align_max_lag is not None else st.pad
        s = optimal_shift(ref.samples[:w], st.samples[:w], max_lag=max_lag)
        if abs(s) > st.pad:
            raise ShiftExceedsPadding(
                f"{st.ident} needs shift {s} beyond pad {st.pad}")
        _apply_shift(st, s)
        result.shifts[st.ident] = s
    return result


# -- local-lag desync detection -----------------------------------------------


def local_lag_series(anchor, member, cfg: AnalysisConfig):
    """(window starts, estimated lag per window) of member vs anchor.

    lag(t) = L means member[t + j] matches anchor[t + L + j] over the
    window: content that fell behind (a stall in the member) drives the lag
    negative; a stall in the anchor drives it positive.
    """
    am = _cycle_means(member, cfg.samples_per_cycle)
    aa = _cycle_means(anchor, cfg.samples_per_cycle)
    return _lag_series(aa, am, cfg)


def _cycle_means(x, spc: int) -> np.ndarray:
    """Mean amplitude of each full clock cycle of ``x``."""
    nc = len(x) // spc
    return (np.asarray(x[:nc * spc], dtype=np.float64)
            .reshape(nc, spc).mean(axis=1))


def _lag_series(aa, am, cfg: AnalysisConfig):
    """Core of :func:`local_lag_series` on per-cycle mean series.

    Correlating per-cycle amplitudes instead of raw samples sidesteps the
    carrier: the within-cycle shape repeats identically every cycle, so raw
    sample correlation barely distinguishes lags that are whole multiples
    of a cycle, whereas the per-cycle amplitude fingerprint is decisive.
    Whole cycles are also the only shifts a stall can produce.
    """
    spc = cfg.samples_per_cycle
    wc = max(2, cfg.detect_window // spc)
    stepc = max(1, cfg.detect_step // spc)
    Lc = max(1, cfg.detect_max_lag // spc)
    nc = min(aa.size, am.size)
    if nc < wc + 1:
        return np.array([], dtype=np.int64), np.array([], dtype=np.int64)
    starts_c = np.arange(0, nc - wc + 1, stepc)
    # edge-pad the anchor so windows at both ends still get a full lag range
    aap = np.pad(aa[:nc], (Lc, Lc + wc), mode="edge")
    slid = np.lib.stride_tricks.sliding_window_view(aap, wc)
    offs = np.arange(2 * Lc + 1)
    lags = np.empty(starts_c.size, dtype=np.int64)
    batch = 128
    for b0 in range(0, starts_c.size, batch):
        idx = starts_c[b0:b0 + batch]
        wm = am[idx[:, None] + np.arange(wc)[None, :]]
        wm = wm - wm.mean(axis=1, keepdims=True)
        wm /= wm.std(axis=1, keepdims=True) + 1e-12
        sl = slid[idx[:, None] + offs[None, :]]
        mu = sl.mean(axis=-1, keepdims=True)
        sd = sl.std(axis=-1) + 1e-12
        score = np.einsum("bw,blw->bl", wm, sl - mu) / (sd * wc)
        lags[b0:b0 + idx.size] = (score.argmax(axis=1) - Lc) * spc
    return starts_c * spc, lags


def _stable_plateaus(lags, persistence: int, tol: int = 5):
    """Compress a lag series into (value, first_idx, last_idx) plateaus that
    persist for at least ``persistence`` windows."""
    runs = []
    i = 0
    n = len(lags)
    while i < n:
        j = i
        while j + 1 < n and abs(int(lags[j + 1]) - int(lags[i])) <= tol:
            j += 1
        runs.append((int(np.median(lags[i:j + 1])), i, j))
        i = j + 1
    return [r for r in runs if r[2] - r[1] + 1 >= persistence]


def _t_stat(x) -> float:
    if x.size < 16:
        return 0.0
    sd = float(np.std(x))
    if sd == 0.0:
        return 0.0
    return float(np.mean(x)) / (sd / math.sqrt(x.size))


def _measure_lag(aa, am, lo, hi, cfg: AnalysisConfig) -> int | None:
    """Dominant lag of member content [lo, hi) vs the anchor, in samples.

    Same per-cycle estimator as :func:`_lag_series` for one window; None
    when the clamped window is too short to be meaningful.
    """
    spc = cfg.samples_per_cycle
    nc = min(aa.size, am.size)
    lo_c = max(-(-lo // spc), 0)
    hi_c = min(hi // spc, nc)
    wc = hi_c - lo_c
    if wc < 8:
        return None
    Lc = max(1, cfg.detect_max_lag // spc)
    m = am[lo_c:hi_c] - am[lo_c:hi_c].mean()
    a_lo, a_hi = lo_c - Lc, hi_c + Lc
    a = aa[max(0, a_lo):min(nc, a_hi)]
    pad_l, pad_r = max(0, -a_lo), max(0, a_hi - nc)
    if pad_l or pad_r:
        a = np.pad(a, (pad_l, pad_r), mode="edge")
    slid = np.lib.stride_tricks.sliding_window_view(a, wc)[:2 * Lc + 1]
    mu = slid.mean(axis=1, keepdims=True)
    sd = slid.std(axis=1) + 1e-12
    score = (slid - mu) @ m / sd
    return (int(score.argmax()) - Lc) * spc


def _refine_event(anchor, member, t_lo, t_hi, lag0, lag1,
                  cfg: AnalysisConfig):
    """Fine-localise the switch from lag0 to lag1 inside [t_lo, t_hi).

    Pointwise squared residuals against the anchor under both lag
    hypotheses are differenced and cumulatively summed; the sum is
    minimised exactly where the member stops following lag0 and starts
    following lag1.  Returns ``(position, accepted)`` in member
    coordinates; ``accepted`` is False when the residuals do not actually
    prefer lag0 before the cut and lag1 after it, which is the signature
    of a spurious step.
    """
    n = min(len(anchor), len(member))
    lo = max(t_lo, -min(lag0, lag1), 0)
    hi = min(t_hi, n - max(lag0, lag1, 0))
    if hi - lo < 32:
        return (t_lo + t_hi) // 2, False
    m = np.asarray(member[lo:hi], dtype=np.float64)
    a0 = np.asarray(anchor[lo + lag0: hi + lag0], dtype=np.float64)
    a1 = np.asarray(anchor[lo + lag1: hi + lag1], dtype=np.float64)
    r = (m - a0) ** 2 - (m - a1) ** 2
    cut = int(np.argmin(np.cumsum(r)))
    ok = (_t_stat(r[:cut + 1]) <= -cfg.refine_min_t
          and _t_stat(r[cut + 1:]) >= cfg.refine_min_t)
    return lo + cut + 1, ok


def _seam_refine(owner, other, center: int, off: int, mag: int,
                 cfg: AnalysisConfig) -> int:
    """Snap a removal start onto the position that heals the seam best.

    The two-hypothesis cut is only accurate to a few tens of samples:
    inside the stall both lag hypotheses are equally wrong, so the
    changepoint wanders.  Removal, however, should be sample-exact.  Each
    candidate start q is scored by the squared mismatch that would remain
    after deleting ``[q, q+mag)`` from the owner: owner content just
    before q and just after the deleted span, both matched against the
    other trace at the pre-event offset ``off`` (owner[t] vs
    other[t+off]).  The true stall start reduces both terms to noise;
    every sample of error leaves a loud/quiet mismatch behind.
    """
    owner = np.asarray(owner, dtype=np.float64)
    other = np.asarray(other, dtype=np.float64)
    spc = cfg.samples_per_cycle
    # the longest all-quiet op run in a block is ~27 cycles; a 30-cycle
    # window always overlaps loud content, keeping the minimum sharp
    w = 30 * spc
    r = mag + 8 * spc
    qmin = max(center - r, w, w - off)
    qmax = min(center + r, owner.size - mag - w, other.size - w - off)
    if qmax < qmin:
        return center
    d1 = (owner[qmin - w:qmax] - other[qmin - w + off:qmax + off]) ** 2
    d2 = (owner[qmin + mag:qmax + mag + w]
          - other[qmin + off:qmax + off + w]) ** 2
    c1 = np.concatenate(([0.0], np.cumsum(d1)))
    c2 = np.concatenate(([0.0], np.cumsum(d2)))
    i = np.arange(qmax - qmin + 1)
    err = (c1[i + w] - c1[i]) + (c2[i + w] - c2[i])
    return int(qmin + err.argmin())


def detect_desync(triplet, cfg: AnalysisConfig | None = None) -> list:
    """Find stall events within one key bit's (Dbl, Add1, Add2) sub-traces.

    The doubling is the reference; each other member's local-lag series is
    scanned for persistent steps.  A negative step is a stall in the member,
    a positive one a stall in the reference (reported once even when both
    comparisons see it).
    """
    cfg = cfg or AnalysisConfig()
    spc = cfg.samples_per_cycle
    anchors = [st for st in triplet if st.block_class == "Dbl"]
    anchor = anchors[0] if anchors else triplet[0]
    members = [st for st in triplet if st is not anchor]
    aa = _cycle_means(anchor.samples, spc)
    events = []
    for member in members:
        am = _cycle_means(member.samples, spc)
        starts, lags = _lag_series(aa, am, cfg)
        if starts.size == 0:
            continue
        plateaus = _stable_plateaus(lags, cfg.detect_persistence)
        # Windows straddling a step can lock onto side-lobe lags long enough
        # to look stable, fragmenting or interrupting the true plateau chain.
        # Keep only plateaus that sit on the one-stall quantum grid AND whose
        # span really is dominated by that lag, then merge equal neighbours.
        qtol = max(2, spc // 5)
        quantized = []
        for v, i, j in plateaus:
            q, rem = divmod(v, spc)
            if rem > spc // 2:
                q, rem = q + 1, spc - rem
            if rem > qtol:
                continue
            vq = q * spc
            measured = _measure_lag(aa, am, int(starts[i]),
                                    int(starts[j]) + cfg.detect_window, cfg)
            if measured is None or abs(measured - vq) > qtol:
                continue
            if quantized and quantized[-1][0] == vq:
                quantized[-1] = (vq, quantized[-1][1], j)
            else:
                quantized.append((vq, i, j))
        # Walk the plateau chain.  A transition-zone fragment can survive the
        # dominance check when it spans exactly the confused region, so when
        # the step to the next plateau is rejected, try bridging to the one
        # after it before moving on.
        i = 0
        while i < len(quantized) - 1:
            advanced = False
            for j in range(i + 1, min(i + 4, len(quantized))):
                v0, _, j0 = quantized[i]
                v1, i1, _ = quantized[j]
                d = v1 - v0
                if d == 0:
                    continue
                cycles = 5 if abs(d) >= 3 * spc else 1
                magnitude = cycles * spc
                lag1 = v0 + (magnitude if d > 0 else -magnitude)
                t_lo = int(starts[j0])
                t_hi = int(starts[i1]) + cfg.detect_window
                pos, ok = _refine_event(anchor.samples, member.samples,
                                        t_lo, t_hi, v0, lag1, cfg)
                if not ok:
                    continue
                # confirm the hypothesis directly: the measured lag just
                # before the cut must equal the old plateau and just after
                # it the new one — steps between side-lobe plateaus fail
                vw = cfg.detect_window // 2
                before = _measure_lag(aa, am, pos - vw, pos, cfg)
                after = _measure_lag(aa, am, pos, pos + vw, cfg)
                if (before is None or after is None
                        or abs(before - v0) > qtol or abs(after - lag1) > qtol):
                    continue
                if d < 0:
                    start = _seam_refine(member.samples, anchor.samples,
                                         pos, v0, magnitude, cfg)
                    events.append(DesyncEvent(member, start, cycles,
                                              magnitude, member.ident))
                else:
                    start = _seam_refine(anchor.samples, member.samples,
                                         pos + v0, -v0, magnitude, cfg)
                    events.append(DesyncEvent(anchor, start, cycles,
                                              magnitude, member.ident))
                i = j
                advanced = True
                break
            if not advanced:
                i += 1
    return _dedupe_events(events, cfg.detect_window)


def _dedupe_events(events, window: int) -> list:
    """Merge duplicate sightings of the same stall (anchor events appear in
    both member comparisons)."""
    out = []
    for ev in sorted(events, key=lambda e: (e.subtrace.ident, e.start)):
        dup = next((o for o in out
                    if o.subtrace is ev.subtrace
                    and o.stall_cycles == ev.stall_cycles
                    and abs(o.start - ev.start) <= window), None)
        if dup is None:
            out.append(ev)
        else:
            dup.start = (dup.start + ev.start) // 2
    return out


# -- removal / repair ---------------------------------------------------------


def remove_region(st: SubTrace, start: int, length: int,
                  stall_cycles: int | None = None):
    """Delete samples [start, start+length) from a sub-trace (in place)."""
    if start < 0 or length < 0 or start + length > len(st.samples):
        raise OutOfBounds(f"removal [{start}, {start + length}) outside "
                          f"sub-trace of {len(st.samples)} samples")
    st.samples = np.delete(st.samples, slice(start, start + length))
    st.removal_log.append((int(start), int(length),
                           int(stall_cycles) if stall_cycles else 0))


def repair(subtraces, mode: str = "five_and_one",
           cfg: AnalysisConfig | None = None) -> dict:
    """Iteratively detect and remove stall regions until a fixpoint.

    mode "five_only" removes only 5-cycle events (leaving 1-cycle desync in
    place for the distinguisher to see); "five_and_one" removes both.
    Raises NoConvergence if eligible events remain after the iteration cap.
    """
    if mode not in ("five_only", "five_and_one"):
        raise ValueError(f"unknown repair mode {mode!r}")
    cfg = cfg or AnalysisConfig()
    by_bit = {}
    for st in subtraces:
        by_bit.setdefault(st.key_bit_index, []).append(st)
    report = {"mode": mode, "iterations": 0, "removals": {}}
    for _ in range(cfg.repair_max_iter):
        report["iterations"] += 1
        eligible = []
        for bit in sorted(by_bit):
            for ev in detect_desync(by_bit[bit], cfg):
                if mode == "five_and_one" or ev.stall_cycles == 5:
                    eligible.append(ev)
        if not eligible:
            return report
        eligible.sort(key=lambda e: (e.subtrace.ident, -e.start))
        for ev in eligible:
            remove_region(ev.subtrace, ev.start, ev.length, ev.stall_cycles)
            report["removals"].setdefault(ev.subtrace.ident, []).append(
                (int(ev.start), int(ev.length), int(ev.stall_cycles)))
    raise NoConvergence(f"repair still finds events after "
                        f"{cfg.repair_max_iter} iterations")
