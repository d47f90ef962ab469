"""Synthetic EM trace simulator for atomic-block scalar multiplications.

The simulated device runs at ``clock_hz`` and the virtual probe samples
``samples_per_cycle`` times per clock cycle.  Every operation kind has a
cycle cost (a 32-bit Montgomery multiplication or squaring is by far the
most expensive) and every block is followed by a NOP gap whose length
encodes the class of the block that preceded it, so a trace is
self-describing.  A scalar multiplication therefore renders as::

    [lead-in NOP] ( [Add1] [nop 1000] [Add2] [nop 2000] )? [Dbl] [nop 3000] ...

per key bit.  The per-sample signal model is deliberately simple but has the
structure horizontal attacks care about:

* a per-kind amplitude level (M > Sq > S > A > NOP),
* a within-cycle carrier shape shared by everything,
* a deterministic per-cycle fingerprint, identical across blocks at equal
  block-local offsets (so it is class-independent and cannot be used to
  distinguish classes, but makes cross-correlation alignment unambiguous),
* a small multiplicative modulation per operation derived from the register
  ids and operand Hamming weights in the block log, and
* white Gaussian noise, seeded per event so any prefix of a trace is
  reproducible in isolation.

``scale`` divides all cycle *costs* (never below one cycle) to keep
full-pipeline runs tractable; samples_per_cycle is untouched, so injected
pipeline stalls keep their physical size of ``stall_cycles * samples_per_
cycle`` samples at any scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .curve import AffinePoint
from .errors import ConfigError, PlanError
from .gfp import CurveParams
from .scalar import (ExecutionSchedule, BlockEvent, NopEvent, Scalar,
                     kp_right_to_left)
from .blocks import CANONICAL_KINDS
from .traceio import Trace

#: Cycle costs of the four field-operation kinds on the modelled device.
OP_CYCLES_DEFAULT = {"M": 33153, "Sq": 33153, "A": 1355, "S": 1351}

#: Cycle costs of the three NOP gap classes (indexed by NOP count).
NOP_CYCLES_DEFAULT = {1000: 14019, 2000: 27878, 3000: 42044}

#: Lead-in gap before the first block; same cost as a 3000-NOP gap so the
#: first block is padded/segmentable exactly like every other one.
LEAD_NOP_CYCLES_DEFAULT = 42044

#: Per-kind amplitude levels in volts (NOP is the quiet baseline).
AMPLITUDES_DEFAULT = {"M": 0.055, "Sq": 0.045, "A": 0.012, "S": 0.014,
                      "nop": 0.002}

_STALL_CYCLES_ALLOWED = (1, 5)


@dataclass(frozen=True)
class StallSpec:
    """One injected pipeline stall.

    ``block_ordinal`` indexes the block events of the schedule in execution
    order (0-based); ``op_boundary`` b in 1..17 places the stall at the
    boundary after operation b; ``stall_cycles`` is 1 or 5.
    """

    block_ordinal: int
    op_boundary: int
    stall_cycles: int


@dataclass
class SimConfig:
    clock_hz: float = 1e8
    samples_per_cycle: int = 50
    scale: int = 100
    op_cycles: dict = field(default_factory=lambda: dict(OP_CYCLES_DEFAULT))
    nop_cycles: dict = field(default_factory=lambda: dict(NOP_CYCLES_DEFAULT))
    lead_nop_cycles: int = LEAD_NOP_CYCLES_DEFAULT
    amplitudes: dict = field(default_factory=lambda: dict(AMPLITUDES_DEFAULT))
    carrier_floor: float = 0.1
    fingerprint_frac: float = 0.05
    fingerprint_add: float = 0.002
    data_mod_frac: float = 0.005
    noise_sigma: float = 0.001
    operand_bits: int = 256
    rng_seed: int = 0
    stall_plan: list = field(default_factory=list)

    def validate(self):
        if self.clock_hz <= 0:
            raise ConfigError("clock_hz must be positive")
        if not isinstance(self.samples_per_cycle, int) or self.samples_per_cycle < 1:
            raise ConfigError("samples_per_cycle must be a positive integer")
        if not isinstance(self.scale, int) or self.scale < 1:
            raise ConfigError("scale must be a positive integer")
        if set(self.op_cycles) != {"M", "Sq", "A", "S"}:
            raise ConfigError("op_cycles needs exactly the kinds M, Sq, A, S")
        if set(self.nop_cycles) != {1000, 2000, 3000}:
            raise ConfigError("nop_cycles needs exactly the counts 1000, 2000, 3000")
        for k, v in {**self.op_cycles, **self.nop_cycles}.items():
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"cycle cost for {k!r} must be a positive integer")
        if self.lead_nop_cycles < 0:
            raise ConfigError("lead_nop_cycles must be >= 0")
        needed = {"M", "Sq", "A", "S", "nop"}
        if not needed.issubset(self.amplitudes):
            raise ConfigError(f"amplitudes needs keys {sorted(needed)}")
        if any(v <= 0 for v in self.amplitudes.values()):
            raise ConfigError("amplitudes must be positive")
        if not 0 <= self.carrier_floor < 1:
            raise ConfigError("carrier_floor must be in [0, 1)")
        if not 0 <= self.fingerprint_frac < 1:
            raise ConfigError("fingerprint_frac must be in [0, 1)")
        if self.fingerprint_add < 0:
            raise ConfigError("fingerprint_add must be >= 0")
        if not 0 <= self.data_mod_frac < 1:
            raise ConfigError("data_mod_frac must be in [0, 1)")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.operand_bits < 1:
            raise ConfigError("operand_bits must be >= 1")
        for spec in self.stall_plan:
            _check_spec_shape(spec)

    @property
    def sample_rate_hz(self) -> float:
        return self.clock_hz * self.samples_per_cycle

    def scaled_op_cycles(self, kind: str) -> int:
        return max(1, self.op_cycles[kind] // self.scale)

    def scaled_nop_cycles(self, count: int) -> int:
        return max(1, self.nop_cycles[count] // self.scale)

    def scaled_lead_cycles(self) -> int:
        if self.lead_nop_cycles == 0:
            return 0
        return max(1, self.lead_nop_cycles // self.scale)

    def position_cycles(self) -> tuple:
        """Scaled cycle cost of each of the 18 block positions."""
        return tuple(self.scaled_op_cycles(k) for k in CANONICAL_KINDS)

    def block_cycles(self) -> int:
        return sum(self.position_cycles())

    def boundary_offsets_samples(self) -> dict:
        """Sample offset (from block start) of op boundaries 1..17."""
        spc = self.samples_per_cycle
        offs = {}
        acc = 0
        for i, c in enumerate(self.position_cycles()[:-1], start=1):
            acc += c
            offs[i] = acc * spc
        return offs


def _check_spec_shape(spec):
    if spec.block_ordinal < 0:
        raise PlanError("block_ordinal must be >= 0")
    if not 1 <= spec.op_boundary <= 17:
        raise PlanError("op_boundary must be in 1..17")
    if spec.stall_cycles not in _STALL_CYCLES_ALLOWED:
        raise PlanError(f"stall_cycles must be one of {_STALL_CYCLES_ALLOWED}")


def _carrier(cfg: SimConfig) -> np.ndarray:
    spc = cfg.samples_per_cycle
    phase = (np.arange(spc) + 0.5) / spc
    shape = 0.5 + 0.5 * np.sin(2.0 * np.pi * phase)
    return cfg.carrier_floor + (1.0 - cfg.carrier_floor) * shape


def _fingerprint(cfg: SimConfig) -> tuple:
    """Per-position, per-cycle deterministic modulation, two streams.

    Returns ``(mult, add)``: one array per block position each, values
    clipped to [-3, 3], identical for every block in the trace, so they
    carry no class or data information.  The first stream scales the op
    amplitude (strong cycles stay strong); the second is an absolute
    wobble so even the quietest op kinds correlate decisively.
    """
    rng = np.random.default_rng((cfg.rng_seed, 0xF1))
    mult = [np.clip(rng.standard_normal(c), -3.0, 3.0)
            for c in cfg.position_cycles()]
    rng_add = np.random.default_rng((cfg.rng_seed, 0xF2))
    add = [np.clip(rng_add.standard_normal(c), -3.0, 3.0)
           for c in cfg.position_cycles()]
    return mult, add


def _op_modulation(entry, operand_bits: int) -> float:
    """Deterministic per-op scalar in [-1, 1] from register ids + weights."""
    code = 0
    for name in (entry.dest, *entry.sources):
        code = (code * 31 + sum(name.encode())) % 97
    id_part = code / 48.0 - 1.0
    if entry.source_weights:
        w = sum(entry.source_weights) / (len(entry.source_weights) * operand_bits)
        hw_part = min(1.0, max(-1.0, 2.0 * w - 1.0))
    else:
        hw_part = 0.0
    return 0.5 * id_part + 0.5 * hw_part


def _render_block(cfg, log, fingerprint, carrier, rng) -> np.ndarray:
    fp_mult, fp_add = fingerprint
    pos_cycles = cfg.position_cycles()
    amps = np.empty(sum(pos_cycles), dtype=np.float64)
    at = 0
    for opi, entry in enumerate(log.entries):
        nc = pos_cycles[opi]
        level = cfg.amplitudes[entry.op_kind]
        mod = 1.0 + cfg.data_mod_frac * _op_modulation(entry, cfg.operand_bits)
        amps[at:at + nc] = (level * mod * (1.0 + cfg.fingerprint_frac * fp_mult[opi])
                            + cfg.fingerprint_add * fp_add[opi])
        at += nc
    wave = (amps[:, None] * carrier[None, :]).ravel()
    if cfg.noise_sigma > 0:
        wave = wave + rng.normal(0.0, cfg.noise_sigma, wave.size)
    return wave.astype(np.float32)


def _render_quiet(cfg, cycles, carrier, rng) -> np.ndarray:
    wave = cfg.amplitudes["nop"] * np.tile(carrier, cycles)
    if cfg.noise_sigma > 0:
        wave = wave + rng.normal(0.0, cfg.noise_sigma, wave.size)
    return wave.astype(np.float32)


def simulate_trace(schedule: ExecutionSchedule, logs, cfg: SimConfig) -> Trace:
    """Render a schedule + its block logs into a trace.

    The trace length is (lead cycles + sum of event cycles) * samples_per_
    cycle before stall injection; if ``cfg.stall_plan`` is non-empty the
    stalls are injected before returning.
    """
    cfg.validate()
    block_events = schedule.block_events()
    if len(logs) != len(block_events):
        raise ConfigError(f"schedule has {len(block_events)} block events "
                          f"but {len(logs)} logs were supplied")
    for ev, log in zip(block_events, logs):
        if ev.block_class != log.block_class:
            raise ConfigError("schedule/log block class mismatch")

    spc = cfg.samples_per_cycle
    carrier = _carrier(cfg)
    fingerprint = _fingerprint(cfg)

    # price all events
    priced = []
    total_cycles = cfg.scaled_lead_cycles()
    for ev in schedule.events:
        if isinstance(ev, BlockEvent):
            c = cfg.block_cycles()
        else:
            c = cfg.scaled_nop_cycles(ev.count)
        priced.append((ev, c))
        total_cycles += c

    samples = np.empty(total_cycles * spc, dtype=np.float32)
    markers = []
    nop_markers = []
    pos = 0
    event_index = 0
    lead_cycles = cfg.scaled_lead_cycles()
    if lead_cycles:
        rng = np.random.default_rng((cfg.rng_seed, 1, event_index))
        n = lead_cycles * spc
        samples[pos:pos + n] = _render_quiet(cfg, lead_cycles, carrier, rng)
        nop_markers.append({"count": 3000, "start": pos, "length": n,
                            "lead": True})
        pos += n
    log_iter = iter(logs)
    for ev, cycles in priced:
        event_index += 1
        rng = np.random.default_rng((cfg.rng_seed, 1, event_index))
        n = cycles * spc
        if isinstance(ev, BlockEvent):
            log = next(log_iter)
            samples[pos:pos + n] = _render_block(cfg, log, fingerprint,
                                                 carrier, rng)
            markers.append({"block_class": ev.block_class,
                            "key_bit_index": ev.key_bit_index,
                            "start": pos, "length": n})
        else:
            samples[pos:pos + n] = _render_quiet(cfg, cycles, carrier, rng)
            nop_markers.append({"count": ev.count, "start": pos, "length": n})
        pos += n

    meta = {
        "clock_hz": cfg.clock_hz,
        "samples_per_cycle": spc,
        "scale": cfg.scale,
        "rng_seed": cfg.rng_seed,
        "op_cycles": dict(cfg.op_cycles),
        "nop_cycles": {str(k): v for k, v in cfg.nop_cycles.items()},
        "lead_nop_cycles": cfg.lead_nop_cycles,
        "amplitudes": dict(cfg.amplitudes),
        "noise_sigma": cfg.noise_sigma,
        "key_length": schedule.key_length,
        "markers": markers,
        "nop_markers": nop_markers,
        "stalls": [],
    }
    trace = Trace(samples=samples, sample_rate_hz=cfg.sample_rate_hz, meta=meta)
    if cfg.stall_plan:
        trace = inject_stalls(trace, cfg.stall_plan, cfg)
    return trace


def inject_stalls(trace: Trace, plan, cfg: SimConfig) -> Trace:
    """Insert low-amplitude stall segments into a rendered trace.

    Positions are derived from the trace's block markers and the scaled
    operation costs; markers are updated (the containing block grows, later
    events shift) and the injected ground truth is appended to the sidecar.
    Removing the recorded spans reproduces the input trace exactly.
    """
    markers = trace.block_markers()
    if not markers:
        raise PlanError("trace has no block markers to anchor stalls")
    spc = trace.meta.get("samples_per_cycle", cfg.samples_per_cycle)
    boundary_offs = cfg.boundary_offsets_samples()

    resolved = []
    for j, spec in enumerate(plan):
        _check_spec_shape(spec)
        if spec.block_ordinal >= len(markers):
            raise PlanError(f"block_ordinal {spec.block_ordinal} out of range "
                            f"({len(markers)} blocks)")
        block = markers[spec.block_ordinal]
        local = boundary_offs[spec.op_boundary]
        if local >= block["length"]:
            raise PlanError("op boundary beyond block extent; was the trace "
                            "rendered with a different scale?")
        resolved.append((block["start"] + local, j, spec))
    resolved.sort()
    positions = [r[0] for r in resolved]
    if len(set(positions)) != len(positions):
        raise PlanError("two stalls resolve to the same position")

    carrier = _carrier(cfg)
    pieces = []
    ground = []
    prev = 0
    inserted = 0
    for abs_pos, j, spec in resolved:
        pieces.append(trace.samples[prev:abs_pos])
        rng = np.random.default_rng((cfg.rng_seed, 2, j))
        seg = _render_quiet(cfg, spec.stall_cycles, carrier, rng)
        pieces.append(seg)
        block = markers[spec.block_ordinal]
        ground.append({
            "block_ordinal": spec.block_ordinal,
            "block_class": block["block_class"],
            "key_bit_index": block["key_bit_index"],
            "op_boundary": spec.op_boundary,
            "stall_cycles": spec.stall_cycles,
            "start": abs_pos + inserted,
            "length": len(seg),
            "block_local_offset": abs_pos - block["start"],
        })
        prev = abs_pos
        inserted += len(seg)
    pieces.append(trace.samples[prev:])
    samples = np.concatenate(pieces)

    def _shift(start):
        return start + sum(g["length"] for g, (p, _, _) in zip(ground, resolved)
                           if p <= start)

    new_markers = []
    for m in markers:
        grown = sum(g["length"] for g, (p, _, _) in zip(ground, resolved)
                    if m["start"] < p < m["start"] + m["length"])
        new_markers.append({**m, "start": _shift(m["start"]),
                            "length": m["length"] + grown})
    new_nops = [{**m, "start": _shift(m["start"])}
                for m in trace.nop_markers()]

    meta = dict(trace.meta)
    meta["markers"] = new_markers
    meta["nop_markers"] = new_nops
    meta["stalls"] = list(trace.meta.get("stalls", ())) + ground
    return Trace(samples=samples, sample_rate_hz=trace.sample_rate_hz, meta=meta)


@dataclass
class ScenarioResult:
    trace: Trace
    config: SimConfig
    plan: list
    schedule: ExecutionSchedule
    result: AffinePoint


def plan_scenario_stalls(schedule: ExecutionSchedule, cfg: SimConfig,
                         n_five: int, n_one: int, one_cc_boundary: int = 1,
                         min_sep_samples: int = 8000,
                         boundary_range: tuple = (1, 16),
                         rng: Optional[np.random.Generator] = None) -> list:
    """Random stall plan with the structure the repair stage is built for.

    * 1-cycle stalls all go into Add2 blocks at a common op boundary,
      spread round-robin over the key-bit triplets (at most one per triplet).
    * 5-cycle stalls are scattered over (triplet, block, boundary) subject
      to a minimum separation between any two stalls of the same triplet,
      so desync events never crowd a single detection window.  The boundary
      range stops short of the block tail because a stall with (almost) no
      content after it leaves nothing to correlate on.
    """
    if rng is None:
        rng = np.random.default_rng((cfg.rng_seed, 3))
    blocks = schedule.block_events()
    triplets = {}
    for ordinal, ev in enumerate(blocks):
        triplets.setdefault(ev.key_bit_index, {})[ev.block_class] = ordinal
    full = sorted(bit for bit, members in triplets.items()
                  if len(members) == 3)
    if not full:
        raise PlanError("schedule has no complete Add1/Add2/Dbl triplet")
    offs = cfg.boundary_offsets_samples()
    used = {bit: [] for bit in full}
    specs = []

    if n_one > len(full):
        raise PlanError(f"cannot place {n_one} one-cycle stalls over "
                        f"{len(full)} triplets (one per triplet)")
    order = list(rng.permutation(full))
    for j in range(n_one):
        bit = order[j]
        specs.append(StallSpec(triplets[bit]["Add2"], one_cc_boundary, 1))
        used[bit].append(offs[one_cc_boundary])

    b_lo, b_hi = boundary_range
    for _ in range(n_five):
        candidates = []
        for bit in full:
            for cls in ("Dbl", "Add1", "Add2"):
                for b in range(b_lo, b_hi + 1):
                    if all(abs(offs[b] - u) >= min_sep_samples
                           for u in used[bit]):
                        candidates.append((bit, cls, b))
        if not candidates:
            raise PlanError("five-cycle stall capacity exhausted; lower "
                            "n_five or min_sep_samples")
        bit, cls, b = candidates[rng.integers(len(candidates))]
        specs.append(StallSpec(triplets[bit][cls], b, 5))
        used[bit].append(offs[b])

    specs.sort(key=lambda s: (s.block_ordinal, s.op_boundary))
    return specs


def make_scenario(name: str, k: Scalar, params: CurveParams, cfg: SimConfig,
                  n_five: int = 52, n_one: int = 5, one_cc_boundary: int = 1,
                  min_sep_samples: int = 8000,
                  boundary_range: tuple = (1, 16)) -> ScenarioResult:
    """Build one of the canned scenarios.

    S0: clean trace, no stalls.
    S1: 5-cycle stalls scattered plus 1-cycle stalls in the Add2 blocks.
    S2: the same trace as S1 (the difference is what the analysis is told
        to repair, not the signal).
    """
    if name not in ("S0", "S1", "S2"):
        raise ConfigError(f"unknown scenario {name!r}")
    base = AffinePoint(params.gx, params.gy)
    result, schedule, logs = kp_right_to_left(k, base, params)
    if name == "S0":
        plan = []
    else:
        plan = plan_scenario_stalls(schedule, cfg, n_five=n_five, n_one=n_one,
                                    one_cc_boundary=one_cc_boundary,
                                    min_sep_samples=min_sep_samples,
                                    boundary_range=boundary_range)
    run_cfg = replace(cfg, stall_plan=plan)
    trace = simulate_trace(schedule, logs, run_cfg)
    trace.meta["scenario"] = name
    trace.meta["key_bits"] = k.to_binary()
    trace.meta["kp_result"] = (None if result.is_infinity else
                               {"x": result.x.to_hex(), "y": result.y.to_hex()})
    return ScenarioResult(trace=trace, config=run_cfg, plan=plan,
                          schedule=schedule, result=result)
