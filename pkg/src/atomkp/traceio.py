"""Trace and sub-trace file I/O.

A trace on disk is a pair of files sharing a base name:

* ``<base>.bin`` — raw little-endian float32 samples (volts), and
* ``<base>.json`` — a sidecar with sampling metadata, block/NOP markers and
  (for simulated traces) the injected-stall ground truth.

Sub-trace directories hold one such pair per block plus a ``subtraces.json``
manifest carrying the per-member bookkeeping (origin, padding, applied
shift, removal log) and the parent trace's sampling metadata.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class Trace:
    """In-memory trace: float32 sample vector plus sidecar metadata."""

    samples: np.ndarray
    sample_rate_hz: float
    meta: dict = field(default_factory=dict)

    @property
    def num_samples(self) -> int:
        return int(self.samples.shape[0])

    def block_markers(self) -> list:
        return self.meta.get("markers", [])

    def nop_markers(self) -> list:
        return self.meta.get("nop_markers", [])

    def stalls(self) -> list:
        return self.meta.get("stalls", [])


def _base(path) -> Path:
    path = Path(path)
    if path.suffix in (".bin", ".json"):
        path = path.with_suffix("")
    return path


def write_trace(path, trace: Trace):
    """Write ``<base>.bin`` + ``<base>.json``; returns the two paths."""
    base = _base(path)
    base.parent.mkdir(parents=True, exist_ok=True)
    bin_path = base.with_suffix(".bin")
    json_path = base.with_suffix(".json")
    bin_path.write_bytes(np.ascontiguousarray(trace.samples, dtype="<f4").tobytes())
    sidecar = {
        "format": "atomkp-trace",
        "format_version": 1,
        "dtype": "float32le",
        "num_samples": trace.num_samples,
        "sample_rate_hz": trace.sample_rate_hz,
    }
    sidecar.update(trace.meta)
    json_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return bin_path, json_path


def read_trace(path) -> Trace:
    base = _base(path)
    sidecar = json.loads(base.with_suffix(".json").read_text())
    samples = np.fromfile(base.with_suffix(".bin"), dtype="<f4")
    n = sidecar.pop("num_samples", len(samples))
    if n != len(samples):
        raise ValueError(f"sidecar expects {n} samples, file has {len(samples)}")
    rate = sidecar.pop("sample_rate_hz", 0.0)
    for drop in ("format", "format_version", "dtype"):
        sidecar.pop(drop, None)
    return Trace(samples=samples, sample_rate_hz=rate, meta=sidecar)


def write_csv(path, samples):
    """(index, volts) rows with a header line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write("index,volts\n")
        for i, v in enumerate(np.asarray(samples)):
            fh.write(f"{i},{v:.9g}\n")


# -- sub-trace directories --------------------------------------------------


def subtrace_filename(block_class: str, key_bit_index: int) -> str:
    return f"{block_class.lower()}_{key_bit_index:03d}"


def write_subtraces(directory, subtraces, meta: dict):
    """Write each sub-trace as bin+json plus a directory manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    members = []
    for st in subtraces:
        name = subtrace_filename(st.block_class, st.key_bit_index)
        np.ascontiguousarray(st.samples, dtype="<f4").tofile(directory / f"{name}.bin")
        record = {
            "block_class": st.block_class,
            "key_bit_index": st.key_bit_index,
            "num_samples": int(len(st.samples)),
            "origin_offset": st.origin_offset,
            "pad": st.pad,
            "applied_shift": st.applied_shift,
            "removal_log": [list(r) for r in st.removal_log],
        }
        (directory / f"{name}.json").write_text(
            json.dumps(record, indent=2, sort_keys=True) + "\n")
        members.append(name)
    manifest = {"format": "atomkp-subtraces", "format_version": 1,
                "members": members, "meta": meta}
    (directory / "subtraces.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_subtraces(directory):
    """Returns (list of SubTrace, meta dict)."""
    from .traceops import SubTrace  # local import to avoid a cycle

    directory = Path(directory)
    manifest = json.loads((directory / "subtraces.json").read_text())
    out = []
    for name in manifest["members"]:
        record = json.loads((directory / f"{name}.json").read_text())
        samples = np.fromfile(directory / f"{name}.bin", dtype="<f4")
        if record["num_samples"] != len(samples):
            raise ValueError(f"{name}: sample count mismatch")
        out.append(SubTrace(
            block_class=record["block_class"],
            key_bit_index=record["key_bit_index"],
            samples=samples,
            origin_offset=record["origin_offset"],
            pad=record["pad"],
            applied_shift=record["applied_shift"],
            removal_log=[tuple(r) for r in record["removal_log"]],
        ))
    return out, manifest.get("meta", {})
