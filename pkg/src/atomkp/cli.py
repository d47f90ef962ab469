"""Command-line front end tying the pipeline together.

Subcommands cover the whole workflow: ``params show`` (curve and model
constants), ``kp`` (atomic scalar multiplication), ``simulate`` (trace
rendering), ``segment`` / ``align`` / ``repair`` (sub-trace processing,
in place on a sub-trace directory) and ``analyze`` / ``report``
(envelope comparison and derived CSV/SVG artifacts).

Every value that shapes an output — costs, amplitudes, windows,
thresholds, seeds — is a flag with the model defaults, and each command
records a manifest entry with its resolved configuration, so any
artifact can be regenerated bit-for-bit from its manifest alone.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors (missing
or malformed files, impossible configurations, failed preconditions).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import __version__
from .curve import AffinePoint
from .distinguish import (DEFAULT_REGION_END, DEFAULT_THETA, GapReport,
                          compare_classes, envelope, envelopes_svg,
                          report_csv, reports_json, summarize, summary_csv)
from .emsim import SimConfig, make_scenario
from .errors import AtomkpError
from .gfp import p256
from .scalar import Scalar, kp_right_to_left
from .traceio import read_subtraces, read_trace, write_subtraces, write_trace
from .traceops import AnalysisConfig, align, repair, segment

_SCHEMA = {"format_version": 1}


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _scalar_arg(text: str) -> Scalar:
    try:
        return Scalar.from_string(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _region_arg(text: str) -> tuple:
    try:
        start, end = text.split(":")
        return int(start), int(end)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"region must be START:END (samples), got {text!r}")


# -- manifests ----------------------------------------------------------------


def _manifest_entry(args, config: dict, inputs: dict, outputs: dict) -> dict:
    return {
        "command": args.command,
        "argv": list(args._argv),
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
    }


def _append_manifest(directory, entry: dict):
    """Append one history entry to ``<directory>/manifest.json``."""
    path = Path(directory) / "manifest.json"
    if path.exists():
        doc = json.loads(path.read_text())
    else:
        doc = {"format": "atomkp-manifest", **_SCHEMA, "history": []}
    doc["history"].append(entry)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# -- shared analysis flags -----------------------------------------------------

_ANALYSIS_FLAGS = (
    ("--samples-per-cycle", "samples_per_cycle", int,
     "samples per clock cycle"),
    ("--pad", "pad_samples", int, "NOP padding kept on each side of a block"),
    ("--align-window", "align_window", int,
     "leading samples used for global alignment"),
    ("--align-max-lag", "align_max_lag", int,
     "largest global shift align may apply (default: the padding)"),
    ("--detect-window", "detect_window", int,
     "local-lag estimation window (samples)"),
    ("--detect-step", "detect_step", int, "local-lag window stride"),
    ("--detect-persistence", "detect_persistence", int,
     "windows a lag must persist to count as a plateau"),
    ("--detect-max-lag", "detect_max_lag", int,
     "largest local lag searched (samples)"),
    ("--refine-min-t", "refine_min_t", float,
     "t-statistic needed to accept a lag switch"),
    ("--repair-max-iter", "repair_max_iter", int,
     "iteration cap of the repair fixpoint loop"),
    ("--min-gap-run", "min_gap_run", int,
     "shortest NOP gap segmentation treats as real (samples)"),
)


def _add_analysis_flags(sp):
    for flag, attr, typ, help_ in _ANALYSIS_FLAGS:
        sp.add_argument(flag, dest=attr, type=typ, default=None, help=help_)


def _analysis_config(meta: dict, args) -> AnalysisConfig:
    """Meta-scaled defaults, overridden by whichever flags were given."""
    cfg = AnalysisConfig.from_meta(meta)
    for _, attr, _, _ in _ANALYSIS_FLAGS:
        value = getattr(args, attr)
        if value is not None:
            setattr(cfg, attr, value)
    return cfg


def _config_dict(cfg) -> dict:
    return {k: v for k, v in dataclasses.asdict(cfg).items()
            if k != "stall_plan"}


# -- subcommands ---------------------------------------------------------------


def _cmd_params(args) -> int:
    params = p256(backend=args.backend)
    sim = SimConfig()
    print(f"curve            {params.name}")
    print(f"backend          {params.ctx.backend_name}")
    print(f"p                0x{params.ctx.p:064X}")
    print(f"a                0x{params.a.to_hex()}")
    print(f"b                0x{params.b.to_hex()}")
    print(f"Gx               0x{params.gx.to_hex()}")
    print(f"Gy               0x{params.gy.to_hex()}")
    print(f"n                0x{params.n:064X}")
    print(f"h                {params.h}")
    print(f"clock_hz         {sim.clock_hz:g}")
    print(f"samples_per_cycle {sim.samples_per_cycle}")
    for kind in ("M", "Sq", "A", "S"):
        print(f"cycles[{kind:<2}]       {sim.op_cycles[kind]}")
    for count in sorted(sim.nop_cycles):
        print(f"nop_cycles[{count}] {sim.nop_cycles[count]}")
    print(f"lead_nop_cycles  {sim.lead_nop_cycles}")
    for kind in ("M", "Sq", "A", "S", "nop"):
        print(f"amplitude[{kind:<3}]   {sim.amplitudes[kind]:g} V")
    print(f"noise_sigma      {sim.noise_sigma:g} V")
    print(f"threshold        {DEFAULT_THETA:g} V")
    print(f"region_default   0:{DEFAULT_REGION_END}")
    return 0


def _cmd_kp(args) -> int:
    params = p256(backend=args.backend)
    point, schedule, logs = kp_right_to_left(
        args.k, AffinePoint(params.gx, params.gy), params)
    counts = schedule.class_counts()
    print(f"k      = 0x{args.k.value:X}  ({args.k.length} bits, "
          f"weight {args.k.hamming_weight()})")
    if point.is_infinity:
        print("result = infinity")
    else:
        print(f"x      = 0x{point.x.to_hex()}")
        print(f"y      = 0x{point.y.to_hex()}")
    print("blocks = " + "  ".join(f"{c}:{counts.get(c, 0)}"
                                  for c in ("Dbl", "Add1", "Add2")))
    if args.log:
        path = Path(args.log)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            for log in logs:
                fh.write(log.to_json() + "\n")
        print(f"log    = {path}")
    return 0


def _sim_config(args) -> SimConfig:
    return SimConfig(
        clock_hz=args.clock_hz,
        samples_per_cycle=args.samples_per_cycle,
        scale=args.scale,
        op_cycles={"M": args.cost_m, "Sq": args.cost_sq,
                   "A": args.cost_a, "S": args.cost_s},
        nop_cycles={1000: args.nop_1000, 2000: args.nop_2000,
                    3000: args.nop_3000},
        lead_nop_cycles=args.lead_nop,
        amplitudes={"M": args.amp_m, "Sq": args.amp_sq, "A": args.amp_a,
                    "S": args.amp_s, "nop": args.amp_nop},
        carrier_floor=args.carrier_floor,
        fingerprint_frac=args.fingerprint_frac,
        fingerprint_add=args.fingerprint_add,
        data_mod_frac=args.data_mod_frac,
        noise_sigma=args.noise_sigma,
        operand_bits=args.operand_bits,
        rng_seed=args.seed,
    )


def _cmd_simulate(args) -> int:
    cfg = _sim_config(args)
    params = p256()
    scenario = make_scenario(args.scenario, args.k, params, cfg,
                             n_five=args.n_five, n_one=args.n_one,
                             one_cc_boundary=args.one_boundary,
                             min_sep_samples=args.min_sep,
                             boundary_range=(args.boundary_min,
                                             args.boundary_max))
    out = Path(args.out)
    bin_path, json_path = write_trace(out / "trace", scenario.trace)
    _append_manifest(out, _manifest_entry(
        args,
        config={**_config_dict(cfg), "scenario": args.scenario,
                "k": args.k.to_binary(), "n_five": args.n_five,
                "n_one": args.n_one, "one_boundary": args.one_boundary,
                "min_sep": args.min_sep,
                "boundary_range": [args.boundary_min, args.boundary_max]},
        inputs={},
        outputs={"trace_bin": bin_path.name, "trace_json": json_path.name}))
    print(f"scenario  {args.scenario}  seed {args.seed}  scale {args.scale}")
    print(f"samples   {scenario.trace.num_samples}")
    print(f"stalls    {len(scenario.trace.meta.get('stalls', []))}")
    print(f"trace     {bin_path}")
    return 0


def _cmd_segment(args) -> int:
    trace = read_trace(args.infile)
    cfg = _analysis_config(trace.meta, args)
    subtraces = segment(trace, cfg)
    out = Path(args.out)
    meta = {k: trace.meta[k] for k in
            ("scale", "samples_per_cycle", "scenario", "key_bits", "stalls")
            if k in trace.meta}
    write_subtraces(out, subtraces, meta)
    _append_manifest(out, _manifest_entry(
        args, config=dataclasses.asdict(cfg),
        inputs={"trace": str(args.infile)},
        outputs={"subtraces": len(subtraces)}))
    print(f"{len(subtraces)} sub-traces -> {out}")
    return 0


def _cmd_align(args) -> int:
    subtraces, meta = read_subtraces(args.infile)
    cfg = _analysis_config(meta, args)
    result = align(subtraces, args.anchor, cfg)
    write_subtraces(args.infile, subtraces, meta)
    _append_manifest(args.infile, _manifest_entry(
        args, config=dataclasses.asdict(cfg),
        inputs={"subtraces": str(args.infile)},
        outputs={"shifts": result.shifts}))
    moved = {k: v for k, v in result.shifts.items() if v}
    print(f"anchor {result.anchor}: "
          + (f"{len(moved)} shifted {moved}" if moved else "all in place"))
    return 0


def _cmd_repair(args) -> int:
    subtraces, meta = read_subtraces(args.infile)
    cfg = _analysis_config(meta, args)
    report = repair(subtraces, args.mode, cfg)
    write_subtraces(args.infile, subtraces, meta)
    _append_manifest(args.infile, _manifest_entry(
        args, config=dataclasses.asdict(cfg),
        inputs={"subtraces": str(args.infile)},
        outputs={"repair": report}))
    removed = sum(length for spans in report["removals"].values()
                  for _, length, _ in spans)
    print(f"mode {report['mode']}: {report['iterations']} iterations, "
          f"{sum(len(v) for v in report['removals'].values())} removals, "
          f"{removed} samples")
    for ident in sorted(report["removals"]):
        for start, length, cycles in report["removals"][ident]:
            print(f"  {ident:<10} start {start:>9}  length {length:>5}  "
                  f"({cycles} cycles)")
    return 0


def _default_region(meta: dict) -> tuple:
    scale = int(meta.get("scale", 1))
    return (0, max(1, DEFAULT_REGION_END // scale))


def _cmd_analyze(args) -> int:
    subtraces, meta = read_subtraces(args.infile)
    region = args.region if args.region is not None else _default_region(meta)
    envs, reports = compare_classes(subtraces, region, args.threshold)
    doc_extra = {
        "format": "atomkp-report", **_SCHEMA,
        "region": list(region),
        "classes": {label: env.count for label, env in envs.items()},
        "manifest": _manifest_entry(
            args, config={"threshold": args.threshold,
                          "region": list(region)},
            inputs={"subtraces": str(args.infile)},
            outputs={"report": str(args.out)}),
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(reports_json(reports, doc_extra))
    for row in summarize(reports):
        print(f"{row['comparison']:<24} {row['kind']:<7} "
              f"flagged {row['flagged_samples']}")
    print(f"report -> {out}")
    return 0


def _load_report(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "atomkp-report":
        raise ValueError(f"{path} is not an analysis report")
    return doc


def _cmd_report(args) -> int:
    doc = _load_report(args.infile)
    reports = [GapReport(comparison=r["comparison"],
                         labels=tuple(r["labels"]), theta=r["theta"],
                         series_length=r["series_length"],
                         flagged=r["flagged"], directions=r["directions"],
                         gaps=r["gaps"]) for r in doc["reports"]]
    written = []
    if args.csv:
        path = Path(args.csv)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(summary_csv(reports))
        written.append(path)
        for rep in reports:
            slug = rep.comparison.lower().replace(" ", "-")
            per = path.with_name(f"{path.stem}_{slug}.csv")
            per.write_text(report_csv(rep))
            written.append(per)
    if args.svg:
        subdir = doc["manifest"]["inputs"]["subtraces"]
        subtraces, _ = read_subtraces(subdir)
        start, end = doc["region"]
        groups: dict = {}
        for st in subtraces:
            groups.setdefault(st.block_class, []).append(st)
        envs = [envelope(group, (start, end), label=label)
                for label, group in sorted(groups.items(),
                                           key=lambda kv: kv[0])]
        path = Path(args.svg)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(envelopes_svg(envs, reports, width=args.width,
                                      height=args.height))
        written.append(path)
    for path in written:
        print(f"wrote {path}")
    return 0


# -- parser --------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="atomkp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version",
                        version=f"atomkp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="COMMAND")

    p = sub.add_parser("params", help="show curve and model constants")
    psub = p.add_subparsers(dest="action", required=True, metavar="ACTION")
    show = psub.add_parser("show", help="print every constant with defaults")
    show.add_argument("--backend", choices=("auto", "compiled", "pure"),
                      default="auto", help="field arithmetic backend")
    show.set_defaults(func=_cmd_params)

    p = sub.add_parser("kp", help="atomic scalar multiplication k*G")
    p.add_argument("--k", type=_scalar_arg, required=True,
                   help="scalar: 0/1 string is binary, otherwise hex")
    p.add_argument("--log", default=None, metavar="PATH",
                   help="write the per-block operation log (JSON lines)")
    p.add_argument("--backend", choices=("auto", "compiled", "pure"),
                   default="auto", help="field arithmetic backend")
    p.set_defaults(func=_cmd_kp)

    defaults = SimConfig()
    p = sub.add_parser("simulate", help="render a simulated EM trace")
    p.add_argument("--k", type=_scalar_arg, required=True,
                   help="key bits: 0/1 string is binary, otherwise hex")
    p.add_argument("--scenario", choices=("S0", "S1", "S2"), required=True,
                   help="S0 clean; S1/S2 with injected pipeline stalls")
    p.add_argument("--seed", type=int, required=True, help="RNG seed")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--scale", type=int, default=defaults.scale,
                   help="divide operation cycle counts by this factor")
    p.add_argument("--samples-per-cycle", type=int,
                   default=defaults.samples_per_cycle)
    p.add_argument("--clock-hz", type=float, default=defaults.clock_hz)
    for kind in ("m", "sq", "a", "s"):
        p.add_argument(f"--cost-{kind}", type=int,
                       default=defaults.op_cycles[kind.capitalize()
                                                  if kind == "sq"
                                                  else kind.upper()],
                       help=f"cycle cost of {kind.capitalize()} "
                            "(unscaled)")
    for count in (1000, 2000, 3000):
        p.add_argument(f"--nop-{count}", type=int,
                       default=defaults.nop_cycles[count],
                       help=f"cycles of the {count}-class NOP gap")
    p.add_argument("--lead-nop", type=int, default=defaults.lead_nop_cycles,
                   help="cycles of the lead-in NOP gap")
    for kind in ("m", "sq", "a", "s", "nop"):
        key = {"m": "M", "sq": "Sq", "a": "A", "s": "S", "nop": "nop"}[kind]
        p.add_argument(f"--amp-{kind}", type=float,
                       default=defaults.amplitudes[key],
                       help=f"mean amplitude of {key} cycles (V)")
    p.add_argument("--carrier-floor", type=float,
                   default=defaults.carrier_floor)
    p.add_argument("--fingerprint-frac", type=float,
                   default=defaults.fingerprint_frac,
                   help="multiplicative per-cycle fingerprint spread")
    p.add_argument("--fingerprint-add", type=float,
                   default=defaults.fingerprint_add,
                   help="additive per-cycle fingerprint spread (V)")
    p.add_argument("--data-mod-frac", type=float,
                   default=defaults.data_mod_frac,
                   help="operand-weight amplitude modulation span")
    p.add_argument("--noise-sigma", type=float, default=defaults.noise_sigma,
                   help="Gaussian noise sigma (V)")
    p.add_argument("--operand-bits", type=int, default=defaults.operand_bits)
    p.add_argument("--n-five", type=int, default=52,
                   help="number of 5-cycle stalls (S1/S2)")
    p.add_argument("--n-one", type=int, default=5,
                   help="number of 1-cycle stalls (S1/S2)")
    p.add_argument("--one-boundary", type=int, default=1,
                   help="op boundary the 1-cycle stalls share")
    p.add_argument("--min-sep", type=int, default=8000,
                   help="min sample separation of same-triplet stalls")
    p.add_argument("--boundary-min", type=int, default=1)
    p.add_argument("--boundary-max", type=int, default=16)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("segment", help="cut a trace into block sub-traces")
    p.add_argument("--in", dest="infile", required=True, metavar="TRACE",
                   help="trace base path (or .bin/.json)")
    p.add_argument("--out", required=True, metavar="DIR")
    _add_analysis_flags(p)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("align", help="globally align a sub-trace directory")
    p.add_argument("--in", dest="infile", required=True, metavar="DIR")
    p.add_argument("--anchor", default="dbl:1",
                   help="sub-trace ident to align everything onto")
    _add_analysis_flags(p)
    p.set_defaults(func=_cmd_align)

    p = sub.add_parser("repair", help="detect and remove pipeline stalls")
    p.add_argument("--in", dest="infile", required=True, metavar="DIR")
    p.add_argument("--mode", choices=("five_only", "five_and_one"),
                   default="five_and_one")
    _add_analysis_flags(p)
    p.set_defaults(func=_cmd_repair)

    p = sub.add_parser("analyze",
                       help="max-min envelope distinguishability report")
    p.add_argument("--in", dest="infile", required=True, metavar="DIR")
    p.add_argument("--threshold", type=float, default=DEFAULT_THETA,
                   help="gap threshold in volts")
    p.add_argument("--region", type=_region_arg, default=None,
                   metavar="START:END",
                   help="sample region (default first 5200000/scale)")
    p.add_argument("--out", required=True, metavar="REPORT.json")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("report", help="derive CSV/SVG from a report")
    p.add_argument("--in", dest="infile", required=True,
                   metavar="REPORT.json")
    p.add_argument("--csv", default=None, metavar="PATH",
                   help="write summary CSV (+ per-comparison flag CSVs)")
    p.add_argument("--svg", default=None, metavar="PATH",
                   help="write an envelope plot with flagged runs shaded")
    p.add_argument("--width", type=int, default=960)
    p.add_argument("--height", type=int, default=320)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = list(argv)
    if args.command == "report" and not (args.csv or args.svg):
        parser.error("report needs --csv and/or --svg")
    try:
        return args.func(args)
    except (AtomkpError, OSError, ValueError, KeyError) as exc:
        detail = exc if str(exc) else exc.__class__.__name__
        print(f"atomkp {args.command}: error: {detail}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
