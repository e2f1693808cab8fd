"""
Command-line interface for shifted-pruning polar code simulations
"""
import argparse
import sys
import traceback
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from codec import CrcSpec
from config import CAMPAIGN, DECODER, DEFAULT_SEED, DEFAULT_WORKERS, ENV_PROBLEMS, SCHEMES
from construction import code_from_info_set, construct_dega, load_info_set, save_info_set
from decoder import LLR_MODES
from report_writer import ReportWriter
from shifted_pruning import (
    generate_cs,
    load_critical_set,
    load_elimination_stats,
    save_critical_set,
    save_elimination_stats,
)
from simulator import SchemeParams, ShiftedPruningCampaign

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


@dataclass
class RunConfig:
    """Validated command line"""
    n: int
    k: int
    crc: Optional[CrcSpec]
    design_snr_db: float
    list_size: int
    llr_mode: str
    scheme: str
    ebno: List[float]
    seed: int
    min_errors: int
    max_trials: int
    workers: int
    shift: Optional[int] = None
    max_attempts: Optional[int] = None
    constrained_m: Optional[int] = None
    segments: int = 1
    rate: Optional[float] = None
    info_set_file: Optional[str] = None
    cs_file: Optional[str] = None
    stats_file: Optional[str] = None
    csv_path: Optional[str] = None
    json_path: Optional[str] = None
    summary_path: Optional[str] = None
    trace_path: Optional[str] = None
    stats_out: Optional[str] = None
    export_info_set: Optional[str] = None
    export_cs: Optional[str] = None
    instrument: bool = False
    noiseless: bool = False
    quiet: bool = False


def parse_sweep(text: str) -> List[float]:
    """'1.0:0.25:3.0' (inclusive), '2.0' or '1.5,2.0,2.5'"""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"sweep must be start:step:stop, got '{text}'")
        start, step, stop = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"empty sweep '{text}'")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(count)]
    return [float(p) for p in text.split(",") if p.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Shifted-pruning polar codes - Monte Carlo FER and complexity campaigns",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s --n 9 --k 256 --crc16 --list 8 --scheme sp --ebno 1.0:0.25:3.0 --seed 7
  %(prog)s --n 9 --k 256 --crc16 --list 8 --scheme sp_constrained --constrained-m 19 --shift 4 --ebno 2.0
  %(prog)s --n 9 --k 256 --crc8 --segments 2 --design-snr 4 --list 8 --scheme sp_segmented --ebno 2.0
  %(prog)s --n 8 --k 128 --crc8 --list 16 --scheme plain --instrument --stats-out elim.csv --ebno 2.5

Environment:
  POLAR_WORKERS      default worker count
  POLAR_REPORTS_DIR  directory for bare output file names
        """
    )

    code = parser.add_argument_group("code")
    code.add_argument("--n", type=int, help="log2 of the block length")
    code.add_argument("--k", type=int, help="number of data bits K")
    crc = code.add_mutually_exclusive_group()
    crc.add_argument("--crc16", action="store_true", help="16-bit CRC x^16+x^15+x^2+1")
    crc.add_argument("--crc8", action="store_true", help="8-bit CRC x^8+x^7+x^6+x^4+x^2+1")
    crc.add_argument("--crc-poly", metavar="HEX", help="custom generator, leading term included (e.g. 0x18005)")
    code.add_argument("--design-snr", type=float, default=5.0, help="DE/GA design Eb/N0 in dB (default: 5.0)")
    code.add_argument("--rate", type=float, help="override the K/N rate used for Eb/N0 normalization")
    code.add_argument("--info-set-file", metavar="FILE", help="pinned info set (one index per line)")
    code.add_argument("--export-info-set", metavar="FILE", help="write the constructed info set")

    dec = parser.add_argument_group("decoder")
    dec.add_argument("--list", type=int, default=8, dest="list_size", help="list size L (default: 8)")
    dec.add_argument("--llr-mode", choices=LLR_MODES, default=DECODER["llr_mode"])
    dec.add_argument("--scheme", choices=SCHEMES, default="plain")
    dec.add_argument("--shift", type=int, help="window shift k (default: L, or L/2 for sp_constrained)")
    dec.add_argument("--max-attempts", type=int, help="additional attempts (default: |CS|)")
    dec.add_argument("--cs-file", metavar="FILE", help="critical set to use instead of the generated one")
    dec.add_argument("--export-cs", metavar="FILE", help="write the critical set")
    dec.add_argument("--stats-file", metavar="FILE", help="elimination statistics CSV for prioritizing the CS")
    dec.add_argument("--constrained-m", type=int, help="keep the first m CS positions (sp_constrained)")
    dec.add_argument("--segments", type=int, default=1, help="CRC-protected segments (default: 1)")

    sim = parser.add_argument_group("simulation")
    sim.add_argument("--ebno", help="Eb/N0 sweep start:step:stop (inclusive) or comma list")
    sim.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sim.add_argument("--min-errors", type=int, default=CAMPAIGN["min_errors"])
    sim.add_argument("--max-trials", type=int, default=CAMPAIGN["max_trials"])
    sim.add_argument("--workers", type=int, default=DEFAULT_WORKERS)
    sim.add_argument("--instrument", action="store_true", help="genie elimination statistics on failures")
    sim.add_argument("--noiseless", action="store_true", help="noiseless channel override (smoke runs)")

    out = parser.add_argument_group("output")
    out.add_argument("--csv", dest="csv_path", metavar="FILE", help="CSV report (default: report.csv)")
    out.add_argument("--json", dest="json_path", metavar="FILE", help="JSON report with histograms")
    out.add_argument("--summary", dest="summary_path", metavar="FILE", help="text summary")
    out.add_argument("--trace", dest="trace_path", metavar="FILE", help="PMR trace of the first instrumented failure")
    out.add_argument("--stats-out", metavar="FILE", help="elimination statistics CSV (needs --instrument)")
    out.add_argument("-q", "--quiet", action="store_true")
    return parser


def parse_and_validate(argv: Sequence[str]) -> RunConfig:
    """
    Parse argv and check every cross-field constraint.
    Raises ValueError listing all violations at once.
    """
    args = build_parser().parse_args(list(argv))
    problems = [f"environment: {p}" for p in ENV_PROBLEMS]

    crc = None
    try:
        if args.crc16:
            crc = CrcSpec.crc16()
        elif args.crc8:
            crc = CrcSpec.crc8()
        elif args.crc_poly:
            crc = CrcSpec.from_hex(args.crc_poly)
    except ValueError as e:
        problems.append(str(e))

    ebno: List[float] = []
    if not args.ebno:
        problems.append("--ebno is required")
    else:
        try:
            ebno = parse_sweep(args.ebno)
            if not ebno:
                problems.append("--ebno selects no points")
        except ValueError as e:
            problems.append(str(e))

    if args.n is None or args.n < 1:
        problems.append("--n must be given and >= 1")
    if args.k is None or args.k < 1:
        problems.append("--k must be given and >= 1")
    if args.segments < 1:
        problems.append("--segments must be >= 1")
    if args.n is not None and args.n >= 1 and args.k is not None and args.k >= 1:
        r = crc.width if crc else 0
        if args.k + args.segments * r > 2 ** args.n:
            problems.append(f"K + s*r = {args.k + args.segments * r} exceeds N = {2 ** args.n}")
    if args.list_size < 1:
        problems.append("--list must be >= 1")
    if args.shift is not None and not 0 <= args.shift <= args.list_size:
        problems.append(f"--shift {args.shift} must lie in [0, L={args.list_size}]")
    if args.max_attempts is not None and args.max_attempts < 0:
        problems.append("--max-attempts must be >= 0")
    if args.constrained_m is not None and args.constrained_m < 1:
        problems.append("--constrained-m must be >= 1")
    if args.scheme == "sp_constrained" and args.constrained_m is None:
        problems.append("--scheme sp_constrained needs --constrained-m")
    if args.segments > 1 and crc is None:
        problems.append("--segments > 1 needs a CRC")
    if args.scheme == "sp_segmented" and crc is None:
        problems.append("--scheme sp_segmented needs a CRC")
    if args.rate is not None and not 0 < args.rate <= 1:
        problems.append("--rate must lie in (0, 1]")
    if args.seed < 0:
        problems.append("--seed must be non-negative")
    if args.min_errors < 1 or args.max_trials < 1:
        problems.append("--min-errors and --max-trials must be >= 1")
    if args.workers < 1:
        problems.append("--workers must be >= 1")
    if args.stats_out and not args.instrument:
        problems.append("--stats-out needs --instrument")

    if problems:
        raise ValueError("\n".join(problems))

    return RunConfig(
        n=args.n, k=args.k, crc=crc, design_snr_db=args.design_snr,
        list_size=args.list_size, llr_mode=args.llr_mode, scheme=args.scheme,
        ebno=ebno, seed=args.seed, min_errors=args.min_errors, max_trials=args.max_trials,
        workers=args.workers, shift=args.shift, max_attempts=args.max_attempts,
        constrained_m=args.constrained_m, segments=args.segments, rate=args.rate,
        info_set_file=args.info_set_file, cs_file=args.cs_file, stats_file=args.stats_file,
        csv_path=args.csv_path or "report.csv", json_path=args.json_path,
        summary_path=args.summary_path, trace_path=args.trace_path, stats_out=args.stats_out,
        export_info_set=args.export_info_set, export_cs=args.export_cs,
        instrument=args.instrument, noiseless=args.noiseless, quiet=args.quiet,
    )


def run(config: RunConfig) -> int:
    say = (lambda *a: None) if config.quiet else print
    r = config.crc.width if config.crc else 0
    k_total = config.k + config.segments * r

    say("=" * 70)
    say("SHIFTED-PRUNING POLAR CODE SIMULATION")
    say("=" * 70)

    if config.info_set_file:
        say(f"📂 Loading info set: {config.info_set_file}")
        spec = code_from_info_set(config.n, load_info_set(config.info_set_file), config.k,
                                  crc=config.crc, segments=config.segments,
                                  design_snr_db=config.design_snr_db)
    else:
        say(f"🔍 DE/GA construction at {config.design_snr_db:g} dB...")
        spec = construct_dega(config.n, k_total, config.design_snr_db, info_bits=config.k,
                              crc=config.crc, segments=config.segments, rate=config.rate)
    say(f"✓ Code {spec.describe()}, rate {spec.rate:.3f}")
    if config.export_info_set:
        say(f"   Info set written to {save_info_set(spec, config.export_info_set)}")

    cs = load_critical_set(config.cs_file) if config.cs_file else generate_cs(spec)
    say(f"✓ Critical set: {len(cs)} positions" + (f" from {config.cs_file}" if config.cs_file else ""))
    if config.export_cs:
        say(f"   Critical set written to {save_critical_set(cs, config.export_cs)}")

    stats = load_elimination_stats(config.stats_file) if config.stats_file else None
    if stats:
        say(f"✓ Prioritizing CS by {sum(stats.values())} recorded eliminations")

    params = SchemeParams(
        k=config.shift, max_attempts=config.max_attempts, critical_set=cs,
        constrained_m=config.constrained_m, elimination_stats=stats, llr_mode=config.llr_mode,
    )
    campaign = ShiftedPruningCampaign(spec, config.list_size, config.scheme, params, config.instrument)
    report = campaign.run(config.ebno, config.min_errors, config.max_trials, config.seed,
                          config.workers, config.noiseless, config.rate, verbose=not config.quiet)

    writer = ReportWriter()
    say(f"\n📄 Generated Files:")
    say(f"   CSV report: {writer.write_csv(report, config.csv_path)}")
    if config.json_path:
        say(f"   JSON report: {writer.write_json(report, config.json_path)}")
    if config.summary_path:
        say(f"   Summary: {writer.write_summary(report, config.summary_path)}")
    if config.trace_path:
        trace = next((row.sample_trace for row in report.rows if row.sample_trace is not None), None)
        written = writer.write_trace(trace, config.trace_path)
        say(f"   PMR trace: {written}" if written else "   ⚠️  No instrumented failure to trace")
    if config.stats_out:
        say(f"   Elimination statistics: {save_elimination_stats(report.elimination_stats(), config.stats_out)}")

    say("\n" + writer.summary_text(report))
    say("\n" + "=" * 70)
    say("✅ SUCCESS!")
    say("=" * 70)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        build_parser().print_help()
        return EXIT_CONFIG

    try:
        config = parse_and_validate(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_CONFIG
    except ValueError as e:
        print("❌ Invalid configuration:")
        for line in str(e).splitlines():
            print(f"   - {line}")
        return EXIT_CONFIG

    try:
        return run(config)
    except ValueError as e:
        print(f"❌ Invalid configuration: {e}")
        return EXIT_CONFIG
    except OSError as e:
        print(f"❌ I/O error: {e}")
        return EXIT_IO
    except Exception as e:
        print(f"\n❌ Error during simulation: {str(e)}")
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
