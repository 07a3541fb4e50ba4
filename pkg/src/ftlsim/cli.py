"""Command line front end.

Subcommands:
  run           drive one FTL over a trace, print the metrics JSON
  compare       drive several FTLs over the same trace, print ratios
  learn-stats   fit segments to a trace's flush batches without simulating
                flash; print segment and conflict-buffer size distributions
  recover-test  inject a crash mid-trace, recover, and verify reads still
                match the shadow map

Exit codes: 0 success, 2 configuration error, 3 oracle mismatch,
4 device capacity exhausted.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import sim
from .config import ConfigError, build_config, parse_size
from .flash import CapacityError
from .plr import GROUP_SIZE, learn_segments
from .workload import SYNTH_KINDS, TraceError, expand, parse_msr, synth


def _add_common(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (repeatable); sizes accept k/m/g/t suffixes",
    )
    p.add_argument("--gamma", type=int, help="error bound for learned segments")
    src = p.add_argument_group("trace source")
    src.add_argument("--trace", help="MSR-format CSV trace file")
    src.add_argument("--synth", choices=SYNTH_KINDS, help="synthetic workload kind")
    src.add_argument("--count", type=int, default=100_000, help="synthetic event count")
    src.add_argument("--seed", type=int, default=0)
    src.add_argument("--pages", type=parse_size, help="synthetic LPA span (pages)")
    src.add_argument("--stride", type=int, default=2)
    src.add_argument("--theta", type=float, default=0.99)
    src.add_argument("--read-ratio", type=float, default=0.0)
    src.add_argument(
        "--warmup-writes",
        type=int,
        default=0,
        help="sequential page writes issued before the trace",
    )
    p.add_argument("--csv", metavar="FILE", help="also write flat key,value CSV")


def _build_conf(args):
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        overrides[key.strip()] = val.strip()
    if args.gamma is not None:
        overrides["gamma"] = args.gamma
    return build_config(args.config, overrides)


def _load_events(args, conf):
    if args.trace:
        with open(args.trace) as fh:
            events = list(parse_msr(fh, page_size=conf.page_size))
    elif args.synth:
        pages = args.pages or min(conf.logical_pages, 1 << 20)
        events = synth(
            args.synth,
            args.count,
            pages,
            seed=args.seed,
            stride=args.stride,
            theta=args.theta,
            read_ratio=args.read_ratio,
        )
    else:
        raise ConfigError("need --trace FILE or --synth KIND")
    if args.warmup_writes:
        pages = args.pages or min(conf.logical_pages, 1 << 20)
        events = synth("sequential", args.warmup_writes, pages) + list(events)
    return events


def _emit(doc, args=None):
    sys.stdout.write(sim.to_json(doc))
    if args is not None and getattr(args, "csv", None):
        with open(args.csv, "w") as fh:
            fh.write(sim.to_csv(doc))


def cmd_run(args):
    conf = _build_conf(args)
    events = _load_events(args, conf)
    doc = sim.run(
        args.ftl,
        conf,
        events,
        oracle=not args.no_oracle,
        crash_at=args.crash_at,
        force_gc_every=args.force_gc_every,
    )
    _emit(doc, args)


def cmd_compare(args):
    conf = _build_conf(args)
    events = _load_events(args, conf)
    _emit(sim.compare(args.ftls, conf, events), args)


def cmd_learn_stats(args):
    """Replay write batches through the learner only; no flash model."""
    conf = _build_conf(args)
    events = _load_events(args, conf)
    logical = conf.logical_pages
    batch: dict = {}
    ppa = 0
    seg_lengths: dict = {}
    crb_sizes: dict = {}
    accurate = approximate = 0
    per_block = conf.pages_per_block
    for op, lpa in expand(events, logical):
        if op != "w":
            continue
        batch[lpa] = None
        if len(batch) < per_block:
            continue
        pts = [(l, ppa + i) for i, l in enumerate(sorted(batch))]
        batch.clear()
        ppa += per_block
        for seg in learn_segments(pts, conf.gamma):
            seg_lengths[seg.length] = seg_lengths.get(seg.length, 0) + 1
            if seg.accurate:
                accurate += 1
            else:
                approximate += 1
                size = len(seg.members)
                crb_sizes[size] = crb_sizes.get(size, 0) + 1
    total = accurate + approximate
    _emit(
        {
            "schema_version": sim.SCHEMA_VERSION,
            "gamma": conf.gamma,
            "group_size": GROUP_SIZE,
            "segments": total,
            "accurate": accurate,
            "approximate": approximate,
            "segment_length_hist": {str(k): v for k, v in sorted(seg_lengths.items())},
            "crb_size_hist": {str(k): v for k, v in sorted(crb_sizes.items())},
            "mean_length": (
                round(sum(k * v for k, v in seg_lengths.items()) / total, 3)
                if total
                else 0.0
            ),
        }
    )


def cmd_recover_test(args):
    conf = _build_conf(args)
    events = _load_events(args, conf)
    doc = sim.run(
        args.ftl,
        conf,
        events,
        oracle=True,
        crash_at=args.crash_at,
        force_gc_every=args.force_gc_every,
    )
    print("recovered: equivalent")
    print(
        "blocks_relearned=%d recovery_reads=%d"
        % (
            doc["counters"]["blocks_relearned"],
            doc["counters"]["recovery_reads"],
        )
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ftlsim", description="deterministic SSD / FTL simulator"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one FTL over a trace")
    p.add_argument("--ftl", choices=sorted(sim.FTL_KINDS), default="leaftl")
    p.add_argument("--no-oracle", action="store_true", help="skip data verification")
    p.add_argument("--crash-at", type=int, help="inject a crash after N ops")
    p.add_argument("--force-gc-every", type=int, help="force GC every N ops")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several FTLs on one trace")
    p.add_argument(
        "--ftl",
        dest="ftls",
        default="leaftl,dftl,sftl",
        type=lambda s: s.split(","),
        help="comma separated FTL kinds; first is the ratio baseline",
    )
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("learn-stats", help="segment statistics for a trace")
    _add_common(p)
    p.set_defaults(func=cmd_learn_stats)

    p = sub.add_parser("recover-test", help="crash injection and recovery check")
    p.add_argument("--ftl", choices=sorted(sim.FTL_KINDS), default="leaftl")
    p.add_argument("--crash-at", type=int, required=True)
    p.add_argument("--force-gc-every", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_recover_test)

    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ConfigError, TraceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except sim.OracleMismatch as exc:
        print(f"oracle mismatch: {exc}", file=sys.stderr)
        return 3
    except CapacityError as exc:
        print(f"capacity exhausted: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
