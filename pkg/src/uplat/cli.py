"""Command-line surface.

Subcommands::

    uplat simulate  --preset a --out runs/a        # trace + ground truth
    uplat journeys  --trace runs/a/trace.jsonl --out runs/a
    uplat decompose --trace runs/a/trace.jsonl --out runs/a
    uplat analyze   --trace runs/a/trace.jsonl --targets 5:1e-2,15:1e-4 --out runs/a
    uplat sweep     --preset b --offsets 0,1,2,3,4,5,6,7,8,9 --out runs/sweep

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 a delay
requirement failed.  Every report embeds a manifest (config snapshot,
seed, paths, tool version, wall-clock) so a run can be reproduced; only
the wall-clock fields differ on a faithful re-run.
"""

from __future__ import annotations

import argparse
import csv
import json
import pathlib
import sys
import time
from datetime import datetime, timezone

from . import __version__
from .analytics import (
    ccdf,
    conditional_contribution,
    departure_slot_distribution,
    dvp,
    frame_relative_histogram,
    offset_sweep,
)
from .config import ExperimentConfig, load_config, preset
from .decompose import decompose, decomposition_record, write_decompositions_csv
from .errors import EmptyInputError, UplatError
from .journeys import build_journeys
from .simulator import simulate
from .trace import (
    journey_to_json_line,
    read_trace,
    serialize_event_line,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_REQUIREMENT = 3

MS = 1_000_000


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--preset", choices=("a", "b", "c"),
                   help="named experiment: a=5 PRBs, b=10 PRBs, c=b+optimal offset")
    p.add_argument("--seed", type=int, help="override rng seed")
    p.add_argument("--packet-count", type=int, help="override packet count")
    p.add_argument("--grant-prbs", type=int, help="override uplink grant PRBs")
    p.add_argument("--arrival-offset-ms", type=float,
                   help="override arrival offset (ms)")
    p.add_argument("--harq-fail-prob", type=float,
                   help="override per-attempt HARQ failure probability")


def _resolve_config(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise UplatError("--config and --preset are mutually exclusive")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        cfg = ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    if args.packet_count is not None:
        overrides["packet_count"] = args.packet_count
    if args.grant_prbs is not None:
        overrides["grant_prbs"] = args.grant_prbs
    if args.arrival_offset_ms is not None:
        overrides["arrival_offset_ns"] = int(args.arrival_offset_ms * MS)
    if args.harq_fail_prob is not None:
        overrides["harq_fail_prob"] = args.harq_fail_prob
    if overrides:
        cfg = cfg.with_overrides(**overrides)
    cfg.validate()
    return cfg


def _parse_targets(text: str) -> list[tuple[int, float]]:
    """Parse "tau_ms:epsilon,..." into (tau_ns, epsilon) pairs."""
    targets = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            tau_ms, eps = part.split(":")
            targets.append((int(float(tau_ms) * MS), float(eps)))
        except ValueError:
            raise UplatError(f"bad target {part!r}, expected tau_ms:epsilon")
    if not targets:
        raise UplatError("no targets given")
    return targets


def _manifest(command: str, cfg: ExperimentConfig | None, inputs, outputs,
              started: float) -> dict:
    return {
        "tool": "uplat",
        "version": __version__,
        "command": command,
        "config": cfg.to_dict() if cfg else None,
        "seed": cfg.rng_seed if cfg else None,
        "inputs": list(inputs),
        "outputs": list(outputs),
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "duration_s": round(time.monotonic() - started, 3),
    }


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def _out_dir(args) -> pathlib.Path:
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands ----------------------------------------------------------


def cmd_simulate(args) -> int:
    started = time.monotonic()
    cfg = _resolve_config(args)
    out = _out_dir(args)
    result = simulate(cfg)
    trace_path = out / "trace.jsonl"
    truth_path = out / "truth.jsonl"
    with open(trace_path, "w", encoding="utf-8") as fh:
        for ev in result.events:
            fh.write(serialize_event_line(ev))
            fh.write("\n")
    with open(truth_path, "w", encoding="utf-8") as fh:
        for journey, decomp in result.truth:
            line = json.dumps(
                {
                    "journey": json.loads(journey_to_json_line(journey)),
                    "decomposition": decomposition_record(journey, decomp),
                },
                separators=(",", ":"),
            )
            fh.write(line)
            fh.write("\n")
    manifest = _manifest("simulate", cfg, [],
                         [str(trace_path), str(truth_path)], started)
    _write_json(out / "manifest.json", manifest)
    print(f"simulated {len(result.truth)} packets, "
          f"{len(result.events)} events -> {trace_path}")
    return EXIT_OK


def _load_and_build(args):
    events = read_trace(sys.stdin if args.trace == "-" else args.trace)
    cfg = _resolve_config(args)
    journeys, anomalies = build_journeys(events, tdd=cfg.tdd)
    return cfg, events, journeys, anomalies


def cmd_journeys(args) -> int:
    started = time.monotonic()
    cfg, _, journeys, anomalies = _load_and_build(args)
    out = _out_dir(args)
    jpath = out / "journeys.jsonl"
    with open(jpath, "w", encoding="utf-8") as fh:
        for j in journeys:
            fh.write(journey_to_json_line(j))
            fh.write("\n")
    apath = out / "anomalies.jsonl"
    with open(apath, "w", encoding="utf-8") as fh:
        for a in anomalies:
            fh.write(json.dumps({
                "kind": a.kind.value, "sn": a.sn,
                "mem_loc": a.mem_loc, "detail": a.detail,
            }))
            fh.write("\n")
    _write_json(out / "manifest.json",
                _manifest("journeys", cfg, [args.trace],
                          [str(jpath), str(apath)], started))
    print(f"{len(journeys)} journeys, {len(anomalies)} anomalies -> {jpath}")
    return EXIT_OK


def cmd_decompose(args) -> int:
    started = time.monotonic()
    cfg, _, journeys, anomalies = _load_and_build(args)
    out = _out_dir(args)
    pairs = [(j, decompose(j)) for j in journeys]
    cpath = out / "decompositions.csv"
    with open(cpath, "w", newline="", encoding="utf-8") as fh:
        write_decompositions_csv(pairs, fh)
    jpath = out / "decompositions.jsonl"
    with open(jpath, "w", encoding="utf-8") as fh:
        for j, d in pairs:
            fh.write(json.dumps(decomposition_record(j, d),
                                separators=(",", ":")))
            fh.write("\n")
    _write_json(out / "manifest.json",
                _manifest("decompose", cfg, [args.trace],
                          [str(cpath), str(jpath)], started))
    print(f"decomposed {len(pairs)} packets "
          f"({len(anomalies)} anomalies) -> {cpath}")
    return EXIT_OK


def _contribution_dict(report) -> dict:
    return {
        "tau_ns": report.tau_ns,
        "violating_count": report.violating_count,
        "mean_of_ratios": report.mean_of_ratios,
        "ratio_of_sums": report.ratio_of_sums,
    }


def _histogram_dict(h) -> dict:
    return {
        "kind": h.kind,
        "bin_width_ns": h.bin_width_ns,
        "frames_spanned": h.frames_spanned,
        "counts": list(h.counts),
        "overflow_count": h.overflow_count,
        "sample_count": h.sample_count,
    }


def cmd_analyze(args) -> int:
    started = time.monotonic()
    targets = _parse_targets(args.targets)
    cfg, _, journeys, anomalies = _load_and_build(args)
    out = _out_dir(args)

    total_seen = len(journeys) + len(anomalies)
    anomaly_rate = len(anomalies) / total_seen if total_seen else 0.0
    if anomaly_rate > args.max_anomaly_rate:
        print(f"anomaly rate {anomaly_rate:.3%} exceeds "
              f"{args.max_anomaly_rate:.3%}", file=sys.stderr)
        return EXIT_DATA
    if not journeys:
        raise EmptyInputError("trace produced no complete journeys")

    pairs = [(j, decompose(j)) for j in journeys]
    decomps = [d for _, d in pairs]
    e2e = [d.y_e2e_ns for d in decomps]

    curve = ccdf(e2e)
    target_rows = []
    all_pass = True
    for tau_ns, eps in targets:
        value = dvp(e2e, tau_ns)
        ok = value < eps
        all_pass &= ok
        target_rows.append({
            "tau_ms": tau_ns / MS, "tau_ns": tau_ns, "epsilon": eps,
            "dvp": value, "pass": ok,
        })
        print(f"target tau={tau_ns / MS:g}ms eps={eps:g}: "
              f"dvp={value:.3e} {'PASS' if ok else 'FAIL'}")

    contributions = {"all_packets": _contribution_dict(
        conditional_contribution(decomps, None))}
    for tau_ns, _ in targets:
        try:
            rep = conditional_contribution(decomps, tau_ns)
            contributions[f"tau_ms_{tau_ns / MS:g}"] = _contribution_dict(rep)
        except UplatError:
            contributions[f"tau_ms_{tau_ns / MS:g}"] = None

    hists = {
        kind: _histogram_dict(frame_relative_histogram(journeys, kind, cfg.tdd))
        for kind in ("arrival", "service", "departure")
    }

    report = {
        "manifest": _manifest("analyze", cfg, [args.trace], [], started),
        "packets": len(journeys),
        "anomalies": {"count": len(anomalies), "rate": anomaly_rate},
        "mean_e2e_ns": float(sum(e2e)) / len(e2e),
        "targets": target_rows,
        "requirements_pass": all_pass,
        "contributions": contributions,
        "histograms": hists,
        "departure_slot_probabilities": list(
            departure_slot_distribution(journeys, cfg.tdd)
        ),
        "ccdf": [[d, p] for d, p in curve.points],
    }
    _write_json(out / "report.json", report)

    with open(out / "ccdf.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("delay_ns", "probability"))
        w.writerows(curve.points)
    with open(out / "decompositions.csv", "w", newline="", encoding="utf-8") as fh:
        write_decompositions_csv(pairs, fh)
    for kind, h in hists.items():
        with open(out / f"histogram_{kind}.csv", "w", newline="",
                  encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(("bin_index", "bin_start_ns", "count"))
            for i, c in enumerate(h["counts"]):
                w.writerow((i, i * h["bin_width_ns"], c))

    print(f"report -> {out / 'report.json'} "
          f"({'all targets PASS' if all_pass else 'some targets FAIL'})")
    return EXIT_OK if all_pass else EXIT_REQUIREMENT


def cmd_sweep(args) -> int:
    started = time.monotonic()
    cfg = _resolve_config(args)
    out = _out_dir(args)
    offsets = []
    for part in args.offsets.split(","):
        part = part.strip()
        if part:
            offsets.append(int(float(part) * MS))
    if not offsets:
        raise UplatError("no offsets given")
    targets = _parse_targets(args.targets) if args.targets else []
    result = offset_sweep(cfg, offsets, [t for t, _ in targets])

    spath = out / "sweep.csv"
    with open(spath, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = ["offset_ns", "mean_queue_delay_ns", "mean_e2e_ns"]
        header += [f"dvp_{t}" for t, _ in targets]
        w.writerow(header)
        for row in result.rows:
            w.writerow(
                [row.offset_ns, row.mean_queue_delay_ns, row.mean_e2e_ns]
                + [row.dvp_at_targets[t] for t, _ in targets]
            )
    payload = {
        "manifest": _manifest("sweep", cfg, [], [str(spath)], started),
        "theta_star_ns": result.theta_star_ns,
        "rows": [
            {
                "offset_ns": r.offset_ns,
                "mean_queue_delay_ns": r.mean_queue_delay_ns,
                "mean_e2e_ns": r.mean_e2e_ns,
                "dvp_at_targets": {str(k): v for k, v in r.dvp_at_targets.items()},
            }
            for r in result.rows
        ],
    }
    _write_json(out / "sweep.json", payload)
    print(f"theta_star = {result.theta_star_ns / MS:g} ms -> {spath}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uplat",
                     description="TDD uplink delay decomposition toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the uplink model, write a trace")
    _add_config_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    for name, func, needs_trace in (
        ("journeys", cmd_journeys, True),
        ("decompose", cmd_decompose, True),
        ("analyze", cmd_analyze, True),
    ):
        p = sub.add_parser(name)
        _add_config_args(p)
        p.add_argument("--trace", required=needs_trace,
                       help="trace file, or - for standard input")
        p.add_argument("--out", required=True)
        if name == "analyze":
            p.add_argument("--targets", default="5:1e-2,15:1e-4",
                           help='delay requirements as "tau_ms:epsilon,..."')
            p.add_argument("--max-anomaly-rate", type=float, default=0.01)
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="arrival-offset sweep")
    _add_config_args(p)
    p.add_argument("--offsets", default="0,1,2,3,4,5,6,7,8,9",
                   help="comma-separated arrival offsets in ms")
    p.add_argument("--targets", default="5:1e-2,15:1e-4")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UplatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry() -> None:
    raise SystemExit(main())
