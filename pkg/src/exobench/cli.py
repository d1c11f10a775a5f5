"""Command-line front end.

    exobench simulate --config session.toml --seed 42
    exobench replay  <log.exolog>
    exobench analyze <session-dir>
    exobench stats   <tidy.csv>
    exobench report  <session-dir> --format csv|json
    exobench serve   --port 8760

The default session root is $EXOBENCH_DATA_DIR (falling back to
./exobench-data); simulate writes one session directory per seed under it.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from .analysis import (
    DegenerateComparison,
    MissingTrials,
    analyze_session,
    export_report,
)
from .config import load_config
from .protocol import InvalidConfig
from .stats import (
    AllZeroDifferences,
    TestResult,
    adjust_family,
    friedman_test,
    paired_comparison,
)
from .store import default_data_dir
from .synthetic import generate_session
from .telemetry import frame_to_json, replay_log

TIDY_COLUMNS = ("subject", "condition", "outcome", "value")


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    root = Path(args.out) if args.out else \
        default_data_dir() / f"session-seed{args.seed}"
    store = generate_session(root, config, args.seed)
    manifest = store.read_manifest()
    n_trials = sum(len(p["trials"]) for p in manifest["participants"])
    print(f"wrote session: {store.root}")
    print(f"  participants: {len(manifest['participants'])}")
    print(f"  trials:       {n_trials}")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    for frame in replay_log(args.log, paced=args.paced, speed=args.speed):
        print(json.dumps(frame_to_json(frame), separators=(",", ":")))
    return 0


def _fmt_result(r: TestResult) -> str:
    p_fdr = f"{r.p_fdr:.4f}" if r.p_fdr is not None else "n/a"
    return (f"dMed={r.median_delta:+.3f} CI=[{r.ci_low:+.3f}, "
            f"{r.ci_high:+.3f}] p_FDR={p_fdr} r={r.effect_r:.2f} "
            f"n={r.n_pairs}")


def _cmd_analyze(args: argparse.Namespace) -> int:
    try:
        analysis = analyze_session(args.session_dir)
    except MissingTrials as e:
        print(e, file=sys.stderr)
        return 1
    print(f"analyzed session {Path(args.session_dir).name}: "
          f"{len(analysis.participants)} participants, "
          f"{len(analysis.static_rows)} static holds, "
          f"{len(analysis.rom_rows)} transparency trials, "
          f"{len(analysis.pick_rows)} pick-and-place trials")
    for family in sorted(analysis.families):
        for r in analysis.families[family]:
            if isinstance(r, DegenerateComparison):
                print(f"  [{family}] {r.label}: {r.note}")
            else:
                print(f"  [{family}] {r.label}: {_fmt_result(r)}")
    print("per-trial tables under <participant>/derived/; run "
          "`exobench report` for the session bundle")
    return 0


def _load_tidy(path: str) -> dict[str, dict[str, dict[str, float]]]:
    """outcome -> condition -> subject -> value"""
    table: dict = defaultdict(lambda: defaultdict(dict))
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        got = tuple(name.strip() for name in reader.fieldnames or ())
        if got != TIDY_COLUMNS:
            raise SystemExit(
                f"expected tidy header {','.join(TIDY_COLUMNS)}; got "
                f"{','.join(got) if got else 'an empty file'}")
        for i, row in enumerate(reader, start=2):
            try:
                value = float(row["value"])
            except ValueError:
                raise SystemExit(f"line {i}: value {row['value']!r} "
                                 f"is not a number") from None
            table[row["outcome"]][row["condition"]][row["subject"]] = value
    return table


def _cmd_stats(args: argparse.Namespace) -> int:
    table = _load_tidy(args.tidy_csv)
    writer = csv.writer(sys.stdout)
    writer.writerow(("outcome", "comparison", "n", "median_delta", "ci_low",
                     "ci_high", "p_raw", "p_fdr", "z", "r", "note"))
    for outcome in sorted(table):
        conditions = sorted(table[outcome])
        subjects = sorted(set.intersection(
            *(set(table[outcome][c]) for c in conditions)))
        if len(subjects) < 2:
            writer.writerow((outcome, "", len(subjects), "", "", "", "", "",
                             "", "", "needs at least 2 complete subjects"))
            continue
        columns = {c: [table[outcome][c][s] for s in subjects]
                   for c in conditions}
        if len(conditions) >= 3:
            fr = friedman_test(np.column_stack(
                [columns[c] for c in conditions]))
            writer.writerow((outcome, f"friedman({', '.join(conditions)})",
                             len(subjects), "", "", "",
                             f"{fr.p_value:.6g}", "", f"{fr.statistic:.4f}",
                             "", f"df={fr.df}"))
        results = []
        labels = []
        for i in range(len(conditions)):
            for j in range(i + 1, len(conditions)):
                a, b = conditions[j], conditions[i]
                label = f"{a} vs {b}"
                try:
                    results.append(paired_comparison(
                        columns[a], columns[b], label=label))
                    labels.append(None)
                except AllZeroDifferences:
                    labels.append(label)
        adjusted = iter(adjust_family(results))
        for label in labels:
            if label is not None:
                writer.writerow((outcome, label, len(subjects), "", "", "",
                                 "", "", "", "", "all differences zero"))
            else:
                r = next(adjusted)
                writer.writerow((
                    outcome, r.label, r.n_pairs, f"{r.median_delta:.6g}",
                    f"{r.ci_low:.6g}", f"{r.ci_high:.6g}", f"{r.p_raw:.6g}",
                    f"{r.p_fdr:.6g}", f"{r.z:.4f}", f"{r.effect_r:.4f}",
                    "low_power_ci" if r.ci_low_power else ""))
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    try:
        paths = export_report(args.session_dir, args.format)
    except MissingTrials as e:
        print(e, file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    from .server import serve

    serve(args.port, host=args.host)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exobench",
        description="Shoulder-exosuit rig twin: simulate, replay, analyze.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate",
                       help="generate a synthetic session from a config")
    p.add_argument("--config", required=True, help="session TOML file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", help="session directory (default: "
                                 "$EXOBENCH_DATA_DIR/session-seed<n>)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("replay", help="print a telemetry log as JSON lines")
    p.add_argument("log")
    p.add_argument("--paced", action="store_true",
                   help="sleep out the original inter-frame gaps")
    p.add_argument("--speed", type=float, default=1.0)
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("analyze",
                       help="recompute all derived metrics for a session")
    p.add_argument("session_dir")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("stats",
                       help="paired stats on a tidy CSV "
                            f"({','.join(TIDY_COLUMNS)})")
    p.add_argument("tidy_csv")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("report", help="export the session report bundle")
    p.add_argument("session_dir")
    p.add_argument("--format", required=True, choices=("csv", "json"))
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("serve",
                       help="host the console transport and frame socket")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidConfig as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(e, file=sys.stderr)
        return 1
    except BrokenPipeError:
        # downstream pager/head closed the pipe; not an error
        sys.stderr.close()
        return 0


if __name__ == "__main__":
    sys.exit(main())
