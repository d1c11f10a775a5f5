#!/usr/bin/env python3
"""Generate one synthetic study session, analyze it, and print the headlines.

    python3 scripts/run_synthetic_session.py --seed 42 --out /tmp/session
    python3 scripts/run_synthetic_session.py --config configs/session.toml \
        --format csv

The full eight-participant generate + analyze cycle takes about a minute.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parents[1] / "src"))

from exobench.analysis import DegenerateComparison, analyze_session, export_report
from exobench.config import load_config
from exobench.synthetic import generate_session

REPO_ROOT = Path(__file__).parents[1]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=REPO_ROOT / "configs/session.toml",
                        help="session TOML (default: bundled desk config)")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--out", default=None,
                        help="session directory (default: ./exobench-data/...)")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    args = parser.parse_args(argv)

    config = load_config(args.config)
    root = Path(args.out) if args.out else \
        Path("exobench-data") / f"session-seed{args.seed}"
    print(f"generating {len(config.participants)} participants "
          f"(seed {args.seed}) under {root} ...")
    generate_session(root, config, args.seed)

    analysis = analyze_session(root)
    print(f"\n{len(analysis.static_rows)} static holds, "
          f"{len(analysis.rom_rows)} transparency trials, "
          f"{len(analysis.pick_rows)} pick-and-place trials")
    for family in sorted(analysis.families):
        for r in analysis.families[family]:
            if isinstance(r, DegenerateComparison):
                print(f"  [{family}] {r.label}: {r.note}")
            else:
                print(f"  [{family}] {r.label}: dMed={r.median_delta:+.2f} "
                      f"CI=[{r.ci_low:+.2f}, {r.ci_high:+.2f}] "
                      f"p_FDR={r.p_fdr:.4f} r={r.effect_r:.2f}")

    paths = export_report(root, args.format, analysis=analysis)
    print("\nreport files:")
    for p in paths:
        print(f"  {p}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
