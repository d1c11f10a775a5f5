#!/usr/bin/env python3
"""Exercise the bang-bang regulator against the pneumatic plant model.

Runs a setpoint step, reports rise/settle behaviour and valve duty
cycles, then drills the overpressure fault path.  Optionally writes the
per-tick trace as CSV for plotting.

    python3 scripts/closed_loop_demo.py --setpoint 70 --seconds 10
    python3 scripts/closed_loop_demo.py --csv /tmp/step.csv
"""

import argparse
import csv
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parents[1] / "src"))

from exobench.controller import (
    HysteresisController,
    Mode,
    PressureLimits,
    bang_bang_tick,
    safety_clamp,
)
from exobench.plant import ActuatorState, PlantParams, step_pneumatics


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--setpoint", type=float, default=70.0)
    parser.add_argument("--band", type=float, default=2.0)
    parser.add_argument("--seconds", type=float, default=10.0)
    parser.add_argument("--csv", default=None, help="write per-tick trace here")
    args = parser.parse_args(argv)

    plant = PlantParams()
    ctrl = HysteresisController(setpoint=args.setpoint, band=args.band)
    act = ActuatorState()
    dt = 1.0 / ctrl.tick_rate
    n = int(round(args.seconds / dt))

    trace = []
    in_band_at = None
    mode_ticks = {m: 0 for m in Mode}
    for i in range(n):
        ctrl, cmd = bang_bang_tick(ctrl, act.pressure)
        act = step_pneumatics(act, cmd, dt, plant)
        mode_ticks[ctrl.mode] += 1
        t = (i + 1) * dt
        if in_band_at is None and abs(act.pressure - args.setpoint) <= args.band:
            in_band_at = t
        trace.append((t, act.pressure, ctrl.mode.value, cmd.bits()))

    tail = [p for t, p, _, _ in trace if t >= args.seconds / 2.0]
    print(f"setpoint {args.setpoint:.1f} kPa, band +/-{args.band:.1f} kPa, "
          f"{ctrl.tick_rate:.0f} Hz")
    print(f"  entered band at {in_band_at:.3f} s" if in_band_at
          else "  never entered band")
    print(f"  second-half pressure: min {min(tail):.2f}  max {max(tail):.2f} "
          f"kPa")
    total = sum(mode_ticks.values())
    for mode in Mode:
        print(f"  {mode.value:<9} {100.0 * mode_ticks[mode] / total:5.1f} % "
              f"of ticks")

    # fault drill: force an overpressure reading and drain on the exhaust
    limits = PressureLimits(p_max=args.setpoint, margin=3.0)
    hot = limits.p_max + limits.margin + 7.0
    override, fault = safety_clamp(hot, limits)
    act = ActuatorState(pressure=hot)
    t = 0.0
    while act.pressure >= 5.0:
        act = step_pneumatics(act, override, dt, plant)
        t += dt
    print(f"fault drill: {fault}")
    print(f"  exhaust drained {hot:.1f} -> {act.pressure:.2f} kPa "
          f"in {t:.2f} s")

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("t_s", "pressure_kpa", "mode", "valve_bits"))
            w.writerows(trace)
        print(f"trace written to {args.csv}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
