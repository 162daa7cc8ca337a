"""Ensemble ADEV of generated noise against the target, per noise type.

    python scripts/noise_validation.py --seeds 20 --n-cycles 20000
"""
import argparse
import csv
import sys

from clockstab import ClockSchedule, preset
from clockstab.noise_gen import validate_generator
from clockstab.noise_model import LaserNoiseSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--n-cycles", type=int, default=20_000)
    ap.add_argument("--t-ramsey", type=float, default=0.5)
    ap.add_argument("--t-dead", type=float, default=0.5)
    args = ap.parse_args()

    cl = preset("cL")
    pure = {"white": LaserNoiseSpec(h0=cl.h0), "flicker": LaserNoiseSpec(h_minus1=cl.h_minus1),
            "rw": LaserNoiseSpec(h_minus2=cl.h_minus2), "cL": cl}
    schedule = ClockSchedule(args.t_ramsey, args.t_dead)
    w = csv.writer(sys.stdout)
    w.writerow(["noise", "tau", "target", "estimated", "rel_error"])
    for name, spec in pure.items():
        rep = validate_generator(spec, schedule, args.n_cycles, args.seeds)
        for row in zip(rep.taus, rep.target, rep.estimated, rep.rel_error):
            w.writerow([name, *row])
        print(f"# {name}: max |error| {rep.max_rel_error:.1%}, slope {rep.slope:.3f}", file=sys.stderr)


if __name__ == "__main__":
    main()
