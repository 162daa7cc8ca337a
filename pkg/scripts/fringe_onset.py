"""Fringe-hop onset T_FH / Z from escape times, against the empirical guides.

    python scripts/fringe_onset.py --atoms 3,10,30,100,300,1000
"""
import argparse
import csv
import sys

from clockstab import EnsembleSpec, coherence_time, preset, t_fringe_hop
from clockstab.fringe_mfpt import guide_flicker, guide_rw
from clockstab.noise_model import LaserNoiseSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--atoms", default="3,10,30,100,300,1000,3000")
    ap.add_argument("--threshold", type=float, default=1e6)
    ap.add_argument("--squeezed", action="store_true")
    args = ap.parse_args()

    cl = preset("cL")
    kinds = {"flicker": (LaserNoiseSpec(h_minus1=cl.h_minus1), guide_flicker),
             "rw": (LaserNoiseSpec(h_minus2=cl.h_minus2), guide_rw)}
    w = csv.writer(sys.stdout)
    w.writerow(["noise", "N", "T_FH_over_Z", "guide_over_Z", "escape_half_width", "low_confidence"])
    for kind, (spec, guide) in kinds.items():
        z = coherence_time(spec)
        for n in (int(x) for x in args.atoms.split(",")):
            ens = EnsembleSpec.squeezed(n) if args.squeezed else EnsembleSpec(n)
            res = t_fringe_hop(spec, ens, threshold_cycles=args.threshold)
            w.writerow([kind, n, res.ratio_to_z, float(guide(n, z)) / z, res.escape_half_width,
                        res.low_confidence])


if __name__ == "__main__":
    main()
