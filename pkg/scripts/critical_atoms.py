"""Critical atom numbers for every preset and dead time, coherent and squeezed.

    python scripts/critical_atoms.py --t-dead 0.1,0.5,1
"""
import argparse
import csv
import sys

from clockstab import coherence_time, n_min, n_min_capped, preset, sigma_min
from clockstab.noise_model import PRESET_NAMES


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-dead", default="0.1,0.5,1")
    ap.add_argument("--t-max", default="0.1,1,3")
    args = ap.parse_args()
    t_dead = [float(x) for x in args.t_dead.split(",")]
    t_max = [float(x) for x in args.t_max.split(",")]

    w = csv.writer(sys.stdout)
    w.writerow(["laser", "Z", "T_D", "T_R_star", "sigma_min", "N_min_css", "N_min_sss"]
               + [f"N_min_capped_{t:g}" for t in t_max])
    for name in PRESET_NAMES:
        spec = preset(name)
        for td in t_dead:
            sm = sigma_min(spec, td)
            w.writerow([name, coherence_time(spec), td, sm.t_ramsey, sm.sigma,
                        n_min(spec, td), n_min(spec, td, squeezed=True)]
                       + [n_min_capped(spec, td, t) for t in t_max])


if __name__ == "__main__":
    main()
