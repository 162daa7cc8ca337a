"""sqrt(Z) sigma_min against T_D / Z for all laser presets, with a power-law fit.

    python scripts/universal_scaling.py > scaling.csv
"""
import argparse
import csv
import math
import sys

import numpy as np

from clockstab import coherence_time, preset, sigma_min
from clockstab.noise_model import PRESET_NAMES


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=17)
    args = ap.parse_args()

    w = csv.writer(sys.stdout)
    w.writerow(["laser", "Z", "T_D_over_Z", "T_R_star", "sigma_min", "sqrtZ_sigma_min"])
    xs, ys = [], []
    for name in PRESET_NAMES:
        spec = preset(name)
        z = coherence_time(spec)
        for r in np.geomspace(1e-2, 1, args.points):
            sm = sigma_min(spec, r * z)
            xs.append(r)
            ys.append(math.sqrt(z) * sm.sigma)
            w.writerow([name, z, r, sm.t_ramsey, sm.sigma, ys[-1]])
    slope, icpt = np.polyfit(np.log(xs), np.log(ys), 1)
    print(f"# fit: sqrt(Z) sigma_min = {math.exp(icpt):.3e} (T_D/Z)^{slope:.3f}", file=sys.stderr)


if __name__ == "__main__":
    main()
