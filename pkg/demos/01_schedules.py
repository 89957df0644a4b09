"""Build and inspect noise schedules.

Walks through the three schedule flavors: the symmetric base schedule, a
shifted (asymmetric) schedule, and a per-pixel field driven by a tau map.
All of them carry the same total mass, which is what keeps the bridge
posterior variances comparable across pixels.

Run:  python demos/01_schedules.py
"""

from pathlib import Path

import numpy as np

from asyncdsb import ScheduleConfig, accumulate, build_field, build_shifted, build_symmetric
from asyncdsb.schedule import export_csv
from asyncdsb.svgplot import line_plot

out = Path("demo_out/01_schedules")
out.mkdir(parents=True, exist_ok=True)

cfg = ScheduleConfig(steps=1000, total_mass=1.0)

# The base schedule: small at both ends, apex in the middle.
base = build_symmetric(cfg)
print(f"symmetric schedule: T={base.steps}, mass={base.total:.12f}, "
      f"apex height={cfg.apex_height}")

# Shifting the apex never changes the mass.
for tau in (0.2, 0.5, 0.8):
    shifted = build_shifted(cfg, tau)
    print(f"  tau={tau}: mass={shifted.total:.12f}, "
          f"peak beta={shifted.betas.max():.4f}")

# Accumulated variances partition the mass at every grid point.
vt = accumulate(base)
partition = np.abs(vt.sigma2 + vt.sigma2_bar - base.total).max()
print(f"variance partition error: {partition:.2e}")

# A tiny per-pixel field: one early pixel, one mid, one late.
field = build_field(cfg, np.array([[0.2, 0.5, 0.8]]))
print(f"field pixel masses: {np.round(field.total.ravel(), 12)}")

export_csv(base, out / "symmetric.csv")
line_plot(out / "schedules.svg",
          [(f"tau={t}", build_shifted(cfg, t).midpoints, build_shifted(cfg, t).betas)
           for t in (0.2, 0.5, 0.8)],
          title="mass-preserving schedules", xlabel="t", ylabel="beta",
          invert_x=False)
print(f"wrote {out}/symmetric.csv and {out}/schedules.svg")
