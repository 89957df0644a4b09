"""Sample the bridge forwards and run the reverse sampler.

Shows the analytic posterior between a clean and a corrupted image, draws
forward marginals, then runs the reverse sampler with the exact score
oracle and watches the corrupted region contract back onto the target.

Run:  python demos/02_bridge_sampling.py
"""

from pathlib import Path

import numpy as np

from asyncdsb import (
    AnalyticOracle, BridgeEndpoints, CounterRng, SamplerConfig, ScheduleConfig,
    accumulate, apply_mask, build_symmetric, make_mask, posterior_params,
    run_reverse, sample_xt, synth_corpus,
)
from asyncdsb.bridge import dump_states, export_trajectory_csv

out = Path("demo_out/02_bridge")
out.mkdir(parents=True, exist_ok=True)

img = synth_corpus(seed=7, n=1, h=64, w=64)[0]
mask = make_mask("center", 64, 64)
x_c = apply_mask(img, mask)

cfg = ScheduleConfig(steps=1000, total_mass=0.3)
schedule = build_symmetric(cfg)
vt = accumulate(schedule)
ep = BridgeEndpoints(x0=img, x1=x_c)

# Forward marginals: mean interpolates the endpoints, variance vanishes at both.
for t in (0.0, 0.25, 0.5, 0.75, 1.0):
    p = posterior_params(ep, t, vt)
    print(f"t={t:4}: mean in [{p.mean.min():.3f}, {p.mean.max():.3f}], "
          f"pixel var {float(np.max(p.var)):.4f}")

rng = CounterRng(seed=11)
x_mid = sample_xt(ep, 0.5, vt, rng)
print(f"one draw at t=0.5: values span [{x_mid.min():.2f}, {x_mid.max():.2f}] "
      "(noise pushes outside [0,1], as expected mid-bridge)")

# Reverse run with the exact oracle: the hole contracts onto the target.
sampler = SamplerConfig(steps=1000, seed=3, record_every=100)
traj = run_reverse(x_c, AnalyticOracle(img, vt), schedule, sampler,
                   visible=(mask, x_c), vt=vt)
for t, state in traj:
    mse = float(np.mean((state - img) ** 2))
    print(f"  t={t:4.2f}  MSE to target {mse:.2e}")

export_trajectory_csv(traj, out / "trajectory.csv", img, region=mask)
dump_states(traj, out / "states", fmt="png")
print(f"wrote {out}/trajectory.csv and {out}/states/")
