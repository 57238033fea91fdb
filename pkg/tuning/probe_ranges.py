"""Probe harder reset ranges for the arm-ordering margin."""
import json
import sys
import time

sys.path.insert(0, "/root/pkg/src")
import numpy as np

from deepblr.mbrl.pets import PetsConfig, pets_loop

ANGLE, VEL = float(sys.argv[1]), float(sys.argv[2])
SEEDS = [int(s) for s in sys.argv[3].split(",")]
KINDS = sys.argv[4].split(",")

cfg = PetsConfig(angle_range=ANGLE, velocity_range=VEL)
out = {}
for kind in KINDS:
    finals = []
    for seed in SEEDS:
        t0 = time.time()
        recs = pets_loop(kind, cfg.episodes, seed, cfg)
        rets = [r.episode_return for r in recs]
        f3 = float(np.mean(rets[-3:]))
        finals.append(f3)
        print(f"{kind:13s} s{seed} final3 {f3:7.1f} | "
              + " ".join(f"{r:6.0f}" for r in rets)
              + f" | {time.time()-t0:.0f}s", flush=True)
    out[kind] = finals
    print(f"== {kind}: mean final3 {np.mean(finals):.2f}", flush=True)
print(json.dumps(out))
