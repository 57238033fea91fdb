"""Probe arbitrary PETS/CEM config overrides for the ordering margin."""
import json
import sys
import time

sys.path.insert(0, "/root/pkg/src")
import numpy as np

from deepblr.mbrl.cem import CemConfig
from deepblr.mbrl.dynamics import DynamicsTrainConfig
from deepblr.mbrl.pets import PetsConfig, pets_loop

spec = json.loads(sys.argv[1])
SEEDS = [int(s) for s in sys.argv[2].split(",")]
KINDS = sys.argv[3].split(",")

cem = CemConfig(horizon=spec.get("horizon", 15),
                population=spec.get("population", 60),
                elites=spec.get("elites", 6),
                iterations=spec.get("iterations", 4),
                particles=spec.get("particles", 15))
dyn = DynamicsTrainConfig(epochs=spec.get("epochs", 35))
cfg = PetsConfig(cem=cem, dynamics=dyn,
                 angle_range=spec.get("angle", 0.6),
                 velocity_range=spec.get("vel", 1.0),
                 steps_per_episode=spec.get("steps", 200))
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
