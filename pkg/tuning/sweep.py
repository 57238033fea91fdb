import json
import sys
import time
import numpy as np
from deepblr.mbrl import PetsConfig, pets_loop

cfg = PetsConfig()
out = {}
t_all = time.perf_counter()
for kind in ("single_nn", "nn_ensemble", "blr_ensemble"):
    finals = []
    for seed in range(10):
        t0 = time.perf_counter()
        recs = pets_loop(kind, 10, seed=seed, config=cfg)
        rets = [r.episode_return for r in recs]
        f3 = float(np.mean(rets[-3:]))
        finals.append(f3)
        print(f"{kind:13s} s{seed} final3 {f3:7.1f} | "
              f"{' '.join(f'{v:6.0f}' for v in rets)} | {time.perf_counter()-t0:.0f}s",
              flush=True)
    out[kind] = {"finals": finals, "mean_final3": float(np.mean(finals))}
    print(f"== {kind}: mean final3 {out[kind]['mean_final3']:.2f}", flush=True)
out["wall_minutes"] = (time.perf_counter() - t_all) / 60.0
print(f"TOTAL {out['wall_minutes']:.1f} min")
print("blr_ensemble > single_nn:", out["blr_ensemble"]["mean_final3"] > out["single_nn"]["mean_final3"])
print("nn_ensemble  > single_nn:", out["nn_ensemble"]["mean_final3"] > out["single_nn"]["mean_final3"])
json.dump(out, open("tuning/sweep_result.json", "w"), indent=1)
