"""Compare OBS360 against the exact offline optimum on small instances."""

from pathlib import Path

import numpy as np

from obs360lab.config import load_config
from obs360lab.experiment import build_scenario, offline_comparison, run_policy

base = load_config(Path(__file__).parent / "configs" / "tiny_offline.toml")
rows = []
for seed in range(10):
    cfg = base.replace(seed=seed)
    best, online, summary = offline_comparison(cfg)
    sc = build_scenario(cfg)
    const = run_policy(cfg, "constant:median", sc).total_qoe(sc.params)
    rows.append((best.qoe, summary["policy_qoe"], const))
    print(f"seed {seed}: offline {best.qoe:8.2f}  obs360 {summary['policy_qoe']:8.2f}  "
          f"constant {const:8.2f}")
opt, obs, const = np.array(rows).T
print(f"\nobs360 reaches {100 * obs.sum() / opt.sum():.1f}% of the offline optimum; "
      f"constant-median reaches {100 * const.sum() / opt.sum():.1f}%")
