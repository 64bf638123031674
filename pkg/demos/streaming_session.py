"""Walk through one two-tile streaming session segment by segment."""

from pathlib import Path

from obs360lab.config import load_config
from obs360lab.experiment import build_scenario, run_policy

cfg = load_config(Path(__file__).parent / "configs" / "two_tile.toml")
sc = build_scenario(cfg)
log = run_policy(cfg, scenario=sc)

print(" seg  r_1   r_2   omega_1 omega_2  mu     buffer  stall  revealed")
for i in range(0, log.segments, 10):
    r, w = log.decisions[i], log.omega[i]
    print(f"{i + 1:4d} {r[0]:5.1f} {r[1]:5.1f}   {w[0]:.2f}    {w[1]:.2f}  {log.mus[i]:6.2f} "
          f"{log.buffers[i]:6.2f} {log.rebuffer[i]:6.3f}  {log.aux_sets[i + 1]}")
bd = log.breakdown(sc.params)
print(f"\nQoE {bd.total:.2f} = utility {bd.utility:.2f} - rebuffer {bd.rebuffer:.2f} "
      f"- inter {bd.inter:.2f} - intra {bd.intra:.2f}")
print(f"total stall {log.rebuffer.sum():.3f} s over {log.segments} segments")
