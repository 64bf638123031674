"""Dynamic regret per segment shrinks with the horizon in convex mode."""

from obs360lab.config import RunConfig
from obs360lab.experiment import simulate
from obs360lab.traces import SyntheticTraceSpec

slow = SyntheticTraceSpec(capacity_base=10.0, d_max=15.0, capacity_step=1.0,
                          viewport_step=1.0, reference_yaw_step=1.0)
cfg = RunConfig(mode="convex", alpha_schedule="horizon", alpha0=27.85, synthetic=slow, seed=0)

print("    I    Reg_I   Reg_I/I    bound   V_empty    V_r")
for I in (125, 250, 500, 1000, 2000):
    _, s, _, _ = simulate(cfg.replace(segments=I))
    print(f"{I:5d} {s['regret']:8.1f} {s['regret_per_segment']:8.3f} {s['regret_bound']:9.0f} "
          f"{s['v_empty']:8d} {s['v_r']:8.1f}")
