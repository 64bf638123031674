"""Run several policies on a 16-tile scenario and write their reports."""

from pathlib import Path

from obs360lab.config import load_config
from obs360lab.experiment import compare

cfg = load_config(Path(__file__).parent / "configs" / "sixteen_tile.toml")
for name, (_, s) in compare(cfg).items():
    print(f"{name:>18}: QoE {s['qoe']:9.1f}  viewing {s['mean_viewing_bitrate']:6.2f} Mbps  "
          f"inter {s['inter_degradation_loss']:6.1f}  intra {s['intra_degradation_loss']:6.1f}  "
          f"stall {s['total_rebuffer_s']:6.2f} s")
