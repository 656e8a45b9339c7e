"""How the certificate reacts to the prior sample size and to label noise.

The cumulative gradient-difference sum should shrink as ``m`` grows, and a
run on fully shuffled labels should get a much larger bound than a clean one.

    python demos/m_sweep.py
"""

from pathlib import Path

from floorpac.certifier import m_trend, random_label_curve, sweep_m
from floorpac.config import load_config

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "blobs_fgd.yaml"

base = load_config(CONFIG).replace(**{"data.test_n": 2000})

rows = sweep_m(base, [125, 250, 500, 1000, 1500], repeats=3)
print(f"{'m':>6} {'sum':>10} {'bound':>8} {'test':>8}")
for r in rows:
    print(f"{r['m']:>6} {r['sum_mean']:>10.4f} {r['bound_mean']:>8.4f} {r['test_mean']:>8.4f}")
print(f"rank correlation(m, sum) = {m_trend(rows):.3f}")

print(f"\n{'portion':>8} {'train S':>8} {'test':>8} {'bound':>8}")
for r in random_label_curve(base, [0.0, 0.25, 0.5, 1.0], repeats=3):
    print(f"{r['portion']:>8.2f} {r['train_S_mean']:>8.4f} {r['test_mean']:>8.4f} {r['bound_mean']:>8.4f}")
