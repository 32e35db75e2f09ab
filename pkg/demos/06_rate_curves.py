"""Rate-distortion curves of RoI coding against the uniform baseline, saved as CSV.

Run:  python demos/06_rate_curves.py [OUT.csv]
"""

import sys
import tempfile
from pathlib import Path

from flowroi import PipelineConfig, SyntheticSpec, generate_synthetic, rate_curve
from flowroi.metrics import write_rate_csv

seq, truth = generate_synthetic(SyntheticSpec(n_cells=10, n_frames=8, width=256, height=256, seed=4))
rows = rate_curve(seq, PipelineConfig(), [10, 20, 40], truth=truth)

print("rate  method    global   cells    background  bytes")
for r in rows:
    print(f"{r.rate:4.0f}  {r.method:8s}  {r.psnr_global:6.2f}  {r.psnr_roi:6.2f}  {r.psnr_background:10.2f}  {r.mean_bytes:7.0f}")

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp()) / "rates.csv"
write_rate_csv(rows, out)
print("wrote", out, "(plot with: flowroi plot", out, "curve.svg)")
