"""Weighted sum rate versus energy budget over a few random drops.

Same drops for every energy value; infeasible runs score zero.
"""

from mimo_urllc.sweep import SweepSpec, run_sweep, summarize

spec = SweepSpec(axis="energy", values=(0.5, 1.0, 2.0, 4.0), snapshots=4, receiver="zf")
rows = run_sweep(spec, threads=4)
print(f"{'energy':>6} {'scheme':<13} {'mean':>8} {'stderr':>8} {'short devices':>13}")
for s in summarize(rows):
    print(f"{s['value']:6.1f} {s['algorithm']:<13} {s['mean']:8.3f} {s['stderr']:8.3f} "
          f"{s['shortfall_devices']:13d}")
