"""
Precision of q against the number of runs
=========================================

Many short runs are fitted once. Averaging R of them should shrink the spread
of q as R**-0.5. A small sensor and few frames keep this quick; the full
study is ``squeezecam precision``.
"""

import math

from squeezecam import camera, estimator
from squeezecam import state as st

g = camera.SensorGeometry.uniform(8, 8)
results = {}
for name, phi in (("squeezed", 0.0), ("antisqueezed", math.pi / 2)):
    study = estimator.precision_study(st.StateParams(1e6, 1.0, phi), g, frames_per_run=200,
                                      run_counts=[2, 4, 8, 16], seed=3, groups=16)
    results[name] = study
    print(f"{name}: slope {study.slope:.3f} +/- {study.slope_se:.3f}")
    for r, sd, n in study.rows():
        print(f"   R={r:3d}  sd(q) {sd:.3e}  from {n} groups")

ratios = [a / s for a, s in zip(results["antisqueezed"].sd_q, results["squeezed"].sd_q)]
print("anti/squeezed sd ratio per R:", ", ".join(f"{x:.1f}" for x in ratios))
