"""
Photon-number noise against displacement phase
==============================================

A displaced squeezed vacuum is sub-Poissonian only for part of the phase
circle. This script tabulates the variance relative to the shot-noise limit
and locates where it crosses.
"""

import math

import numpy as np

from squeezecam import state as st

p = st.StateParams(n_alpha=1e6, n_s=1.0)

###############################################################################
# Variance over shot noise, every 15 degrees

phases = np.radians(np.arange(0, 181, 15))
for phi, var, snl in st.phase_sweep(p, phases):
    bar = "#" * int(10 * math.log10(var / snl) + 20)
    print(f"{math.degrees(phi):6.1f} deg  var/snl = {var / snl:8.4f}  {bar}")

###############################################################################
# The crossing, analytic and by root finding

print("crossing (analytic):", st.crossing_phase(p))
print("crossing (brentq):  ", st.crossing_phase_bisect(p))

###############################################################################
# With no squeezing the curve is flat

flat = st.StateParams(1e6, 0.0)
print("coherent var/snl:", {st.variance_total(flat.with_phase(x)) / st.shot_noise_limit(flat)
                            for x in phases})
