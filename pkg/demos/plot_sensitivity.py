"""
Camera sensitivity approaches the homodyne limit
================================================

The error on n_s from a single camera frame, propagated through the q
coefficient, tends to the homodyne value 2 n_s (n_s + 1) as the displacement
grows.
"""

from squeezecam import state as st

for n_s in (0.5, 1.0, 2.0):
    hom = st.homodyne_sensitivity(n_s)
    print(f"n_s = {n_s}: homodyne {hom}")
    for exp in range(4, 10):
        rep = [st.sensitivity_report(st.StateParams(10.0**exp, n_s, phi))
               for phi in (st.PHI_SQUEEZED, st.PHI_ANTISQUEEZED)]
        print(f"   n_alpha=1e{exp}: ratio squeezed {rep[0].ratio:.6f}, "
              f"anti-squeezed {rep[1].ratio:.6f}")
