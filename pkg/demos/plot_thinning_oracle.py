"""
Closed forms against the exact Fock distribution
================================================

Pixel statistics follow from binomial thinning of the full state. Here the
closed-form moments are compared with an exact calculation in a truncated
Fock basis, and the single-mode approximation of the beam-splitter mixing is
compared with the exact two-mode result.
"""

import math

from squeezecam import fock
from squeezecam import state as st

p = st.StateParams(n_alpha=4.0, n_s=1.0, phi1=0.3)
d = fock.dsv_distribution(p.beta, p.r, 0.0, tail_tol=1e-14)
print(f"cutoff {d.cutoff}, tail {d.tail_mass:.1e}")

for eta in (1.0, 0.5, 0.1):
    m = fock.moments(fock.apply_loss(d, eta))
    print(f"eta={eta:4}: mean {m.mean:.12f} vs {st.pixel_mean(p, eta):.12f}, "
          f"var {m.variance:.12f} vs {st.pixel_variance(p, eta):.12f}")

###############################################################################
# q does not depend on eta

for eta in (1.0, 0.5, 0.1):
    print(f"q at eta={eta}: {st.q_from_moments(st.pixel_mean(p, eta), st.pixel_variance(p, eta)):.12f}")

###############################################################################
# Mixing a coherent pump into squeezed vacuum at a small angle

r = math.asinh(1.0)
prev = None
for theta in (0.2, 0.1, 0.05):
    exact = fock.moments(fock.exact_mix_and_trace(10.0, r, theta))
    approx = fock.moments(fock.approximate_mixed_state(10.0, r, theta))
    gap = abs(exact.mean - approx.mean)
    ratio = f"  ratio {prev / gap:.3f}" if prev else ""
    print(f"theta={theta}: exact mean {exact.mean:.6f}, approx {approx.mean:.6f}, gap {gap:.3e}{ratio}")
    prev = gap
