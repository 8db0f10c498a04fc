"""A symmetric network carries a conserved quadratic and a family of invariant measures.

The diamond (a 4-cycle heated at two opposite corners) has a normal mode
supported on the unheated corners. Its energy K is never touched by the
baths, so every tilt of the Gibbs state by exp(-gamma K) is again stationary.

    python3 demos/diamond_nonuniqueness.py
"""
import numpy as np

from hcnet import analyze, flow_damped, load_builtin, tilted_covariance
from hcnet.harmonic import tilt_residual

spec = load_builtin("diamond")
rep = analyze(spec)
print(f"asymmetric: {rep.asymmetric}, spectral abscissa {rep.abscissa:.2e}")
(k,) = rep.invariants
print(f"K = {k.alpha:g} <z,q>^2 + <z,p>^2 with z = {np.round(k.z, 4)}")

z0 = np.array([0.4, 0.8, -0.3, -0.5, 0.2, -0.1, 0.3, 0.6])
tr = flow_damped(spec, z0, 100.0, 1e-3, thin=1000)
print("K along the damped flow:", np.round(k(tr.q, tr.p)[::20], 12))

for gamma in (0.0, 0.1, 1.0, 10.0):
    Q = tilted_covariance(spec, k, gamma)
    var_mode = k.z @ Q[4:, 4:] @ k.z
    print(f"gamma {gamma:5}: Var<z,p> = {var_mode:.4f}, stationarity residual {tilt_residual(spec, Q):.1e}")
