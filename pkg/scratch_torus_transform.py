import time

import numpy as np

import isotheta.torus as T
import isotheta.torus_transform as TT

MU = 0.3 + 0.9j
BPS = [-0.3 + 0.22j, 0.11 - 0.08j]
P = [0.0]
Q = [0.23]

t0 = time.time()
config, state = T.build_state(MU, BPS, P, Q)
print(f"build_state: {time.time()-t0:.2f}s   t = {state.t}")

frames = TT.local_frames(None, state)
from isotheta.transform import frame_residuals
print("frame reconstruction:", frame_residuals(frames))

d = TT.build_torus_dressing(frames, 0, 1)
print("delta:", d.delta, " center:", d.center)
print("kernel coeff:", d.kernel_coeff)
inv = d.invariant_residuals()
print("Sell residuals:", {k: f"{v:.3e}" for k, v in inv.items()})

# kernel value at the two poles annihilates the right columns
fk = TT.dressing_f(d, d.lam_k)
fl = TT.dressing_f(d, d.lam_l)
print("f(lam_k) = S_minus:", np.abs(fk - d.s_minus).max())
print("f(lam_l) = S_plus:", np.abs(fl - d.s_plus).max())
print("f(lam_k) @ Gk1:", np.abs(fk @ d.g[:, 0]).max())
print("f(lam_l) @ Gl1:", np.abs(fl @ d.g[:, 1]).max())

rng = np.random.default_rng(7)
pts = rng.uniform(-0.45, 0.45, 8) + 1j * rng.uniform(-0.3, 0.55, 8)
print("f twist residual:", TT.dressing_twist_residual(d, pts))

t0 = time.time()
hat = TT.torus_transformed_state(d, state)
print(f"hat state: {time.time()-t0:.2f}s")
print("hat t:", hat.t)
print("shifts:", hat.t - state.t)
print("hat residue traces:", [np.trace(r) for r in hat.residues])

print("connection residual:", TT.transformed_connection_residual(d, state, hat, pts))
print("hat twist residual:", hat.twist_residual(pts[:4]))

print("windings:", TT.kernel_divisor_windings(d))

t0 = time.time()
monos = T.transported_monodromies(config, method="theta")
monos_hat = TT.transformed_monodromies(config, d, hat)
signs, err = TT.monodromy_sign_pattern(monos, monos_hat)
print(f"monodromy stage: {time.time()-t0:.1f}s")
print("signs:", signs, " worst:", err)

t0 = time.time()
tau = TT.tau_ratio_check(config, state, frames, 0, 1)
print(f"tau ratio: {time.time()-t0:.1f}s  residuals:", {k: f"{v:.3e}" for k, v in tau.items()})
