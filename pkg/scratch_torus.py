"""Scratch validation of the torus pipeline at g=1; pins empirical signs."""
import time

import numpy as np

from isotheta import torus as T

np.set_printoptions(precision=6, suppress=False, linewidth=120)

MU = 0.3 + 0.9j
BPS = [-0.3 + 0.22j, 0.11 - 0.08j]
P = [0.0]
Q = [0.23]

t0 = time.time()
cover = T.build_cover(MU, BPS)
print("== cover ==")
print("layout:", cover.layout)
print("kind_one:", cover.diagnostics["kind_one"], "line_signs:", cover.diagnostics["line_signs"])
print("a_periods:\n", cover.a_periods)
print("b_periods:\n", cover.b_periods)
print("B:\n", cover.B)
print("B_symmetry:", cover.diagnostics["B_symmetry"])
print("B_im_eigs:", cover.diagnostics["B_im_eigs"])
print("involution:", cover.diagnostics["involution_residuals"])
print("dv_even_part:", cover.diagnostics["dv_even_part"])
print("Pi:", cover.Pi, "Pi_im:", cover.diagnostics["Pi_im_eigs"])
print("dv_a_periods:\n", cover.diagnostics["dv_a_periods"])
print("dv_b_periods:\n", cover.diagnostics["dv_b_periods"])
print("period_drift:", cover.diagnostics["period_drift"])
print("t =", time.time() - t0)

# ellipticity of h/y: translate a point by 1 and mu, track y along the path
print("\n== h/y ellipticity ==")
pt = complex(cover.b_cycles[0]["verts"][0]) + 0.03 + 0.01j
for shift, name in [(1.0, "one"), (MU, "mu")]:
    w = T._Walk(cover, pt, T._anchored_y(cover, pt))
    val0 = cover.h_vals(np.array([pt]))[:, 0] / w.y
    T._walk_polyline(w, [pt, pt + shift], n=24)
    val1 = cover.h_vals(np.array([pt + shift]))[:, 0] / w.y
    print(name, "ratio:", val1 / val0)

t0 = time.time()
config = T.build_prym_solution(cover, P, Q)
print("\n== prym solution ==")
print("base:", config.base_point, "v_base:", config.v_base, "det_base:", config.metadata["det_base"])

laws = T.cycle_law_residuals(config)
print("cycle laws:", laws)

state = T.state_from_prym(config)
print("coefficients:\n", state.coefficients)
print("t (eigs):", state.t)
print("residue trace:", config.metadata["residue_trace"])
for d in config.metadata["residue_diagnostics"]:
    print("  diag:", d)
print("t =", time.time() - t0)

print("\n== twists / pointwise ==")
pts = [config.base_point + 0.07 + 0.04j, config.base_point - 0.11 + 0.02j]
print("twist residual:", state.twist_residual(pts))
print("connection residual:", T.connection_residual(config, state))

t0 = time.time()
print("\n== monodromy ==")
mon_t = T.transported_monodromies(config, method="theta")
mon_o = T.transported_monodromies(config, state=state, method="ode")
print("order:", mon_t["order"])
for k in mon_t["order"] + ["one", "mu"]:
    diff = float(np.abs(mon_t[k] - mon_o[k]).max())
    print(f"M[{k}] theta:\n", mon_t[k], "\n  |theta-ode| =", diff)
conv = T.monodromy_conventions(config, monos=mon_t)
print("conventions:", conv)
pred = dict(conv)
pred.pop("residual")
pred = T.closed_form_monodromies(config, **pred)
for k in mon_t["order"] + ["one", "mu"]:
    d_t = float(np.abs(mon_t[k] - pred[k]).max())
    d_o = float(np.abs(mon_o[k] - pred[k]).max())
    print(f"pred[{k}] |theta-pred| = {d_t:.2e}  |ode-pred| = {d_o:.2e}")
cy = T.cyclic_products(mon_t)
print("poles product:\n", cy["poles"])
print("commutator:\n", cy["commutator"])
print("t =", time.time() - t0)

print("\n== hamiltonians ==")
for i in range(2):
    hc = T.hamiltonian_contour(state, i)
    hs = T.hamiltonian(state, i)
    print(f"H_{i}: closed {hs:.8f} contour {hc:.8f} diff {abs(hs-hc):.2e}")
print("sum H_i:", sum(T.hamiltonians(state)))
hmc = T.hamiltonian_mu_contour(state)
hms = T.hamiltonian_mu(state)
print("H_mu contour:", hmc)
print("H_mu closed:", hms)
print("diff:", abs(hmc - hms))
