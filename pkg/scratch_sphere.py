import time

import numpy as np

from isotheta import sphere as sp
from isotheta.hyperelliptic import SurfacePoint

bp = [0.0, 1.0, 2.0, 4.0]
p, q = [0.3], [0.1]
config = sp.build_solution(bp, p, q)
state = sp.residues_from_psi(config)

for i in range(4):
    hs = sp.hamiltonian(state, i)
    hc = sp.hamiltonian_contour(state, i)
    print(f"H_{i} sum {hs:.8f} contour diff {abs(hs - hc):.2e}")
print("sum H_i:", abs(sp.hamiltonians(state).sum()))
for j in (1, 3):
    fd = sp.tau_log_derivative_fd(bp, p, q, j)
    print(f"dlntau/dl_{j} fd vs H: {abs(fd - sp.hamiltonian(state, j)):.2e}")

# N=2 specialization value
A1 = np.array([[0.2, 0.11], [0.35, -0.2]], dtype=complex)
st2 = sp.SchlesingerState(np.array([0.0, 2.0]), np.stack([A1, -A1]))
h1 = sp.hamiltonian(st2, 0)
print("N=2: H1 vs trA1^2/(l2-l1):", abs(h1 - np.trace(A1 @ A1) / 2.0))

# anchor independence: two explicit generic anchor pairs, same base
t0 = time.time()
base = config.omega_base
c1 = sp.build_solution(bp, p, q, anchor_phi=SurfacePoint(-1.5 + 2.2j, 1),
                       anchor_psi=SurfacePoint(3.0 + 1.8j, 2), omega_base=base)
c2 = sp.build_solution(bp, p, q, anchor_phi=SurfacePoint(5.5 - 1.1j, 2),
                       anchor_psi=SurfacePoint(-0.8 - 2.6j, 1), omega_base=base)
worst = 0.0
for lam in (0.4 + 1.1j, 2.9 - 1.4j, -3.0 + 0.2j):
    worst = max(worst, np.abs(sp.psi_matrix(c1, lam) - sp.psi_matrix(c2, lam)).max())
print("anchor independence:", worst, " time:", time.time() - t0)

# schlesinger residual g=1
t0 = time.time()
res = sp.schlesinger_residual(config, step=1e-4)
print("g=1 schlesinger:", res, " time:", time.time() - t0)

# ---- g=2 ----
t0 = time.time()
bp2 = [0.0, 1.0, 2.5, 3.5, 5.0, 7.0]
p2, q2 = [0.3, 0.15], [0.1, 0.25]
cfg2 = sp.build_solution(bp2, p2, q2)
print("g2 build:", time.time() - t0, " subset:", cfg2.subset,
      " odd:", cfg2.odd_p, cfg2.odd_q)
t0 = time.time()
st2g = sp.residues_from_psi(cfg2)
print("g2 residues:", time.time() - t0, st2g.invariant_residuals())
print("g2 t:", st2g.t)
for lam in (0.7 + 0.9j, 4.2 - 0.8j):
    d = np.abs(st2g.connection().matrix(lam) - sp.connection_matrix(cfg2, lam)).max()
    print("g2 A pointwise:", d)
t0 = time.time()
mats2, order2 = sp.transported_monodromies(cfg2, st2g)
print("g2 monodromy time:", time.time() - t0, " order:", order2)
m2 = sp.match_monodromies(cfg2, mats2, order2)
print("g2 signs:", m2.signs, " max_err:", m2.max_error)
C = m2.conjugator
Ci = np.linalg.inv(C)
for jj in (1, 2):
    aj = sp.diagonal_exponent(Ci @ sp.cycle_pair_monodromy(mats2, "a", jj) @ C)
    bj = sp.diagonal_exponent(Ci @ sp.cycle_pair_monodromy(mats2, "b", jj) @ C)
    print(f"g2 a_{jj} exp {aj:.6f} (p={p2[jj-1]})   b_{jj} exp {bj:.6f} (q={q2[jj-1]})")
for i in range(6):
    print(f"g2 H_{i} contour diff:", abs(sp.hamiltonian(st2g, i) - sp.hamiltonian_contour(st2g, i)))
t0 = time.time()
fd = sp.tau_log_derivative_fd(bp2, p2, q2, 2)
print("g2 dlntau fd vs H:", abs(fd - sp.hamiltonian(st2g, 2)), " time:", time.time() - t0)
t0 = time.time()
res2 = sp.schlesinger_residual(cfg2, step=1e-4, indices=[1])
print("g2 schlesinger (i=1):", res2, " time:", time.time() - t0)

# psi at base and dets
print("g2 psi(base)-I:", np.abs(sp.psi_matrix(cfg2, cfg2.omega_base) - np.eye(2)).max())
for lam in (0.5 + 1.3j, 6.0 - 2.0j):
    print("g2 det psi - 1:", abs(np.linalg.det(sp.psi_matrix(cfg2, lam)) - 1))
