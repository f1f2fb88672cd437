import numpy as np
from scipy.special import ellipk
from scipy.integrate import quad

from isotheta.hyperelliptic import (
    HyperellipticCurve, SurfacePoint, period_matrices, sheet1_w,
    abel_map, branch_point_abel, abel_along_vertices, odd_half_period,
    du_density, _a_period_column,
)
from isotheta.geometry import circle_polygon

# ---- g = 1 symmetric curve ----
k = 0.6
m = k * k
curve = HyperellipticCurve([-1 / k, -1.0, 1.0, 1 / k])
pd = period_matrices(curve)
K, Kp = ellipk(m), ellipk(1 - m)
print("g1 A =", pd.a_periods)
print("g1 Bper =", pd.b_periods)
print("g1 B =", pd.B)
print("|Bper| vs 4kK:", abs(pd.b_periods[0, 0]), 4 * k * K)
print("cand iKp/2K =", Kp / (2 * K), " cand 2iK/Kp =", 2 * K / Kp)
print("B/i =", pd.B[0, 0] / 1j)
print("K const:", pd.riemann_constants)

# independent A oracle: -2i * int_1^{1/k} dx / sqrt((x^2-1)(1/k^2-x^2)) via cos substitution
a, b = 1.0, 1 / k
c, d = (a + b) / 2, (b - a) / 2
def integ(phi):
    x = c - d * np.cos(phi)
    rest = np.sqrt((x - (-1 / k)) * (x - (-1)))  # s1 magnitude on (1,1/k)
    return 1.0 / (rest * d)
val, _ = quad(lambda f: integ(f), 0, np.pi, limit=200)
print("A oracle magnitude:", val, " code:", abs(pd.a_periods[0, 0]))

# ---- sheet normalization ----
big = 1e6 + 0.3e6j
print("w/lam^2 at big lam:", sheet1_w(curve, big) / big ** 2)

# ---- g1 odd half period ----
print("odd char g1:", odd_half_period(pd, ()))

# ---- abel to branch points: half-lattice check ----
def lattice_resid(pdx, z, mult=2):
    v = mult * np.atleast_1d(z)
    n2 = np.round(np.linalg.solve(pdx.B.imag, v.imag))
    n1 = np.round(v.real - pdx.B.real @ n2)
    return np.max(np.abs(v - n1 - pdx.B @ n2)), n1, n2

for i in (1, 2, 3):
    z = branch_point_abel(pd, i)
    r, n1, n2 = lattice_resid(pd, z)
    print(f"branch {i}: z={z} 2z lattice resid {r:.2e} n=({n1},{n2})")

# ---- loop around a full cut: Delta z = +-e_1 ----
cutc = 0.5 * (curve.branch_points[2] + curve.branch_points[3])
rad = abs(curve.branch_points[3] - curve.branch_points[2]) * 0.75
ring = circle_polygon(cutc, rad, 64)
p0 = ring[0]
z0 = abel_map(pd, SurfacePoint(p0, 1))
w0 = complex(sheet1_w(curve, p0))
zs, ws = abel_along_vertices(pd, ring, z0, w0)
print("cut loop dz:", zs[-1] - zs[0], " w ratio:", ws[-1] / ws[0])

# loop around single branch point: sheet swap
ring1 = circle_polygon(curve.branch_points[3], 0.3 * curve.min_separation(), 64)
p0 = ring1[0]
z0 = abel_map(pd, SurfacePoint(p0, 1))
w0 = complex(sheet1_w(curve, p0))
zs1, ws1 = abel_along_vertices(pd, ring1, z0, w0)
print("branch loop w ratio:", ws1[-1] / ws1[0], " dz:", zs1[-1] - zs1[0])

# ---- g = 2 all-real curve with quad oracle ----
pts = [0.0, 1.0, 2.0, 4.0, 6.0, 9.0]
cur2 = HyperellipticCurve(pts)
pd2 = period_matrices(cur2)
print("g2 real B =\n", pd2.B)

def oracle_col(aa, bb, others, kk):
    cc, dd = (aa + bb) / 2, (bb - aa) / 2
    def f(phi):
        x = cc - dd * np.cos(phi)
        rest = np.prod([x - o for o in others])
        return x ** (kk - 1) / np.sqrt(abs(rest))
    v, _ = quad(f, 0, np.pi, limit=400)
    return v

for kk in (1, 2):
    v = oracle_col(2.0, 4.0, [0, 1, 6, 9], kk)
    print(f"g2 A[{kk},1] code {pd2.a_periods[kk-1,0]}  oracle -2i*{v} = {-2j*v}")

# residue sum over all three cuts = 0
tot = np.zeros(2, dtype=complex)
for ci in range(3):
    col, _ = _a_period_column(cur2, ci, 2048)
    tot += col
print("all-cut sum:", tot)

# ---- g = 2 jittered complex curve ----
pts3 = [0.0, 1.0, 2.5 + 0.5j, 3.5 + 0.7j, 5 - 0.35j, 7.0]
cur3 = HyperellipticCurve(pts3)
pd3 = period_matrices(cur3)
print("g2 cx B =\n", pd3.B)
print("sym resid:", np.max(np.abs(pd3.B - pd3.B.T)))
print("Im eigs:", np.linalg.eigvalsh(pd3.B.imag))

# dU normalization on fresh contours
for mcyc in (1, 2):
    aa, bb = cur3.cuts[mcyc]
    cc, dd = 0.5 * (aa + bb), 0.5 * (bb - aa)
    n = 1024
    th = 2 * np.pi * np.arange(n) / n
    rho = 0.35
    zz = rho + 1j * th
    lam = cc + dd * np.cosh(zz)
    dlam = dd * np.sinh(zz) * 1j
    w = sheet1_w(cur3, lam)
    du = du_density(pd3, lam, w)
    per = (2 * np.pi / n) * np.tensordot(dlam, du, axes=(0, 0))
    print(f"dU a-periods cycle {mcyc}:", per)

# odd half periods from each singleton subset
seen = set()
for i in range(1, 6):
    p, q = odd_half_period(pd3, (i,))
    seen.add((tuple(p), tuple(q)))
    print(f"subset ({i}): p={p} q={q}")
print("distinct:", len(seen))

# abel two-route lattice difference
from isotheta.hyperelliptic import _abel_polyline
tgt = 8.0 + 2.0j
z_direct = abel_map(pd3, SurfacePoint(tgt, 1))
via = [cur3.branch_points[0], 3.0 - 3.0j, 9.0 - 2.0j, tgt]
z_via = _abel_polyline(pd3, via, 96, 1e-10, end_singular=False)
r, n1, n2 = lattice_resid(pd3, z_via - z_direct, mult=1)
print("two-route lattice resid:", r, n1, n2)
