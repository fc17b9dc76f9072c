"""Most probable tipping path as a saddle-to-saddle connection of the (x, p, y) system.

Unstable manifold of S1 and stable manifold of S2 are cut by the plane y = -x;
their crossing sits on y = 3/2 and the orbit through it carries the action.
"""
from rntip.core import SystemParams
from rntip.manifolds import heteroclinic
from rntip.plots import Figure
from rntip.stats import CASE12_ACTION, case12_action

params = SystemParams(1.0, 0.25)
het = heteroclinic(params)
cu, cs = het.curves
x, p, y = het.intersection_point
print(f"intersection: y* = {y:.12f}  p* = {p:.6f}")
print(f"unstable curve: {len(cu.thetas)} hits, stable curve: {len(cs.thetas)} hits")

fig = Figure(title="section y = -x", xlabel="y", ylabel="p")
iu, is_ = cu.primary_branch(), cs.primary_branch()
fig.line(cu.y[iu], cu.p[iu], label="W^u(S1)")
fig.line(cs.y[is_], cs.p[is_], label="W^s(S2)")
fig.points([y], [p], color="#000000", label="intersection")
fig.save("section.svg")

# action table; the sigma1 value only rescales p
for r in (1.1, 1.0, 0.75, 0.5):
    print(f"r = {r:<4}: action {heteroclinic(SystemParams(r, 0.25)).action.value:.4f}")
print(f"escape inside y = 0 or y = 3: {case12_action(0.25, 1):.4f} (exact {CASE12_ACTION:.4f})")
