"""Deterministic ramped saddle: which ramp rates tip, and where the switch happens."""
import numpy as np

from rntip.core import R_CRITICAL, Y_START, SystemParams, classify_deterministic, find_critical_rate, \
    integrate_deterministic
from rntip.plots import Figure

fig = Figure(title="compactified system", xlabel="y", ylabel="x", ylim=(-4.5, 2.0))
for r in (0.5, 1.0, R_CRITICAL, 1.5, 2.0):
    traj = integrate_deterministic((-1.0, Y_START), SystemParams(r), t_span=(0, 60), rtol=1e-12, atol=1e-14)
    outcome = classify_deterministic(traj)
    print(f"r = {r:.4f}: {outcome}")
    fig.line(traj.y, traj.x, label=f"r={r:.3g} ({outcome})")

y = np.linspace(0, 3, 50)
fig.line(y, -y / 3 - 1, color="#000000", dash="3 3", label="x = -y/3 - 1")
fig.save("critical_rate.svg")

res = find_critical_rate((1.0, 2.0), 1e-6)
print(f"bisection: r_c in [{res.r_lo:.7f}, {res.r_hi:.7f}] after {res.iterations} steps")
