"""Time to tip: converged first-passage distribution, Kramers comparison, sigma scaling.

The scaling fit takes a few minutes on one core.
"""
from rntip.core import SystemParams
from rntip.sde import SimConfig
from rntip.stats import case_barriers, converge_tip_distribution, estimate_tip_time, kramers_time, \
    power_law_fit

cfg = SimConfig(SystemParams(1.1, 0.25), seed=0, n_realizations=3000)
dist = converge_tip_distribution(cfg, log=lambda rec: print("  round", rec))
print(f"r = 1.1: mean time to tip {dist.expected_time:.3f} (err {dist.err:.3f}, KS p {dist.ks_p:.2f}, "
      f"N = {dist.N_total})")

barrier = min(case_barriers())
print(f"escape inside y = 0: barrier {barrier:.4f}, Kramers time at sigma1 = 0.3: "
      f"{kramers_time(barrier, 0.3).time:.2e}")

sig = [0.25, 0.2, 0.15, 0.1]
taus = []
for s in sig:
    est = estimate_tip_time(SimConfig(SystemParams(1.0, s), seed=0, n_realizations=3000), min_escapes=200)
    print(f"sigma1 = {s}: tau = {est.mean:.3f} +- {est.std_err:.3f} ({est.M} escapes of {est.N})")
    taus.append(est.mean)
fit = power_law_fit(sig, taus)
print(f"tau = {fit.a:.3f} (1/sigma1^2)^{fit.b:.4f}")
