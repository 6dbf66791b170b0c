"""
Breakdown of the coherent-state approximation at an unstable equilibrium.

A packet balanced on the pendulum hilltop spreads exponentially with rate
lambda = 1. The time at which its error reaches 0.1 grows like |log hbar|;
runs at three decades of hbar show the logarithmic delay.
"""
import os

from spinorbit.experiments import ExperimentConfig, run_ehrenfest_sweep

here = os.path.dirname(os.path.abspath(__file__))
cfg = ExperimentConfig.from_json(os.path.join(here, "..", "configs", "ehrenfest.json"))
rep = run_ehrenfest_sweep(cfg)
r = rep.results
print(f"lambda_max = {r['lambda_max']:.4f}")
print(f"{'hbar':>8} {'t*':>6} {'|log hbar|/(6 lambda)':>22} {'error at half':>14}")
for h, ts, tp, e in zip(r["hbar"], r["t_star"], r["predicted_t"], r["error_at_t_half"]):
    print(f"{h:8.0e} {ts:6.2f} {tp:22.3f} {e:14.2e}")
fit = r["t_star_vs_log_fit"]
print(f"\nt* vs |log hbar|: slope {fit['slope']:.3f} (leading-order scale {fit['predicted_slope']:.3f})")
for c in rep.criteria:
    print(c.line())
