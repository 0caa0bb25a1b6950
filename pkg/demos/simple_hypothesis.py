"""Testing one path against a fully specified drift.

We simulate an Ornstein-Uhlenbeck path, calibrate the threshold of the
distribution-free limit law, and test the path twice: once against its own
drift and once against a cubic drift it was not generated from.

    python demos/simple_hypothesis.py
"""
from diffgof.calibration import calibrate, decide
from diffgof.config import build_model
from diffgof.registry import law_for
from diffgof.simulate import RngStream, simulate_stationary
from diffgof.statistics import adf_stat, ks_increment_stat

ou = build_model("simple:ou")
cubic = build_model("simple:cubic")
path = simulate_stationary(ou, T=500.0, dt=0.01, rng=RngStream(seed=7))
print(f"simulated {path.n_steps} Euler steps of dX = -X dt + dW")

# Both statistics have model-free limits, so one table serves every simple null.
cvm_table = calibrate(law_for("ADF"), [0.05], n_replicates=5000, seed=1)
ks_table = calibrate(law_for("KSIncrement"), [0.05], n_replicates=5000, seed=2)
print(f"5% thresholds: int w^2 -> {cvm_table.threshold(0.05):.3f}, "
      f"sup|w| -> {ks_table.threshold(0.05):.3f}")

for name, null in (("ou", ou), ("cubic", cubic)):
    cvm = adf_stat(path, null)
    ks = ks_increment_stat(path, null)
    print(f"H0 = {name:5s}  CvM {cvm.value:8.3f} -> {decide(cvm, cvm_table, 0.05).value:6s}"
          f"  KS {ks.value:6.3f} -> {decide(ks, ks_table, 0.05).value}")
