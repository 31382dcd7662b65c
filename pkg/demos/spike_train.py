"""Sparse spike train recovery with outliers in the data.

Run with ``python3 demos/spike_train.py``.  Prints the SNR of each residual
ball and a text sketch of the recovered signal.
"""

# %%
# A Gaussian 120 x 512 system, a +-1 spike train with about 20 spikes, and
# 12 observations hit by outliers ten times larger than any clean value.
import numpy as np

from levelset.harness import BPDN_SCHEDULE, DEFAULT_BPDN_METHODS, SpikeTrainConfig, bpdn_spec, gen_spike_train, run_bpdn_study
from levelset.solvers import solve

cfg = SpikeTrainConfig(seed=1)
problem = gen_spike_train(cfg)
print("spikes:", np.count_nonzero(problem.x_true), " outliers:", problem.outlier_support.size)
print("largest |b|: %.1f   largest clean |Ax|: %.1f" % (np.abs(problem.b).max(), np.abs(problem.A.apply(problem.x_true)).max()))

# %%
# Each ball gets the exact noise budget (the outlier count for l0).  The l2
# ball spreads the budget over every residual and cannot absorb a few huge
# errors; l1 and especially l0 can.
report, traces = run_bpdn_study(cfg, DEFAULT_BPDN_METHODS)
for row in report:
    print(f"{row.method:>14}  SNR {row.snr_db:7.2f} dB   {row.seconds:5.2f} s")

# %%
# Continuation: objective and relaxation parameter at the end of each level.
trace = traces["alg3-acc-l0"]
lv = np.array(trace.level)
for level in np.unique(lv)[::4]:
    last = np.flatnonzero(lv == level)[-1]
    print(f"level {level:2d}  eta {trace.eta[last]:.1e}  objective {trace.objective[last]:.4f}  iters {np.sum(lv == level)}")

# %%
# A crude picture: the first 80 entries of truth and of the l0 estimate.
state, _ = solve(bpdn_spec(problem, "l0"), BPDN_SCHEDULE, accelerate=True)


def sketch(v):
    return "".join("+" if t > 0.5 else "-" if t < -0.5 else "." for t in v)


print("truth   ", sketch(problem.x_true[:80]))
print("l0 est. ", sketch(state.x[:80]))
