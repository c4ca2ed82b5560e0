"""
Trusting a prediction, and paying for it when it is wrong
=========================================================

Run the scaled greedy mechanism on random instances twice: once with a
perfect prediction and once with predictions of growing error. The ratio to
the optimum stays below (2 + gamma) when the prediction is right and below
(1 + 1/gamma) n whatever the prediction says.
"""
import warnings

import numpy as np

from mechsched import Prediction, gen_perturbed, gen_uniform, opt_oracle, run_mechanism
from mechsched.core import makespan
from mechsched.mechanisms import GammaRangeWarning

warnings.simplefilter("ignore", GammaRangeWarning)
rng = np.random.default_rng(1)

# a single instance first
inst = gen_uniform(3, 6, 1, 10, rng)
print(np.round(inst.p, 2))
out = run_mechanism("scaled-greedy", inst, Prediction(inst.p), gamma=1.0)
print("allocation", out.alloc, "makespan", round(makespan(inst, out.alloc), 3),
      "OPT", round(opt_oracle(inst), 3))
print("jobs committed away from their predicted machine:", [sorted(s) for s in out.plan.j_sets])

# sweep gamma and the prediction error
print("\ngamma   eta   worst ratio   consistency bound   robustness bound")
for gamma in (0.5, 1.0, 2.0):
    for eta in (1.0, 2.0, 10.0):
        worst = 0.0
        for _ in range(200):
            inst = gen_uniform(3, 5, 1, 10, rng)
            pred = gen_perturbed(inst, eta, rng)
            out = run_mechanism("scaled-greedy", inst, pred, gamma=gamma)
            worst = max(worst, makespan(inst, out.alloc) / opt_oracle(inst))
        print(f"{gamma:5.1f} {eta:5.0f} {worst:12.3f} {2 + gamma:18.2f} {(1 + 1 / gamma) * 3:17.2f}")
