"""
Critical-value payments and what a liar gains
=============================================

Each mechanism fixes its scalars before seeing any report, so a machine wins
job j exactly while its scaled time stays below the best competing scaled
time. Paying that threshold makes truth-telling optimal. Here one machine
tries random misreports and never beats its truthful utility; with
pay-your-bid payments it quickly finds a profitable lie.
"""
import warnings

import numpy as np

from mechsched import critical_payments, gen_perturbed, gen_uniform, utility
from mechsched.mechanisms import GammaRangeWarning, assign_scaled_min, build_plan
from mechsched.payments import first_price_payments

warnings.simplefilter("ignore", GammaRangeWarning)
rng = np.random.default_rng(97)

inst = gen_uniform(3, 4, 1, 10, rng)
pred = gen_perturbed(inst, 2.0, rng)
plan, _ = build_plan("scaled-greedy", pred, gamma=0.2)
print("scalars\n", np.round(plan.r, 3))
print("committed jobs", [sorted(s) for s in plan.j_sets])

for rule, name in ((critical_payments, "critical value"), (first_price_payments, "first price")):
    alloc = assign_scaled_min(inst, plan)
    pay = rule(inst, plan, alloc)
    truthful = [utility(inst, alloc, pay, i) for i in range(inst.n)]
    best_gain = 0.0
    for _ in range(2000):
        i = int(rng.integers(inst.n))
        lie = inst.with_row(i, inst.p[i] * np.exp(rng.uniform(-1, 1, inst.m)))
        lie_alloc = assign_scaled_min(lie, plan)
        gain = utility(inst, lie_alloc, rule(lie, plan, lie_alloc), i) - truthful[i]
        best_gain = max(best_gain, gain)
    print(f"{name:>15}: payments {np.round(pay, 2)}, best gain from lying {best_gain:.4f}")
