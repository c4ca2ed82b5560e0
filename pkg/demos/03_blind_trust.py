"""
A mechanism that always follows the prediction
==============================================

Outputting the predicted optimum is perfect when the prediction is right and
ignores the machines' reports, so it is trivially truthful. On this 2x2 pair
the prediction is wrong in one entry and the ratio grows with K without
bound. Any truthful rule that is exact on the prediction is stuck in the
same way: the report-shifting transform below maps the predicted instance to
the actual one, and a monotone rule must keep machine 0's job.
"""
import warnings

from mechsched import Instance, gen_figure1, opt_oracle, run_mechanism
from mechsched.core import makespan
from mechsched.mechanisms import GammaRangeWarning
from mechsched.verify import shift_transform

warnings.simplefilter("ignore", GammaRangeWarning)

for K in (10.0, 100.0, 1000.0, 1e6):
    pred, inst = gen_figure1(K, 0.01)
    out = run_mechanism("follow-prediction", inst, pred)
    print(f"K={K:>9g}  makespan {makespan(inst, out.alloc):>9g}  OPT {opt_oracle(inst):.2f}  "
          f"ratio {makespan(inst, out.alloc) / opt_oracle(inst):.1f}")

K, eps = 100.0, 0.01
pred, inst = gen_figure1(K, eps)
moved = shift_transform(Instance(pred.p), (0, 1), 0, [K, eps])
print("\nshifted prediction equals the actual instance:", moved == inst)
print("scaled greedy on the same pair, ratio",
      makespan(inst, run_mechanism("scaled-greedy", inst, pred, gamma=1.0).alloc) / opt_oracle(inst))
