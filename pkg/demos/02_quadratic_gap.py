"""
Why capping the scalars at n is not enough
==========================================

The simple scaled greedy mechanism caps every scalar at n. On the family
below that cap makes it send n - 1 small jobs to one slow machine, for a
makespan of n(n - 1) while the optimum is 1 + eps. The scaled greedy
mechanism, which pre-commits jobs to fast machines under a load budget,
avoids the trap.
"""
import warnings

from mechsched import gen_figure2, opt_oracle, run_mechanism
from mechsched.core import makespan
from mechsched.mechanisms import GammaRangeWarning

warnings.simplefilter("ignore", GammaRangeWarning)

pred, inst = gen_figure2(4, 0.01)
print("predicted times\n", pred.p)
print("actual times\n", inst.p)

print("\n n   simple   ratio    n^2   scaled   ratio")
for n in range(3, 8):
    pred, inst = gen_figure2(n, 0.01)
    opt = opt_oracle(inst)
    simple = makespan(inst, run_mechanism("simple-scaled-greedy", inst, pred).alloc)
    scaled = makespan(inst, run_mechanism("scaled-greedy", inst, pred, gamma=1.0).alloc)
    print(f"{n:2d} {simple:8.2f} {simple / opt:7.2f} {n * n:6d} {scaled:8.2f} {scaled / opt:7.2f}")
