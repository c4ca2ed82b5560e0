import numpy as np
from hypothesis import strategies as st

from mechsched import Instance, Prediction


def small_matrices(nmax=4, mmax=5, lo=1.0, hi=10.0, allow_inf=False, allow_zero=False):
    """Hypothesis strategy for n x m processing-time matrices with at least one finite entry per job."""
    value = st.floats(lo, hi, allow_nan=False, allow_infinity=False)
    options = [value]
    if allow_zero:
        options.append(st.just(0.0))
    if allow_inf:
        options.append(st.just(float("inf")))
    entry = st.one_of(*options) if len(options) > 1 else value

    @st.composite
    def build(draw):
        n = draw(st.integers(1, nmax))
        m = draw(st.integers(1, mmax))
        rows = [[draw(entry) for _ in range(m)] for _ in range(n)]
        p = np.array(rows)
        for j in range(m):
            if not np.isfinite(p[:, j]).any():
                p[draw(st.integers(0, n - 1)), j] = draw(value)
        return p

    return build()


def instances(**kw):
    return small_matrices(**kw).map(Instance)


def predictions(**kw):
    kw.setdefault("allow_zero", False)
    return small_matrices(**kw).map(Prediction)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, detail = results[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
