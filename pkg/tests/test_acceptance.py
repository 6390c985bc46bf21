"""Acceptance gate: every criterion at its stated tolerance, one line each.

Statistical criteria run at the pinned n = 10^6, seed 42.  The module-scoped
fixture runs the whole suite once; each test asserts one criterion and prints
its pass/fail line.
"""

import pytest

from mejump import acceptance

N_PATHS = 1_000_000
SEED = 42


@pytest.fixture(scope="module")
def results():
    res = acceptance.run_all(n_paths=N_PATHS, seed=SEED, lam="auto")
    return {r.cid: r for r in res}


@pytest.mark.parametrize("cid", range(1, 14))
def test_criterion(results, cid):
    r = results[cid]
    status = "PASS" if r.passed else "FAIL"
    print(f"[{status}] criterion {cid}: {r.title} -- {r.detail}")
    assert r.passed, f"criterion {cid} ({r.title}): {r.detail}"
