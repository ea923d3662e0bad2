"""One test per acceptance criterion; each prints its pass/fail line."""

import pytest

from latprofit.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize("cid", [c[0] for c in CRITERIA])
def test_criterion(cid):
    result = run_criterion(cid)
    print(result.line())
    assert result.passed, result.line()
