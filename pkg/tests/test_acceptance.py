import json

import pytest

from cliquelab.checks import ALL_CHECKS

from conftest import ACCEPTANCE_LINES


@pytest.mark.slow
@pytest.mark.parametrize("criterion", sorted(ALL_CHECKS))
def test_acceptance_criterion(criterion):
    result = ALL_CHECKS[criterion]()
    ACCEPTANCE_LINES.append(result.line())
    print(result.line())
    print(json.dumps(result.detail, indent=1, default=float))
    assert result.passed, result.line()
