import pytest

from gradcases import CASES, SEEDS


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("case", sorted(CASES))
def test_grad_check(case, seed):
    assert CASES[case](seed) < 1e-4
