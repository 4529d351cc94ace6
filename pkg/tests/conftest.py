import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qhblowup.blowup import build_correspondence, find_horizon_equilibria, pair_up, solve_balance  # noqa: E402
from qhblowup.compactify import build_desingularized  # noqa: E402
from qhblowup.field import decompose  # noqa: E402
from qhblowup.problem import builtin_problem  # noqa: E402


@functools.lru_cache(maxsize=None)
def system(name):
    spec = builtin_problem(name)
    decomp = decompose(spec.to_field())
    return spec, decomp, build_desingularized(decomp)


@functools.lru_cache(maxsize=None)
def analysis(name):
    spec, decomp, sys_ = system(name)
    seeds = [tuple(s) for s in spec.seeds.get("balance", [])]
    roots, _ = solve_balance(decomp, sys_.compact)
    if seeds:
        import numpy as np
        from qhblowup.blowup import default_balance_seeds
        roots, _ = solve_balance(decomp, sys_.compact, [np.array(s) for s in seeds] + default_balance_seeds(sys_.alpha))
    eqs, _ = find_horizon_equilibria(sys_)
    report = build_correspondence(pair_up(roots, eqs, sys_), sys_)
    return roots, eqs, report


@pytest.fixture
def get_system():
    return system


@pytest.fixture
def get_analysis():
    return analysis
