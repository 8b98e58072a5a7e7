import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from modules.dither import DitherSpec
from modules.dynamics import AlgoParams
from modules.objectives import make_objective

FIG1_X0 = -40.0
FIG1_X_STAR = 25.0


@pytest.fixture
def fig1_params():
    return AlgoParams(rho=0.12, beta=0.75, eps=1e-7, dither=DitherSpec(chi=121 / 4, psi=0.01))


@pytest.fixture
def quad1d():
    return make_objective("quad1d", {"x_star": FIG1_X_STAR})


@pytest.fixture
def output_dir(tmp_path):
    out = tmp_path / "results"
    out.mkdir()
    return out
