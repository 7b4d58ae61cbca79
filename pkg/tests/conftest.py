from __future__ import annotations

import numpy as np
import pytest

from chemotaxis_lab import Field, Grid, Params, SemigroupPlan, SimState


@pytest.fixture
def grid_1d() -> Grid:
    return Grid(dim=1, extent=2.0 * np.pi, points=256)


@pytest.fixture
def plan_1d(grid_1d) -> SemigroupPlan:
    return SemigroupPlan(grid_1d)


@pytest.fixture
def unit_params() -> Params:
    return Params(chi=1.0, a=1.0, b=1.0, lam=1.0, mu=1.0, dim=1)


def make_state(grid: Grid, params: Params, u_values, v_values, t: float = 0.0) -> SimState:
    return SimState(t=t, u=Field(grid, u_values), v=Field(grid, v_values), params=params)
