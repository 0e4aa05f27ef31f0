import math

import numpy as np
import pytest

from sdd_sim.config import ScenarioConfig
from sdd_sim.delays import constant_delay, point_delay
from sdd_sim.history import InitialFunction
from sdd_sim.integrator import ProblemSpec, SolverOptions
from sdd_sim.nonlinearity import BirthFunction, Kernel
from sdd_sim.spectral import build_dirichlet_laplacian_1d


@pytest.fixture
def op8():
    return build_dirichlet_laplacian_1d(math.pi, 8, 32)


@pytest.fixture
def nicholson():
    """(spec, opts, T) of the bundled Nicholson preset."""
    return ScenarioConfig.load("nicholson").build()


def unit_mode(n_modes, k=1):
    v = np.zeros(n_modes)
    v[k - 1] = 1.0
    return v


def decay_spec(op, phi0, d=0.0, r=1.0):
    phi = InitialFunction.constant(phi0, r, 4)
    return ProblemSpec(op, d, r, constant_delay(0.5, r), BirthFunction("zero"), Kernel("dirac"), phi)


def small_nicholson(op, p=2.0, a=0.2, b=0.3, offset=0.5, d=0.5, amp=1.0, r=1.0):
    eta = point_delay("affine_norm", {"a": a, "b": b}, r, offset=offset)
    x = op.grid
    from sdd_sim.spectral import to_modal
    shape = to_modal(op, np.sin(x) ** 2)
    phi = InitialFunction.from_callable(lambda s: amp * (1 + 0.3 * math.cos(3 * s)) * shape, r, 20)
    return ProblemSpec(op, d, r, eta, BirthFunction("nicholson", p=p), Kernel("gaussian", 0.1), phi)


@pytest.fixture
def opts():
    return SolverOptions(h=0.01)
