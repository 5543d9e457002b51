import numpy as np
import pytest

from geonets.manifolds import (
    ConformalSphere,
    Ellipsoid,
    FlatTorus,
    RoundSphere,
    TorusOfRevolution,
)


@pytest.fixture
def sphere():
    return RoundSphere(1.0)


@pytest.fixture
def flat_torus():
    return FlatTorus(((1.0, 0.0), (0.0, 1.0)))


@pytest.fixture
def ellipsoid():
    return Ellipsoid(1.0, 1.05, 1.1)


@pytest.fixture
def rev_torus():
    return TorusOfRevolution(2.0, 0.5)


@pytest.fixture
def conformal():
    return ConformalSphere(1.0, {"z": 0.1, "xy": 0.05})


def all_builtins():
    return [
        RoundSphere(1.0),
        Ellipsoid(1.0, 1.05, 1.1),
        FlatTorus(((1.0, 0.0), (0.0, 1.0))),
        TorusOfRevolution(2.0, 0.5),
        ConformalSphere(1.0, {"z": 0.1, "xy": 0.05}),
    ]


@pytest.fixture(params=["round_sphere", "ellipsoid", "flat_torus",
                        "torus_of_revolution", "conformal_sphere"])
def any_manifold(request):
    by_kind = {m.kind: m for m in all_builtins()}
    return by_kind[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
