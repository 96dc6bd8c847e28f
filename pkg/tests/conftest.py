import pytest

from volvol.curves import FlatCurve
from volvol.kernels import ExponentialKernel, PowerKernel
from volvol.models import ModelSpec


@pytest.fixture(scope="session")
def three_models():
    """Bergomi, affine-sqrt and affine-linear on exponential kernels, flat 0.04 curve."""
    u = FlatCurve(0.04)
    return {
        "bergomi": ModelSpec.bergomi(ExponentialKernel(1.5, 1.0), u, -0.7),
        "affine_sqrt": ModelSpec.affine(ExponentialKernel(0.5, 1.0), u, -0.7, "sqrt"),
        "affine_linear": ModelSpec.affine(ExponentialKernel(1.5, 1.0), u, -0.7, "linear"),
    }


@pytest.fixture(scope="session")
def rough_bergomi():
    return ModelSpec.bergomi(PowerKernel(0.5, 0.4), FlatCurve(0.04), -0.7)
