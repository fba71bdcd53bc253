import numpy as np
import pytest

from floqcd.models import TwoQubitParams, two_qubit_model
from floqcd.operators import ground_state
from floqcd.schedules import Schedule

# independent single-qubit matrices for oracle constructions (not imported
# from the package on purpose)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SI = np.eye(2, dtype=complex)

TAU = 0.1
OMEGA0 = 2 * np.pi / TAU


def kron_chain(*ops):
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def two_qubit_matrix_oracle(lam, J=1.0, hz=5.0):
    """Direct 4x4 construction of the entangling Hamiltonian."""
    return (-J * (kron_chain(SX, SX) + kron_chain(SZ, SZ))
            + hz * (lam - 1.0) * (kron_chain(SZ, SI) + kron_chain(SI, SZ)))


@pytest.fixture(scope="session")
def model():
    return two_qubit_model(TwoQubitParams())


@pytest.fixture(scope="session")
def schedule():
    return Schedule("smooth", TAU)


@pytest.fixture(scope="session")
def psi0(model):
    return ground_state(model.hamiltonian(0.0))[1]


@pytest.fixture(scope="session")
def bell(model):
    return ground_state(model.hamiltonian(1.0))[1]


@pytest.fixture()
def rng():
    return np.random.default_rng(20240901)
