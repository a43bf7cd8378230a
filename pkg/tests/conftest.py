import math

import numpy as np
import pytest

from swapkd.detectors import ThresholdDetector
from swapkd.fock import ConditionalState, TruncationPolicy
from swapkd.metrics import embed_qubit_pair

SINGLET_QUBITS = np.zeros(4, dtype=complex)
SINGLET_QUBITS[1] = 1.0 / math.sqrt(2.0)
SINGLET_QUBITS[2] = -1.0 / math.sqrt(2.0)


def singlet_state(n_max: int = 2, herald: float = 1.0) -> ConditionalState:
    rho = np.outer(SINGLET_QUBITS, SINGLET_QUBITS.conj())
    return embed_qubit_pair(rho, n_max, herald=herald)


def werner_state(fidelity: float, n_max: int = 2) -> ConditionalState:
    lam = (4.0 * fidelity - 1.0) / 3.0
    rho = lam * np.outer(SINGLET_QUBITS, SINGLET_QUBITS.conj()) + (1.0 - lam) * np.eye(4) / 4.0
    return embed_qubit_pair(rho, n_max)


@pytest.fixture
def ideal_detector() -> ThresholdDetector:
    return ThresholdDetector(eta=1.0, p_dc=0.0)


@pytest.fixture
def policy3() -> TruncationPolicy:
    return TruncationPolicy(n_max=3)
