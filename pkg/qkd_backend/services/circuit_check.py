import logging
from pathlib import Path
from typing import Union

import numpy as np

from qkd_backend import __version__
from qkd_backend.core.circuit import Circuit, distribution_agreement, implements_r, load_circuit, parse_circuit
from qkd_backend.core.qmath import R_LABELS, StateVector
from qkd_backend.errors import CircuitShapeError
from qkd_backend.models.schemas import CircuitReport

logger = logging.getLogger(__name__)

AGREEMENT_SEED = 20240601
AGREEMENT_STATES = 100


def random_states(count: int, seed: int = AGREEMENT_SEED, n_qubits: int = 2) -> list[StateVector]:
    """Haar-like random states from complex Gaussian amplitudes."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    dim = 1 << n_qubits
    return [StateVector.from_amplitudes(rng.normal(size=dim) + 1j * rng.normal(size=dim)) for _ in range(count)]


class CircuitService:
    def check(self, circuit: Circuit, source: str) -> CircuitReport:
        if circuit.n_qubits != 2:
            raise CircuitShapeError(f"{source}: R acts on 2 qubits, circuit has {circuit.n_qubits}")
        labelling = implements_r(circuit)
        deviation = None
        if labelling is not None:
            deviation = max(distribution_agreement(circuit, labelling, state)
                            for state in random_states(AGREEMENT_STATES))
        verdict = "ACCEPT" if labelling is not None else "REJECT"
        logger.info(f"Circuit {source}: {verdict}")
        return CircuitReport(
            version=__version__,
            source=source,
            n_qubits=circuit.n_qubits,
            gate_count=len(circuit.gates),
            verdict=verdict,
            labelling=labelling,
            identity_labelling=labelling == {label: k for k, label in enumerate(R_LABELS)},
            max_distribution_deviation=deviation,
        )

    def check_file(self, path: Union[str, Path]) -> CircuitReport:
        return self.check(load_circuit(path), Path(path).name)

    def check_text(self, text: str, source: str = "<request>") -> CircuitReport:
        return self.check(parse_circuit(text), source)
