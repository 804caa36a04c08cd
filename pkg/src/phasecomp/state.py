"""Two-qubit polarization states in the {HH, HV, VH, VV} basis.

Covers the phase-weighted overlap (the HH/VV coherence produced by the
source and the phase objects), the dephased Bell family it generates,
concurrence, analyzer correlations and CHSH values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidModelError
from .optics import PhaseMask, eval_mask
from .quadrature import window_integral
from .source import SourceModel

BASIS = ("HH", "HV", "VH", "VV")

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
EIGEN_TOL = -1e-9

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    """Validated 4x4 density matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        rho = np.array(self.matrix, dtype=complex)
        if rho.shape != (4, 4):
            raise InvalidModelError(f"density matrix must be 4x4, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise InvalidModelError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > TRACE_TOL:
            raise InvalidModelError(f"density matrix trace is {np.trace(rho).real}, not 1")
        if np.linalg.eigvalsh(rho).min() < EIGEN_TOL:
            raise InvalidModelError("density matrix has a negative eigenvalue")
        rho.setflags(write=False)
        object.__setattr__(self, "matrix", rho)

    def to_dict(self) -> dict:
        return {
            "basis": list(BASIS),
            "real": self.matrix.real.tolist(),
            "imag": self.matrix.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TwoQubitState":
        if list(doc.get("basis", BASIS)) != list(BASIS):
            raise InvalidModelError(f"unsupported basis {doc.get('basis')}")
        return cls(np.array(doc["real"], dtype=float) + 1j * np.array(doc["imag"], dtype=float))

    @classmethod
    def from_ket(cls, ket) -> "TwoQubitState":
        ket = np.asarray(ket, dtype=complex)
        ket = ket / np.linalg.norm(ket)
        return cls(np.outer(ket, ket.conj()))


@dataclass(frozen=True)
class EpsilonResult:
    value: complex
    error: float

    @property
    def real(self) -> float:
        return float(np.real(self.value))


def bell_state() -> TwoQubitState:
    return TwoQubitState.from_ket([1, 0, 0, 1])


def maximally_mixed() -> TwoQubitState:
    return TwoQubitState(np.eye(4) / 4)


def epsilon(model: SourceModel, phi_s: PhaseMask | None, phi_i: PhaseMask | None,
            signal_window=None, idler_window=None, phase=None) -> EpsilonResult:
    """Coherence between the HH and VV components for a purified source.

    Integrates ``exp(i[phi_s(theta) + phi_i(theta')])`` against the
    normalized density and multiplies by the dephasing floor ``v0``. An
    explicit ``phase(theta, theta')`` callable overrides the masks.
    Windows restrict the domain without renormalizing.
    """
    if phase is None:
        if phi_s is None and phi_i is None:
            if signal_window is None and idler_window is None:
                return EpsilonResult(complex(model.v0), 0.0)
            phase = None
        else:
            def phase(t, tp):
                out = 0.0
                if phi_s is not None:
                    out = out + eval_mask(phi_s, t)
                if phi_i is not None:
                    out = out + eval_mask(phi_i, tp)
                return out
    func = None if phase is None else (lambda t, tp: np.exp(1j * phase(t, tp)))
    val, err = window_integral(model, func, signal_window, idler_window,
                               complex_valued=func is not None)
    return EpsilonResult(complex(val) * model.v0, err * model.v0)


def werner_dephased(eps: float) -> TwoQubitState:
    """eps * Bell projector + (1 - eps) * (HH/VV mixture)."""
    eps = float(eps)
    if abs(eps) > 1.0 + 1e-12:
        raise DomainError(f"|eps| must be <= 1, got {eps}")
    eps = max(-1.0, min(1.0, eps))
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = rho[3, 3] = 0.5
    rho[0, 3] = rho[3, 0] = 0.5 * eps
    return TwoQubitState(rho)


def _mat(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, TwoQubitState) else np.asarray(rho, dtype=complex)


def concurrence(rho) -> float:
    """Wootters concurrence."""
    r = _mat(rho)
    yy = np.kron(SY, SY)
    r_tilde = yy @ r.conj() @ yy
    lam = np.sqrt(np.clip(np.linalg.eigvals(r @ r_tilde).real, 0.0, None))
    lam = np.sort(lam)[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def analyzer(beta: float) -> np.ndarray:
    """Pi_+ - Pi_- for a linear polarizer at angle beta from H."""
    return math.cos(2 * beta) * SZ + math.sin(2 * beta) * SX


def correlation(rho, beta1: float, beta2: float) -> float:
    op = np.kron(analyzer(beta1), analyzer(beta2))
    return float(np.real(np.trace(_mat(rho) @ op)))


STANDARD_CHSH_ANGLES = (0.0, math.pi / 4, math.pi / 8, -math.pi / 8)


def chsh(rho, angles=STANDARD_CHSH_ANGLES) -> float:
    """|E(b1,b2) + E(b1,b2') + E(b1',b2) - E(b1',b2')| for angles (b1, b1', b2, b2')."""
    b1, b1p, b2, b2p = angles
    return abs(correlation(rho, b1, b2) + correlation(rho, b1, b2p)
               + correlation(rho, b1p, b2) - correlation(rho, b1p, b2p))


def correlation_matrix(rho) -> np.ndarray:
    r = _mat(rho)
    return np.array([[np.real(np.trace(r @ np.kron(a, b))) for b in PAULIS] for a in PAULIS])


def chsh_optimal(rho) -> float:
    """Maximal CHSH value over all projective spin measurements (Horodecki)."""
    sv = np.linalg.svd(correlation_matrix(rho), compute_uv=False)
    return float(2.0 * math.sqrt(sv[0] ** 2 + sv[1] ** 2))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def fidelity(rho1, rho2) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)))^2."""
    s = _psd_sqrt(_mat(rho1))
    w = np.linalg.eigvalsh(s @ _mat(rho2) @ s)
    return float(min(1.0, np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2))
