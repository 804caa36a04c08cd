"""Two-qubit polarization tomography: synthetic data and maximum likelihood.

Settings are products of single-qubit analyzer kets. Reconstruction
maximizes the Poisson log-likelihood over ``rho = T^dag T / Tr(T^dag T)``
with ``T`` lower triangular, using BFGS with a backtracking line search
so that every accepted step increases the likelihood.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DegenerateDataError, InvalidModelError
from .state import PAULIS, TwoQubitState

SQ2 = math.sqrt(2.0)
KETS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([1, 1], dtype=complex) / SQ2,
    "A": np.array([1, -1], dtype=complex) / SQ2,
    "R": np.array([1, -1j], dtype=complex) / SQ2,
    "L": np.array([1, 1j], dtype=complex) / SQ2,
}
STANDARD_LABELS = ("H", "V", "D", "R")
CONVENTION = {k: [[c.real, c.imag] for c in KETS[k]] for k in STANDARD_LABELS}


def _rot(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]], dtype=complex)


def waveplate(retardance: float, angle: float) -> np.ndarray:
    """Jones matrix of a retarder with fast axis at ``angle`` from H."""
    return _rot(angle) @ np.diag([1.0, np.exp(1j * retardance)]) @ _rot(-angle)


def analyzer_ket(qwp: float, hwp: float) -> np.ndarray:
    """State transmitted by QWP -> HWP -> polarizer along H (angles in rad)."""
    m = waveplate(math.pi, hwp) @ waveplate(math.pi / 2, qwp)
    return m.conj().T @ KETS["H"]


@dataclass(frozen=True, eq=False)
class ProjectorSetting:
    label: str
    signal: np.ndarray
    idler: np.ndarray

    @property
    def projector(self) -> np.ndarray:
        ket = np.kron(self.signal, self.idler)
        return np.outer(ket, ket.conj())

    @classmethod
    def from_labels(cls, a: str, b: str) -> "ProjectorSetting":
        return cls(a + b, KETS[a], KETS[b])

    def to_dict(self) -> dict:
        return {"label": self.label,
                "signal": [[c.real, c.imag] for c in self.signal],
                "idler": [[c.real, c.imag] for c in self.idler]}

    @classmethod
    def from_dict(cls, doc) -> "ProjectorSetting":
        ket = lambda rows: np.array([complex(r, i) for r, i in rows])
        return cls(doc["label"], ket(doc["signal"]), ket(doc["idler"]))


def standard_settings() -> list[ProjectorSetting]:
    """All 16 products of H, V, D = (H+V)/sqrt2 and R = (H-iV)/sqrt2."""
    return [ProjectorSetting.from_labels(a, b) for a in STANDARD_LABELS for b in STANDARD_LABELS]


@dataclass
class TomographyDataset:
    settings: list
    counts: np.ndarray
    durations: np.ndarray
    flux: float | None = None  # expected counts per unit duration; None = fitted

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        self.durations = np.asarray(self.durations, dtype=float)
        if len(self.settings) != self.counts.size or self.counts.shape != self.durations.shape:
            raise InvalidModelError("settings, counts and durations must have equal length")
        if np.any(self.counts < 0) or np.any(self.durations <= 0):
            raise InvalidModelError("counts must be >= 0 and durations > 0")

    @property
    def projectors(self) -> np.ndarray:
        return np.array([s.projector for s in self.settings])

    def to_dict(self) -> dict:
        return {"settings": [s.to_dict() for s in self.settings],
                "counts": self.counts.tolist(),
                "durations": self.durations.tolist(),
                "flux_mode": "fitted" if self.flux is None else "known",
                "flux": self.flux}

    @classmethod
    def from_dict(cls, doc) -> "TomographyDataset":
        return cls([ProjectorSetting.from_dict(s) for s in doc["settings"]],
                   doc["counts"], doc["durations"], doc.get("flux"))


def simulate_tomography(rho: TwoQubitState, flux: float, rng: np.random.Generator,
                        settings=None, duration: float = 1.0) -> TomographyDataset:
    """Poisson counts with mean ``flux * duration * Tr[rho Pi]`` per setting."""
    settings = standard_settings() if settings is None else settings
    probs = np.array([np.real(np.trace(rho.matrix @ s.projector)) for s in settings])
    mean = np.clip(flux * duration * probs, 0.0, None)
    counts = rng.poisson(mean).astype(float)
    return TomographyDataset(settings, counts, np.full(len(settings), duration), flux=None)


def noiseless_tomography(rho: TwoQubitState, flux: float, settings=None) -> TomographyDataset:
    settings = standard_settings() if settings is None else settings
    probs = np.array([np.real(np.trace(rho.matrix @ s.projector)) for s in settings])
    return TomographyDataset(settings, flux * probs, np.ones(len(settings)), flux=None)


def _pauli_basis() -> np.ndarray:
    one = np.eye(2, dtype=complex)
    singles = (one,) + PAULIS
    return np.array([np.kron(a, b) for a in singles for b in singles])


def linear_inversion(data: TomographyDataset) -> np.ndarray:
    """Unconstrained least-squares estimate, normalized to unit trace."""
    basis = _pauli_basis()
    proj = data.projectors
    a = np.real(np.einsum("ijk,lkj->il", proj, basis)) * data.durations[:, None]
    coef, *_ = np.linalg.lstsq(a, data.counts, rcond=None)
    x = np.einsum("l,ljk->jk", coef, basis)
    x = 0.5 * (x + x.conj().T)
    tr = np.real(np.trace(x))
    return x / tr if tr > 0 else np.eye(4, dtype=complex) / 4


def project_physical(m: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Nearest-PSD (eigenvalue clip) unit-trace matrix, optionally mixed with identity."""
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        w = np.ones(4)
    rho = (v * (w / w.sum())) @ v.conj().T
    if floor:
        rho = (1 - floor) * rho + floor * np.eye(4) / 4
    return rho


_OFF = np.tril_indices(4, -1)
_DIAG = np.diag_indices(4)
J = np.eye(4)[::-1]


def _to_params(t: np.ndarray) -> np.ndarray:
    return np.concatenate([t[_DIAG].real, t[_OFF].real, t[_OFF].imag])


def _from_params(x: np.ndarray) -> np.ndarray:
    t = np.zeros((4, 4), dtype=complex)
    t[_DIAG] = x[:4]
    t[_OFF] = x[4:10] + 1j * x[10:16]
    return t


def _grad_to_params(g: np.ndarray) -> np.ndarray:
    return np.concatenate([g[_DIAG].real, g[_OFF].real, g[_OFF].imag])


def _t_from_rho(rho: np.ndarray) -> np.ndarray:
    # rho = T^dag T with T lower triangular: Cholesky of the index-reversed matrix.
    low = np.linalg.cholesky(J @ rho @ J)
    return (J @ low @ J).conj().T


@dataclass
class MLEResult:
    state: TwoQubitState
    log_likelihood: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"state": self.state.to_dict(), "log_likelihood": self.log_likelihood,
                "iterations": self.iterations, "converged": self.converged}


class _Likelihood:
    """Poisson log-likelihood of T and its gradient in the 16 real parameters."""

    def __init__(self, data: TomographyDataset):
        self.n = data.counts
        self.proj = data.projectors * data.durations[:, None, None]
        self.m = self.proj.sum(axis=0)
        self.ntot = self.n.sum()
        self.flux = data.flux
        nz = self.n > 0
        self.const = -np.sum(self.n[nz] * np.log(self.n[nz])) + self.ntot  # saturated model

    def value_and_grad(self, x):
        t = _from_params(x)
        a = t.conj().T @ t
        q = np.real(np.einsum("ijk,kj->i", self.proj, a))
        tr = np.real(np.trace(a))
        if np.any(q[self.n > 0] <= 0) or tr <= 0:
            return -np.inf, np.zeros_like(x)
        nz = self.n > 0
        if self.flux is None:
            # flux profiled out: N_hat = ntot / Tr(M A)
            mt = np.real(np.trace(self.m @ a))
            f = np.sum(self.n[nz] * np.log(q[nz] * self.ntot / mt)) - self.ntot
            g = np.einsum("i,ijk->jk", np.where(nz, self.n / np.where(q > 0, q, 1), 0), self.proj)
            g = g - self.ntot * self.m / mt
        else:
            mu = self.flux * q / tr
            f = np.sum(self.n[nz] * np.log(mu[nz])) - mu.sum()
            w = np.where(nz, self.n / np.where(q > 0, q, 1), 0)
            g = np.einsum("i,ijk->jk", w, self.proj) - (self.ntot / tr) * np.eye(4)
            g = g - self.flux * (self.m / tr - (q.sum() / tr**2) * np.eye(4))
        grad = 2.0 * (t @ g)
        return f + self.const, _grad_to_params(grad)


def mle_reconstruct(data: TomographyDataset, *, max_iter: int = 100_000,
                    ftol: float = 1e-10, gtol: float = 1e-8, keep_history: bool = False) -> MLEResult:
    """Maximum-likelihood physical state for ``data``.

    Convergence is tested on the per-count log-likelihood: relative
    improvement below ``ftol`` on two consecutive steps, or gradient norm
    (per count) below ``gtol``.
    """
    if data.counts.sum() <= 0:
        raise DegenerateDataError("all tomography counts are zero")
    like = _Likelihood(data)
    scale = 1.0 / like.ntot
    rho0 = project_physical(linear_inversion(data), floor=1e-3)
    x = _to_params(_t_from_rho(rho0))
    x /= np.linalg.norm(x)
    f, g = like.value_and_grad(x)
    if not np.isfinite(f):
        x = _to_params(_t_from_rho(np.eye(4) / 4))
        f, g = like.value_and_grad(x)
    h_inv = np.eye(x.size)
    history = [f] if keep_history else []
    small = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if np.linalg.norm(g) * scale < gtol:
            converged = True
            break
        p = h_inv @ g
        slope = g @ p
        if slope <= 0:
            h_inv = np.eye(x.size)
            p, slope = g.copy(), g @ g
        step = 1.0
        while True:
            x_new = x + step * p
            f_new, g_new = like.value_and_grad(x_new)
            if np.isfinite(f_new) and f_new >= f + 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-20:
                f_new = None
                break
        if f_new is None:
            # no ascent possible along any tried step: at numerical optimum
            converged = True
            break
        s, y = x_new - x, g_new - g
        improvement = (f_new - f) * scale
        x, f, g = x_new, f_new, g_new
        if keep_history:
            history.append(f)
        sy = -(s @ y)  # curvature of -f
        if sy > 1e-14:
            rho_k = 1.0 / sy
            ident = np.eye(x.size)
            v = ident + rho_k * np.outer(s, y)
            h_inv = v @ h_inv @ v.T + rho_k * np.outer(s, s)
        small = small + 1 if improvement < ftol * max(1.0, abs(f) * scale) else 0
        if small >= 2:
            converged = True
            break

    t = _from_params(x)
    a = t.conj().T @ t
    rho = a / np.real(np.trace(a))
    rho = 0.5 * (rho + rho.conj().T)
    result = MLEResult(TwoQubitState(rho), float(f - like.const), it, converged, history)
    if not converged:
        raise ConvergenceError(f"MLE did not converge in {max_iter} iterations", best=result)
    return result
