"""Ghost phase imaging with a single phase object on the signal arm.

The signal slit stays open over the full aperture while a narrow idler slit
is scanned; coincidences behind crossed diagonal polarizers trace
sin^2(phi/2) at the correlated signal angle theta = -theta0'. A
polarizer-free direct channel records the phase-independent envelope.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measurement import (ALPHA, BETA, DetectionConfig, _pmap, coincidence_probability,
                          counts_from_probability, substream)
from .optics import PhaseLayout, PhaseMask
from .source import SourceModel
from .state import epsilon

GHOST_CONFIG = DetectionConfig(signal_aperture=10.0, idler_aperture=1.0,
                               signal_polarizer=ALPHA, idler_polarizer=BETA,
                               acquisition_time=120.0)
DIRECT_TIME = 10.0


def default_idler_grid(step: float = 0.5, halfwidth: float = 4.5) -> list[float]:
    n = int(round(2 * halfwidth / step))
    return [round(-halfwidth + i * step, 12) for i in range(n + 1)]


@dataclass
class GhostScanResult:
    positions: np.ndarray
    coincidence: list
    direct: list
    analytic_coincidence: np.ndarray  # expected net counts
    analytic_direct: np.ndarray  # expected net counts
    coincidence_time: float
    direct_time: float
    v0: float

    @property
    def coincidence_net(self) -> np.ndarray:
        return np.array([r.net for r in self.coincidence])

    @property
    def direct_net(self) -> np.ndarray:
        return np.array([r.net for r in self.direct])


def ghost_scan(model: SourceModel, phi_s: PhaseMask | None, cfg: DetectionConfig = GHOST_CONFIG,
               idler_grid=None, *, direct_time: float = DIRECT_TIME, workers: int = 1,
               simulate: bool = True) -> GhostScanResult:
    """Scan the idler slit with the phase object ``phi_s`` on the signal arm.

    The coincidence channel uses ``cfg`` (polarizers alpha/beta by default);
    the direct channel is the same geometry with polarizers removed and
    ``direct_time`` of acquisition. Point ``i`` of the coincidence (direct)
    channel draws from ``substream(seed, 0, i)`` (``(seed, 1, i)``).
    """
    grid = np.asarray(default_idler_grid() if idler_grid is None else idler_grid, dtype=float)
    phase = PhaseLayout(model, signal=phi_s, idler=None)
    direct_cfg = cfg.with_(signal_polarizer=None, idler_polarizer=None,
                           acquisition_time=direct_time)

    def point(item):
        i, x = item
        c_cfg = cfg.with_(idler_center=float(x))
        d_cfg = direct_cfg.with_(idler_center=float(x))
        pc = coincidence_probability(model, phase, c_cfg)
        pd = coincidence_probability(model, phase, d_cfg)
        if simulate:
            rc = counts_from_probability(pc, c_cfg, substream(cfg.seed, 0, i))
            rd = counts_from_probability(pd, d_cfg, substream(cfg.seed, 1, i))
        else:
            rc = rd = None
        return (rc, rd, pc * cfg.pair_rate * cfg.acquisition_time,
                pd * cfg.pair_rate * direct_time)

    rows = _pmap(point, list(enumerate(grid)), workers)
    return GhostScanResult(
        positions=grid,
        coincidence=[r[0] for r in rows],
        direct=[r[1] for r in rows],
        analytic_coincidence=np.array([r[2] for r in rows]),
        analytic_direct=np.array([r[3] for r in rows]),
        coincidence_time=cfg.acquisition_time,
        direct_time=direct_time,
        v0=model.v0,
    )


@dataclass
class PhaseReconstruction:
    positions: np.ndarray
    ratio: np.ndarray  # sin^2(phi/2) estimate
    abs_phi: np.ndarray  # rad, in [0, pi]
    flags: list  # "", "zero", "branch" or "invalid"


def invert_ratio(r) -> np.ndarray:
    """|phi| = 2 asin(sqrt(r)) for r clipped to [0, 1]."""
    return 2.0 * np.arcsin(np.sqrt(np.clip(r, 0.0, 1.0)))


def reconstruct_phase(result: GhostScanResult, envelope_reference=None, *,
                      analytic: bool = False, n_sigma: float = 2.0) -> PhaseReconstruction:
    """Pointwise |phi| at theta = -theta0' from coincidence / envelope ratios.

    ``envelope_reference`` gives the phase-free expected counts in the
    coincidence channel at each grid point; by default it is the direct
    channel (measured, or analytic with ``analytic=True``) rescaled to the
    coincidence acquisition time. The dephasing baseline (1 - v0)/2 is
    removed before inversion. Points within ``n_sigma`` of r = 0 or r = 1
    are flagged because the sign (or branch) of phi is ambiguous there.
    """
    scale = result.coincidence_time / result.direct_time
    v0 = result.v0 if result.v0 > 0 else 1.0
    if analytic:
        coinc = result.analytic_coincidence
        coinc_var = np.zeros_like(coinc)
    else:
        coinc = result.coincidence_net
        coinc_var = np.array([r.variance for r in result.coincidence], dtype=float)
    if envelope_reference is None:
        if analytic:
            env, env_var = result.analytic_direct * scale, np.zeros_like(coinc)
        else:
            env = result.direct_net * scale
            env_var = np.array([r.variance for r in result.direct], dtype=float) * scale**2
    else:
        env = np.asarray(envelope_reference, dtype=float)
        env_var = np.zeros_like(env)

    valid = env > 0
    safe_env = np.where(valid, env, 1.0)
    # coincidence / direct = (1 - v0 cos phi) / 2
    q = coinc / safe_env
    r = (2.0 * q - (1.0 - v0)) / (2.0 * v0)
    q_var = (coinc_var + q**2 * env_var) / safe_env**2
    sigma_r = np.sqrt(q_var) / v0
    r = np.clip(r, 0.0, 1.0)
    tol = np.maximum(n_sigma * sigma_r, 1e-9)

    flags = []
    for ok, ri, ti in zip(valid, r, tol):
        if not ok:
            flags.append("invalid")
        elif ri <= ti:
            flags.append("zero")
        elif ri >= 1.0 - ti:
            flags.append("branch")
        else:
            flags.append("")
    abs_phi = np.where(valid, invert_ratio(r), np.nan)
    return PhaseReconstruction(result.positions, np.where(valid, r, np.nan), abs_phi, flags)


def compensating_mask(candidate: PhaseMask) -> PhaseMask:
    """Idler mask that cancels ``candidate`` on the theta' = -theta ridge.

    For odd functions this is the candidate itself; in general it is
    ``-candidate(-theta')``.
    """
    if candidate.is_sampled:
        grid = -np.asarray(candidate.grid)[::-1]
        values = -np.asarray(candidate.values)[::-1]
        return PhaseMask.sampled(grid, values, pixel_pitch=candidate.pixel_pitch)
    return PhaseMask(amplitude=candidate.amplitude, frequency=candidate.frequency,
                     sign=candidate.sign, slope=candidate.slope, offset=-candidate.offset,
                     pixel_pitch=candidate.pixel_pitch)


def rank_candidates(model: SourceModel, phi_s: PhaseMask, candidates) -> list[float]:
    """Visibility restored by each candidate's compensating idler mask.

    This resolves the sign ambiguity of :func:`reconstruct_phase`: the
    candidate whose compensating mask gives the highest visibility best
    matches the actual object.
    """
    return [epsilon(model, phi_s, compensating_mask(c)).real for c in candidates]


def coincidence_record_rows(result: GhostScanResult, recon: PhaseReconstruction):
    """Rows for the ghost-scan CSV export."""
    for i, x in enumerate(result.positions):
        yield {
            "position_mrad": float(x),
            "direct_net": float(result.direct[i].net),
            "coincidence_net": float(result.coincidence[i].net),
            "analytic_direct": float(result.analytic_direct[i]),
            "analytic_coincidence": float(result.analytic_coincidence[i]),
            "recon_abs_phi_rad": float(recon.abs_phi[i]),
            "flag": recon.flags[i],
        }
