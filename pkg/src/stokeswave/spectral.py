"""Damped-generator spectra, energy-weighted resolvent sweeps, and per-mode
semiclassical diagnostics.

The first-order generator of the damped modal system is the block matrix
[[0, I], [-Lambda, -B]].  Its spectral abscissa predicts the energy decay
rate (energy is quadratic in the semigroup, hence the factor two), and
the resolvent is measured along the imaginary axis in the energy norm:
singular values are taken after congruence with the square root of the
energy Gram matrix diag(Lambda, I), because the decay criterion lives in
that norm, not the Euclidean one.

Per-eigenmode diagnostics operate at the semiclassical scale h = 1/sqrt(lambda):
boundary flux of h * (normal derivative), the normal-trace identity defect,
pressure norms of the h-scaled projection pressure, and the observability
constant 1/||a^(1/2) phi||.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from .errors import NumericsError
from .geometry import DampingProfile
from .stokes import EigenPair, PressureField, divergence


@dataclass
class DampedGenerator:
    """Assembled first-order generator with its energy Gram weights."""

    lambdas: np.ndarray
    B: np.ndarray
    matrix: np.ndarray
    gram_diag: np.ndarray


@dataclass
class SpectrumReport:
    """Eigenvalues of the damped generator and derived decay data."""

    eigenvalues: np.ndarray
    spectral_abscissa: float
    predicted_decay_rate: float
    resolvent_curve: Optional[np.ndarray] = None


@dataclass
class QuasimodeDiagnostics:
    """Boundary-trace and observability diagnostics of one eigenmode."""

    h: float
    boundary_flux_norm: float
    normal_component_defect: float
    pressure_norms: Tuple[float, float]
    obs_constant: float


def assemble_generator(ms) -> DampedGenerator:
    """Build [[0, I], [-Lambda, -B]] from any object with .lambdas and .B."""
    lam = np.asarray(ms.lambdas, dtype=float)
    b = np.asarray(ms.B, dtype=float)
    n = lam.size
    m = np.zeros((2 * n, 2 * n))
    m[:n, n:] = np.eye(n)
    m[n:, :n] = -np.diag(lam)
    m[n:, n:] = -b
    gram = np.concatenate([lam, np.ones(n)])
    return DampedGenerator(lam, b, m, gram)


def spectrum(g: DampedGenerator) -> SpectrumReport:
    """Dense eigensolve of the generator; eigenvalues sorted deterministically."""
    try:
        vals = np.linalg.eigvals(g.matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"generator eigensolve failed: {exc}") from exc
    order = np.lexsort((vals.imag, vals.real))
    vals = vals[order]
    abscissa = float(vals.real.max())
    return SpectrumReport(vals, abscissa, _decay_rate(abscissa))


def _decay_rate(abscissa: float) -> float:
    return 2.0 * abs(abscissa) if abscissa < 0 else 0.0


def predicted_decay(report: SpectrumReport) -> float:
    """Energy decay rate implied by the spectral abscissa (0 if not decaying)."""
    return _decay_rate(report.spectral_abscissa)


def resolvent_sweep(g: DampedGenerator, sigma_grid) -> np.ndarray:
    """Smallest energy-norm singular value of (generator - i*sigma) per sigma.

    Returns an array of rows (sigma, smin); the energy-norm resolvent norm
    is 1/smin wherever smin > 0 (smin = 0 flags a spectral point on the
    axis and no division is performed here).
    """
    sqrt_g = np.sqrt(g.gram_diag)
    inv_sqrt_g = 1.0 / sqrt_g
    n2 = g.matrix.shape[0]
    rows = np.empty((len(sigma_grid), 2))
    for k, sigma in enumerate(sigma_grid):
        shifted = g.matrix - 1j * float(sigma) * np.eye(n2)
        scaled = sqrt_g[:, None] * shifted * inv_sqrt_g[None, :]
        smin = float(scipy.linalg.svdvals(scaled)[-1])
        rows[k] = (float(sigma), smin)
    return rows


def semiclassical_constants(pairs: List[EigenPair],
                            profile: Optional[DampingProfile]) -> List[Tuple[float, float]]:
    """Per-mode (h, C) with h = lambda^(-1/2), C = ||phi|| / ||a^(1/2) phi||.

    Modes invisible to the damping report C = inf, flagging a discrete
    unique-continuation violation.  Sorted by ascending h.
    """
    out = []
    for p in pairs:
        h = p.lam ** -0.5
        d = _damping_mass(p, profile)
        nrm = p.phi.l2_norm()
        c = math.inf if d == 0.0 else nrm / math.sqrt(d)
        out.append((h, c))
    return sorted(out, key=lambda hc: hc[0])


def _damping_mass(pair: EigenPair, profile: Optional[DampingProfile]) -> float:
    """||a^(1/2) phi||^2 by face quadrature."""
    if profile is None:
        return 0.0
    grid = pair.phi.grid
    a = np.concatenate([profile.values(grid.u_points()), profile.values(grid.v_points())])
    flat = pair.phi.flat()
    return grid.h ** 2 * float((a * flat) @ flat)


def quasimode_diagnostics(pair: EigenPair, q: PressureField,
                          profile: Optional[DampingProfile]) -> QuasimodeDiagnostics:
    """Boundary diagnostics of an eigenmode at its semiclassical scale.

    q is the projection pressure of the pair; internally it is rescaled by
    h so the reported pressure norms refer to the pressure of the h-scaled
    mode equation.  The normal-trace defect uses the divergence identity at
    boundary cells: the one-sided normal-derivative trace of the normal
    component plus the near-wall tangential difference is exactly the cell
    divergence, which vanishes for discrete divergence-free modes.  That
    identity is the discrete form of the vanishing normal trace forced by
    incompressibility and no-slip.
    """
    grid = pair.phi.grid
    h_sc = pair.lam ** -0.5
    hg = grid.h
    u, v = pair.phi.u, pair.phi.v

    # second-order one-sided normal derivatives on the four walls
    # normal component: wall value is an exact grid node (zero)
    dn_norm = [
        (4.0 * u[1, :] - u[2, :]) / (2 * hg),          # left wall, d(u)/dx
        (4.0 * u[-2, :] - u[-3, :]) / (2 * hg),        # right wall
        (4.0 * v[:, 1] - v[:, 2]) / (2 * hg),          # bottom wall, d(v)/dy
        (4.0 * v[:, -2] - v[:, -3]) / (2 * hg),        # top wall
    ]
    # tangential component: first values sit at hg/2 and 3hg/2 off the wall
    dn_tan = [
        (9.0 * v[0, :] - v[1, :]) / (3 * hg),          # left wall, d(v)/dx
        (9.0 * v[-1, :] - v[-2, :]) / (3 * hg),        # right wall
        (9.0 * u[:, 0] - u[:, 1]) / (3 * hg),          # bottom wall, d(u)/dy
        (9.0 * u[:, -1] - u[:, -2]) / (3 * hg),        # top wall
    ]
    flux_sq = sum(float(arr @ arr) for arr in dn_norm) + \
        sum(float(arr @ arr) for arr in dn_tan)
    boundary_flux = h_sc * math.sqrt(hg * flux_sq)

    div_ring = divergence(pair.phi).q
    ring = np.concatenate([div_ring[0, :], div_ring[-1, :], div_ring[:, 0], div_ring[:, -1]])
    defect = h_sc * float(np.abs(ring).max())

    qq = q.q
    q_interior = h_sc * q.l2_norm()
    traces = [
        (3.0 * qq[0, :] - qq[1, :]) / 2.0,
        (3.0 * qq[-1, :] - qq[-2, :]) / 2.0,
        (3.0 * qq[:, 0] - qq[:, 1]) / 2.0,
        (3.0 * qq[:, -1] - qq[:, -2]) / 2.0,
    ]
    q_boundary = h_sc * math.sqrt(hg * sum(float(tr @ tr) for tr in traces))

    d = _damping_mass(pair, profile)
    nrm = pair.phi.l2_norm()
    obs = math.inf if d == 0.0 else nrm / math.sqrt(d)
    return QuasimodeDiagnostics(h_sc, boundary_flux, defect, (q_interior, q_boundary), obs)
