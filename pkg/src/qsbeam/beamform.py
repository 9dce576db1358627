"""Adaptive beamforming: minimum-variance and linearly constrained weights.

Weight solves go through the streaming QR machinery in :mod:`qsbeam.qrsolve`
rather than explicit matrix inversion: the covariance is represented by an
upper-triangular factor F with F^H F = R (either absorbed from snapshot rows
or obtained from a dense Cholesky factorization) and every R^{-1} v becomes
a forward/backward substitution pair. The two factorization paths are
interchangeable and are cross-checked against each other in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericalError
from .geometry import ArrayLayout, SteeringVector, steering_vector
from .qrsolve import QlessQrState, absorb_rows, new_state, solve_normal, state_from_triangular
from .signals import CovarianceMatrix

_DISTORTIONLESS_TOL = 1e-10


@dataclass(frozen=True)
class BeamWeights:
    """Complex element weights produced by one of the solvers."""

    values: np.ndarray
    method: str
    steer: tuple[float, float] | None = None

    @property
    def n(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class LcmvConstraints:
    """Directional gain constraints: response[k] at directions[k]."""

    directions: tuple[tuple[float, float], ...]
    responses: np.ndarray

    def __post_init__(self) -> None:
        if len(self.directions) == 0:
            raise ValueError("need at least one constraint")
        if len(self.directions) != len(self.responses):
            raise ValueError("one response per direction required")

    @property
    def k(self) -> int:
        return len(self.directions)


@dataclass(frozen=True)
class BeamPattern:
    """Sampled array response in dB, normalized so the maximum is 0 dB."""

    el_deg: np.ndarray
    az_deg: np.ndarray
    power_db: np.ndarray

    def __post_init__(self) -> None:
        if not (len(self.el_deg) == len(self.az_deg) == len(self.power_db)):
            raise ValueError("angle and power arrays must be equal length")


def factor_covariance(r: CovarianceMatrix, path: str = "auto") -> QlessQrState:
    """Triangular factor F with F^H F = R, via one of two routes.

    "qr" absorbs the snapshot rows (scaled by 1/sqrt(L)) plus diagonal
    loading rows into a Q-less QR state; it requires the covariance to
    carry its source snapshots. "cholesky" factors the assembled matrix
    densely. "auto" prefers the snapshot route when snapshots are attached
    to the covariance and the stream is short enough to absorb cheaply.
    """
    if path not in ("auto", "qr", "cholesky"):
        raise ValueError(f"unknown factorization path {path!r}")
    if path == "auto":
        snaps = r.snapshots
        path = "qr" if snaps is not None and snaps.n_snapshots <= 4 * r.n else "cholesky"
    if path == "qr":
        if r.snapshots is None:
            raise ValueError("qr path needs a covariance built from snapshots")
        x = r.snapshots.data
        state = new_state(r.n, forgetting=1.0)
        rows = x.conj().T / math.sqrt(r.snapshots.n_snapshots)
        state = absorb_rows(state, rows)
        if r.loading > 0.0:
            state = absorb_rows(state, math.sqrt(r.loading) * np.eye(r.n, dtype=complex))
        return state
    try:
        lower = np.linalg.cholesky(r.data)
    except np.linalg.LinAlgError:
        raise NumericalError(
            "covariance is not positive definite; increase diagonal loading"
        ) from None
    return state_from_triangular(lower.conj().T)


def _solve_covariance(
    r: CovarianceMatrix, rhs: np.ndarray, path: str
) -> np.ndarray:
    state = factor_covariance(r, path=path)
    return solve_normal(state, rhs)


def mvdr_weights(
    r: CovarianceMatrix, steer: SteeringVector, path: str = "auto"
) -> BeamWeights:
    """Minimum-variance distortionless weights w = R^-1 a / (a^H R^-1 a).

    Output power w^H R w is minimized subject to w^H a = 1, which maximizes
    the post-combining signal-to-interference-plus-noise ratio for a source
    arriving from the steered direction. Scaling R leaves the weights
    unchanged.

    Parameters
    ----------
    r : CovarianceMatrix
        Loaded sample (or analytic) covariance.
    steer : SteeringVector
        Unit-norm steering vector of the protected direction.
    path : str
        Factorization route; see factor_covariance.
    """
    a = steer.values
    if a.shape[0] != r.n:
        raise ValueError("steering vector length does not match covariance")
    z = _solve_covariance(r, a, path)
    denom = a.conj() @ z
    if abs(denom) == 0.0:
        raise NumericalError("steered direction lies in the covariance null space")
    w = z / denom
    return BeamWeights(values=w, method="mvdr", steer=steer.direction)


def lcmv_weights(
    r: CovarianceMatrix,
    layout: ArrayLayout,
    constraints: LcmvConstraints,
    path: str = "auto",
) -> BeamWeights:
    """Linearly constrained minimum-variance weights.

    Solves min w^H R w subject to C^H w = f, giving
    w = R^-1 C (C^H R^-1 C)^-1 f, with one steering-vector column of C per
    constrained direction.

    Raises
    ------
    ValueError
        When the constraint directions are (near-)collinear; the message
        names the offending pair.
    """
    cols = [steering_vector(layout, phi, theta).values for phi, theta in constraints.directions]
    c = np.column_stack(cols)
    if c.shape[0] != r.n:
        raise ValueError("layout size does not match covariance")
    k = c.shape[1]
    sv = np.linalg.svd(c, compute_uv=False)
    if sv[-1] < 1e-10 * sv[0]:
        worst = None
        for i in range(k):
            for j in range(i + 1, k):
                coh = abs(cols[i].conj() @ cols[j])
                if worst is None or coh > worst[0]:
                    worst = (coh, i, j)
        _, i, j = worst
        raise ValueError(
            f"constraint directions {i} and {j} are (near-)collinear: "
            f"{_fmt_dir(constraints.directions[i])} vs {_fmt_dir(constraints.directions[j])}"
        )
    state = factor_covariance(r, path=path)
    zcols = np.column_stack([solve_normal(state, c[:, idx]) for idx in range(k)])
    small = c.conj().T @ zcols
    u = np.linalg.solve(small, np.asarray(constraints.responses, dtype=complex))
    w = zcols @ u
    achieved = c.conj().T @ w
    err = float(np.max(np.abs(achieved - constraints.responses)))
    if err > 1e-8:
        raise NumericalError(f"constraint responses achieved only to {err:.2e}")
    return BeamWeights(values=w, method="lcmv", steer=constraints.directions[0])


def _fmt_dir(direction: tuple[float, float]) -> str:
    phi, theta = direction
    return f"(el {math.degrees(phi):.2f} deg, az {math.degrees(theta):.2f} deg)"


def beam_pattern(
    weights: BeamWeights,
    layout: ArrayLayout,
    az_deg: Sequence[float],
    el_deg: float | Sequence[float] = 45.0,
) -> BeamPattern:
    """Sample |w^H a(phi, theta)| over a grid, in dB normalized to 0 peak.

    Parameters
    ----------
    weights : BeamWeights
        Beamformer output weights.
    layout : ArrayLayout
        Array used to evaluate unit-norm steering vectors.
    az_deg : sequence of float
        Azimuth sample points in degrees.
    el_deg : float | sequence of float
        Fixed elevation (broadcast) or per-point elevations in degrees.
    """
    az = np.asarray(az_deg, dtype=float).reshape(-1)
    el = np.asarray(el_deg, dtype=float).reshape(-1)
    if el.size == 1:
        el = np.full(az.shape, el[0])
    if el.size != az.size:
        raise ValueError("el_deg must be scalar or match az_deg")
    w = weights.values
    resp = np.empty(az.size)
    for idx in range(az.size):
        a = steering_vector(layout, math.radians(el[idx]), math.radians(az[idx])).values
        resp[idx] = abs(np.vdot(w, a))
    peak = resp.max()
    if peak == 0.0:
        raise NumericalError("beam response is identically zero on the grid")
    floor = np.finfo(float).tiny
    power_db = 20.0 * np.log10(np.maximum(resp, floor) / peak)
    return BeamPattern(el_deg=el, az_deg=az, power_db=power_db)


def null_depth(pattern: BeamPattern, az_deg: float, halfwidth_deg: float = 0.5) -> float:
    """Worst (max) pattern level within +-halfwidth of an azimuth, in dB."""
    mask = np.abs(pattern.az_deg - az_deg) <= halfwidth_deg + 1e-12
    if not np.any(mask):
        raise ValueError(f"no pattern samples within {halfwidth_deg} deg of {az_deg}")
    return float(np.max(pattern.power_db[mask]))


def output_sinr(
    weights: BeamWeights, signal_cov: np.ndarray, interference_noise_cov: np.ndarray
) -> float:
    """Post-combining SINR 10 log10(w^H R_s w / w^H R_in w) in dB."""
    w = weights.values
    num = float(np.real(w.conj() @ signal_cov @ w))
    den = float(np.real(w.conj() @ interference_noise_cov @ w))
    if den <= 0.0:
        raise NumericalError("interference-plus-noise power is not positive")
    if num <= 0.0:
        return -math.inf
    return 10.0 * math.log10(num / den)
