"""Plane-wave snapshot simulation, noise injection, and sample covariance.

Snapshot model: X[:, l] = sum_k a_k s_k[l] + n[l], with a_k the
un-normalized element response toward source k (gain times phase), s_k the
baseband source waveform and n circular complex Gaussian noise.

Randomness discipline: every random draw comes from numpy's PCG64 generator
seeded through a SeedSequence. A simulation seeded with ``seed`` spawns one
child stream per consumer in a fixed order - child 0 drives the additive
noise, child 1 + k drives any per-source randomness (e.g. a random channel
gain for source k). Identical seeds therefore reproduce snapshot matrices
bit for bit, and adding noise never perturbs the signal part.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import ArrayLayout

_EXPORT_DTYPE = "<f8"  # little-endian float64, interleaved re/im


@dataclass(frozen=True)
class SourceSpec:
    """One narrowband far-field source.

    The waveform is a complex exponential amplitude * exp(j*(2*pi*f*t +
    phase)) sampled at the snapshot rate, unless an explicit complex sample
    sequence is supplied.

    Attributes
    ----------
    direction : tuple[float, float]
        (phi, theta) in radians.
    amplitude : float
        Waveform amplitude; nominal power is amplitude**2.
    frequency_hz : float
        Baseband tone frequency.
    phase_rad : float | None
        Initial phase; None draws one uniform phase per simulation from the
        source's own child stream (see module docstring).
    samples : np.ndarray | None
        Optional caller-supplied complex waveform; overrides the tone.
    channel_gain : complex
        Optional flat complex channel gain applied to the waveform (a
        line-of-sight-only propagation reduction).
    """

    direction: tuple[float, float]
    amplitude: float = 1.0
    frequency_hz: float = 1.0e6
    phase_rad: float | None = 0.0
    samples: np.ndarray | None = None
    channel_gain: complex = 1.0 + 0.0j

    def waveform(
        self,
        n_snapshots: int,
        sample_rate_hz: float,
        rng: np.random.Generator | None = None,
    ) -> np.ndarray:
        if self.samples is not None:
            s = np.asarray(self.samples, dtype=complex)
            if len(s) < n_snapshots:
                raise ValueError(
                    f"supplied waveform has {len(s)} samples, need {n_snapshots}"
                )
            if not np.all(np.isfinite(s)):
                raise ValueError("source samples must be finite")
            return self.channel_gain * s[:n_snapshots]
        phase = self.phase_rad
        if phase is None:
            if rng is None:
                raise ValueError("random initial phase requested without a stream")
            phase = float(rng.uniform(0.0, 2.0 * np.pi))
        t = np.arange(n_snapshots) / sample_rate_hz
        tone = self.amplitude * np.exp(
            1j * (2.0 * np.pi * self.frequency_hz * t + phase)
        )
        return self.channel_gain * tone

    @property
    def power(self) -> float:
        """Nominal waveform power (amplitude squared)."""
        if self.samples is not None:
            return float(np.mean(np.abs(self.samples) ** 2))
        return float(self.amplitude**2)


@dataclass(frozen=True)
class NoiseSpec:
    """Circular complex Gaussian element noise, variance per element."""

    variance: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.variance < 0:
            raise ValueError("noise variance must be >= 0")


@dataclass(frozen=True)
class SnapshotMatrix:
    """Complex baseband snapshots, one column per time sample."""

    data: np.ndarray
    sample_rate_hz: float = 1.0e8

    def __post_init__(self) -> None:
        d = np.asarray(self.data)
        if d.ndim != 2:
            raise ValueError("snapshot matrix must be 2-D (elements x snapshots)")

    @property
    def n_elements(self) -> int:
        return self.data.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class CovarianceMatrix:
    """Hermitian sample covariance with recorded diagonal loading.

    Keeps a reference to the snapshots it was estimated from (when known) so
    solvers can choose a factorization path that works on raw data rows.
    """

    data: np.ndarray
    loading: float = 0.0
    snapshots: SnapshotMatrix | None = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return self.data.shape[0]


def _noise_matrix(rng: np.random.Generator, variance: float, shape: tuple[int, int]) -> np.ndarray:
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def collect_plane_waves(
    layout: ArrayLayout,
    sources: Sequence[SourceSpec],
    n_snapshots: int,
    noise: NoiseSpec = NoiseSpec(),
    sample_rate_hz: float = 1.0e8,
) -> SnapshotMatrix:
    """Simulate snapshots of plane waves arriving at the array.

    Parameters
    ----------
    layout : ArrayLayout
        Receiving array; per-element gains participate in each response.
    sources : sequence of SourceSpec
        Far-field sources, superposed.
    n_snapshots : int
        Number of time samples (columns).
    noise : NoiseSpec
        Per-element noise variance and the master seed for all randomness.
    sample_rate_hz : float
        Snapshot rate used to sample source waveforms.

    Returns
    -------
    SnapshotMatrix
        (n_elements, n_snapshots) complex matrix.
    """
    if n_snapshots < 1:
        raise ValueError("need at least one snapshot")
    root = np.random.SeedSequence(noise.seed)
    children = root.spawn(1 + len(sources))
    noise_rng = np.random.default_rng(children[0])

    x = np.zeros((layout.n, n_snapshots), dtype=complex)
    for k, src in enumerate(sources):
        a = layout.response(*src.direction)
        s = src.waveform(n_snapshots, sample_rate_hz, np.random.default_rng(children[1 + k]))
        x += np.outer(a, s)
    if noise.variance > 0.0:
        x = x + _noise_matrix(noise_rng, noise.variance, x.shape)
    return SnapshotMatrix(data=x, sample_rate_hz=sample_rate_hz)


def apply_awgn(snapshots: SnapshotMatrix, snr_db: float, seed: int = 0) -> SnapshotMatrix:
    """Add white Gaussian noise at a requested SNR relative to measured power.

    The signal power is the empirical mean |X|^2 over all entries; the
    injected noise has variance signal_power / 10^(snr_db/10) per element.
    An infinite SNR returns the input unchanged.
    """
    x = snapshots.data
    if np.isposinf(snr_db):
        return snapshots
    power = float(np.mean(np.abs(x) ** 2))
    if power == 0.0:
        raise ValueError("cannot set an SNR on an all-zero snapshot matrix")
    variance = power / (10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    noisy = x + _noise_matrix(rng, variance, x.shape)
    return SnapshotMatrix(data=noisy, sample_rate_hz=snapshots.sample_rate_hz)


def default_loading(r: np.ndarray) -> float:
    """Default diagonal loading: 1e-6 * trace(R) / n."""
    n = r.shape[0]
    return 1e-6 * float(np.real(np.trace(r))) / n


def sample_covariance(
    snapshots: SnapshotMatrix, loading: float | None = None
) -> CovarianceMatrix:
    """Estimate the sample covariance R = X X^H / L with diagonal loading.

    Parameters
    ----------
    snapshots : SnapshotMatrix
        Input data, L = n_snapshots columns.
    loading : float | None
        Diagonal loading added as loading * I. None selects the default
        1e-6 * trace(R)/n; pass 0.0 to disable.

    Returns
    -------
    CovarianceMatrix
        Exactly Hermitian (symmetrized) loaded covariance.
    """
    x = snapshots.data
    l = snapshots.n_snapshots
    r = x @ x.conj().T / l
    r = 0.5 * (r + r.conj().T)
    if loading is None:
        loading = default_loading(r)
    if loading < 0:
        raise ValueError("diagonal loading must be >= 0")
    if loading > 0.0:
        r = r + loading * np.eye(r.shape[0])
    return CovarianceMatrix(data=r, loading=float(loading), snapshots=snapshots)


def save_snapshots(path: str | Path, snapshots: SnapshotMatrix, seed: int | None = None) -> Path:
    """Write snapshots as little-endian interleaved re/im float64 + sidecar.

    The binary file holds the (n, L) matrix row-major with each complex
    entry stored as two consecutive float64 values (re, im). A JSON sidecar
    with the same stem records dimensions, sample rate, and the seed.

    Returns the path of the binary file.
    """
    path = Path(path)
    x = snapshots.data
    interleaved = np.empty((x.shape[0], x.shape[1], 2), dtype=_EXPORT_DTYPE)
    interleaved[:, :, 0] = x.real
    interleaved[:, :, 1] = x.imag
    interleaved.tofile(path)
    sidecar = {
        "format": "snapshots",
        "version": 1,
        "elements": int(x.shape[0]),
        "snapshots": int(x.shape[1]),
        "sample_rate_hz": snapshots.sample_rate_hz,
        "dtype": _EXPORT_DTYPE,
        "layout": "row-major, interleaved re/im",
        "seed": seed,
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")
    return path


def load_snapshots(path: str | Path) -> SnapshotMatrix:
    """Read a snapshot matrix written by save_snapshots."""
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    n, l = sidecar["elements"], sidecar["snapshots"]
    raw = np.fromfile(path, dtype=_EXPORT_DTYPE)
    if raw.size != n * l * 2:
        raise ValueError(
            f"binary payload has {raw.size} floats, expected {n * l * 2} "
            f"for a {n}x{l} complex matrix"
        )
    raw = raw.reshape(n, l, 2)
    return SnapshotMatrix(
        data=raw[:, :, 0] + 1j * raw[:, :, 1],
        sample_rate_hz=float(sidecar["sample_rate_hz"]),
    )
