"""End-to-end direction finding and constraint-driven pattern synthesis.

A scenario declares the array, the far-field sources (one marked desired),
the SNR, and a class grid of candidate azimuths at a fixed elevation. The
pipeline simulates snapshots, featurizes the sample covariance, classifies
the features with a one-vs-one quadratic-surface model, and finally hands
the estimated directions to the constrained beamformer, which keeps unit
response on the desired estimate and places hard nulls on the interferer
estimates.

Feature map: the classifier sees the minimum-variance spatial spectrum
evaluated on the class grid (log scale, peak-normalized), one feature per
class ("capon_grid_v1"). This keeps the feature dimension equal to the
class count regardless of element count; models remember the map in their
version tag. Multi-source scenes are resolved by classify-then-null rounds:
after each classification the winning direction is projected out of the
working covariance, so later rounds see only the remaining sources. Vote
tallies of every round are reported.

Models are trained on demand from labeled single-source simulations (one
class per grid angle, SNR drawn uniformly from a configured range, seeds
derived deterministically from (train seed, class, sample)). Trained models
are cached per (array, grid, hyperparameters, training config).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .beamform import BeamPattern, BeamWeights, LcmvConstraints, beam_pattern, lcmv_weights
from .errors import ConfigError
from .geometry import ArrayLayout, ArrayParams, build_hybrid_layout, steering_matrix
from .qssvm import QsSvmHyperparams, QsSvmModel, train_multiclass
from .signals import (
    CovarianceMatrix,
    NoiseSpec,
    SnapshotMatrix,
    SourceSpec,
    collect_plane_waves,
    sample_covariance,
)

SPECTRUM_FEATURE_TAG = "capon_grid_v1"
_SPECTRUM_FLOOR_LOG10 = -6.0


@dataclass(frozen=True)
class ScenarioSource:
    """One declared source: direction in degrees and power in dB."""

    az_deg: float
    el_deg: float = 45.0
    power_db: float = 0.0

    @property
    def direction_rad(self) -> tuple[float, float]:
        return (math.radians(self.el_deg), math.radians(self.az_deg))

    @property
    def amplitude(self) -> float:
        return 10.0 ** (self.power_db / 20.0)


@dataclass(frozen=True)
class DoaGrid:
    """Candidate classes: an inclusive azimuth ladder at fixed elevation."""

    az_start_deg: float = 0.0
    az_stop_deg: float = 90.0
    az_step_deg: float = 5.0
    el_deg: float = 45.0

    def __post_init__(self) -> None:
        if self.az_step_deg <= 0:
            raise ConfigError("grid step must be > 0")
        if self.az_stop_deg < self.az_start_deg:
            raise ConfigError("grid stop must be >= start")

    @property
    def angles_deg(self) -> np.ndarray:
        n = int(round((self.az_stop_deg - self.az_start_deg) / self.az_step_deg))
        return self.az_start_deg + self.az_step_deg * np.arange(n + 1)

    def directions_rad(self) -> list[tuple[float, float]]:
        el = math.radians(self.el_deg)
        return [(el, math.radians(az)) for az in self.angles_deg]

    def nearest_class(self, az_deg: float) -> float:
        angles = self.angles_deg
        return float(angles[int(np.argmin(np.abs(angles - az_deg)))])


@dataclass(frozen=True)
class Scenario:
    """Complete description of one simulated direction-finding problem."""

    array: ArrayParams = ArrayParams()
    sources: tuple[ScenarioSource, ...] = (
        ScenarioSource(az_deg=45.0),
        ScenarioSource(az_deg=30.0),
        ScenarioSource(az_deg=50.0),
    )
    desired_index: int = 0
    snr_db: float = 10.0
    snapshots: int = 1000
    seed: int = 7
    grid: DoaGrid = DoaGrid()
    sample_rate_hz: float = 1.0e8

    def __post_init__(self) -> None:
        if not self.sources:
            raise ConfigError("scenario needs at least one source")
        if not (0 <= self.desired_index < len(self.sources)):
            raise ConfigError("desired_index out of range")
        if self.snapshots < 1:
            raise ConfigError("snapshots must be >= 1")
        lo, hi = self.grid.az_start_deg, self.grid.az_stop_deg
        for s in self.sources:
            if not (lo - 1e-9 <= s.az_deg <= hi + 1e-9):
                raise ConfigError(
                    f"source azimuth {s.az_deg} deg lies outside the class grid "
                    f"[{lo}, {hi}] deg"
                )

    @property
    def desired(self) -> ScenarioSource:
        return self.sources[self.desired_index]

    @property
    def noise_variance(self) -> float:
        """Element noise from declared desired power: P_d / 10^(SNR/10)."""
        return self.desired.amplitude**2 / (10.0 ** (self.snr_db / 10.0))


def _source_specs(scenario: Scenario) -> list[SourceSpec]:
    """Declared sources as simulator specs with distinct tone frequencies.

    Frequencies are spread over (0, 0.4] cycles/sample so sources stay
    mutually incoherent over the snapshot window; initial phases are drawn
    per simulation from each source's child stream.
    """
    k = len(scenario.sources)
    specs = []
    for idx, s in enumerate(scenario.sources):
        nu = 0.4 * (idx + 1) / (k + 1)
        specs.append(
            SourceSpec(
                direction=s.direction_rad,
                amplitude=s.amplitude,
                frequency_hz=nu * scenario.sample_rate_hz,
                phase_rad=None,
            )
        )
    return specs


def simulate_scenario(scenario: Scenario, layout: ArrayLayout | None = None) -> SnapshotMatrix:
    """Generate the scenario's snapshot matrix (deterministic in the seed)."""
    layout = layout or build_hybrid_layout(scenario.array)
    return collect_plane_waves(
        layout,
        _source_specs(scenario),
        scenario.snapshots,
        NoiseSpec(variance=scenario.noise_variance, seed=scenario.seed),
        sample_rate_hz=scenario.sample_rate_hz,
    )


# ------------------------------ featurization -------------------------------


# Relative diagonal load applied before inverting a covariance for the
# spectrum. Keeps the noiseless (rank-deficient) case solvable; at any
# finite SNR the load sits >= 8 decades below the noise eigenvalues and
# moves the log features by well under 1e-6.
_CAPON_DIAGONAL_LOAD = 1e-10


def _capon_power(r: np.ndarray, steer: np.ndarray) -> np.ndarray:
    """Raw minimum-variance power 1 / (a_g^H R^-1 a_g) per grid column."""
    n = r.shape[0]
    load = _CAPON_DIAGONAL_LOAD * (np.real(np.trace(r)) / n)
    z = np.linalg.solve(r + load * np.eye(n), steer)
    denom = np.real(np.sum(steer.conj() * z, axis=0))
    denom = np.maximum(denom, np.finfo(float).tiny)
    return 1.0 / denom


def _compress_power(p: np.ndarray) -> np.ndarray:
    """Peak-normalize and log10-compress with a -60 dB floor."""
    p = p / max(float(p.max()), np.finfo(float).tiny)
    p = np.maximum(p, np.finfo(float).tiny)
    return np.maximum(np.log10(p), _SPECTRUM_FLOOR_LOG10)


def spectrum_features(r: np.ndarray, steer: np.ndarray) -> np.ndarray:
    """Log-scale minimum-variance spectrum over the class grid.

    p_g = 1 / (a_g^H R^-1 a_g) per grid steering vector a_g (columns of
    ``steer``), peak-normalized and log10-compressed with a -60 dB floor.
    """
    return _compress_power(_capon_power(r, steer))


def _deflated_features(
    r: np.ndarray, steer: np.ndarray, chosen: list[int]
) -> np.ndarray:
    """Spectrum features after removing the chosen classes' subspace.

    The covariance and the grid steering vectors are restricted to the
    orthogonal complement of the chosen steering vectors (a blocking
    basis), which deletes those sources without disturbing the noise
    floor. Chosen classes and directions that the restriction annihilates
    report floor power.
    """
    q_full = np.linalg.qr(steer[:, chosen], mode="complete")[0]
    b = q_full[:, len(chosen):]
    r2 = b.conj().T @ r @ b
    r2 = 0.5 * (r2 + r2.conj().T)
    at = b.conj().T @ steer
    norms = np.linalg.norm(at, axis=0)
    usable = norms > 1e-8
    usable[chosen] = False
    at = at / np.where(norms > 1e-8, norms, 1.0)
    power = _capon_power(r2, at)
    power[~usable] = 0.0
    features = _compress_power(power)
    if not usable.any():
        return np.full(features.shape, _SPECTRUM_FLOOR_LOG10)
    # Deleted classes carry no spectrum any more; report the floor of the
    # remaining spectrum there so the vector still looks like a plain
    # single-source observation to the classifier.
    features[~usable] = features[usable].min()
    return features


class GridFeaturizer:
    """Caches grid steering vectors and maps covariances to feature rows."""

    def __init__(self, layout: ArrayLayout, grid: DoaGrid) -> None:
        self.layout = layout
        self.grid = grid
        self.steer = steering_matrix(layout, grid.directions_rad())

    def from_covariance(self, r: np.ndarray) -> np.ndarray:
        return spectrum_features(r, self.steer)

    def from_snapshots(self, snapshots: SnapshotMatrix) -> np.ndarray:
        return self.from_covariance(sample_covariance(snapshots).data)

    def feature_map(self) -> dict[str, Any]:
        return {
            "tag": SPECTRUM_FEATURE_TAG,
            "el_deg": self.grid.el_deg,
            "classes_az_deg": [float(a) for a in self.grid.angles_deg],
            "floor_log10": _SPECTRUM_FLOOR_LOG10,
        }


# -------------------------------- training ----------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """On-demand training regime for grid classifiers."""

    samples_per_class: int = 40
    snapshots: int = 300
    snr_range_db: tuple[float, float] = (-5.0, 25.0)
    seed: int = 20260816

    def __post_init__(self) -> None:
        if self.samples_per_class < 2:
            raise ConfigError("need at least two samples per class")
        if self.snapshots < 1:
            raise ConfigError("training snapshots must be >= 1")
        if self.snr_range_db[1] < self.snr_range_db[0]:
            raise ConfigError("snr range must be (low, high)")


_MODEL_CACHE: dict[tuple, QsSvmModel] = {}


def train_grid_model(
    array: ArrayParams,
    grid: DoaGrid,
    hyper: QsSvmHyperparams = QsSvmHyperparams(),
    config: TrainConfig = TrainConfig(),
    use_cache: bool = True,
) -> QsSvmModel:
    """Train the one-vs-one grid classifier from labeled simulations.

    Each grid class contributes ``samples_per_class`` single-source
    simulations at its own azimuth; sample s of class g is seeded with
    (config.seed, g, s), making retraining bit-reproducible. Every class
    also contributes one noiseless-limit anchor: as noise vanishes the
    spectrum collapses to exactly 0 at the source class and the floor
    everywhere else (independent of source power and diagonal load), a
    regime random finite-SNR draws never reach but the classifier must
    still get right.
    """
    key = (array, grid, hyper, config)
    if use_cache and key in _MODEL_CACHE:
        return _MODEL_CACHE[key]

    layout = build_hybrid_layout(array)
    feat = GridFeaturizer(layout, grid)
    angles = grid.angles_deg
    lo, hi = config.snr_range_db
    rows = []
    labels: list[float] = []
    for g, az in enumerate(angles):
        for s in range(config.samples_per_class):
            rng = np.random.default_rng((config.seed, g, s))
            snr = float(rng.uniform(lo, hi))
            sim_seed = int(rng.integers(0, 2**63 - 1))
            scen = Scenario(
                array=array,
                sources=(ScenarioSource(az_deg=float(az), el_deg=grid.el_deg),),
                desired_index=0,
                snr_db=snr,
                snapshots=config.snapshots,
                seed=sim_seed,
                grid=grid,
            )
            rows.append(feat.from_snapshots(simulate_scenario(scen, layout)))
            labels.append(float(az))
    for g, az in enumerate(angles):
        anchor = np.full(len(angles), _SPECTRUM_FLOOR_LOG10)
        anchor[g] = 0.0
        rows.append(anchor)
        labels.append(float(az))
    model = train_multiclass(
        np.array(rows),
        labels,
        hyper=hyper,
        classes=[float(a) for a in angles],
        feature_map=feat.feature_map(),
    )
    model.metadata.update(
        {
            "train_config": {
                "samples_per_class": config.samples_per_class,
                "snapshots": config.snapshots,
                "snr_range_db": list(config.snr_range_db),
                "seed": config.seed,
            },
            "array": _array_to_dict(array),
        }
    )
    if use_cache:
        _MODEL_CACHE[key] = model
    return model


def _array_to_dict(params: ArrayParams) -> dict[str, Any]:
    return {
        "n_per_loop": params.n_per_loop,
        "loops_per_cylinder": params.loops_per_cylinder,
        "n_cylinders": params.n_cylinders,
        "circular_elements": params.circular_elements,
        "d_v_wavelengths": params.d_v_wavelengths,
        "d_r_wavelengths": params.d_r_wavelengths,
        "carrier_freq_hz": params.carrier_freq_hz,
        "gain_pattern": params.gain_pattern,
    }


# ------------------------------- estimation ---------------------------------


@dataclass(frozen=True)
class DoaResult:
    """Estimated directions with the vote evidence behind them."""

    class_angles_az_deg: tuple[float, ...]
    el_deg: float
    estimates_az_deg: tuple[float, ...]
    vote_rounds: np.ndarray  # (n_estimates, n_classes) win counts per round
    desired_az_deg: float
    interferer_az_deg: tuple[float, ...]
    confidence: float = 1.0

    @property
    def estimates(self) -> list[tuple[float, float]]:
        return [(self.el_deg, az) for az in self.estimates_az_deg]


# Median spectrum depth (log10 decades below the peak) treated as full
# contrast. Shallower spectra scale confidence down toward zero.
_FULL_CONTRAST_DECADES = 2.0


def _vote_confidence(
    rounds: list[np.ndarray], picks: list[int], features: list[np.ndarray]
) -> float:
    """Mean per-round confidence, scaled to [0, 1].

    Two factors multiply per round. The vote margin: tallies of a full
    pairwise tournament sum to C(G, 2) with average (G-1)/2, so a pick
    that wins every duel scores 1 and one at the average scores 0. The
    spectral contrast: the median depth of the normalized log spectrum,
    saturating at two decades. The second factor matters because a near
    -flat spectrum (low SNR, few snapshots) can still produce a decisive
    tournament; pairwise quadratic comparisons are close to transitive,
    so the margin alone overstates certainty exactly where the estimate
    is least reliable. Not a calibrated probability.
    """
    scores = []
    for tally, pick, feat in zip(rounds, picks, features):
        g = len(tally)
        if g < 2:
            scores.append(1.0)
            continue
        margin = (2.0 * tally[pick] / (g - 1)) - 1.0
        margin = min(max(margin, 0.0), 1.0)
        depth = -float(np.median(feat))
        contrast = min(max(depth / _FULL_CONTRAST_DECADES, 0.0), 1.0)
        scores.append(margin * contrast)
    return float(np.mean(scores))


def _check_model_grid(model: QsSvmModel, grid: DoaGrid) -> None:
    fm = model.feature_map
    if fm.get("tag") != SPECTRUM_FEATURE_TAG:
        raise ConfigError(
            f"model feature map {fm.get('tag')!r} does not match the pipeline "
            f"({SPECTRUM_FEATURE_TAG!r}); train one with the `train` command"
        )
    want = [float(a) for a in grid.angles_deg]
    have = [float(c) for c in model.classes]
    if want != have or float(fm.get("el_deg", -1)) != float(grid.el_deg):
        raise ConfigError(
            "model was trained on a different class grid than the scenario; "
            "run `train` for this grid first"
        )


def run_doa(
    scenario: Scenario,
    model: QsSvmModel | None = None,
    strategy: str = "nulling",
    hyper: QsSvmHyperparams = QsSvmHyperparams(),
    train_config: TrainConfig = TrainConfig(),
) -> DoaResult:
    """Estimate every declared source's direction on the class grid.

    Parameters
    ----------
    scenario : Scenario
        Scene to simulate and solve.
    model : QsSvmModel | None
        Grid classifier; trained on demand (and cached) when omitted. A
        model trained for a different grid raises ConfigError.
    strategy : str
        "nulling" (default): one classify round per source, projecting each
        estimate out of the covariance before the next round. "votes": a
        single round, taking the top-K classes by vote count.
    """
    if strategy not in ("nulling", "votes"):
        raise ConfigError(f"unknown estimation strategy {strategy!r}")
    layout = build_hybrid_layout(scenario.array)
    if model is None:
        model = train_grid_model(scenario.array, scenario.grid, hyper, train_config)
    _check_model_grid(model, scenario.grid)

    feat = GridFeaturizer(layout, scenario.grid)
    snaps = simulate_scenario(scenario, layout)
    cov = sample_covariance(snaps)
    angles = scenario.grid.angles_deg
    k_sources = len(scenario.sources)

    estimates_idx: list[int] = []
    rounds: list[np.ndarray] = []
    round_feats: list[np.ndarray] = []
    if strategy == "votes":
        features = feat.from_covariance(cov.data)
        tally = model.votes(features)
        order = sorted(range(len(angles)), key=lambda i: (-tally[i], i))
        estimates_idx = order[:k_sources]
        rounds = [tally] * k_sources
        round_feats = [features] * k_sources
    else:
        chosen: list[int] = []
        for _ in range(k_sources):
            if chosen:
                features = _deflated_features(cov.data, feat.steer, chosen)
            else:
                features = feat.from_covariance(cov.data)
            tally = model.votes(features)
            available = [i for i in range(len(angles)) if i not in chosen]
            pick = min(available, key=lambda i: (-tally[i], i))
            estimates_idx.append(pick)
            rounds.append(tally)
            round_feats.append(features)
            chosen.append(pick)

    est_az = [float(angles[i]) for i in estimates_idx]
    desired_true = scenario.desired.az_deg
    desired_pos = int(np.argmin([abs(a - desired_true) for a in est_az]))
    desired_az = est_az[desired_pos]
    interferers = tuple(a for p, a in enumerate(est_az) if p != desired_pos)
    return DoaResult(
        class_angles_az_deg=tuple(float(a) for a in angles),
        el_deg=scenario.grid.el_deg,
        estimates_az_deg=tuple(est_az),
        vote_rounds=np.array(rounds),
        desired_az_deg=desired_az,
        interferer_az_deg=interferers,
        confidence=_vote_confidence(rounds, estimates_idx, round_feats),
    )


def synthesize_pattern(
    scenario: Scenario,
    result: DoaResult,
    az_grid_deg: Sequence[float] | None = None,
    covariance: CovarianceMatrix | None = None,
) -> tuple[BeamWeights, BeamPattern]:
    """Constrained beamformer from DoA estimates: unit gain on the desired
    estimate, hard nulls on each distinct interferer estimate.

    Duplicate interferer estimates (or interferers coinciding with the
    desired estimate) collapse into a single constraint. The returned
    pattern is sampled at the scenario's grid elevation.
    """
    layout = build_hybrid_layout(scenario.array)
    if covariance is None:
        covariance = sample_covariance(simulate_scenario(scenario, layout))
    el = math.radians(result.el_deg)
    directions = [(el, math.radians(result.desired_az_deg))]
    responses = [1.0 + 0.0j]
    seen = {result.desired_az_deg}
    for az in result.interferer_az_deg:
        if az in seen:
            continue
        seen.add(az)
        directions.append((el, math.radians(az)))
        responses.append(0.0 + 0.0j)
    constraints = LcmvConstraints(
        directions=tuple(directions), responses=np.array(responses, dtype=complex)
    )
    weights = lcmv_weights(covariance, layout, constraints)
    if az_grid_deg is None:
        az_grid_deg = np.arange(0.0, 90.0 + 0.125, 0.25)
    pattern = beam_pattern(weights, layout, az_grid_deg, el_deg=result.el_deg)
    return weights, pattern
