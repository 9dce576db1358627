"""Snapshot simulation, AWGN, sample covariance, and snapshot export.

The loop oracle rebuilds X entry by entry with explicit python loops and
the documented stream-splitting rule (child 0 noise, child 1+k source k),
independent of the vectorized implementation.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qsbeam.geometry import ArrayParams, build_hybrid_layout, wavevector
from qsbeam.signals import (
    NoiseSpec,
    SnapshotMatrix,
    SourceSpec,
    apply_awgn,
    collect_plane_waves,
    default_loading,
    load_snapshots,
    sample_covariance,
    save_snapshots,
)

D45 = math.radians(45.0)


@pytest.fixture(scope="module")
def small_layout():
    return build_hybrid_layout(
        ArrayParams(n_per_loop=6, loops_per_cylinder=1, n_cylinders=1, circular_elements=0)
    )


def fig3_sources():
    # distinct tone frequencies keep the emitters mutually incoherent; equal
    # frequencies would collapse the waveform matrix to rank one
    return [
        SourceSpec(
            direction=(D45, math.radians(az)),
            amplitude=1.0,
            phase_rad=ph,
            frequency_hz=f,
        )
        for az, ph, f in (
            (45.0, 0.1, 1.0e7),
            (30.0, 1.3, 2.0e7),
            (50.0, 2.2, 3.1e7),
        )
    ]


# ------------------------------- generation ---------------------------------


def test_no_sources_no_noise_gives_zero_matrix(small_layout):
    snaps = collect_plane_waves(small_layout, [], 8, NoiseSpec(variance=0.0, seed=1))
    assert snaps.data.shape == (6, 8)
    assert np.all(snaps.data == 0.0)


def test_single_boresight_source_is_rank_one(small_layout):
    src = SourceSpec(direction=(0.0, 0.0), amplitude=1.0)
    snaps = collect_plane_waves(small_layout, [src], 16, NoiseSpec(variance=0.0))
    a = small_layout.response(0.0, 0.0)
    # every column is the response vector scaled by that snapshot's sample
    for l in range(16):
        col = snaps.data[:, l]
        assert_allclose(col, a * (col[0] / a[0]), atol=1e-12)
    sv = np.linalg.svd(snaps.data, compute_uv=False)
    assert sv[1] <= 1e-12 * sv[0]


def test_three_source_scene_matches_per_element_loop_oracle(small_layout):
    sources = fig3_sources()
    noise = NoiseSpec(variance=0.1, seed=7)
    l_snap = 12
    fs = 1.0e8
    snaps = collect_plane_waves(small_layout, sources, l_snap, noise, sample_rate_hz=fs)

    # oracle: explicit per-element, per-snapshot, per-source sums
    want = np.zeros((small_layout.n, l_snap), dtype=complex)
    for k, src in enumerate(sources):
        kvec = wavevector(*src.direction, small_layout.wavelength_m)
        for i, el in enumerate(small_layout.elements):
            dot = sum(float(kvec[c]) * float(el.position[c]) for c in range(3))
            a_ik = el.gain(*src.direction) * np.exp(-1j * dot)
            for l in range(l_snap):
                s_kl = src.amplitude * np.exp(
                    1j * (2 * np.pi * src.frequency_hz * l / fs + src.phase_rad)
                )
                want[i, l] += a_ik * s_kl
    children = np.random.SeedSequence(7).spawn(1 + len(sources))
    nrng = np.random.default_rng(children[0])
    scale = np.sqrt(0.1 / 2.0)
    want += scale * (
        nrng.standard_normal(want.shape) + 1j * nrng.standard_normal(want.shape)
    )
    assert_allclose(snaps.data, want, atol=1e-12)


def test_three_source_scene_has_rank_three_signal_space(small_layout):
    sources = fig3_sources()
    clean = collect_plane_waves(small_layout, sources, 64, NoiseSpec(variance=0.0))
    sv = np.linalg.svd(clean.data, compute_uv=False)
    assert sv[2] > 1e-6 * sv[0]
    assert sv[3] <= 1e-10 * sv[0]


def test_identical_seeds_reproduce_bit_identical_snapshots(small_layout):
    sources = [SourceSpec(direction=(D45, 0.4), phase_rad=None)]
    a = collect_plane_waves(small_layout, sources, 32, NoiseSpec(variance=0.5, seed=99))
    b = collect_plane_waves(small_layout, sources, 32, NoiseSpec(variance=0.5, seed=99))
    assert np.array_equal(a.data, b.data)
    c = collect_plane_waves(small_layout, sources, 32, NoiseSpec(variance=0.5, seed=100))
    assert not np.array_equal(a.data, c.data)


def test_nan_source_samples_rejected(small_layout):
    bad = SourceSpec(
        direction=(D45, 0.0), samples=np.array([1.0 + 0j, np.nan + 0j, 1.0 + 0j])
    )
    with pytest.raises(ValueError):
        collect_plane_waves(small_layout, [bad], 3, NoiseSpec())


def test_supplied_waveform_and_channel_gain(small_layout):
    wave = np.array([1.0, -1.0, 1j, -1j])
    src = SourceSpec(direction=(0.0, 0.0), samples=wave, channel_gain=2.0 + 0j)
    snaps = collect_plane_waves(small_layout, [src], 4, NoiseSpec())
    a = small_layout.response(0.0, 0.0)
    assert_allclose(snaps.data, np.outer(a, 2.0 * wave), atol=1e-14)
    with pytest.raises(ValueError):
        collect_plane_waves(small_layout, [src], 5, NoiseSpec())


def test_snapshot_count_validated(small_layout):
    with pytest.raises(ValueError):
        collect_plane_waves(small_layout, [], 0, NoiseSpec(variance=1.0))


# --------------------------------- AWGN -------------------------------------


def test_awgn_infinite_snr_returns_input_unchanged(small_layout):
    snaps = collect_plane_waves(small_layout, fig3_sources(), 8, NoiseSpec())
    out = apply_awgn(snaps, float("inf"), seed=5)
    assert out is snaps


def test_awgn_zero_db_noise_power_near_unity(small_layout):
    # unit-power input: one source scaled so mean |X|^2 = 1
    src = SourceSpec(direction=(0.0, 0.0), amplitude=1.0)
    snaps = collect_plane_waves(small_layout, [src], 10_000, NoiseSpec())
    x = snaps.data / np.sqrt(np.mean(np.abs(snaps.data) ** 2))
    unit = SnapshotMatrix(data=x, sample_rate_hz=snaps.sample_rate_hz)
    noisy = apply_awgn(unit, 0.0, seed=3)
    noise_power = float(np.mean(np.abs(noisy.data - unit.data) ** 2))
    assert abs(noise_power - 1.0) <= 0.05


def test_awgn_ten_db_noise_power_tenth_of_signal(small_layout):
    src = SourceSpec(direction=(D45, 0.7), amplitude=2.0)
    snaps = collect_plane_waves(small_layout, [src], 10_000, NoiseSpec())
    signal_power = float(np.mean(np.abs(snaps.data) ** 2))
    noisy = apply_awgn(snaps, 10.0, seed=11)
    noise_power = float(np.mean(np.abs(noisy.data - snaps.data) ** 2))
    assert noise_power == pytest.approx(0.1 * signal_power, rel=0.05)


def test_awgn_rejects_zero_power_input():
    zero = SnapshotMatrix(data=np.zeros((4, 8), dtype=complex))
    with pytest.raises(ValueError):
        apply_awgn(zero, 10.0)


def test_awgn_empirical_snr_within_half_db(small_layout):
    src = SourceSpec(direction=(D45, 0.2), amplitude=1.0)
    snaps = collect_plane_waves(small_layout, [src], 2000, NoiseSpec())
    for snr_db in (-5.0, 0.0, 15.0):
        noisy = apply_awgn(snaps, snr_db, seed=17)
        sig = float(np.mean(np.abs(snaps.data) ** 2))
        noi = float(np.mean(np.abs(noisy.data - snaps.data) ** 2))
        measured = 10.0 * np.log10(sig / noi)
        assert abs(measured - snr_db) <= 0.5


# ---------------------------- sample covariance ------------------------------


def test_covariance_of_zero_snapshots_is_loading_times_identity():
    snaps = SnapshotMatrix(data=np.zeros((5, 3), dtype=complex))
    cov = sample_covariance(snaps, loading=0.25)
    assert_allclose(cov.data, 0.25 * np.eye(5), atol=1e-15)


def test_covariance_of_single_snapshot_is_outer_product(rng):
    x = rng.normal(size=4) + 1j * rng.normal(size=4)
    snaps = SnapshotMatrix(data=x.reshape(-1, 1))
    cov = sample_covariance(snaps, loading=0.1)
    assert_allclose(cov.data, np.outer(x, x.conj()) + 0.1 * np.eye(4), atol=1e-12)
    sv = np.linalg.svd(np.outer(x, x.conj()), compute_uv=False)
    assert sv[1] <= 1e-12 * sv[0]


def test_covariance_eigen_profile_three_dominant(table1_layout):
    # needs the full array: a 5 degree pair is inside a small ring's beamwidth,
    # which would push the third signal eigenvalue into the noise floor
    sigma2 = 0.01
    snaps = collect_plane_waves(
        table1_layout, fig3_sources(), 1000, NoiseSpec(variance=sigma2, seed=21)
    )
    cov = sample_covariance(snaps, loading=0.0)
    evals = np.sort(np.linalg.eigvalsh(cov.data))[::-1]
    assert evals[2] > 10 * evals[3]
    # remainder: mean at sigma^2, spread inside the Marchenko-Pastur edges
    # sigma^2 (1 +/- sqrt(n/L))^2 for n/L = 0.14
    assert np.mean(evals[3:]) == pytest.approx(sigma2, rel=0.1)
    edge = sigma2 * (1 + np.sqrt(140 / 1000)) ** 2
    assert np.max(evals[3:]) <= 1.1 * edge
    assert np.min(evals[3:]) >= 0.5 * sigma2 * (1 - np.sqrt(140 / 1000)) ** 2


def test_covariance_exactly_hermitian(small_layout):
    snaps = collect_plane_waves(
        small_layout, fig3_sources(), 50, NoiseSpec(variance=0.3, seed=2)
    )
    r = sample_covariance(snaps, loading=0.0).data
    assert np.array_equal(r, r.conj().T)
    assert np.min(np.linalg.eigvalsh(r)) >= -1e-10


def test_default_loading_rule(small_layout):
    snaps = collect_plane_waves(
        small_layout, fig3_sources(), 100, NoiseSpec(variance=0.1, seed=4)
    )
    raw = snaps.data @ snaps.data.conj().T / snaps.n_snapshots
    cov = sample_covariance(snaps)
    assert cov.loading == pytest.approx(default_loading(raw), rel=1e-12)
    assert cov.loading == pytest.approx(1e-6 * np.real(np.trace(raw)) / 6, rel=1e-12)
    with pytest.raises(ValueError):
        sample_covariance(snaps, loading=-1.0)


def test_pure_noise_off_diagonals_shrink(small_layout):
    sigma2 = 0.8
    l_snap = 10_000
    snaps = collect_plane_waves(small_layout, [], l_snap, NoiseSpec(variance=sigma2, seed=13))
    r = sample_covariance(snaps, loading=0.0).data
    off = r - np.diag(np.diag(r))
    assert np.max(np.abs(off)) <= 5.0 * sigma2 / np.sqrt(l_snap)
    assert_allclose(np.diag(r).real, sigma2, rtol=0.2)


# --------------------------------- export -----------------------------------


def test_snapshot_round_trip(tmp_path, small_layout):
    snaps = collect_plane_waves(
        small_layout, fig3_sources(), 17, NoiseSpec(variance=0.2, seed=31)
    )
    path = save_snapshots(tmp_path / "snaps.bin", snaps, seed=31)
    loaded = load_snapshots(path)
    assert np.array_equal(loaded.data, snaps.data)
    assert loaded.sample_rate_hz == snaps.sample_rate_hz


def test_snapshot_load_validates_payload_size(tmp_path, small_layout):
    snaps = collect_plane_waves(small_layout, [], 4, NoiseSpec(variance=1.0, seed=1))
    path = save_snapshots(tmp_path / "s.bin", snaps)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError):
        load_snapshots(path)
