"""Quadratic-surface SVM training, decisions, voting, and features.

Reference objectives come from cvxpy on an independently written copy of
the training program; Monte-Carlo accuracy uses freshly simulated scenes.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qsbeam.geometry import ArrayParams, build_hybrid_layout
from qsbeam.signals import NoiseSpec, SnapshotMatrix, SourceSpec, collect_plane_waves
from qsbeam.qssvm import (
    QsSvmHyperparams,
    QsSvmModel,
    QuadraticSurface,
    _assemble_qp,
    cov_feature_dim,
    featurize_snapshots,
    load_model,
    model_from_json,
    model_to_json,
    pack_symmetric,
    save_model,
    separability_report,
    train_binary,
    train_multiclass,
    unpack_symmetric,
)

XOR_X = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
XOR_Y = np.array([1.0, 1.0, -1.0, -1.0])
HYPER = QsSvmHyperparams(slack_penalty=10.0, quad_regularizer=1e-3)


def surface_objective(surface, slacks, x, y, hyper):
    """The training objective recomputed from first principles."""
    w = surface.w
    fit = sum(float(np.sum((w @ xi + surface.b) ** 2)) for xi in x)
    reg = hyper.quad_regularizer * float(np.sum(w * w))
    return fit + reg + hyper.slack_penalty * float(np.sum(slacks))


def reference_train(x, y, hyper):
    """Independent cvxpy formulation of the same convex program."""
    import cvxpy as cp

    n, m = x.shape
    w = cp.Variable((m, m), symmetric=True)
    b = cp.Variable(m)
    c = cp.Variable()
    xi = cp.Variable(n, nonneg=True)
    fit = sum(cp.sum_squares(w @ x[i] + b) for i in range(n))
    obj = fit + hyper.quad_regularizer * cp.sum_squares(cp.vec(w, order="F"))
    obj = obj + hyper.slack_penalty * cp.sum(xi)
    cons = [
        y[i] * (0.5 * cp.quad_form(x[i], w) + b @ x[i] + c) >= 1 - xi[i]
        for i in range(n)
    ]
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL)
    assert prob.status == cp.OPTIMAL
    return float(prob.value)


# ------------------------------ binary training ------------------------------


def test_xor_separated_with_curved_surface():
    res = train_binary(XOR_X, XOR_Y, HYPER)
    margins = XOR_Y * res.surface.evaluate_batch(XOR_X)
    assert np.all(margins >= 1.0 - 1e-6)  # zero training error
    assert np.linalg.norm(res.surface.w) > 0.1  # a hyperplane cannot do this
    report = separability_report(res.surface, XOR_X, XOR_Y, tol=1e-6)
    assert report.separable


def test_xor_objective_matches_reference_solver():
    res = train_binary(XOR_X, XOR_Y, HYPER)
    mine = surface_objective(res.surface, res.slacks, XOR_X, XOR_Y, HYPER)
    ref = reference_train(XOR_X, XOR_Y, HYPER)
    assert abs(mine - ref) <= 1e-6 * max(1.0, abs(ref))


def test_large_regularizer_recovers_hyperplane(rng):
    # linearly separable blobs: means 6 apart, spread well under the gap
    x = np.vstack(
        [0.5 * rng.normal(size=(20, 2)) + [3.0, 0.0], 0.5 * rng.normal(size=(20, 2)) - [3.0, 0.0]]
    )
    y = np.concatenate([np.ones(20), -np.ones(20)])
    res = train_binary(x, y, QsSvmHyperparams(slack_penalty=10.0, quad_regularizer=1e6))
    ratio = np.linalg.norm(res.surface.w) / np.linalg.norm(res.surface.b)
    assert ratio <= 0.01
    assert np.all(y * res.surface.evaluate_batch(x) >= 1.0 - 1e-6)


def test_conflicting_duplicate_point_forces_slack():
    x = np.vstack([XOR_X, XOR_X[0]])
    y = np.append(XOR_Y, -1.0)  # same point, opposite label
    res = train_binary(x, y, HYPER)
    assert np.max(res.slacks[[0, 4]]) > 0.5  # one of the conflicted pair gives
    assert np.isfinite(surface_objective(res.surface, res.slacks, x, y, HYPER))


def test_training_input_validation():
    with pytest.raises(ValueError):
        train_binary(XOR_X, np.array([1.0, 1.0, 1.0, 1.0]), HYPER)  # one class
    with pytest.raises(ValueError):
        train_binary(XOR_X, np.array([0.0, 1.0, -1.0, 1.0]), HYPER)  # bad label
    with pytest.raises(ValueError):
        train_binary(XOR_X, XOR_Y[:3], HYPER)  # length mismatch


def test_feasibility_at_optimum(rng):
    x = rng.normal(size=(30, 3))
    y = np.sign(rng.normal(size=30))
    y[y == 0] = 1.0
    res = train_binary(x, y, HYPER)
    lhs = y * res.surface.evaluate_batch(x) + res.slacks
    assert np.all(lhs >= 1.0 - 1e-8)
    assert np.all(res.slacks >= -1e-12)


def test_assembled_hessian_is_psd(rng):
    for n, m in ((6, 2), (10, 3)):
        x = rng.normal(size=(n, m))
        y = np.where(rng.normal(size=n) > 0, 1.0, -1.0)
        p, _, _, _ = _assemble_qp(x, y, HYPER)
        assert np.min(np.linalg.eigvalsh(0.5 * (p + p.T))) >= -1e-10


def test_regularization_ladder_shrinks_quadratic_part():
    x = np.vstack([XOR_X, 0.5 * XOR_X])
    y = np.concatenate([XOR_Y, XOR_Y])
    norms = []
    for lam in (1e-3, 1e-1, 1e1, 1e3, 1e6):
        res = train_binary(x, y, QsSvmHyperparams(slack_penalty=10.0, quad_regularizer=lam))
        norms.append(np.linalg.norm(res.surface.w))
    for a, b in zip(norms, norms[1:]):
        assert b <= a + 1e-8


def test_feature_scaling_keeps_training_classifications(rng):
    x = np.vstack([rng.normal(size=(15, 2)) + [2.5, 2.5], rng.normal(size=(15, 2)) - [2.5, 2.5]])
    y = np.concatenate([np.ones(15), -np.ones(15)])
    base = train_binary(x, y, HYPER)
    scaled = train_binary(7.5 * x, y, HYPER)
    s_base = np.sign(base.surface.evaluate_batch(x))
    s_scaled = np.sign(scaled.surface.evaluate_batch(7.5 * x))
    assert np.array_equal(s_base, s_scaled)
    assert np.array_equal(s_base, y)


# ---------------------------- separability audit -----------------------------


def test_separated_data_reports_no_violations():
    res = train_binary(XOR_X, XOR_Y, HYPER)
    assert separability_report(res.surface, XOR_X, XOR_Y, tol=1e-6).violations.size == 0


def test_flat_surface_cannot_separate_xor():
    flat = QuadraticSurface(w_upper=pack_symmetric(np.zeros((2, 2))), b=np.array([1.0, 1.0]), c=0.0)
    report = separability_report(flat, XOR_X, XOR_Y)
    assert report.violations.size >= 1
    assert report.max_violation > 0


def test_conflicted_points_are_the_ones_reported():
    x = np.vstack([XOR_X, XOR_X[0]])
    y = np.append(XOR_Y, -1.0)
    res = train_binary(x, y, HYPER)
    report = separability_report(res.surface, x, y, tol=1e-6)
    assert set(report.violations).issubset({0, 4})
    assert report.violations.size >= 1


# ------------------------------ decision values ------------------------------


def test_constant_surface_evaluates_to_c():
    s = QuadraticSurface(w_upper=pack_symmetric(np.zeros((2, 2))), b=np.zeros(2), c=1.0)
    for x in ([0.0, 0.0], [3.0, -4.0], [100.0, 100.0]):
        assert s.evaluate(np.array(x)) == 1.0


def test_unit_circle_boundary():
    s = QuadraticSurface(w_upper=pack_symmetric(np.eye(2)), b=np.zeros(2), c=-1.0)
    assert s.evaluate(np.array([1.0, 1.0])) == pytest.approx(0.0, abs=1e-15)
    assert s.evaluate(np.array([0.0, 0.0])) == pytest.approx(-1.0)


def test_trained_xor_surface_sign_structure():
    res = train_binary(XOR_X, XOR_Y, HYPER)
    assert res.surface.evaluate(np.array([0.9, 0.9])) > 0
    assert res.surface.evaluate(np.array([0.9, -0.9])) < 0


def test_dimension_mismatch_rejected():
    s = QuadraticSurface(w_upper=pack_symmetric(np.eye(2)), b=np.zeros(2), c=0.0)
    with pytest.raises(ValueError):
        s.evaluate(np.ones(3))


def test_pack_unpack_roundtrip(rng):
    w = rng.normal(size=(4, 4))
    w = 0.5 * (w + w.T)
    assert_allclose(unpack_symmetric(pack_symmetric(w), 4), w, atol=1e-15)


# --------------------------------- voting -----------------------------------


def zero_surface(m):
    return QuadraticSurface(w_upper=pack_symmetric(np.zeros((m, m))), b=np.zeros(m), c=0.0)


def test_two_class_model_reduces_to_sign(rng):
    x = np.vstack([rng.normal(size=(12, 2)) + 2.0, rng.normal(size=(12, 2)) - 2.0])
    y = [10.0] * 12 + [20.0] * 12
    model = train_multiclass(x, y, HYPER)
    surf = model.surfaces[(0, 1)]
    for pt in rng.normal(size=(25, 2)) * 3.0:
        label, tally = model.classify(pt)
        want = 10.0 if surf.evaluate(pt) >= 0 else 20.0
        assert label == want
        assert sorted(tally) == [0, 1]


def test_all_zero_decisions_pick_lowest_class():
    model = QsSvmModel(
        classes=(30.0, 45.0, 50.0),
        surfaces={(0, 1): zero_surface(2), (0, 2): zero_surface(2), (1, 2): zero_surface(2)},
        hyper=HYPER,
    )
    label, tally = model.classify(np.array([0.3, -0.7]))
    assert label == 30.0
    assert tally.tolist() == [2, 1, 0]  # zero decisions fall to the lower index


def test_vote_tally_conservation(rng):
    x = rng.normal(size=(30, 2))
    y = [float(10 * (i % 3)) for i in range(30)]
    model = train_multiclass(x, y, HYPER)
    g = len(model.classes)
    tallies = model.votes_batch(rng.normal(size=(40, 2)))
    assert np.all(tallies.sum(axis=1) == g * (g - 1) // 2)
    assert np.all(tallies <= g - 1)


def test_pairwise_antisymmetry_exact(rng):
    x = rng.normal(size=(24, 3))
    y = [float(i % 3) for i in range(24)]
    model = train_multiclass(x, y, HYPER)
    for pt in rng.normal(size=(10, 3)):
        for i in range(3):
            for j in range(3):
                if i != j:
                    assert model.decide_pair(i, j, pt) == -model.decide_pair(j, i, pt)


def test_multiclass_label_validation(rng):
    x = rng.normal(size=(6, 2))
    with pytest.raises(ValueError):
        train_multiclass(x, [1.0] * 6, HYPER)  # one class
    with pytest.raises(ValueError):
        train_multiclass(x, [1.0, 2.0, 3.0, 1.0, 2.0, 3.0], HYPER, classes=(1.0, 2.0))


# --------------------------- angle classification ----------------------------


def small_ring_layout():
    return build_hybrid_layout(
        ArrayParams(n_per_loop=6, loops_per_cylinder=1, n_cylinders=1, circular_elements=0)
    )


def angle_sample(layout, az_deg, snr_db, seed, snapshots=64):
    el = math.radians(45.0)
    var = 1.0 / 10 ** (snr_db / 10.0)
    src = SourceSpec(direction=(el, math.radians(az_deg)), amplitude=1.0)
    snaps = collect_plane_waves(layout, [src], snapshots, NoiseSpec(variance=var, seed=seed))
    return featurize_snapshots(snaps)


def test_three_angle_classes_high_accuracy():
    layout = small_ring_layout()
    classes = [30.0, 45.0, 50.0]
    rng = np.random.default_rng(123)
    xs, ys = [], []
    for az in classes:
        for _ in range(60):
            snr = rng.uniform(0, 25)
            xs.append(angle_sample(layout, az, snr, int(rng.integers(2**62))))
            ys.append(az)
    model = train_multiclass(np.array(xs), ys, HYPER)
    hits = 0
    for t in range(500):
        label, _ = model.classify(angle_sample(layout, 45.0, 20.0, 10_000 + t))
        hits += label == 45.0
    assert hits / 500 >= 0.95


# ------------------------------ featurization --------------------------------


def test_zero_snapshots_cannot_be_featurized():
    with pytest.raises(ValueError):
        featurize_snapshots(np.zeros((4, 3), dtype=complex))


def test_identity_covariance_features():
    n = 5
    x = np.eye(n, dtype=complex)  # X X^H / L proportional to I
    f = featurize_snapshots(SnapshotMatrix(data=x))
    iu, ju = np.triu_indices(n)
    diag_mask = iu == ju
    real_part = f[: iu.size]
    imag_part = f[iu.size :]
    assert_allclose(real_part[diag_mask], 1.0, atol=1e-12)
    assert_allclose(real_part[~diag_mask], 0.0, atol=1e-12)
    assert_allclose(imag_part, 0.0, atol=1e-12)
    assert f.size == cov_feature_dim(n) == n * n


def test_rank_one_snapshot_reproduces_outer_product():
    layout = small_ring_layout()
    a = layout.response(math.radians(45.0), math.radians(45.0))
    f = featurize_snapshots(a.reshape(-1, 1))
    r = np.outer(a, a.conj())
    r = r * (len(a) / np.real(np.trace(r)))
    iu, ju = np.triu_indices(len(a))
    off = iu != ju
    want = np.concatenate([r[iu, ju].real, r[iu[off], ju[off]].imag])
    assert_allclose(f, want, atol=1e-12)


def test_featurize_rejects_non_2d():
    with pytest.raises(ValueError):
        featurize_snapshots(np.ones(5, dtype=complex))


# ------------------------------ serialization --------------------------------


def test_model_json_roundtrip(tmp_path, rng):
    x = rng.normal(size=(24, 2))
    y = [float(i % 3) for i in range(24)]
    model = train_multiclass(x, y, HYPER)
    clone = model_from_json(model_to_json(model))
    assert clone.classes == model.classes
    for key, surf in model.surfaces.items():
        assert_allclose(clone.surfaces[key].w_upper, surf.w_upper, atol=0)
        assert_allclose(clone.surfaces[key].b, surf.b, atol=0)
        assert clone.surfaces[key].c == surf.c
    pts = rng.normal(size=(20, 2))
    assert [model.classify(p)[0] for p in pts] == [clone.classify(p)[0] for p in pts]

    path = save_model(tmp_path / "model.json", model)
    loaded = load_model(path)
    assert loaded.classes == model.classes


def test_model_json_rejects_unknown_format():
    with pytest.raises(ValueError):
        model_from_json({"format": "something-else", "version": 1})
