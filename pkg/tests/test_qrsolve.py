"""Streaming triangular factor updates and normal-equation solves.

Gram oracles are explicit weighted sums of outer products; solve oracles
go through dense numpy solves on independently assembled systems.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qsbeam.errors import NumericalError
from qsbeam.qrsolve import (
    QlessQrState,
    absorb_rows,
    empirical_risk,
    new_state,
    qless_update,
    solve_normal,
    state_from_triangular,
)


def random_rows(rng, k, n):
    return rng.normal(size=(k, n)) + 1j * rng.normal(size=(k, n))


def gram_oracle(rows, forgetting):
    """Explicit weighted sum: sum_i lambda^(k-1-i) rows_i^H rows_i."""
    k, n = rows.shape
    g = np.zeros((n, n), dtype=complex)
    for i in range(k):
        g = g * 1.0  # keep complex dtype
        g += forgetting ** (k - 1 - i) * np.outer(rows[i].conj(), rows[i])
    return g


# ------------------------------- state rules --------------------------------


def test_first_basis_row_gives_unit_pivot():
    state = qless_update(new_state(4), np.array([1.0, 0, 0, 0], dtype=complex))
    assert_allclose(state.r, np.diag([1.0, 0, 0, 0]).astype(complex), atol=1e-15)
    assert state.rows_absorbed == 1


def test_forgetting_factor_validated():
    with pytest.raises(ValueError):
        new_state(3, forgetting=0.0)
    with pytest.raises(ValueError):
        new_state(3, forgetting=1.5)
    with pytest.raises(ValueError):
        new_state(0)


def test_row_length_validated():
    with pytest.raises(ValueError):
        qless_update(new_state(3), np.ones(4, dtype=complex))


def test_full_memory_gram_matches_direct_product(rng):
    a = random_rows(rng, 4, 4)
    state = new_state(4, forgetting=1.0)
    for row in a:
        state = qless_update(state, row)
    assert_allclose(state.gram(), a.conj().T @ a, atol=1e-10)


def test_forgetting_gram_matches_unrolled_recurrence(rng):
    rows = random_rows(rng, 2, 3)
    state = new_state(3, forgetting=0.9)
    for row in rows:
        state = qless_update(state, row)
    want = 0.9 * np.outer(rows[0].conj(), rows[0]) + np.outer(rows[1].conj(), rows[1])
    assert_allclose(state.gram(), want, atol=1e-12)


@pytest.mark.parametrize("forgetting", [1.0, 0.99, 0.9])
def test_gram_preserved_over_long_random_streams(rng, forgetting):
    n = 6
    rows = random_rows(rng, 60, n)
    state = new_state(n, forgetting=forgetting)
    for row in rows:
        state = qless_update(state, row)
    want = gram_oracle(rows, forgetting)
    err = np.linalg.norm(state.gram() - want) / np.linalg.norm(want)
    assert err <= 1e-9


def test_triangularity_and_diagonal_phase_exact(rng):
    state = new_state(5, forgetting=0.95)
    for row in random_rows(rng, 12, 5):
        state = qless_update(state, row)
    below = np.tril(state.r, k=-1)
    assert np.all(below == 0.0)  # exactly zero, not merely small
    d = np.diag(state.r)
    assert np.all(d.imag == 0.0)
    assert np.all(d.real >= 0.0)


def test_state_from_triangular_normalizes_diagonal_phase():
    r = np.array([[1j, 2.0], [0.0, -3.0]], dtype=complex)
    state = state_from_triangular(r, forgetting=1.0)
    d = np.diag(state.r)
    assert np.all(d.imag == 0.0) and np.all(d.real >= 0.0)
    assert_allclose(state.gram(), r.conj().T @ r, atol=1e-12)
    with pytest.raises(ValueError):
        state_from_triangular(np.array([[1.0, 0.0], [1.0, 1.0]]))


def test_identical_row_stream_converges_geometrically():
    row = np.array([1.0 + 0.5j, -0.3, 0.8j], dtype=complex)
    lam = 0.9
    state = new_state(3, forgetting=lam)
    diffs = []
    prev = state.r
    for _ in range(60):
        state = qless_update(state, row)
        diffs.append(np.linalg.norm(state.r - prev))
        prev = state.r
    # steady state: R^H R = row^H row / (1 - lam); late-step changes shrink
    # at least as fast as the forgetting factor
    late = diffs[-10:]
    for a, b in zip(late, late[1:]):
        assert b <= (lam + 0.05) * a + 1e-14


# --------------------------------- solving -----------------------------------


def test_identity_factor_solves_to_rhs(rng):
    state = state_from_triangular(np.eye(3, dtype=complex))
    rhs = rng.normal(size=3) + 1j * rng.normal(size=3)
    assert_allclose(solve_normal(state, rhs), rhs, atol=1e-12)


def test_absorbed_identity_rows_solve_basis_vectors():
    state = new_state(4, forgetting=1.0)
    for k in range(4):
        state = qless_update(state, np.eye(4, dtype=complex)[k])
    for k in range(4):
        e = np.zeros(4, dtype=complex)
        e[k] = 1.0
        assert_allclose(solve_normal(state, e), e, atol=1e-12)


def test_solve_matches_dense_oracle_on_8x8(rng):
    rows = random_rows(rng, 24, 8)
    state = new_state(8, forgetting=1.0)
    for row in rows:
        state = qless_update(state, row)
    rhs = rng.normal(size=8) + 1j * rng.normal(size=8)
    got = solve_normal(state, rhs)
    want = np.linalg.solve(rows.conj().T @ rows, rhs)
    assert_allclose(got, want, atol=1e-9 * np.linalg.norm(want))
    resid = np.linalg.norm(state.gram() @ got - rhs)
    assert resid <= 1e-8 * np.linalg.norm(rhs)


def test_rank_deficient_solve_names_pivot():
    state = new_state(3)
    state = qless_update(state, np.array([1.0, 0, 0], dtype=complex))
    with pytest.raises(NumericalError, match="pivot"):
        solve_normal(state, np.ones(3, dtype=complex))
    with pytest.raises(ValueError):
        solve_normal(state, np.ones(2, dtype=complex))


def test_rhs_accumulator_tracks_weighted_regression(rng):
    # absorbing (row, target) pairs keeps rhs = sum lam^(k-1-i) row_i^H t_i,
    # so solve_normal returns the forgetting-weighted least-squares solution
    n, k = 4, 30
    lam = 0.95
    rows = random_rows(rng, k, n)
    targets = rng.normal(size=k) + 1j * rng.normal(size=k)
    state = new_state(n, forgetting=lam)
    for row, t in zip(rows, targets):
        state = qless_update(state, row, target=t)
    w = lam ** np.arange(k - 1, -1, -1)
    gram = (rows.conj().T * w) @ rows
    rhs = rows.conj().T @ (w * targets)
    want = np.linalg.solve(gram, rhs)
    assert_allclose(solve_normal(state, state.rhs), want, atol=1e-9)


def test_absorb_rows_batch_equals_sequential(rng):
    rows = random_rows(rng, 10, 5)
    seq = new_state(5, forgetting=0.97)
    for row in rows:
        seq = qless_update(seq, row)
    batch = absorb_rows(new_state(5, forgetting=0.97), rows)
    assert_allclose(batch.r, seq.r, atol=1e-12)
    with pytest.raises(ValueError):
        absorb_rows(new_state(5), rng.normal(size=(3, 4)))


# ------------------------------ risk averaging -------------------------------


def test_risk_of_zero_losses_is_zero():
    est = empirical_risk(np.zeros(5))
    assert est.value == 0.0


def test_uniform_risk_is_arithmetic_mean():
    est = empirical_risk(np.array([1.0, 2.0, 3.0]))
    assert est.value == pytest.approx(2.0)
    assert_allclose(est.weights, np.full(3, 1 / 3))


def test_risk_length_mismatch_rejected():
    with pytest.raises(ValueError):
        empirical_risk(np.array([1.0, 2.0]), weights=np.array([1.0]))
    with pytest.raises(ValueError):
        empirical_risk(np.array([]))


def test_risk_recovers_trained_slack_sum():
    # hinge losses of a trained surface on its own training set equal the
    # optimal slacks, so their unit-weight sum matches the slack term
    from qsbeam.qssvm import QsSvmHyperparams, train_binary

    x = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0, -1.0])  # duplicated point, both labels
    res = train_binary(x, y, QsSvmHyperparams(slack_penalty=5.0, quad_regularizer=1e-3))
    hinges = np.array(
        [max(0.0, 1.0 - yi * res.surface.evaluate(xi)) for xi, yi in zip(x, y)]
    )
    est = empirical_risk(hinges, weights=np.ones(len(hinges)))
    assert est.value == pytest.approx(float(np.sum(res.slacks)), abs=1e-8)
    assert np.sum(res.slacks) > 0.0
