"""Dense convex quadratic programming by a primal-dual interior-point method.

Solves   minimize   0.5 z^T P z + q^T z
         subject to G z <= h

with P symmetric positive semidefinite. The implementation is a standard
Mehrotra predictor-corrector: the problem data are first equilibrated by a
Ruiz diagonal scaling (badly scaled curvature otherwise stalls the dual
residual), then each iteration eliminates the slack and multiplier blocks
and solves the reduced system

    (P + G^T diag(lam/s) G) dz = rhs

by Cholesky factorization, shared between the predictor and corrector
steps. Degenerate endgames (non-strict complementarity) are finished by an
active-set polish: the equality-constrained KKT system on the detected
active set is solved directly and the result is accepted only if it passes
the same strict test as the interior iterates. Convergence is always
measured on the original, unscaled residuals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError


@dataclass(frozen=True)
class QpResult:
    """Solution of a convex QP with optimality diagnostics."""

    z: np.ndarray
    dual: np.ndarray
    iterations: int
    residuals: dict[str, float]
    objective: float


def _kkt_residuals(p, q, g, h, z, lam) -> dict[str, float]:
    r_dual = p @ z + q + g.T @ lam
    violation = np.maximum(g @ z - h, 0.0)
    gap = float(abs(lam @ (h - g @ z)) / max(1, len(h)))
    return {
        "dual": float(np.linalg.norm(r_dual, np.inf)),
        "primal": float(np.linalg.norm(violation, np.inf)),
        "gap": gap,
    }


def _ruiz_equilibrate(p, g, iters: int = 6):
    """Diagonal scalings d (variables) and e (constraints) for [[P, G'], [G, 0]].

    Returns (d, e) such that diag(d) P diag(d) and diag(e) G diag(d) have
    rows and columns with infinity norms near one.
    """
    d = np.ones(p.shape[0])
    e = np.ones(g.shape[0])
    ps = p.copy()
    gs = g.copy()
    for _ in range(iters):
        col = np.maximum(
            np.max(np.abs(ps), axis=0, initial=0.0),
            np.max(np.abs(gs), axis=0, initial=0.0),
        )
        col[col == 0] = 1.0
        sd = 1.0 / np.sqrt(col)
        ps = ps * sd[:, None] * sd[None, :]
        gs = gs * sd[None, :]
        d *= sd
        row = np.max(np.abs(gs), axis=1, initial=0.0)
        row[row == 0] = 1.0
        se = 1.0 / np.sqrt(row)
        gs = gs * se[:, None]
        e *= se
    return d, e


def solve_qp(
    p: np.ndarray,
    q: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    tol: float = 1e-8,
    max_iter: int | None = None,
) -> QpResult:
    """Solve min 0.5 z'Pz + q'z s.t. Gz <= h.

    Parameters
    ----------
    p : np.ndarray
        (d, d) symmetric PSD quadratic term.
    q : np.ndarray
        (d,) linear term.
    g, h : np.ndarray
        (m, d) inequality matrix and (m,) right-hand side; m >= 1.
    tol : float
        KKT tolerance on scaled dual/primal residuals and the mean
        complementarity gap.
    max_iter : int | None
        Iteration cap; defaults to 10 * (variables + constraints).

    Raises
    ------
    SolverError
        If no iterate (or polish) meets the tolerance before the cap, or
        progress stalls; carries the best iterate and its residuals.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float).reshape(-1)
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float).reshape(-1)
    d = q.size
    m = h.size
    if p.shape != (d, d):
        raise ValueError("P must be square and match q")
    if g.shape != (m, d):
        raise ValueError("G must be (len(h), len(q))")
    if max_iter is None:
        max_iter = 10 * (d + m)

    dscale, escale = _ruiz_equilibrate(p, g)
    ps = p * dscale[:, None] * dscale[None, :]
    qs = q * dscale
    gs = g * escale[:, None] * dscale[None, :]
    hs = h * escale

    y = np.zeros(d)
    s = np.maximum(np.abs(hs), 1.0)
    lam = np.ones(m)
    reg = 1e-11 * (1.0 + np.trace(ps) / d)
    q_scale = 1.0 + float(np.linalg.norm(q, np.inf))
    h_scale = 1.0 + float(np.linalg.norm(h, np.inf))
    s_floor = 1e-14 * (1.0 + float(np.linalg.norm(hs, np.inf)))

    def reduced_factor(diag_w):
        # ps and gs'W gs are both PSD, so the sum fails Cholesky only
        # through round-off; escalate the shift relative to the diagonal
        # until the factorization goes through.
        mmat = ps + (gs.T * diag_w) @ gs
        idx = np.diag_indices_from(mmat)
        max_diag = float(np.max(mmat[idx])) + 1.0
        reg_now = reg
        while True:
            shifted = mmat.copy()
            shifted[idx] += reg_now
            try:
                return np.linalg.cholesky(shifted)
            except np.linalg.LinAlgError:
                reg_now *= 100.0
                if reg_now > 1e-4 * max_diag:
                    return None

    def reduced_solve(chol, rhs):
        t = np.linalg.solve(chol, rhs)
        return np.linalg.solve(chol.T, t)

    def passes(res) -> bool:
        return (
            res["dual"] <= tol * q_scale
            and res["primal"] <= tol * h_scale
            and res["gap"] <= tol
        )

    def polish(active) -> tuple[np.ndarray, np.ndarray, dict[str, float]] | None:
        # Equality-constrained QP on the active rows, solved as one KKT
        # system in scaled space. lstsq tolerates duplicated active rows
        # (multipliers then split arbitrarily, the primal point does not).
        ga = gs[active]
        na = ga.shape[0]
        kkt = np.zeros((d + na, d + na))
        kkt[:d, :d] = ps
        kkt[:d, d:] = ga.T
        kkt[d:, :d] = ga
        rhs = np.concatenate([-qs, hs[active]])
        try:
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        except np.linalg.LinAlgError:
            return None
        y_pol = sol[:d]
        nu = sol[d:]
        if na and float(np.min(nu)) < -1e-9 * max(1.0, float(np.max(np.abs(nu)))):
            return None
        lam_pol_scaled = np.zeros(m)
        lam_pol_scaled[active] = np.maximum(nu, 0.0)
        z_pol = dscale * y_pol
        lam_pol = escale * lam_pol_scaled
        res_pol = _kkt_residuals(p, q, g, h, z_pol, lam_pol)
        if passes(res_pol):
            return z_pol, lam_pol, res_pol
        return None

    def finish(z, lam_orig, res, iterations) -> QpResult:
        obj = float(0.5 * z @ p @ z + q @ z)
        return QpResult(
            z=z, dual=lam_orig, iterations=iterations, residuals=res, objective=obj
        )

    best = None
    best_active = None
    since_improve = 0
    since_polish = 0
    for it in range(1, max_iter + 1):
        z = dscale * y
        lam_orig = escale * lam
        res = _kkt_residuals(p, q, g, h, z, lam_orig)
        res["gap"] = float(s @ lam / m)
        score = res["dual"] / q_scale + res["primal"] / h_scale + res["gap"]
        if best is None or score < 0.99 * best[0]:
            best = (score, z.copy(), lam_orig.copy(), res)
            best_active = lam > s
            since_improve = 0
        else:
            since_improve += 1
        if passes(res):
            return finish(z, lam_orig, res, it - 1)
        since_polish += 1
        if res["gap"] <= 1e4 * tol and since_polish >= 5:
            since_polish = 0
            polished = polish(lam > s)
            if polished is not None:
                return finish(*polished, iterations=it - 1)
        if since_improve > 30:
            break

        r_dual = ps @ y + qs + gs.T @ lam
        r_prim = gs @ y + s - hs
        mu = s @ lam / m
        # Cap the slack scaling so nearly active constraints cannot push
        # the reduced matrix to overflow late in convergence.
        w = np.minimum(lam / s, 1e13)

        chol = reduced_factor(w)
        if chol is None:
            break

        # Affine (predictor) direction: complementarity pushed to zero.
        r_cent = s * lam
        rhs_aff = -r_dual - gs.T @ (w * r_prim - r_cent / s)
        dy_aff = reduced_solve(chol, rhs_aff)
        dlam_aff = w * (r_prim + gs @ dy_aff) - r_cent / s
        ds_aff = -r_prim - gs @ dy_aff

        def max_step(v, dv):
            neg = dv < 0
            if not np.any(neg):
                return 1.0
            return min(1.0, float(np.min(-v[neg] / dv[neg])))

        alpha_aff = min(max_step(s, ds_aff), max_step(lam, dlam_aff))
        mu_aff = (s + alpha_aff * ds_aff) @ (lam + alpha_aff * dlam_aff) / m
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0

        # Corrector direction with centering (same factor, new right side).
        r_cent = s * lam - sigma * mu + ds_aff * dlam_aff
        rhs_cc = -r_dual - gs.T @ (w * r_prim - r_cent / s)
        dy = reduced_solve(chol, rhs_cc)
        dlam = w * (r_prim + gs @ dy) - r_cent / s
        ds = -r_prim - gs @ dy

        frac = 0.99 if mu > 1e-6 else 0.999
        alpha = frac * min(max_step(s, ds), max_step(lam, dlam))
        alpha = min(1.0, alpha)
        y = y + alpha * dy
        # Strict positivity with a floor: keeps lam/s finite for
        # constraints that are active at the solution.
        s = np.maximum(s + alpha * ds, s_floor)
        lam = np.maximum(lam + alpha * dlam, 1e-14)

    if best_active is not None:
        polished = polish(best_active)
        if polished is not None:
            return finish(*polished, iterations=max_iter)

    raise SolverError(
        "interior-point solver did not reach the requested tolerance",
        best={"z": best[1], "dual": best[2]},
        residuals=best[3],
    )
