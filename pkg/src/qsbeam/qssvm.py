"""Kernel-free quadratic-surface SVM classification.

A binary separator is the quadratic surface 0.5 x'Wx + b'x + c = 0 with W
symmetric. Training minimizes

    sum_i ||W x_i + b||^2  +  reg * ||W||_F^2  +  penalty * sum_i xi_i

subject to y_i (0.5 x_i'W x_i + b'x_i + c) >= 1 - xi_i and xi_i >= 0. The
first term flattens the surface's gradient field over the samples (margin
maximization without any kernel); the Frobenius regularizer interpolates
toward a plain hyperplane as it grows. The problem is assembled over the
packed upper triangle of W (enforcing symmetry by construction) and handed
to the interior-point solver in :mod:`qsbeam.qp`.

Multi-class decisions use one-vs-one voting: every ordered pair gets
sign(D_ij(x)) with sign(0) = +1, and the winner is the class with the most
wins, ties resolved toward the lowest class index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .qp import QpResult, solve_qp
from .signals import SnapshotMatrix

COV_FEATURE_TAG = "cov_upper_v1"


# -------------------- packed symmetric parameterization --------------------


def _triu_indices(m: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(m)


def pack_symmetric(w: np.ndarray) -> np.ndarray:
    """Upper triangle of a symmetric matrix, row-major."""
    iu, ju = _triu_indices(w.shape[0])
    return np.asarray(w)[iu, ju]


def unpack_symmetric(packed: np.ndarray, m: int) -> np.ndarray:
    """Inverse of pack_symmetric."""
    iu, ju = _triu_indices(m)
    w = np.zeros((m, m))
    w[iu, ju] = packed
    w[ju, iu] = packed
    return w


def _quad_features(x: np.ndarray) -> np.ndarray:
    """Coefficients of packed W in 0.5 x'Wx: x_i x_j off-diagonal, x_i^2/2 on."""
    iu, ju = _triu_indices(x.shape[0])
    f = x[iu] * x[ju]
    f[iu == ju] *= 0.5
    return f


def _grad_map(x: np.ndarray) -> np.ndarray:
    """Matrix T with T @ packed(W) = W x."""
    m = x.shape[0]
    iu, ju = _triu_indices(m)
    nv = iu.size
    t = np.zeros((m, nv))
    cols = np.arange(nv)
    np.add.at(t, (iu, cols), x[ju])
    off = iu != ju
    np.add.at(t, (ju[off], cols[off]), x[iu[off]])
    return t


# ------------------------------ data types ---------------------------------


@dataclass(frozen=True)
class QsSvmHyperparams:
    """Training hyperparameters.

    slack_penalty is the weight on margin violations; quad_regularizer is
    the Frobenius penalty on W (large values drive the surface toward a
    hyperplane, small values leave it fully quadratic).
    """

    slack_penalty: float = 10.0
    quad_regularizer: float = 1e-3

    def __post_init__(self) -> None:
        if self.slack_penalty <= 0:
            raise ValueError("slack penalty must be > 0")
        if self.quad_regularizer < 0:
            raise ValueError("quadratic regularizer must be >= 0")


@dataclass(frozen=True)
class QuadraticSurface:
    """Decision surface 0.5 x'Wx + b'x + c with symmetric W."""

    w_upper: np.ndarray
    b: np.ndarray
    c: float

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    @property
    def w(self) -> np.ndarray:
        return unpack_symmetric(self.w_upper, self.dim)

    def evaluate(self, x: np.ndarray) -> float:
        """Decision value at a single feature vector."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.dim:
            raise ValueError(f"feature dim {x.shape[0]} != surface dim {self.dim}")
        return float(_quad_features(x) @ self.w_upper + self.b @ x + self.c)

    def evaluate_batch(self, xs: np.ndarray) -> np.ndarray:
        """Decision values for (k, dim) feature rows."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if xs.shape[1] != self.dim:
            raise ValueError(f"feature dim {xs.shape[1]} != surface dim {self.dim}")
        w = self.w
        quad = 0.5 * np.einsum("bi,ij,bj->b", xs, w, xs)
        return quad + xs @ self.b + self.c

    def negated(self) -> "QuadraticSurface":
        return QuadraticSurface(w_upper=-self.w_upper, b=-self.b, c=-self.c)


@dataclass(frozen=True)
class BinaryTrainResult:
    surface: QuadraticSurface
    slacks: np.ndarray
    qp: QpResult


@dataclass(frozen=True)
class SeparabilityReport:
    """Margin audit of a surface over a labeled set."""

    margins: np.ndarray
    violations: np.ndarray  # indices with margin < 1 - tol
    max_violation: float

    @property
    def separable(self) -> bool:
        return self.violations.size == 0


# ------------------------------- training ----------------------------------


def _assemble_qp(
    x: np.ndarray, y: np.ndarray, hyper: QsSvmHyperparams
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Build the training QP over z = (vech(W), b, c, xi).

    Objective 0.5 z'Pz + q'z realizes sum_i ||W x_i + b||^2 +
    lambda ||W||_F^2 + eta sum_i xi_i; inequality rows encode the unit
    margins and xi >= 0.
    """
    n, m = x.shape
    iu, ju = _triu_indices(m)
    nv = iu.size
    d = nv + m + 1 + n

    # Quadratic objective: stack per-sample gradient maps [T(x_i), I].
    a_all = np.zeros((n * m, nv + m))
    for i in range(n):
        a_all[i * m : (i + 1) * m, :nv] = _grad_map(x[i])
        a_all[i * m : (i + 1) * m, nv:] = np.eye(m)
    p = np.zeros((d, d))
    p[: nv + m, : nv + m] = 2.0 * (a_all.T @ a_all)
    fro_mult = np.where(iu == ju, 1.0, 2.0)  # ||W||_F^2 counts off-diagonals twice
    p[np.arange(nv), np.arange(nv)] += 2.0 * hyper.quad_regularizer * fro_mult
    q = np.zeros(d)
    q[nv + m + 1 :] = hyper.slack_penalty

    # Margin rows: -y_i (quad(x_i), x_i, 1) z - xi_i <= -1, then xi >= 0.
    gmat = np.zeros((2 * n, d))
    h = np.zeros(2 * n)
    for i in range(n):
        gmat[i, :nv] = -y[i] * _quad_features(x[i])
        gmat[i, nv : nv + m] = -y[i] * x[i]
        gmat[i, nv + m] = -y[i]
        gmat[i, nv + m + 1 + i] = -1.0
        h[i] = -1.0
        gmat[n + i, nv + m + 1 + i] = -1.0
    return p, q, gmat, h


def train_binary(
    features: np.ndarray,
    labels: np.ndarray,
    hyper: QsSvmHyperparams = QsSvmHyperparams(),
    tol: float = 1e-8,
) -> BinaryTrainResult:
    """Fit one quadratic surface to a two-class problem.

    Parameters
    ----------
    features : np.ndarray
        (n, m) sample rows.
    labels : np.ndarray
        (n,) labels in {-1, +1}.
    hyper : QsSvmHyperparams
        Penalties; see class docstring.
    tol : float
        KKT tolerance handed to the QP solver.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float).reshape(-1)
    if x.ndim != 2:
        raise ValueError("features must be a 2-D array")
    n, m = x.shape
    if y.shape[0] != n:
        raise ValueError("labels must match the number of feature rows")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if np.unique(y).size < 2:
        raise ValueError("training needs samples from both classes")

    p, q, gmat, h = _assemble_qp(x, y, hyper)
    nv = _triu_indices(m)[0].size
    result = solve_qp(p, q, gmat, h, tol=tol)

    z = result.z
    surface = QuadraticSurface(
        w_upper=z[:nv].copy(), b=z[nv : nv + m].copy(), c=float(z[nv + m])
    )
    slacks = z[nv + m + 1 :].copy()
    return BinaryTrainResult(surface=surface, slacks=slacks, qp=result)


def separability_report(
    surface: QuadraticSurface,
    features: np.ndarray,
    labels: np.ndarray,
    tol: float = 1e-8,
) -> SeparabilityReport:
    """Audit unit margins y_i f(x_i) >= 1 of a trained surface."""
    x = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(labels, dtype=float).reshape(-1)
    margins = y * surface.evaluate_batch(x)
    violations = np.flatnonzero(margins < 1.0 - tol)
    worst = float(np.max(1.0 - margins[violations])) if violations.size else 0.0
    return SeparabilityReport(margins=margins, violations=violations, max_violation=worst)


# ------------------------------ multi-class --------------------------------


@dataclass(frozen=True)
class QsSvmModel:
    """One-vs-one multiclass model over an ordered class list.

    ``surfaces[(i, j)]`` (i < j) is the surface trained with class i as +1
    and class j as -1; the reversed decision is its exact negation, so the
    pairwise decision matrix is antisymmetric by construction.
    """

    classes: tuple[Any, ...]
    surfaces: dict[tuple[int, int], QuadraticSurface]
    hyper: QsSvmHyperparams
    feature_map: dict[str, Any] = field(default_factory=lambda: {"tag": COV_FEATURE_TAG})
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def dim(self) -> int:
        return next(iter(self.surfaces.values())).dim

    def decide_pair(self, i: int, j: int, x: np.ndarray) -> float:
        """Pairwise decision value D_ij(x); D_ji = -D_ij exactly."""
        if i == j:
            raise ValueError("pair indices must differ")
        if not (0 <= i < self.n_classes and 0 <= j < self.n_classes):
            raise ValueError("pair indices out of range")
        if i < j:
            return self.surfaces[(i, j)].evaluate(x)
        return -self.surfaces[(j, i)].evaluate(x)

    def votes(self, x: np.ndarray) -> np.ndarray:
        """Per-class win counts over all pairings.

        Each of the C(G, 2) duels casts exactly one vote, so the tally always
        sums to G*(G-1)/2 and no class can exceed G-1. A decision value of
        exactly zero goes to the lower-indexed class, matching the tie rule
        in classify.
        """
        return self.votes_batch(np.asarray(x, dtype=float).reshape(1, -1))[0]

    def votes_batch(self, xs: np.ndarray) -> np.ndarray:
        """(k, n_classes) win counts for a batch of feature rows."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if xs.shape[1] != self.dim:
            raise ValueError(f"feature dim {xs.shape[1]} != model dim {self.dim}")
        counts = np.zeros((xs.shape[0], self.n_classes), dtype=int)
        for (i, j), surf in self.surfaces.items():
            won = surf.evaluate_batch(xs) >= 0
            counts[:, i] += won.astype(int)
            counts[:, j] += (~won).astype(int)
        return counts

    def classify(self, x: np.ndarray) -> tuple[Any, np.ndarray]:
        """Winning class label and the vote tally; ties -> lowest index."""
        tally = self.votes(x)
        return self.classes[int(np.argmax(tally))], tally

    def classify_batch(self, xs: np.ndarray) -> tuple[list, np.ndarray]:
        tallies = self.votes_batch(xs)
        idx = np.argmax(tallies, axis=1)
        return [self.classes[int(i)] for i in idx], tallies


def train_multiclass(
    features: np.ndarray,
    labels: Sequence[Any],
    hyper: QsSvmHyperparams = QsSvmHyperparams(),
    classes: Sequence[Any] | None = None,
    feature_map: dict[str, Any] | None = None,
    tol: float = 1e-8,
) -> QsSvmModel:
    """Train all one-vs-one surfaces for a labeled feature set.

    Parameters
    ----------
    features : np.ndarray
        (n, m) sample rows.
    labels : sequence
        Per-sample class labels; compared by equality against ``classes``.
    classes : sequence | None
        Class ordering; defaults to sorted unique labels. Index order is
        the tie-break order.
    feature_map : dict | None
        Version-tagged description of how features were computed; stored in
        the model and serialized with it.
    """
    x = np.asarray(features, dtype=float)
    labels = list(labels)
    if classes is None:
        classes = sorted(set(labels))
    classes = tuple(classes)
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    idx_of = {c: k for k, c in enumerate(classes)}
    try:
        y_idx = np.array([idx_of[l] for l in labels])
    except KeyError as missing:
        raise ValueError(f"label {missing} not in the class list") from None

    surfaces: dict[tuple[int, int], QuadraticSurface] = {}
    for i in range(len(classes)):
        for j in range(i + 1, len(classes)):
            mask = (y_idx == i) | (y_idx == j)
            xi = x[mask]
            yi = np.where(y_idx[mask] == i, 1.0, -1.0)
            surfaces[(i, j)] = train_binary(xi, yi, hyper, tol=tol).surface
    return QsSvmModel(
        classes=classes,
        surfaces=surfaces,
        hyper=hyper,
        feature_map=dict(feature_map or {"tag": COV_FEATURE_TAG}),
    )


# ----------------------------- featurization --------------------------------


def featurize_snapshots(snapshots: SnapshotMatrix | np.ndarray) -> np.ndarray:
    """Covariance-triangle feature map (tag "cov_upper_v1").

    Computes the sample covariance R = X X^H / L, scales it so an identity
    covariance keeps a unit diagonal (divide by trace(R)/n), and stacks the
    real upper triangle (with diagonal) followed by the imaginary strict
    upper triangle. Dimension is n^2 for n elements.
    """
    x = snapshots.data if isinstance(snapshots, SnapshotMatrix) else np.asarray(snapshots)
    if x.ndim != 2:
        raise ValueError("snapshots must be 2-D (elements x snapshots)")
    n, l = x.shape
    r = x @ x.conj().T / l
    tr = float(np.real(np.trace(r)))
    if tr <= 0.0:
        raise ValueError("cannot featurize an all-zero snapshot matrix")
    r = r * (n / tr)
    iu, ju = np.triu_indices(n)
    off = iu != ju
    return np.concatenate([r[iu, ju].real, r[iu[off], ju[off]].imag])


def cov_feature_dim(n_elements: int) -> int:
    """Dimension of the covariance-triangle feature map: n^2."""
    return n_elements * n_elements


# ----------------------------- serialization --------------------------------


def model_to_json(model: QsSvmModel) -> dict[str, Any]:
    """JSON-serializable dict with every pairwise surface and the feature tag."""
    pairs = []
    for (i, j), surf in sorted(model.surfaces.items()):
        pairs.append(
            {
                "i": i,
                "j": j,
                "w_upper": surf.w_upper.tolist(),
                "b": surf.b.tolist(),
                "c": surf.c,
            }
        )
    return {
        "format": "qs-svm-model",
        "version": 1,
        "classes": list(model.classes),
        "hyperparams": {
            "slack_penalty": model.hyper.slack_penalty,
            "quad_regularizer": model.hyper.quad_regularizer,
        },
        "feature_map": model.feature_map,
        "metadata": model.metadata,
        "pairs": pairs,
    }


def model_from_json(payload: dict[str, Any]) -> QsSvmModel:
    """Inverse of model_to_json."""
    if payload.get("format") != "qs-svm-model":
        raise ValueError("not a qs-svm model payload")
    if payload.get("version") != 1:
        raise ValueError(f"unsupported model version {payload.get('version')!r}")
    surfaces = {}
    for entry in payload["pairs"]:
        surfaces[(int(entry["i"]), int(entry["j"]))] = QuadraticSurface(
            w_upper=np.array(entry["w_upper"], dtype=float),
            b=np.array(entry["b"], dtype=float),
            c=float(entry["c"]),
        )
    hp = payload["hyperparams"]
    return QsSvmModel(
        classes=tuple(payload["classes"]),
        surfaces=surfaces,
        hyper=QsSvmHyperparams(
            slack_penalty=float(hp["slack_penalty"]),
            quad_regularizer=float(hp["quad_regularizer"]),
        ),
        feature_map=dict(payload.get("feature_map", {})),
        metadata=dict(payload.get("metadata", {})),
    )


def save_model(path: str | Path, model: QsSvmModel) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model_to_json(model), indent=2) + "\n")
    return path


def load_model(path: str | Path) -> QsSvmModel:
    return model_from_json(json.loads(Path(path).read_text()))
