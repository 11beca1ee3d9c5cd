"""Pattern sequence forecasting: label daily shapes, then match recent label runs.

Days are clustered into shape labels (k-means, cluster count picked by
silhouette).  A forecast for tomorrow is the average of the days that
historically followed the same label sequence we are seeing right now.
Single instances differ only in how many trailing labels they match on
(the window length w); instances are combined by plain averaging or by a
linear epsilon-insensitive stacker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date

import numpy as np

from .errors import TrainingDiverged
from .series import STEPS_PER_DAY, LoadSeries, concat

#: Window lengths of the ensemble members.
W_GRID = (1, 2, 3, 5, 7)


@dataclass(frozen=True)
class PsfConfig:
    window_length: int = 3
    k_range: tuple[int, int] = (2, 8)
    seed: int = 0
    restarts: int = 5

    def __post_init__(self):
        if self.window_length < 1:
            raise ValueError(f"window_length must be >= 1, got {self.window_length}")
        lo, hi = self.k_range
        if lo < 2 or hi < lo:
            raise ValueError(f"k_range must satisfy 2 <= lo <= hi, got {self.k_range}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass(frozen=True)
class DayMatrix:
    """Complete calendar days of a series, one standardized 96-vector per row."""

    rows: np.ndarray
    dates: tuple[date, ...]
    mean: float
    std: float

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.shape[0] != len(self.dates):
            raise ValueError(
                f"rows {self.rows.shape} inconsistent with {len(self.dates)} dates"
            )

    @property
    def n_days(self) -> int:
        return self.rows.shape[0]

    def destandardize(self, vec: np.ndarray) -> np.ndarray:
        return vec * self.std + self.mean


def day_matrix(series: LoadSeries) -> DayMatrix:
    """Cut a series into complete midnight-aligned days, z-scored globally.

    Incomplete leading/trailing days are dropped.  The z-score uses a single
    mean/std over all retained values, so the matrix stays in one unit and
    `destandardize` can map any averaged row back to megawatts.
    """
    steps_into_day = (series.start.hour * 60 + series.start.minute) // 15
    lead = 0 if steps_into_day == 0 else STEPS_PER_DAY - steps_into_day
    n_days = (series.values.size - lead) // STEPS_PER_DAY
    if n_days < 2:
        raise ValueError(f"need at least 2 complete days to build a day matrix, got {n_days}")
    block = series.values[lead : lead + n_days * STEPS_PER_DAY]
    mean = float(block.mean())
    std = float(block.std())
    if std < 1e-12:
        std = 1.0
    rows = ((block - mean) / std).reshape(n_days, STEPS_PER_DAY)
    dates = tuple(series.timestamp_at(lead + i * STEPS_PER_DAY).date() for i in range(n_days))
    return DayMatrix(rows=rows, dates=dates, mean=mean, std=std)


@dataclass(frozen=True)
class Labeling:
    k: int
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float = 0.0
    inertia_history: tuple[float, ...] = ()

    def __post_init__(self):
        if self.centroids.shape[0] != self.k:
            raise ValueError(f"{self.centroids.shape[0]} centroids for k={self.k}")
        counts = np.bincount(self.labels, minlength=self.k)
        if counts.size > self.k:
            raise ValueError("label out of range")
        if (counts == 0).any():
            raise ValueError(f"cluster {int(np.argmin(counts))} is empty")


def _as_rows(days) -> np.ndarray:
    rows = days.rows if isinstance(days, DayMatrix) else np.asarray(days, dtype=np.float64)
    if rows.ndim != 2:
        raise ValueError(f"expected a 2-D matrix of day vectors, got shape {rows.shape}")
    return rows


def _labels_of(labeling) -> np.ndarray:
    if isinstance(labeling, Labeling):
        return labeling.labels
    return np.asarray(labeling, dtype=np.int64)


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        (points * points).sum(axis=1)[:, None]
        - 2.0 * points @ centers.T
        + (centers * centers).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeanspp_seed(rows: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = rows.shape[0]
    centroids = np.empty((k, rows.shape[1]))
    centroids[0] = rows[rng.integers(n)]
    d2 = ((rows - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[j] = rows[idx]
        d2 = np.minimum(d2, ((rows - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _lloyd(rows: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 300):
    n = rows.shape[0]
    centroids = _kmeanspp_seed(rows, k, rng)
    labels = None
    history: list[float] = []
    for _ in range(max_iter):
        d2 = _squared_distances(rows, centroids)
        new_labels = d2.argmin(axis=1)
        nearest = d2[np.arange(n), new_labels]
        history.append(float(nearest.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        empties = []
        for j in range(k):
            members = rows[labels == j]
            if members.size:
                centroids[j] = members.mean(axis=0)
            else:
                empties.append(j)
        if empties:
            # Re-seed dead centroids from the points worst served right now.
            order = np.argsort(-nearest)
            for slot, j in enumerate(empties):
                centroids[j] = rows[order[slot]]
    return centroids, labels, history


def kmeans_fit(days, k: int, seed: int = 0, restarts: int = 5) -> Labeling:
    """Lloyd's algorithm with k-means++ seeding, best of `restarts` runs."""
    rows = _as_rows(days)
    n = rows.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for {n} day vectors")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        centroids, labels, history = _lloyd(rows, k, rng)
        if best is None or history[-1] < best[2][-1]:
            best = (centroids, labels, history)
    centroids, labels, history = best
    return Labeling(
        k=k,
        centroids=centroids,
        labels=labels,
        inertia=history[-1],
        inertia_history=tuple(history),
    )


def silhouette_score(days, labeling) -> float:
    """Mean of (b - a) / max(a, b); singletons and degenerate points score 0."""
    rows = _as_rows(days)
    labels = _labels_of(labeling)
    k = labeling.k if isinstance(labeling, Labeling) else int(labels.max()) + 1
    if k < 2:
        raise ValueError(f"silhouette needs at least 2 clusters, got k={k}")
    n = rows.shape[0]
    dists = np.sqrt(_squared_distances(rows, rows))
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros((n, k))
    for j in range(k):
        sums[:, j] = dists[:, labels == j].sum(axis=1)
    scores = np.zeros(n)
    for i in range(n):
        c = labels[i]
        if counts[c] <= 1:
            continue
        a = sums[i, c] / (counts[c] - 1)
        b = min(sums[i, j] / counts[j] for j in range(k) if j != c and counts[j] > 0)
        top = max(a, b)
        scores[i] = 0.0 if top == 0.0 else (b - a) / top
    return float(scores.mean())


def select_clustering(days, k_range: tuple[int, int] = (2, 8), seed: int = 0, restarts: int = 5) -> Labeling:
    """Fit every k in the range, keep the best silhouette; ties go to smaller k."""
    rows = _as_rows(days)
    lo, hi = k_range
    if lo < 2:
        raise ValueError(f"cluster counts start at 2, got {lo}")
    hi = min(hi, rows.shape[0] - 1)
    if hi < lo:
        raise ValueError(f"k_range {k_range} infeasible for {rows.shape[0]} days")
    best_score, best = -np.inf, None
    for k in range(lo, hi + 1):
        cand = kmeans_fit(rows, k, seed=seed, restarts=restarts)
        score = silhouette_score(rows, cand)
        if score > best_score:
            best_score, best = score, cand
    return best


def _match_successors(labels: np.ndarray, rows: np.ndarray, w: int) -> np.ndarray:
    """Standardized mean of days following each occurrence of the trailing labels."""
    n = labels.size
    for width in range(w, 0, -1):
        tail = labels[n - width :]
        successors = [
            i + width
            for i in range(n - width)
            if np.array_equal(labels[i : i + width], tail)
        ]
        if successors:
            return rows[successors].mean(axis=0)
    return rows.mean(axis=0)


def psf_predict_day(labeling, days: DayMatrix, w: int) -> np.ndarray:
    """Forecast the day after the matrix's last day, in megawatts.

    Scans history for the last w labels (shrinking w on no match; mean of
    all days once w hits zero) and averages the days that followed.
    """
    if w < 1:
        raise ValueError(f"window length must be >= 1, got {w}")
    labels = _labels_of(labeling)
    if labels.size != days.n_days:
        raise ValueError(f"{labels.size} labels for {days.n_days} days")
    if days.n_days < w + 1:
        raise ValueError(f"history of {days.n_days} days too short for window {w}")
    return days.destandardize(_match_successors(labels, days.rows, w))


def ensemble_average(members) -> np.ndarray:
    if len(members) == 0:
        raise ValueError("ensemble_average needs at least one member forecast")
    return np.mean(np.stack([np.asarray(m, dtype=np.float64) for m in members]), axis=0)


@dataclass(frozen=True)
class SvrStacker:
    """Linear epsilon-insensitive combiner over member forecasts."""

    weights: np.ndarray
    bias: float
    target_mean: float
    target_std: float
    epsilon: float = 0.1

    def predict(self, member_matrix: np.ndarray) -> np.ndarray:
        x = (np.asarray(member_matrix, dtype=np.float64) - self.target_mean) / self.target_std
        return (x @ self.weights + self.bias) * self.target_std + self.target_mean

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "target_mean": self.target_mean,
            "target_std": self.target_std,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SvrStacker":
        return cls(
            weights=np.asarray(payload["weights"], dtype=np.float64),
            bias=float(payload["bias"]),
            target_mean=float(payload["target_mean"]),
            target_std=float(payload["target_std"]),
            epsilon=float(payload["epsilon"]),
        )


def svr_meta_fit(
    member_matrix: np.ndarray,
    actuals: np.ndarray,
    epsilon: float = 0.1,
    ridge: float = 1e-4,
    iterations: int = 1000,
    step_size: float = 0.1,
) -> SvrStacker:
    """Fit the stacker by deterministic full-batch sub-gradient descent.

    Members and targets share one unit (megawatts), so both are standardized
    with the target's statistics; epsilon applies on that standardized scale.
    Starts from all-zero parameters and keeps the best iterate seen, so a fit
    whose initial residuals all sit inside the epsilon tube returns exactly
    the zero parameters.
    """
    x_raw = np.asarray(member_matrix, dtype=np.float64)
    y_raw = np.asarray(actuals, dtype=np.float64)
    if x_raw.ndim != 2 or x_raw.shape[0] != y_raw.size:
        raise ValueError(f"member matrix {x_raw.shape} incompatible with {y_raw.size} targets")
    if x_raw.shape[0] < 1:
        raise ValueError("need at least one training sample")
    mean = float(y_raw.mean())
    std = float(y_raw.std())
    if std < 1e-12:
        std = 1.0
    x = (x_raw - mean) / std
    y = (y_raw - mean) / std
    n, m = x.shape
    w = np.zeros(m)
    b = 0.0
    best_loss, best_w, best_b = np.inf, w.copy(), b

    def loss_of(wv, bv):
        r = y - (x @ wv + bv)
        return float(np.maximum(np.abs(r) - epsilon, 0.0).mean() + ridge * (wv @ wv))

    for t in range(iterations):
        residual = y - (x @ w + b)
        loss = float(np.maximum(np.abs(residual) - epsilon, 0.0).mean() + ridge * (w @ w))
        if not math.isfinite(loss):
            raise TrainingDiverged("stacking regression diverged", last_finite_epoch=t)
        if loss < best_loss:
            best_loss, best_w, best_b = loss, w.copy(), b
        active = np.abs(residual) > epsilon
        sign = np.sign(residual)
        grad_w = -(sign[active] @ x[active]) / n + 2.0 * ridge * w
        grad_b = -float(sign[active].sum()) / n
        lr = step_size / math.sqrt(t + 1.0)
        w = w - lr * grad_w
        b = b - lr * grad_b
    if loss_of(w, b) < best_loss:
        best_w, best_b = w, b
    return SvrStacker(weights=best_w, bias=best_b, target_mean=mean, target_std=std)


class PsfForecaster:
    """Single PSF instance: one labeling plus one window length.

    Prediction is stateless with respect to the observed history: every call
    re-cuts the series into days, standardizes with the training statistics,
    labels each day by nearest centroid, and runs the sequence match.  Days
    appended during backtesting therefore join the matchable history
    automatically.
    """

    family = "psf"
    uses_covariates = False

    def __init__(self, labeling: Labeling, window_length: int, mean: float, std: float):
        if window_length < 1:
            raise ValueError(f"window length must be >= 1, got {window_length}")
        self.labeling = labeling
        self.window_length = window_length
        self.mean = mean
        self.std = std

    @classmethod
    def fit(cls, train: LoadSeries, cfg: PsfConfig) -> "PsfForecaster":
        matrix = day_matrix(train)
        labeling = select_clustering(matrix, cfg.k_range, cfg.seed, cfg.restarts)
        return cls(labeling, cfg.window_length, matrix.mean, matrix.std)

    def _day_rows(self, observed: LoadSeries) -> tuple[np.ndarray, np.ndarray]:
        steps_into_day = (observed.start.hour * 60 + observed.start.minute) // 15
        lead = 0 if steps_into_day == 0 else STEPS_PER_DAY - steps_into_day
        n_days = (observed.values.size - lead) // STEPS_PER_DAY
        if n_days < self.window_length + 1:
            raise ValueError(
                f"{n_days} complete days observed; window {self.window_length} needs "
                f"{self.window_length + 1}"
            )
        block = observed.values[lead : lead + n_days * STEPS_PER_DAY]
        rows = ((block - self.mean) / self.std).reshape(n_days, STEPS_PER_DAY)
        labels = _squared_distances(rows, self.labeling.centroids).argmin(axis=1)
        return rows, labels

    def predict_day(self, observed: LoadSeries, *_ignored) -> np.ndarray:
        rows, labels = self._day_rows(observed)
        return _match_successors(labels, rows, self.window_length) * self.std + self.mean

    @property
    def min_history_steps(self) -> int:
        return (self.window_length + 1) * STEPS_PER_DAY

    def to_payload(self) -> dict:
        return {
            "window_length": self.window_length,
            "mean": self.mean,
            "std": self.std,
            "k": self.labeling.k,
            "centroids": self.labeling.centroids.tolist(),
            "labels": self.labeling.labels.tolist(),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "PsfForecaster":
        labeling = Labeling(
            k=int(payload["k"]),
            centroids=np.asarray(payload["centroids"], dtype=np.float64),
            labels=np.asarray(payload["labels"], dtype=np.int64),
        )
        return cls(labeling, int(payload["window_length"]), float(payload["mean"]), float(payload["std"]))


class PsfEnsemble:
    """PSF instances over the window grid, combined by averaging or stacking."""

    family = "psf"
    uses_covariates = False

    def __init__(self, members: list[PsfForecaster], stacker: SvrStacker | None = None):
        if not members:
            raise ValueError("ensemble needs at least one member")
        self.members = members
        self.stacker = stacker

    @classmethod
    def fit(
        cls,
        train: LoadSeries,
        validation: LoadSeries | None,
        cfg: PsfConfig,
        stacking: bool = False,
    ) -> "PsfEnsemble":
        """Cluster once on the training days; share the labeling across windows.

        The stacking flavor additionally walks the validation period day by
        day (appending actuals, exactly as backtesting does) to collect
        member forecasts, then fits the combiner on them.
        """
        matrix = day_matrix(train)
        labeling = select_clustering(matrix, cfg.k_range, cfg.seed, cfg.restarts)
        members = [PsfForecaster(labeling, w, matrix.mean, matrix.std) for w in W_GRID]
        stacker = None
        if stacking:
            if validation is None:
                raise ValueError("stacking flavor needs a validation period")
            val_days = validation.day_count()
            if val_days < 1:
                raise ValueError("validation period shorter than one day")
            combined = concat(train, validation)
            boundary = train.values.size
            rows, actuals = [], []
            for d in range(val_days):
                observed = combined.segment(0, boundary + d * STEPS_PER_DAY)
                preds = np.stack([m.predict_day(observed) for m in members], axis=1)
                rows.append(preds)
                actuals.append(
                    combined.values[boundary + d * STEPS_PER_DAY : boundary + (d + 1) * STEPS_PER_DAY]
                )
            stacker = svr_meta_fit(np.concatenate(rows), np.concatenate(actuals))
        return cls(members, stacker)

    def predict_day(self, observed: LoadSeries, *_ignored) -> np.ndarray:
        preds = [m.predict_day(observed) for m in self.members]
        if self.stacker is None:
            return ensemble_average(preds)
        return self.stacker.predict(np.stack(preds, axis=1))

    @property
    def min_history_steps(self) -> int:
        return max(m.min_history_steps for m in self.members)

    def to_payload(self) -> dict:
        return {
            "members": [m.to_payload() for m in self.members],
            "stacker": None if self.stacker is None else self.stacker.to_dict(),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "PsfEnsemble":
        members = [PsfForecaster.from_payload(p) for p in payload["members"]]
        stacker = None if payload["stacker"] is None else SvrStacker.from_dict(payload["stacker"])
        return cls(members, stacker)
