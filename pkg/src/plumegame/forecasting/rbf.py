"""Gaussian radial-basis-function regressors for pollutant forecasting.

One model per pollutant.  Centers are picked greedily from the training
inputs, orthogonal-least-squares style: each addition is the candidate that
most reduces the residual, output weights are re-solved by least squares,
and selection stops when the validation error has not improved for a few
additions.  Everything runs in range-normalized space (value / (max - min));
predictions are de-normalized and clamped to >= 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .preprocess import TimeSeriesDataset, rmse

#: Model inputs per pollutant.  O3 is secondary: it is predicted from its
#: precursors SOx and CO instead of from its own emission field.
FEATURES: dict[str, tuple[str, ...]] = {
    "pm10": ("ws", "t", "hu", "rf", "pm10"),
    "sox": ("ws", "t", "hu", "rf", "sox"),
    "nox": ("ws", "t", "hu", "rf", "nox"),
    "co": ("ws", "t", "hu", "rf", "co"),
    "o3": ("ws", "t", "hu", "rf", "sox", "co"),
}

FORMAT_NAME = "plumegame-rbf"
FORMAT_VERSION = 1


def feature_columns(pollutant: str) -> tuple[str, ...]:
    if pollutant not in FEATURES:
        raise ValueError(f"unknown pollutant {pollutant!r}")
    return FEATURES[pollutant]


@dataclass
class RbfModel:
    pollutant: str
    feature_names: tuple[str, ...]
    horizon_hours: float
    centers: np.ndarray  # (k, d), normalized feature space
    width: float
    weights: np.ndarray  # (k,)
    feature_spans: np.ndarray  # (d,), max - min of each raw feature
    feature_lows: np.ndarray  # (d,), raw training minima
    feature_highs: np.ndarray  # (d,), raw training maxima
    target_span: float
    validation_rmse: float  # normalized units
    persistence_rmse: float  # normalized units, same validation split

    def __post_init__(self):
        if len(self.centers) < 1:
            raise ValueError("model needs at least one center")
        if self.width <= 0:
            raise ValueError(f"kernel width must be > 0, got {self.width}")

    @property
    def n_centers(self) -> int:
        return len(self.centers)

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": FORMAT_NAME,
                "version": FORMAT_VERSION,
                "pollutant": self.pollutant,
                "feature_names": list(self.feature_names),
                "horizon_hours": self.horizon_hours,
                "centers": self.centers.tolist(),
                "width": self.width,
                "weights": self.weights.tolist(),
                "feature_spans": self.feature_spans.tolist(),
                "feature_lows": self.feature_lows.tolist(),
                "feature_highs": self.feature_highs.tolist(),
                "target_span": self.target_span,
                "validation_rmse": self.validation_rmse,
                "persistence_rmse": self.persistence_rmse,
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "RbfModel":
        data = json.loads(text)
        if data.get("format") != FORMAT_NAME:
            raise ValueError(f"not a {FORMAT_NAME} file")
        if data.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported {FORMAT_NAME} version {data.get('version')}")
        return cls(
            pollutant=data["pollutant"],
            feature_names=tuple(data["feature_names"]),
            horizon_hours=data["horizon_hours"],
            centers=np.array(data["centers"], dtype=float),
            width=float(data["width"]),
            weights=np.array(data["weights"], dtype=float),
            feature_spans=np.array(data["feature_spans"], dtype=float),
            feature_lows=np.array(data["feature_lows"], dtype=float),
            feature_highs=np.array(data["feature_highs"], dtype=float),
            target_span=float(data["target_span"]),
            validation_rmse=float(data["validation_rmse"]),
            persistence_rmse=float(data["persistence_rmse"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "RbfModel":
        return cls.from_json(Path(path).read_text())


def _kernel_matrix(x: np.ndarray, centers: np.ndarray, width: float) -> np.ndarray:
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-d2 / (2.0 * width * width))


def _median_pairwise(points: np.ndarray, cap: int = 256) -> float:
    if len(points) > cap:
        idx = np.linspace(0, len(points) - 1, cap).astype(int)
        points = points[idx]
    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
    upper = d2[np.triu_indices(len(points), k=1)]
    med = float(np.sqrt(np.median(upper))) if upper.size else 0.0
    return med if med > 0 else 1.0


def fit_rbf(train_x: np.ndarray, train_y: np.ndarray, val_x: np.ndarray, val_y: np.ndarray,
            max_centers: int = 60, patience: int = 5, n_candidates: int = 400):
    """Greedy center selection on normalized arrays.

    Returns (centers, width, weights, validation_rmse).  Ties in the
    residual-reduction score go to the lowest candidate index, which keeps
    training fully deterministic.
    """
    if max_centers < 1:
        raise ValueError(f"max_centers must be >= 1, got {max_centers}")
    n = len(train_x)
    if n < 10 or len(val_x) < 5:
        raise ValueError("not enough data to fit an RBF model")

    cand_idx = np.unique(np.linspace(0, n - 1, min(n_candidates, n)).astype(int))
    candidates = train_x[cand_idx]
    width = _median_pairwise(candidates)

    phi_train = _kernel_matrix(train_x, candidates, width)
    phi_val = _kernel_matrix(val_x, candidates, width)

    # Orthogonalized copies of the candidate columns; selected columns are
    # zeroed out so they can never win again.
    w_mat = phi_train.copy()
    norms2 = (w_mat**2).sum(axis=0)
    residual = train_y.copy()

    selected: list[int] = []
    best = None  # (rmse, selected snapshot, weights)
    stall = 0
    while len(selected) < max_centers and stall < patience and len(selected) < len(cand_idx):
        scores = np.where(norms2 > 1e-12, (w_mat.T @ residual) ** 2 / np.maximum(norms2, 1e-300), -np.inf)
        j = int(np.argmax(scores))
        if not np.isfinite(scores[j]):
            break
        q = w_mat[:, j] / np.sqrt(norms2[j])
        selected.append(j)
        residual = residual - q * (q @ residual)
        proj = q @ w_mat
        w_mat = w_mat - np.outer(q, proj)
        norms2 = np.maximum(norms2 - proj**2, 0.0)
        norms2[j] = 0.0

        weights, *_ = np.linalg.lstsq(phi_train[:, selected], train_y, rcond=None)
        val_rmse = rmse(phi_val[:, selected] @ weights, val_y)
        if best is None or val_rmse < best[0]:
            best = (val_rmse, list(selected), weights)
            stall = 0
        else:
            stall += 1

    val_rmse, selected, weights = best
    centers = candidates[selected]

    # Re-derive the width from the centers actually kept; keep the refit only
    # when it validates at least as well.
    if len(centers) >= 2:
        width2 = _median_pairwise(centers)
        phi2_train = _kernel_matrix(train_x, centers, width2)
        weights2, *_ = np.linalg.lstsq(phi2_train, train_y, rcond=None)
        val_rmse2 = rmse(_kernel_matrix(val_x, centers, width2) @ weights2, val_y)
        if val_rmse2 <= val_rmse:
            return centers, width2, weights2, val_rmse2
    return centers, width, weights, val_rmse


def _feature_target_arrays(dataset: TimeSeriesDataset, pollutant: str, horizon_hours: float):
    names = feature_columns(pollutant)
    lag = int(round(horizon_hours))
    if lag < 1:
        raise ValueError(f"horizon must be at least one hour, got {horizon_hours}")
    n_pairs = len(dataset) - lag
    if n_pairs < 40:
        raise ValueError(f"dataset too short for horizon {horizon_hours} h: {len(dataset)} rows")
    x = np.column_stack([dataset.columns[c][:n_pairs] for c in names])
    y = dataset.columns[pollutant][lag:]
    return names, x, y


def train_rbf(dataset: TimeSeriesDataset, pollutant: str, horizon_hours: float = 2.0,
              max_centers: int = 60, patience: int = 5, n_candidates: int = 400) -> RbfModel:
    """Train one pollutant's forecaster on a chronological 75/25 split."""
    names, x, y = _feature_target_arrays(dataset, pollutant, horizon_hours)
    split = int(len(x) * 0.75)

    lows = x[:split].min(axis=0)
    highs = x[:split].max(axis=0)
    spans = highs - lows
    if np.any(spans == 0):
        flat = [names[i] for i in np.flatnonzero(spans == 0)]
        raise ValueError(f"constant feature column(s): {', '.join(flat)}")
    target_span = float(y[:split].max() - y[:split].min())
    if target_span == 0:
        raise ValueError(f"constant target column {pollutant}")

    xn, yn = x / spans, y / target_span
    centers, width, weights, val_rmse = fit_rbf(
        xn[:split], yn[:split], xn[split:], yn[split:],
        max_centers=max_centers, patience=patience, n_candidates=n_candidates,
    )

    # Persistence: carry the value at t forward to t+h, on the same split.
    current = dataset.columns[pollutant][:len(x)] / target_span
    persistence = rmse(current[split:], yn[split:])

    return RbfModel(
        pollutant=pollutant,
        feature_names=names,
        horizon_hours=horizon_hours,
        centers=centers,
        width=width,
        weights=weights,
        feature_spans=spans,
        feature_lows=lows,
        feature_highs=highs,
        target_span=target_span,
        validation_rmse=val_rmse,
        persistence_rmse=persistence,
    )


def predict_pollutant(model: RbfModel, features) -> float:
    """Forecast one concentration (ug/m3) at t + horizon; never negative.

    Inputs are clamped to the training range first: a Gaussian kernel sum
    decays to zero far from its centers, so extrapolating would silently
    predict nothing instead of carrying the nearest trained behaviour.
    """
    vec = np.asarray(features, dtype=float).reshape(-1)
    if vec.shape[0] != model.centers.shape[1]:
        raise ValueError(
            f"{model.pollutant} model expects {model.centers.shape[1]} features "
            f"({', '.join(model.feature_names)}), got {vec.shape[0]}"
        )
    xn = np.clip(vec, model.feature_lows, model.feature_highs) / model.feature_spans
    phi = np.exp(-((xn - model.centers) ** 2).sum(axis=1) / (2.0 * model.width**2))
    value = float((phi * model.weights).sum()) * model.target_span
    return max(value, 0.0)


def train_all_rbf(dataset: TimeSeriesDataset, horizon_hours: float = 2.0,
                  max_centers: int = 60, patience: int = 5) -> dict[str, RbfModel]:
    return {
        pollutant: train_rbf(dataset, pollutant, horizon_hours, max_centers, patience)
        for pollutant in FEATURES
    }
