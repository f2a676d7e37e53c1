"""Air-quality index classifier: a 5-5-10-1 perceptron trained by
Levenberg-Marquardt on labels from the deterministic band rule, so the
network can always be audited against an exact oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..domain import AQ_BAND_EDGES, POLLUTANT_ORDER, Pollutant, classify_air_quality

LAYER_SIZES = (5, 5, 10, 1)  # input, two sigmoid hidden layers, linear output

FORMAT_NAME = "plumegame-mlp"
FORMAT_VERSION = 1

#: Sampling caps for band-5 (unbounded) and for CO, which has no band.
_TOP_BAND_FACTOR = 1.6
_CO_MAX = 12.2


class TrainingError(RuntimeError):
    """Raised when training stops without reaching the target error."""

    def __init__(self, message: str, best_mse: float, epochs: int):
        super().__init__(f"{message} (best MSE {best_mse:.5f} after {epochs} epochs)")
        self.best_mse = best_mse
        self.epochs = epochs


@dataclass
class MlpModel:
    w1: np.ndarray  # (5, 5)
    b1: np.ndarray  # (5,)
    w2: np.ndarray  # (10, 5)
    b2: np.ndarray  # (10,)
    w3: np.ndarray  # (1, 10)
    b3: np.ndarray  # (1,)
    input_spans: np.ndarray  # (5,), max - min per input
    train_mse: float
    mse_history: list[float] | None = None  # accepted-step losses, not serialized

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Raw network output for already-normalized inputs (n, 5) -> (n,)."""
        a1 = _sigmoid(x @ self.w1.T + self.b1)
        a2 = _sigmoid(a1 @ self.w2.T + self.b2)
        return (a2 @ self.w3.T + self.b3).ravel()

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": FORMAT_NAME,
                "version": FORMAT_VERSION,
                "layer_sizes": list(LAYER_SIZES),
                "w1": self.w1.tolist(), "b1": self.b1.tolist(),
                "w2": self.w2.tolist(), "b2": self.b2.tolist(),
                "w3": self.w3.tolist(), "b3": self.b3.tolist(),
                "input_spans": self.input_spans.tolist(),
                "train_mse": self.train_mse,
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "MlpModel":
        data = json.loads(text)
        if data.get("format") != FORMAT_NAME:
            raise ValueError(f"not a {FORMAT_NAME} file")
        if data.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported {FORMAT_NAME} version {data.get('version')}")
        return cls(
            w1=np.array(data["w1"]), b1=np.array(data["b1"]),
            w2=np.array(data["w2"]), b2=np.array(data["b2"]),
            w3=np.array(data["w3"]), b3=np.array(data["b3"]),
            input_spans=np.array(data["input_spans"]),
            train_mse=float(data["train_mse"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "MlpModel":
        return cls.from_json(Path(path).read_text())


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500.0, 500.0)))


def make_training_samples(n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Concentration vectors (n, 5) in POLLUTANT_ORDER plus rule labels.

    Samples are stratified so every index 1..5 appears equally often: the
    target index is drawn first, one banded pollutant is placed inside that
    band and the others anywhere below it.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    banded = [p for p in POLLUTANT_ORDER if p in AQ_BAND_EDGES]
    x = np.zeros((n, len(POLLUTANT_ORDER)))
    co_column = POLLUTANT_ORDER.index(Pollutant.CO)

    for i in range(n):
        target = rng.integers(1, 6)
        driver = banded[rng.integers(len(banded))]
        for j, pollutant in enumerate(POLLUTANT_ORDER):
            if pollutant is Pollutant.CO:
                x[i, j] = rng.uniform(0.0, _CO_MAX)
                continue
            band = target if pollutant is driver else int(rng.integers(1, target + 1))
            edges = AQ_BAND_EDGES[pollutant]
            lo = 0.0 if band == 1 else edges[band - 2]
            hi = edges[band - 1] if band < 5 else edges[-1] * _TOP_BAND_FACTOR
            x[i, j] = rng.uniform(lo, hi)

    labels = np.array([
        classify_air_quality({p: x[i, j] for j, p in enumerate(POLLUTANT_ORDER)})
        for i in range(n)
    ], dtype=float)
    assert x[:, co_column].max() <= _CO_MAX
    return x, labels


def _forward_with_jacobian(params: list[np.ndarray], xn: np.ndarray):
    w1, b1, w2, b2, w3, b3 = params
    z1 = xn @ w1.T + b1
    a1 = _sigmoid(z1)
    z2 = a1 @ w2.T + b2
    a2 = _sigmoid(z2)
    y = (a2 @ w3.T + b3).ravel()

    n = len(xn)
    # d(output)/d(z2) and /d(z1) per sample
    g2 = w3.ravel() * a2 * (1.0 - a2)  # (n, 10)
    g1 = (g2 @ w2) * a1 * (1.0 - a1)  # (n, 5)

    jac = np.empty((n, sum(p.size for p in params)))
    col = 0
    jac[:, col:col + w1.size] = np.einsum("ni,nj->nij", g1, xn).reshape(n, -1)
    col += w1.size
    jac[:, col:col + b1.size] = g1
    col += b1.size
    jac[:, col:col + w2.size] = np.einsum("ni,nj->nij", g2, a1).reshape(n, -1)
    col += w2.size
    jac[:, col:col + b2.size] = g2
    col += b2.size
    jac[:, col:col + w3.size] = a2
    col += w3.size
    jac[:, col:] = 1.0
    return y, jac


def _unpack(theta: np.ndarray, shapes: list[tuple[int, ...]]) -> list[np.ndarray]:
    out, offset = [], 0
    for shape in shapes:
        size = int(np.prod(shape))
        out.append(theta[offset:offset + size].reshape(shape))
        offset += size
    return out


def _lm_descent(xn: np.ndarray, y: np.ndarray, init_rng: np.random.Generator,
                max_epochs: int, target_mse: float):
    """One Levenberg-Marquardt run from a fresh random initialization."""
    shapes = [(5, 5), (5,), (10, 5), (10,), (1, 10), (1,)]
    theta = np.concatenate([
        init_rng.normal(scale=1.0 / np.sqrt(max(shape[-1], 1)), size=int(np.prod(shape)))
        for shape in shapes
    ])
    # bias the linear output toward the label midpoint for a sane start
    theta[-1] = float(y.mean())

    lam = 1e-2
    params = _unpack(theta, shapes)
    pred, jac = _forward_with_jacobian(params, xn)
    residual = pred - y
    mse = float(np.mean(residual**2))
    identity = np.eye(theta.size)
    history = [mse]

    epoch = 0
    while epoch < max_epochs and mse > target_mse:
        jtj = jac.T @ jac
        jtr = jac.T @ residual
        accepted = False
        for _ in range(40):
            try:
                delta = np.linalg.solve(jtj + lam * identity, -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = theta + delta
            trial_params = _unpack(trial, shapes)
            trial_pred, trial_jac = _forward_with_jacobian(trial_params, xn)
            trial_res = trial_pred - y
            trial_mse = float(np.mean(trial_res**2))
            if trial_mse < mse:
                theta, params = trial, trial_params
                residual, jac, mse = trial_res, trial_jac, trial_mse
                history.append(mse)
                lam = max(lam * 0.1, 1e-12)
                accepted = True
                break
            lam *= 10.0
            if lam > 1e12:
                break
        epoch += 1
        if not accepted:
            break
    return params, mse, epoch, history


def train_mlp(samples: np.ndarray, labels: np.ndarray, *, seed: int = 0,
              max_epochs: int = 200, target_mse: float = 0.02,
              required_mse: float = 0.05, restarts: int = 5) -> MlpModel:
    """Levenberg-Marquardt fit of the 5-5-10-1 network.

    Only improving steps are accepted, so the training loss is
    nonincreasing within a run.  Descent restarts from a few seeded
    initializations; the best run wins.  Raises TrainingError (with the
    best metrics attached) when no restart reaches ``required_mse``.
    """
    x = np.asarray(samples, dtype=float)
    y = np.asarray(labels, dtype=float).ravel()
    if x.ndim != 2 or x.shape[1] != LAYER_SIZES[0]:
        raise ValueError(f"samples must be (n, {LAYER_SIZES[0]})")
    if len(x) != len(y):
        raise ValueError("samples and labels differ in length")

    spans = x.max(axis=0) - x.min(axis=0)
    spans[spans == 0] = 1.0
    xn = x / spans

    best_params, best_mse, best_history, total_epochs = None, np.inf, None, 0
    for child in np.random.SeedSequence(seed).spawn(max(restarts, 1)):
        rng = np.random.Generator(np.random.PCG64(child))
        params, mse, epochs, history = _lm_descent(xn, y, rng, max_epochs, target_mse)
        total_epochs += epochs
        if mse < best_mse:
            best_params, best_mse, best_history = params, mse, history
        if best_mse <= target_mse:
            break

    if best_mse >= required_mse:
        raise TrainingError("air-quality network failed to converge", best_mse, total_epochs)

    w1, b1, w2, b2, w3, b3 = best_params
    return MlpModel(w1=w1, b1=b1, w2=w2, b2=b2, w3=w3, b3=b3,
                    input_spans=spans, train_mse=best_mse, mse_history=best_history)


def predict_air_quality(model: MlpModel, forecasts) -> int:
    """Index 1..5 from five pollutant forecasts in POLLUTANT_ORDER."""
    vec = np.asarray(forecasts, dtype=float).reshape(-1)
    if vec.shape[0] != LAYER_SIZES[0]:
        raise ValueError(f"expected {LAYER_SIZES[0]} forecasts, got {vec.shape[0]}")
    if np.any(vec < 0):
        raise ValueError("forecasts must be >= 0")
    raw = model.forward((vec / model.input_spans)[None, :])[0]
    return int(np.clip(np.floor(raw + 0.5), 1, 5))


def predict_air_quality_batch(model: MlpModel, forecasts: np.ndarray) -> np.ndarray:
    """Vectorized variant for evaluation sweeps, same rounding and clamping."""
    x = np.asarray(forecasts, dtype=float)
    if np.any(x < 0):
        raise ValueError("forecasts must be >= 0")
    raw = model.forward(x / model.input_spans)
    return np.clip(np.floor(raw + 0.5), 1, 5).astype(int)
