"""One-hidden-layer backpropagation network for next-year values.

With only a handful of yearly points this is a mechanism, not a forecaster:
no claim is made about prediction accuracy.
"""

from __future__ import annotations

import warnings
import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

NORM_LO, NORM_HI = 0.1, 0.9


@dataclass(frozen=True)
class TrainConfig:
    window: int = 3
    hidden: int = 5
    learning_rate: float = 0.1
    epochs: int = 5000
    seed: int = 42

    def __post_init__(self):
        if self.window < 1 or self.hidden < 1:
            raise ValueError("window and hidden must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")


@dataclass
class MlpModel:
    """w inputs -> h sigmoid units -> 1 sigmoid output."""

    w1: np.ndarray  # (h, w)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (h,)
    b2: float

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=float)
        self.b1 = np.asarray(self.b1, dtype=float)
        self.w2 = np.asarray(self.w2, dtype=float)
        self.b2 = float(self.b2)
        h, _ = self.w1.shape
        if self.b1.shape != (h,) or self.w2.shape != (h,):
            raise ValueError("inconsistent layer dimensions")
        if not np.isfinite(self.params()).all():
            raise ValueError("non-finite model parameter")

    @property
    def layer_sizes(self) -> list[int]:
        h, w = self.w1.shape
        return [w, h, 1]

    @classmethod
    def zeros(cls, window: int, hidden: int) -> "MlpModel":
        return cls(np.zeros((hidden, window)), np.zeros(hidden), np.zeros(hidden), 0.0)

    @classmethod
    def random(cls, window: int, hidden: int, rng: np.random.Generator) -> "MlpModel":
        return cls(rng.uniform(-0.5, 0.5, (hidden, window)), rng.uniform(-0.5, 0.5, hidden),
                   rng.uniform(-0.5, 0.5, hidden), float(rng.uniform(-0.5, 0.5)))

    def copy(self) -> "MlpModel":
        return MlpModel(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2)

    def params(self) -> np.ndarray:
        """All parameters flattened as [w1, b1, w2, b2]."""
        return np.concatenate([self.w1.ravel(), self.b1, self.w2, [self.b2]])

    def with_params(self, flat: np.ndarray) -> "MlpModel":
        h, w = self.w1.shape
        flat = np.asarray(flat, dtype=float)
        i = h * w
        return MlpModel(flat[:i].reshape(h, w), flat[i:i + h], flat[i + h:i + 2 * h], flat[i + 2 * h])


@dataclass(frozen=True)
class Gradients:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float

    def flat(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2, [self.b2]])


@dataclass(frozen=True)
class Normalizer:
    lo: float
    hi: float

    @classmethod
    def fit(cls, values: Sequence[float]) -> "Normalizer":
        return cls(float(min(values)), float(max(values)))

    @property
    def constant(self) -> bool:
        return self.hi == self.lo

    def normalize(self, v):
        v = np.asarray(v, dtype=float)
        if self.constant:
            return np.full_like(v, 0.5)
        return NORM_LO + (v - self.lo) * (NORM_HI - NORM_LO) / (self.hi - self.lo)

    def denormalize(self, y):
        y = np.asarray(y, dtype=float)
        if self.constant:
            return np.full_like(y, self.lo)
        return self.lo + (y - NORM_LO) * (self.hi - self.lo) / (NORM_HI - NORM_LO)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def make_windows(values: Sequence[float], w: int, normalizer: Optional[Normalizer] = None
                 ) -> list[tuple[np.ndarray, float]]:
    """Sliding windows of ``w`` values paired with the next value, normalized."""
    if len(values) < w + 1:
        raise ValueError(f"series of length {len(values)} too short for window {w}")
    norm = normalizer or Normalizer.fit(values)
    scaled = norm.normalize(values)
    return [(scaled[i:i + w].copy(), float(scaled[i + w])) for i in range(len(values) - w)]


def forward(model: MlpModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.w1.shape[1],):
        raise ValueError(f"input of shape {x.shape}, model expects {model.w1.shape[1]} values")
    hidden = _sigmoid(model.w1 @ x + model.b1)
    return float(_sigmoid(model.w2 @ hidden + model.b2))


def gradient(model: MlpModel, sample: tuple) -> Gradients:
    """Backpropagated gradient of 0.5 * (forward(x) - t)**2."""
    x, t = sample
    x = np.asarray(x, dtype=float)
    hidden = _sigmoid(model.w1 @ x + model.b1)
    y = float(_sigmoid(model.w2 @ hidden + model.b2))
    delta_out = (y - t) * y * (1.0 - y)
    delta_hidden = delta_out * model.w2 * hidden * (1.0 - hidden)
    return Gradients(np.outer(delta_hidden, x), delta_hidden, delta_out * hidden, delta_out)


def mse(model: MlpModel, pairs) -> float:
    return float(np.mean([(forward(model, x) - t) ** 2 for x, t in pairs]))


def train(pairs, config: TrainConfig, trace: Optional[list] = None) -> MlpModel:
    """Full-batch gradient descent; ``trace`` collects the loss before each epoch."""
    if not pairs:
        raise ValueError("no training pairs")
    rng = np.random.default_rng(config.seed)
    model = MlpModel.random(config.window, config.hidden, rng)
    xs = np.array([p[0] for p in pairs], dtype=float)
    ts = np.array([p[1] for p in pairs], dtype=float)
    n = len(ts)
    for _ in range(config.epochs):
        # batched form of gradient(), averaged over samples
        hidden = _sigmoid(xs @ model.w1.T + model.b1)
        y = _sigmoid(hidden @ model.w2 + model.b2)
        if trace is not None:
            trace.append(float(np.mean((y - ts) ** 2)))
        d_out = (y - ts) * y * (1.0 - y)
        d_hid = d_out[:, None] * model.w2[None, :] * hidden * (1.0 - hidden)
        lr = config.learning_rate
        model.w1 -= lr * (d_hid.T @ xs) / n
        model.b1 -= lr * d_hid.sum(axis=0) / n
        model.w2 -= lr * (hidden.T @ d_out) / n
        model.b2 -= lr * float(d_out.sum()) / n
    return model


def series_seed(seed: int, agent: str, metric: str) -> int:
    return seed + zlib.crc32(f"{agent}:{metric}".encode())


@dataclass
class Prediction:
    value: float
    model: MlpModel = field(repr=False)
    normalizer: Normalizer


def predict_next(values: Sequence[float], config: TrainConfig = TrainConfig()) -> Optional[float]:
    result = fit_and_predict(values, config)
    return None if result is None else result.value


def fit_and_predict(values: Sequence[float], config: TrainConfig = TrainConfig()) -> Optional[Prediction]:
    """Train on the series and predict the value after its last point.

    Returns None, with a warning, when the series is too short for the window.
    """
    if len(values) < config.window + 1:
        warnings.warn(f"series of length {len(values)} too short for window {config.window}; "
                      "prediction skipped", stacklevel=2)
        return None
    norm = Normalizer.fit(values)
    model = train(make_windows(values, config.window, norm), config)
    last = norm.normalize(values[-config.window:])
    value = float(norm.denormalize(forward(model, last)))
    return Prediction(value, model, norm)
