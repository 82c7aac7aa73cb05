"""Adam optimization, the minibatch training loop, and gradient checking.

Training is fully deterministic: weight init, epoch shuffling, and batch
assembly all derive from the seed in the config, so identical inputs give
bit-identical models. The loop itself runs on the stacked-gate fast path
with a flat Adam state; adam_step below is the equivalent per-tensor
operation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from . import lstm
from .errors import TrainingError
from .lstm import PARAM_NAMES, LstmParams
from .scaling import MinMaxScaler, scaler_fit
from .seeds import derive_seed, rng_for


@dataclass(frozen=True)
class TrainConfig:
    hidden_size: int = 20
    lookback: int = 30
    batch_size: int = 32
    epochs: int = 30
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    grad_clip_norm: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("hidden_size", "lookback", "batch_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        for name in ("learning_rate", "epsilon", "grad_clip_norm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("beta1", "beta2"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must be in (0, 1)")

    def with_seed(self, seed: int) -> "TrainConfig":
        return TrainConfig(
            hidden_size=self.hidden_size, lookback=self.lookback,
            batch_size=self.batch_size, epochs=self.epochs,
            learning_rate=self.learning_rate, beta1=self.beta1, beta2=self.beta2,
            epsilon=self.epsilon, grad_clip_norm=self.grad_clip_norm, seed=seed,
        )


@dataclass
class AdamState:
    """First/second moment estimates per tensor plus the step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @staticmethod
    def zeros_like(params: LstmParams) -> "AdamState":
        return AdamState(
            m={n: np.zeros_like(params[n]) for n in PARAM_NAMES},
            v={n: np.zeros_like(params[n]) for n in PARAM_NAMES},
            t=0,
        )


def adam_step(
    params: LstmParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> tuple[LstmParams, AdamState]:
    """One Adam update; the step counter increments before bias correction."""
    for n in PARAM_NAMES:
        if not np.all(np.isfinite(grads[n])):
            raise TrainingError(f"non-finite gradient in {n}")
    t = state.t + 1
    b1, b2 = config.beta1, config.beta2
    new_params = {}
    for n in PARAM_NAMES:
        g = grads[n]
        state.m[n] = b1 * state.m[n] + (1.0 - b1) * g
        state.v[n] = b2 * state.v[n] + (1.0 - b2) * g * g
        m_hat = state.m[n] / (1.0 - b1**t)
        v_hat = state.v[n] / (1.0 - b2**t)
        new_params[n] = params[n] - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
    state.t = t
    return LstmParams(new_params), state


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    """Scale the whole gradient so its global L2 norm is at most max_norm."""
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        return {n: g * scale for n, g in grads.items()}
    return grads


@dataclass
class LstmModel:
    """Trained network plus the scalers that map to and from data units."""

    params: LstmParams
    scaler_in: MinMaxScaler
    scaler_out: MinMaxScaler
    lookback: int

    @property
    def input_size(self) -> int:
        return self.params.input_size

    @property
    def hidden_size(self) -> int:
        return self.params.hidden_size

    def predict_batch(self, windows: np.ndarray) -> np.ndarray:
        """Predict in original units for raw-unit windows of shape (B, L, D)."""
        W = np.asarray(windows, dtype=np.float64)
        if W.ndim == 2:
            W = W[None, :, :]
        scaled = self.scaler_in.forward(W)
        pred, _ = lstm.forward_batch(scaled, self.params, keep_caches=False)
        return self.scaler_out.inverse(pred)

    def predict(self, window: np.ndarray) -> float:
        return float(self.predict_batch(np.asarray(window)[None, :, :])[0])


class _FlatTrainingState:
    """Training-time parameter vector with stacked-gate block views."""

    def __init__(self, params: LstmParams):
        d, h = params.input_size, params.hidden_size
        W_all, U_all, b_all = params.stacked()
        self.d, self.h = d, h
        self.theta = np.concatenate(
            [W_all.ravel(), U_all.ravel(), b_all, params["W_d"][0], params["b_d"]]
        )
        o1 = 4 * h * d
        o2 = o1 + 4 * h * h
        o3 = o2 + 4 * h
        o4 = o3 + h
        self.W_all = self.theta[:o1].reshape(4 * h, d)
        self.U_all = self.theta[o1:o2].reshape(4 * h, h)
        self.b_all = self.theta[o2:o3]
        self.w_d = self.theta[o3:o4]
        self.b_d = self.theta[o4:]

    def flat_grad(self, parts: tuple) -> np.ndarray:
        dW_all, dU_all, db_all, dw_d, db_d = parts
        return np.concatenate([dW_all.ravel(), dU_all.ravel(), db_all, dw_d, [db_d]])

    def to_params(self) -> LstmParams:
        h = self.h
        tensors: dict[str, np.ndarray] = {}
        for k, gate in enumerate(lstm.STACK_ORDER):
            tensors[f"W_{gate}"] = self.W_all[k * h : (k + 1) * h].copy()
            tensors[f"U_{gate}"] = self.U_all[k * h : (k + 1) * h].copy()
            tensors[f"b_{gate}"] = self.b_all[k * h : (k + 1) * h].copy()
        tensors["W_d"] = self.w_d[None, :].copy()
        tensors["b_d"] = self.b_d.copy()
        return LstmParams(tensors)


def train(
    windows: np.ndarray,
    targets: np.ndarray,
    config: TrainConfig,
) -> tuple[LstmModel, np.ndarray]:
    """Fit the network on (window, target) pairs with minibatch Adam.

    windows is (N, L, D) in original units, targets is (N,). Inputs and
    targets are min-max scaled on this data only. Each epoch reshuffles
    the sample order from a seeded stream, averages gradients over batches
    of config.batch_size (the trailing partial batch is kept), clips the
    global gradient norm, and applies one Adam step per batch.

    Returns the model and the per-epoch mean squared error (scaled space).
    """
    W = np.asarray(windows, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if W.ndim != 3 or W.shape[0] == 0:
        raise ValueError("windows must be a non-empty (N, L, D) array")
    if y.shape != (W.shape[0],):
        raise ValueError("targets must be (N,)")
    if W.shape[1] != config.lookback:
        raise ValueError(f"window length {W.shape[1]} != config.lookback {config.lookback}")
    n, L, d = W.shape

    scaler_in = scaler_fit(W.reshape(n * L, d))
    scaler_out = scaler_fit(y)
    Ws = scaler_in.forward(W)
    ys = scaler_out.forward(y)

    rng = rng_for(config.seed, 0x696E6974)  # weight-init stream
    state = _FlatTrainingState(lstm.init_params(d, config.hidden_size, rng))
    shuffle_rng = rng_for(config.seed, 0x73687566)  # epoch-shuffle stream

    m = np.zeros_like(state.theta)
    v = np.zeros_like(state.theta)
    lr, b1, b2, eps = config.learning_rate, config.beta1, config.beta2, config.epsilon
    step = 0

    losses = np.zeros(config.epochs)
    # small recurrent matmuls run faster (and with stable timing) unthreaded
    with threadpool_limits(limits=1):
        for epoch in range(config.epochs):
            order = shuffle_rng.permutation(n)
            sq_sum = 0.0
            for start in range(0, n, config.batch_size):
                idx = order[start : start + config.batch_size]
                xb = np.ascontiguousarray(Ws[idx].transpose(1, 0, 2))  # step-major
                pred, cache = lstm.forward_stacked(
                    xb, state.W_all, state.U_all, state.b_all,
                    state.w_d, float(state.b_d[0]),
                )
                err = pred - ys[idx]
                batch_sq = float(np.sum(err * err))
                if not np.isfinite(batch_sq):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}"
                    )
                sq_sum += batch_sq
                g = state.flat_grad(
                    lstm.backward_stacked(cache, 2.0 * err / idx.size, state.U_all, state.w_d)
                )
                if not np.all(np.isfinite(g)):
                    raise TrainingError(
                        f"non-finite gradient at epoch {epoch}, batch {start // config.batch_size}"
                    )
                norm = float(np.sqrt(g @ g))
                if config.grad_clip_norm > 0 and norm > config.grad_clip_norm:
                    g *= config.grad_clip_norm / norm
                step += 1
                m = b1 * m + (1.0 - b1) * g
                v = b2 * v + (1.0 - b2) * g * g
                m_hat = m / (1.0 - b1**step)
                v_hat = v / (1.0 - b2**step)
                state.theta -= lr * m_hat / (np.sqrt(v_hat) + eps)
            losses[epoch] = sq_sum / n

    model = LstmModel(
        params=state.to_params(), scaler_in=scaler_in, scaler_out=scaler_out, lookback=L
    )
    return model, losses


def gradient_check(
    config: TrainConfig | None = None,
    seed: int = 0,
    fd_step: float = 1e-5,
) -> float:
    """Compare BPTT gradients against central finite differences.

    Builds a small random instance (D <= 3, H <= 4, L <= 5), perturbs every
    parameter entry by +-fd_step, and returns the maximum relative error
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-4) over all
    entries. The 1e-4 floor keeps near-zero gradients from amplifying
    finite-difference round-off; beneath it the comparison is absolute at
    1e-9.
    """
    del config  # dimensions and magnitudes are fixed by the seeded instance
    rng = rng_for(seed, 0x67726164)
    d = int(rng.integers(1, 4))
    h = int(rng.integers(1, 5))
    L = int(rng.integers(1, 6))
    tensors = {}
    for g in lstm.GATES:
        tensors[f"W_{g}"] = rng.uniform(-0.7, 0.7, size=(h, d))
        tensors[f"U_{g}"] = rng.uniform(-0.7, 0.7, size=(h, h))
        tensors[f"b_{g}"] = rng.uniform(-0.5, 0.5, size=h)
    tensors["W_d"] = rng.uniform(-0.9, 0.9, size=(1, h))
    tensors["b_d"] = rng.uniform(-0.5, 0.5, size=1)
    params = LstmParams(tensors)
    X = rng.uniform(-1.0, 1.0, size=(L, d))

    _, cache = lstm.forward_sequence(X, params)
    analytic = lstm.backward_sequence(cache, 1.0, params)

    worst = 0.0
    for name in PARAM_NAMES:
        base = params[name]
        flat = base.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + fd_step
            up, _ = lstm.forward_sequence(X, params)
            flat[k] = orig - fd_step
            dn, _ = lstm.forward_sequence(X, params)
            flat[k] = orig
            numeric = (up - dn) / (2.0 * fd_step)
            a = float(analytic[name].ravel()[k])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-4)
            worst = max(worst, rel)
    return worst
