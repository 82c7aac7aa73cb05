"""Single-layer LSTM with linear readout, written directly in numpy.

The cell follows the standard formulation: forget, input, and output
gates squashed by the logistic sigmoid, a tanh candidate cell update,
cell state c_t = f * c_{t-1} + i * g, and hidden state h_t = o * tanh(c_t).
The readout maps the final hidden state to one scalar. The sigmoid is
evaluated through its tanh identity 0.5 * (1 + tanh(x / 2)), which never
overflows and vectorizes well.

The four gates are stacked into single (4H x D) / (4H x H) matrices in
(f, i, o, g) row-block order so each step costs two matrix products plus
two tanh slabs; caches are step-major (L, B, ...). backward_batch
implements exact backpropagation through time and is verified against
central finite differences (training.gradient_check) and against
per-sample gradient sums in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Serialization / iteration order of the parameter tensors.
PARAM_NAMES = (
    "W_f", "U_f", "b_f",
    "W_g", "U_g", "b_g",
    "W_i", "U_i", "b_i",
    "W_o", "U_o", "b_o",
    "W_d", "b_d",
)

GATES = ("f", "g", "i", "o")

# Row-block order of the stacked matrices: the three sigmoid gates first
# so one slab evaluation covers them, the tanh candidate block last.
STACK_ORDER = ("f", "i", "o", "g")


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function via the tanh identity (stable for any finite x)."""
    return 0.5 + 0.5 * np.tanh(0.5 * np.asarray(x, dtype=np.float64))


def _sigmoid_inplace(x: np.ndarray) -> None:
    x *= 0.5
    np.tanh(x, out=x)
    x *= 0.5
    x += 0.5


@dataclass
class LstmParams:
    """Gate weights (W: input, U: recurrent, b: bias) plus the linear readout."""

    tensors: dict[str, np.ndarray]

    def __post_init__(self):
        missing = [n for n in PARAM_NAMES if n not in self.tensors]
        if missing:
            raise ValueError(f"missing parameter tensors: {missing}")
        d, h = self.input_size, self.hidden_size
        shapes = {}
        for g in GATES:
            shapes[f"W_{g}"] = (h, d)
            shapes[f"U_{g}"] = (h, h)
            shapes[f"b_{g}"] = (h,)
        shapes["W_d"] = (1, h)
        shapes["b_d"] = (1,)
        for name, want in shapes.items():
            t = np.asarray(self.tensors[name], dtype=np.float64)
            if t.shape != want:
                raise ValueError(f"{name} has shape {t.shape}, expected {want}")
            if not np.all(np.isfinite(t)):
                raise ValueError(f"{name} contains non-finite entries")
            self.tensors[name] = t

    @property
    def input_size(self) -> int:
        return np.asarray(self.tensors["W_f"]).shape[1]

    @property
    def hidden_size(self) -> int:
        return np.asarray(self.tensors["W_f"]).shape[0]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def copy(self) -> "LstmParams":
        return LstmParams({n: self.tensors[n].copy() for n in PARAM_NAMES})

    def stacked(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(W_all, U_all, b_all) with rows stacked in STACK_ORDER blocks."""
        W = np.vstack([self.tensors[f"W_{g}"] for g in STACK_ORDER])
        U = np.vstack([self.tensors[f"U_{g}"] for g in STACK_ORDER])
        b = np.concatenate([self.tensors[f"b_{g}"] for g in STACK_ORDER])
        return W, U, b

    @staticmethod
    def zeros(input_size: int, hidden_size: int) -> "LstmParams":
        t = {}
        for g in GATES:
            t[f"W_{g}"] = np.zeros((hidden_size, input_size))
            t[f"U_{g}"] = np.zeros((hidden_size, hidden_size))
            t[f"b_{g}"] = np.zeros(hidden_size)
        t["W_d"] = np.zeros((1, hidden_size))
        t["b_d"] = np.zeros(1)
        return LstmParams(t)


@dataclass(frozen=True)
class LstmState:
    hidden: np.ndarray  # (H,)
    cell: np.ndarray  # (H,)

    @staticmethod
    def zero(hidden_size: int) -> "LstmState":
        return LstmState(np.zeros(hidden_size), np.zeros(hidden_size))


def init_params(input_size: int, hidden_size: int, rng: np.random.Generator) -> LstmParams:
    """Seeded uniform (-1/sqrt(fan_in), +1/sqrt(fan_in)) init; forget bias 1."""
    t = {}
    for g in GATES:
        bw = 1.0 / np.sqrt(input_size)
        bu = 1.0 / np.sqrt(hidden_size)
        t[f"W_{g}"] = rng.uniform(-bw, bw, size=(hidden_size, input_size))
        t[f"U_{g}"] = rng.uniform(-bu, bu, size=(hidden_size, hidden_size))
        t[f"b_{g}"] = np.full(hidden_size, 1.0) if g == "f" else np.zeros(hidden_size)
    t["W_d"] = rng.uniform(-1.0 / np.sqrt(hidden_size), 1.0 / np.sqrt(hidden_size), size=(1, hidden_size))
    t["b_d"] = np.zeros(1)
    return LstmParams(t)


class SequenceCache:
    """Activations retained by the forward pass for BPTT.

    All arrays are step-major. A holds the gate activations per step in
    STACK_ORDER blocks: columns [0,H) forget, [H,2H) input, [2H,3H)
    output, [3H,4H) candidate. H and C have L+1 slots, slot 0 being the
    zero initial state, so H[t] / C[t] are the previous state at step t.
    """

    __slots__ = ("X", "A", "H", "C", "TanhC")

    def __init__(self, X: np.ndarray, hidden_size: int):
        L, B, _ = X.shape
        self.X = X
        self.A = np.empty((L, B, 4 * hidden_size))
        self.H = np.zeros((L + 1, B, hidden_size))
        self.C = np.zeros((L + 1, B, hidden_size))
        self.TanhC = np.empty((L, B, hidden_size))

    @property
    def steps(self) -> int:
        return self.A.shape[0]

    def gates(self, t: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(f, g, i, o) activation views for step t."""
        H = self.TanhC.shape[2]
        At = self.A[t]
        return At[:, :H], At[:, 3 * H :], At[:, H : 2 * H], At[:, 2 * H : 3 * H]


def forward_stacked(
    XT: np.ndarray,
    W_all: np.ndarray,
    U_all: np.ndarray,
    b_all: np.ndarray,
    w_d: np.ndarray,
    b_d: float,
    keep_cache: bool = True,
) -> tuple[np.ndarray, SequenceCache | None]:
    """Forward pass on stacked gate matrices; XT is step-major (L, B, D)."""
    L, B, D = XT.shape
    H = U_all.shape[1]
    U_allT = np.ascontiguousarray(U_all.T)
    # input contributions for every step at once, bias folded in
    xp = (XT.reshape(L * B, D) @ W_all.T).reshape(L, B, 4 * H)
    xp += b_all

    if keep_cache:
        cache = SequenceCache(XT, H)
        A, Hc, Cc, TC = cache.A, cache.H, cache.C, cache.TanhC
        for t in range(L):
            At = A[t]
            np.matmul(Hc[t], U_allT, out=At)
            At += xp[t]
            _sigmoid_inplace(At[:, : 3 * H])
            gb = At[:, 3 * H :]
            np.tanh(gb, out=gb)
            c_next = Cc[t + 1]
            np.multiply(At[:, :H], Cc[t], out=c_next)
            c_next += At[:, H : 2 * H] * gb
            np.tanh(c_next, out=TC[t])
            np.multiply(At[:, 2 * H : 3 * H], TC[t], out=Hc[t + 1])
        pred = Hc[L] @ w_d + b_d
        return pred, cache

    h = np.zeros((B, H))
    c = np.zeros((B, H))
    At = np.empty((B, 4 * H))
    for t in range(L):
        np.matmul(h, U_allT, out=At)
        At += xp[t]
        _sigmoid_inplace(At[:, : 3 * H])
        gb = At[:, 3 * H :]
        np.tanh(gb, out=gb)
        c = At[:, :H] * c + At[:, H : 2 * H] * gb
        h = At[:, 2 * H : 3 * H] * np.tanh(c)
    return h @ w_d + b_d, None


def backward_stacked(
    cache: SequenceCache,
    d_pred: np.ndarray,
    U_all: np.ndarray,
    w_d: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, float]:
    """BPTT on the stacked representation.

    Returns (dW_all, dU_all, db_all, dw_d, db_d) in STACK_ORDER blocks,
    summed over the batch; d_pred is the (B,) upstream prediction gradient.
    """
    L, B, H4 = cache.A.shape
    H = H4 // 4
    dw_d = d_pred @ cache.H[L]
    db_d = float(d_pred.sum())

    dA = np.empty((L, B, H4))
    dh = d_pred[:, None] * w_d[None, :]
    dc = np.zeros_like(dh)
    for t in range(L - 1, -1, -1):
        At = cache.A[t]
        f = At[:, :H]
        i = At[:, H : 2 * H]
        o = At[:, 2 * H : 3 * H]
        g = At[:, 3 * H :]
        tc = cache.TanhC[t]
        dc += dh * o * (1.0 - tc * tc)
        dt_ = dA[t]
        np.multiply(dc * cache.C[t], f * (1.0 - f), out=dt_[:, :H])
        np.multiply(dc * g, i * (1.0 - i), out=dt_[:, H : 2 * H])
        np.multiply(dh * tc, o * (1.0 - o), out=dt_[:, 2 * H : 3 * H])
        np.multiply(dc * i, 1.0 - g * g, out=dt_[:, 3 * H :])
        dh = dt_ @ U_all
        dc *= f
    flatA = dA.reshape(L * B, H4)
    dW_all = flatA.T @ cache.X.reshape(L * B, -1)
    dU_all = flatA.T @ cache.H[:L].reshape(L * B, H)
    db_all = flatA.sum(axis=0)
    return dW_all, dU_all, db_all, dw_d, db_d


def split_stacked_grads(
    dW_all: np.ndarray,
    dU_all: np.ndarray,
    db_all: np.ndarray,
    dw_d: np.ndarray,
    db_d: float,
) -> dict[str, np.ndarray]:
    H = dU_all.shape[1]
    grads: dict[str, np.ndarray] = {"W_d": dw_d[None, :].copy(), "b_d": np.array([db_d])}
    for k, gate in enumerate(STACK_ORDER):
        grads[f"W_{gate}"] = dW_all[k * H : (k + 1) * H]
        grads[f"U_{gate}"] = dU_all[k * H : (k + 1) * H]
        grads[f"b_{gate}"] = db_all[k * H : (k + 1) * H]
    return grads


def _to_step_major(X: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(X, dtype=np.float64).transpose(1, 0, 2))


def forward_batch(
    X: np.ndarray, params: LstmParams, keep_caches: bool = True
) -> tuple[np.ndarray, SequenceCache | None]:
    """Run full sequences through the network; X is (B, L, D).

    Starts from zero state, returns readout predictions (B,) and the
    cache needed by backward_batch (None when keep_caches is False).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3:
        raise ValueError(f"X must be (batch, steps, features), got shape {X.shape}")
    if X.shape[1] == 0:
        raise ValueError("empty input sequence")
    if X.shape[2] != params.input_size:
        raise ValueError(
            f"feature count {X.shape[2]} != params input size {params.input_size}"
        )
    W_all, U_all, b_all = params.stacked()
    return forward_stacked(
        _to_step_major(X), W_all, U_all, b_all,
        params["W_d"][0], float(params["b_d"][0]), keep_caches,
    )


def backward_batch(
    cache: SequenceCache, d_pred: np.ndarray, params: LstmParams
) -> dict[str, np.ndarray]:
    """BPTT through the cached steps; d_pred is (B,) upstream gradient.

    Returns gradients summed over the batch for every parameter tensor.
    """
    if cache is None or cache.steps == 0:
        raise ValueError("no cached steps to backpropagate through")
    B = cache.A.shape[1]
    d_pred = np.asarray(d_pred, dtype=np.float64)
    if d_pred.shape != (B,):
        raise ValueError(f"d_pred must be ({B},), got {d_pred.shape}")
    _, U_all, _ = params.stacked()
    parts = backward_stacked(cache, d_pred, U_all, params["W_d"][0])
    return split_stacked_grads(*parts)


def lstm_cell_forward(
    x_t: np.ndarray, state: LstmState, params: LstmParams
) -> tuple[LstmState, dict[str, np.ndarray]]:
    """Single cell step for one feature vector; returns new state and gate cache."""
    x = np.asarray(x_t, dtype=np.float64)
    if x.shape != (params.input_size,):
        raise ValueError(f"x_t has shape {x.shape}, expected ({params.input_size},)")
    if state.hidden.shape != (params.hidden_size,):
        raise ValueError("state size does not match params")
    f = sigmoid(params["W_f"] @ x + params["U_f"] @ state.hidden + params["b_f"])
    g = np.tanh(params["W_g"] @ x + params["U_g"] @ state.hidden + params["b_g"])
    i = sigmoid(params["W_i"] @ x + params["U_i"] @ state.hidden + params["b_i"])
    o = sigmoid(params["W_o"] @ x + params["U_o"] @ state.hidden + params["b_o"])
    c = f * state.cell + i * g
    h = o * np.tanh(c)
    cache = {"x": x, "h_prev": state.hidden, "c_prev": state.cell,
             "f": f, "g": g, "i": i, "o": o, "c": c, "h": h}
    return LstmState(h, c), cache


def forward_sequence(
    X: np.ndarray, params: LstmParams
) -> tuple[float, SequenceCache]:
    """Single-sequence forward pass; X is (L, D). Returns (prediction, cache)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be (steps, features), got shape {X.shape}")
    pred, cache = forward_batch(X[None, :, :], params)
    return float(pred[0]), cache


def backward_sequence(
    cache: SequenceCache, d_prediction: float, params: LstmParams
) -> dict[str, np.ndarray]:
    """Gradient of the scalar prediction w.r.t. every parameter (one sequence)."""
    return backward_batch(cache, np.array([float(d_prediction)]), params)
