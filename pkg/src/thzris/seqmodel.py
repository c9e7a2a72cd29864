"""GRU sequence classifier on raw numpy, with exact analytic gradients.

The network follows the handoff predictor layout: each trajectory step is
encoded as [standardized position (3); beam embedding (a)], the encoded
window runs through stacked GRU layers with inverted dropout between them,
and the top layer's final state feeds an affine softmax head. Everything is
float64; backpropagation through time covers every parameter, embedding
rows included, so gradients can be checked against finite differences.

Gate equations, pinned for exact tests:
    z = sigmoid(x W_z + h U_z + b_z)
    r = sigmoid(x W_r + h U_r + b_r)
    hcand = tanh(x W_h + (r*h) U_h + b_h)
    h_new = (1 - z)*h + z*hcand
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit as sigmoid

CHECKPOINT_VERSION = 1


@dataclass
class InputEncoder:
    """Beam-index embedding plus position standardization.

    Embedding rows are standard-normal at init; the position statistics are
    fit on the training split only (see fit_position_stats).
    """

    embedding: np.ndarray            # (vocab, embed_dim)
    position_mean: np.ndarray = field(default_factory=lambda: np.zeros(3))
    position_std: np.ndarray = field(default_factory=lambda: np.ones(3))

    def __post_init__(self):
        self.embedding = np.asarray(self.embedding, dtype=float)
        self.position_mean = np.asarray(self.position_mean, dtype=float)
        self.position_std = np.asarray(self.position_std, dtype=float)
        if self.embedding.ndim != 2 or self.embedding.shape[1] < 1:
            raise ValueError("embedding must be (vocab, embed_dim) with embed_dim >= 1")
        if np.any(self.position_std <= 0):
            raise ValueError("position std must be strictly positive")

    @property
    def vocab(self) -> int:
        return self.embedding.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.embedding.shape[1]


def fit_position_stats(enc: InputEncoder, positions: np.ndarray) -> None:
    """Set mean/std from an (..., 3) stack of training positions."""
    flat = np.asarray(positions, dtype=float).reshape(-1, 3)
    enc.position_mean = flat.mean(axis=0)
    std = flat.std(axis=0)
    enc.position_std = np.where(std > 0, std, 1.0)


def encode_step(enc: InputEncoder, position, serving_beam: int) -> np.ndarray:
    """One encoded step: [(pos - mean)/std ; embedding row], length 3 + embed_dim."""
    serving_beam = int(serving_beam)
    if not (0 <= serving_beam < enc.vocab):
        raise ValueError(f"serving beam {serving_beam} outside vocabulary of {enc.vocab}")
    pos = (np.asarray(position, dtype=float) - enc.position_mean) / enc.position_std
    return np.concatenate([pos, enc.embedding[serving_beam]])


def encode_windows(enc: InputEncoder, positions: np.ndarray, beams: np.ndarray) -> np.ndarray:
    """Vectorized encode_step over (B, T, 3) positions and (B, T) beam indices."""
    positions = np.asarray(positions, dtype=float)
    beams = np.asarray(beams)
    if np.any(beams < 0) or np.any(beams >= enc.vocab):
        raise ValueError("beam index outside embedding vocabulary")
    std_pos = (positions - enc.position_mean) / enc.position_std
    return np.concatenate([std_pos, enc.embedding[beams]], axis=-1)


@dataclass
class GruLayerParams:
    w_z: np.ndarray
    w_r: np.ndarray
    w_h: np.ndarray
    u_z: np.ndarray
    u_r: np.ndarray
    u_h: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.w_z.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.w_z.shape[1]


@dataclass
class ModelParams:
    encoder: InputEncoder
    layers: list[GruLayerParams]
    head_w: np.ndarray  # (hidden, n_classes)
    head_b: np.ndarray  # (n_classes,)
    dropout_rate: float = 0.2
    window: int = 7

    def __post_init__(self):
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError(f"dropout rate must be in [0, 1), got {self.dropout_rate}")

    @property
    def n_classes(self) -> int:
        return self.head_w.shape[1]


def _uniform_fan_in(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_model(vocab: int, n_classes: int, rng: np.random.Generator, *,
               embed_dim: int = 50, hidden_size: int = 20, n_layers: int = 2,
               dropout_rate: float = 0.2, window: int = 7) -> ModelParams:
    """Seeded initialization: standard-normal embedding rows, uniform
    +-1/sqrt(fan_in) for recurrent and head parameters."""
    encoder = InputEncoder(embedding=rng.standard_normal((vocab, embed_dim)))
    layers = []
    in_dim = 3 + embed_dim
    for _ in range(n_layers):
        layers.append(GruLayerParams(
            w_z=_uniform_fan_in(rng, in_dim, (in_dim, hidden_size)),
            w_r=_uniform_fan_in(rng, in_dim, (in_dim, hidden_size)),
            w_h=_uniform_fan_in(rng, in_dim, (in_dim, hidden_size)),
            u_z=_uniform_fan_in(rng, hidden_size, (hidden_size, hidden_size)),
            u_r=_uniform_fan_in(rng, hidden_size, (hidden_size, hidden_size)),
            u_h=_uniform_fan_in(rng, hidden_size, (hidden_size, hidden_size)),
            b_z=_uniform_fan_in(rng, hidden_size, hidden_size),
            b_r=_uniform_fan_in(rng, hidden_size, hidden_size),
            b_h=_uniform_fan_in(rng, hidden_size, hidden_size),
        ))
        in_dim = hidden_size
    head_w = _uniform_fan_in(rng, hidden_size, (hidden_size, n_classes))
    head_b = _uniform_fan_in(rng, hidden_size, n_classes)
    return ModelParams(encoder=encoder, layers=layers, head_w=head_w, head_b=head_b,
                       dropout_rate=dropout_rate, window=window)


def gru_cell(params: GruLayerParams, x: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
    """One recurrence step; accepts a single vector or a (B, dim) batch."""
    x = np.asarray(x, dtype=float)
    h_prev = np.asarray(h_prev, dtype=float)
    if x.shape[-1] != params.input_dim or h_prev.shape[-1] != params.hidden_size:
        raise ValueError(f"gru_cell shapes: x has {x.shape[-1]} features "
                         f"(want {params.input_dim}), h has {h_prev.shape[-1]} "
                         f"(want {params.hidden_size})")
    z = sigmoid(x @ params.w_z + h_prev @ params.u_z + params.b_z)
    r = sigmoid(x @ params.w_r + h_prev @ params.u_r + params.b_r)
    hcand = np.tanh(x @ params.w_h + (r * h_prev) @ params.u_h + params.b_h)
    return (1.0 - z) * h_prev + z * hcand


def _layer_forward(params: GruLayerParams, x_seq: np.ndarray):
    """Run one GRU layer over (B, T, in_dim); returns outputs and step caches."""
    B, T, _ = x_seq.shape
    H = params.hidden_size
    h = np.zeros((B, H))
    outputs = np.empty((B, T, H))
    cache = {k: np.empty((B, T, H)) for k in ("h_prev", "z", "r", "hcand")}
    for t in range(T):
        x = x_seq[:, t]
        z = sigmoid(x @ params.w_z + h @ params.u_z + params.b_z)
        r = sigmoid(x @ params.w_r + h @ params.u_r + params.b_r)
        hcand = np.tanh(x @ params.w_h + (r * h) @ params.u_h + params.b_h)
        cache["h_prev"][:, t] = h
        cache["z"][:, t] = z
        cache["r"][:, t] = r
        cache["hcand"][:, t] = hcand
        h = (1.0 - z) * h + z * hcand
        outputs[:, t] = h
    return outputs, cache


def _layer_backward(params: GruLayerParams, x_seq, outputs, cache, d_outputs):
    """BPTT through one layer. d_outputs is (B, T, H) gradient on the outputs;
    returns (d_inputs, param grad dict)."""
    B, T, _ = x_seq.shape
    grads = {name: np.zeros_like(getattr(params, name))
             for name in ("w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h")}
    d_inputs = np.zeros_like(x_seq)
    dh = np.zeros((B, params.hidden_size))
    for t in range(T - 1, -1, -1):
        dh = dh + d_outputs[:, t]
        x = x_seq[:, t]
        h_prev = cache["h_prev"][:, t]
        z, r, hcand = cache["z"][:, t], cache["r"][:, t], cache["hcand"][:, t]

        dz = dh * (hcand - h_prev)
        dhcand = dh * z
        dh_prev = dh * (1.0 - z)

        da_h = dhcand * (1.0 - hcand ** 2)           # pre-tanh
        grads["w_h"] += x.T @ da_h
        grads["u_h"] += (r * h_prev).T @ da_h
        grads["b_h"] += da_h.sum(axis=0)
        drh = da_h @ params.u_h.T                     # gradient on r*h_prev
        dr = drh * h_prev
        dh_prev = dh_prev + drh * r

        da_z = dz * z * (1.0 - z)                     # pre-sigmoid
        grads["w_z"] += x.T @ da_z
        grads["u_z"] += h_prev.T @ da_z
        grads["b_z"] += da_z.sum(axis=0)
        dh_prev = dh_prev + da_z @ params.u_z.T

        da_r = dr * r * (1.0 - r)
        grads["w_r"] += x.T @ da_r
        grads["u_r"] += h_prev.T @ da_r
        grads["b_r"] += da_r.sum(axis=0)
        dh_prev = dh_prev + da_r @ params.u_r.T

        d_inputs[:, t] = da_z @ params.w_z.T + da_r @ params.w_r.T + da_h @ params.w_h.T
        dh = dh_prev
    return d_inputs, grads


def _dropout_masks(model: ModelParams, batch_size: int, rng: np.random.Generator | None):
    """Inverted-dropout masks for the gaps between GRU layers (train mode)."""
    gaps = len(model.layers) - 1
    if rng is None or model.dropout_rate == 0.0 or gaps == 0:
        return [None] * gaps
    keep = 1.0 - model.dropout_rate
    return [(rng.random((batch_size, model.window, model.layers[i].hidden_size)) < keep)
            / keep for i in range(gaps)]


def _forward_stack(model: ModelParams, encoded: np.ndarray, masks):
    """Encoded (B, T, 3+a) through all layers; returns logits and caches."""
    x = encoded
    stages = []
    for i, layer in enumerate(model.layers):
        outputs, cache = _layer_forward(layer, x)
        stages.append({"inputs": x, "outputs": outputs, "cache": cache})
        x = outputs
        if i < len(model.layers) - 1 and masks[i] is not None:
            x = x * masks[i]
    final = x[:, -1]
    logits = final @ model.head_w + model.head_b
    return logits, stages, final


def forward(model: ModelParams, encoded: np.ndarray, *, train: bool = False,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Logits for one encoded window (T, 3+a) or a batch (B, T, 3+a).

    Dropout between GRU layers is active only with train=True, drawing masks
    from rng; eval mode is deterministic.
    """
    encoded = np.asarray(encoded, dtype=float)
    single = encoded.ndim == 2
    if single:
        encoded = encoded[None]
    if encoded.ndim != 3 or encoded.shape[1] != model.window:
        raise ValueError(f"expected windows of {model.window} steps, got shape "
                         f"{encoded.shape[1:] if encoded.ndim == 3 else encoded.shape}")
    if train and rng is None:
        raise ValueError("train-mode forward needs an rng for dropout")
    masks = _dropout_masks(model, encoded.shape[0], rng if train else None)
    logits, _, _ = _forward_stack(model, encoded, masks)
    return logits[0] if single else logits


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood of integer labels under softmax(logits)."""
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(labels)
    shifted = logits - np.max(logits, axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(len(labels)), labels]
    return float(np.mean(log_norm - picked))


def loss_and_grad(model: ModelParams, positions: np.ndarray, beams: np.ndarray,
                  labels: np.ndarray, rng: np.random.Generator | None = None):
    """Mean cross-entropy over the batch and gradients for every parameter.

    positions: (B, T, 3) raw meters; beams: (B, T) combined serving indices;
    labels: (B,) class indices. Passing rng enables dropout (train mode).
    Returns (loss, grads) with grads keyed like params_dict(model).
    """
    positions = np.asarray(positions, dtype=float)
    beams = np.asarray(beams)
    labels = np.asarray(labels)
    if np.any(labels < 0) or np.any(labels >= model.n_classes):
        raise ValueError("label outside the classifier range")
    B = positions.shape[0]
    encoded = encode_windows(model.encoder, positions, beams)
    if encoded.shape[1] != model.window:
        raise ValueError(f"expected windows of {model.window} steps, got {encoded.shape[1]}")
    masks = _dropout_masks(model, B, rng)
    logits, stages, final = _forward_stack(model, encoded, masks)

    probs = softmax(logits)
    loss = cross_entropy(logits, labels)
    dlogits = probs.copy()
    dlogits[np.arange(B), labels] -= 1.0
    dlogits /= B

    grads = {"head_w": final.T @ dlogits, "head_b": dlogits.sum(axis=0)}
    d_final = dlogits @ model.head_w.T

    # Walk the stack top-down; only the last step of the top layer feeds the head.
    d_out = np.zeros_like(stages[-1]["outputs"])
    d_out[:, -1] = d_final
    for i in range(len(model.layers) - 1, -1, -1):
        stage = stages[i]
        d_in, layer_grads = _layer_backward(model.layers[i], stage["inputs"],
                                            stage["outputs"], stage["cache"], d_out)
        for name, g in layer_grads.items():
            grads[f"layer{i}.{name}"] = g
        if i > 0:
            d_out = d_in if masks[i - 1] is None else d_in * masks[i - 1]

    d_encoded = d_in  # gradient on the layer-0 input sequence
    d_embed = np.zeros_like(model.encoder.embedding)
    np.add.at(d_embed, beams.reshape(-1), d_encoded[..., 3:].reshape(-1, model.encoder.embed_dim))
    grads["embedding"] = d_embed
    return loss, grads


def params_dict(model: ModelParams) -> dict[str, np.ndarray]:
    """Trainable arrays by name, referencing the live model storage."""
    out = {"embedding": model.encoder.embedding}
    for i, layer in enumerate(model.layers):
        for name in ("w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h"):
            out[f"layer{i}.{name}"] = getattr(layer, name)
    out["head_w"] = model.head_w
    out["head_b"] = model.head_b
    return out


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def init_adam(params: dict[str, np.ndarray], lr: float = 1e-3, *,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=0,
                     m={k: np.zeros_like(p) for k, p in params.items()},
                     v={k: np.zeros_like(p) for k, p in params.items()})


def adam_step(state: AdamState, params: dict[str, np.ndarray],
              grads: dict[str, np.ndarray]) -> AdamState:
    """Bias-corrected Adam update, in place on the parameter arrays."""
    state.step += 1
    t = state.step
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ValueError(f"{key}: gradient shape {g.shape} != parameter {p.shape}")
        m = state.m[key]
        v = state.v[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state


def save_model(model: ModelParams, path, extra_meta: dict | None = None) -> None:
    """Checkpoint: every tensor as little-endian float64 plus a JSON meta record."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "n_layers": len(model.layers),
        "dropout_rate": model.dropout_rate,
        "window": model.window,
    }
    if extra_meta:
        meta["extra"] = extra_meta
    arrays = {k: np.ascontiguousarray(v, dtype="<f8") for k, v in params_dict(model).items()}
    arrays["position_mean"] = model.encoder.position_mean.astype("<f8")
    arrays["position_std"] = model.encoder.position_std.astype("<f8")
    arrays["meta_json"] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_model(path) -> ModelParams:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta_json"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"checkpoint version {meta.get('version')} unsupported "
                             f"(this build reads {CHECKPOINT_VERSION})")
        encoder = InputEncoder(embedding=data["embedding"],
                               position_mean=data["position_mean"],
                               position_std=data["position_std"])
        layers = []
        for i in range(meta["n_layers"]):
            layers.append(GruLayerParams(**{
                name: data[f"layer{i}.{name}"]
                for name in ("w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h")
            }))
        return ModelParams(encoder=encoder, layers=layers, head_w=data["head_w"],
                           head_b=data["head_b"], dropout_rate=meta["dropout_rate"],
                           window=meta["window"])
