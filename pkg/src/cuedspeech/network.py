"""Bidirectional GRU phonetic decoders with exact backpropagation.

Three fusion layouts over the (lips, hand, fingertip) streams:

  early-fusion   one Bi-GRU over the concatenated 42-dim input
  two-stream     per-stream Bi-GRUs (lips, hand) -> fusion Bi-GRU
  three-stream   per-stream Bi-GRUs (all three)  -> fusion Bi-GRU

Gate recurrence (per direction, h_0 = 0):

  z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
  r_t = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
  c_t = tanh(W_h x_t + U_h (r_t * h_{t-1}) + b_h)
  h_t = (1 - z_t) * h_{t-1} + z_t * c_t

Direction outputs are concatenated per frame; a final affine layer plus
row-wise softmax yields per-frame class posteriors (blank last). All math is
float64 and the forward trace retains everything backprop needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ARCHITECTURES = ("early-fusion", "two-stream", "three-stream")
STREAMS_BY_ARCH = {
    "early-fusion": ("concat",),
    "two-stream": ("lips", "hand"),
    "three-stream": ("lips", "hand", "fingertip"),
}
STREAM_DIMS = {"lips": 20, "hand": 20, "fingertip": 2, "concat": 42}

DEFAULT_HIDDEN = 128
DEFAULT_FUSION_HIDDEN = 256

_DIRECTION_TENSORS = ("w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h")

CHECKPOINT_FORMAT = "cs-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class GruDirectionParams:
    w_z: np.ndarray  # (h, d)
    w_r: np.ndarray
    w_h: np.ndarray
    u_z: np.ndarray  # (h, h)
    u_r: np.ndarray
    u_h: np.ndarray
    b_z: np.ndarray  # (h,)
    b_r: np.ndarray
    b_h: np.ndarray

    @property
    def hidden_dim(self) -> int:
        return self.w_z.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_z.shape[1]


@dataclass
class GruLayerParams:
    fwd: GruDirectionParams
    bwd: GruDirectionParams

    @property
    def hidden_dim(self) -> int:
        return self.fwd.hidden_dim

    @property
    def input_dim(self) -> int:
        return self.fwd.input_dim

    @property
    def output_dim(self) -> int:
        return 2 * self.hidden_dim


@dataclass
class ModelParams:
    architecture: str
    stream_layers: dict[str, GruLayerParams]
    fusion_layer: GruLayerParams | None
    output_weights: np.ndarray  # (n_classes + 1, D)
    output_bias: np.ndarray    # (n_classes + 1,)

    @property
    def n_outputs(self) -> int:
        return self.output_weights.shape[0]

    @property
    def alphabet_size(self) -> int:
        return self.n_outputs - 1


@dataclass(frozen=True)
class Posteriorgram:
    """Per-frame class probabilities, blank in the last column."""

    probs: np.ndarray  # (T, K + 1)

    def __post_init__(self):
        p = self.probs
        if p.ndim != 2 or p.shape[1] < 2:
            raise ValueError("posteriorgram must be (T, K+1) with K >= 1")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("posteriorgram entries must be finite and non-negative")
        if np.max(np.abs(p.sum(axis=1) - 1.0)) > 1e-9:
            raise ValueError("posteriorgram rows must sum to 1")

    @property
    def n_frames(self) -> int:
        return self.probs.shape[0]

    @property
    def n_classes(self) -> int:
        return self.probs.shape[1] - 1

    @property
    def blank(self) -> int:
        return self.probs.shape[1] - 1


def _init_direction(rng, input_dim: int, hidden_dim: int) -> GruDirectionParams:
    a = np.sqrt(1.0 / hidden_dim)
    def w(shape):
        return rng.uniform(-a, a, size=shape)
    return GruDirectionParams(
        w_z=w((hidden_dim, input_dim)),
        w_r=w((hidden_dim, input_dim)),
        w_h=w((hidden_dim, input_dim)),
        u_z=w((hidden_dim, hidden_dim)),
        u_r=w((hidden_dim, hidden_dim)),
        u_h=w((hidden_dim, hidden_dim)),
        b_z=np.zeros(hidden_dim),
        b_r=np.zeros(hidden_dim),
        b_h=np.zeros(hidden_dim),
    )


def init_params(
    architecture: str,
    alphabet_size: int,
    seed: int,
    hidden: int = DEFAULT_HIDDEN,
    fusion_hidden: int = DEFAULT_FUSION_HIDDEN,
) -> ModelParams:
    """Seeded uniform initialisation; bound sqrt(1/hidden) per layer, zero biases."""
    if architecture not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {architecture!r}; expected one of {ARCHITECTURES}")
    if alphabet_size < 1:
        raise ValueError("alphabet_size must be >= 1")
    rng = np.random.default_rng(seed)
    stream_layers = {}
    for name in STREAMS_BY_ARCH[architecture]:
        stream_layers[name] = GruLayerParams(
            fwd=_init_direction(rng, STREAM_DIMS[name], hidden),
            bwd=_init_direction(rng, STREAM_DIMS[name], hidden),
        )
    fusion_layer = None
    last_dim = 2 * hidden
    if architecture != "early-fusion":
        fusion_in = 2 * hidden * len(STREAMS_BY_ARCH[architecture])
        fusion_layer = GruLayerParams(
            fwd=_init_direction(rng, fusion_in, fusion_hidden),
            bwd=_init_direction(rng, fusion_in, fusion_hidden),
        )
        last_dim = 2 * fusion_hidden
    n_out = alphabet_size + 1
    a = np.sqrt(1.0 / last_dim)
    return ModelParams(
        architecture=architecture,
        stream_layers=stream_layers,
        fusion_layer=fusion_layer,
        output_weights=rng.uniform(-a, a, size=(n_out, last_dim)),
        output_bias=np.zeros(n_out),
    )


# ---------------------------------------------------------------------------
# forward / backward


def _sigmoid_(x):
    # in-place logistic via tanh: saturates cleanly without overflow
    x *= 0.5
    np.tanh(x, out=x)
    x *= 0.5
    x += 0.5
    return x


@dataclass
class _DirectionTrace:
    x: np.ndarray   # (T, d) in this direction's own time order
    z: np.ndarray   # (T, h)
    r: np.ndarray
    c: np.ndarray   # candidate activations
    h: np.ndarray


@dataclass
class _LayerTrace:
    fwd: _DirectionTrace
    bwd: _DirectionTrace
    out: np.ndarray  # (T, 2h) in corpus time order


@dataclass
class ForwardTrace:
    stream_inputs: dict[str, np.ndarray]
    stream: dict[str, _LayerTrace]
    fusion: _LayerTrace | None
    last: np.ndarray    # (T, D) input to the output layer
    logits: np.ndarray  # (T, K + 1)
    probs: np.ndarray


def _run_direction(p: GruDirectionParams, x: np.ndarray) -> _DirectionTrace:
    T = x.shape[0]
    h_dim = p.hidden_dim
    w_all = np.concatenate([p.w_z, p.w_r, p.w_h], axis=0)          # (3h, d)
    b_all = np.concatenate([p.b_z, p.b_r, p.b_h])
    u_zr = np.concatenate([p.u_z, p.u_r], axis=0)                  # (2h, h)
    x_proj = x @ w_all.T + b_all                                   # (T, 3h)
    ZR = np.empty((T, 2 * h_dim))
    C = np.empty((T, h_dim))
    H = np.empty((T, h_dim))
    h = np.zeros(h_dim)
    buf = np.empty(h_dim)
    # the writes land straight in the trace rows; no per-step allocation
    for t in range(T):
        zr = ZR[t]
        np.matmul(u_zr, h, out=zr)
        zr += x_proj[t, : 2 * h_dim]
        _sigmoid_(zr)
        z, r = zr[:h_dim], zr[h_dim:]
        c = C[t]
        np.multiply(r, h, out=buf)
        np.matmul(p.u_h, buf, out=c)
        c += x_proj[t, 2 * h_dim :]
        np.tanh(c, out=c)
        h_new = H[t]
        np.subtract(c, h, out=h_new)
        h_new *= z
        h_new += h
        h = h_new
    return _DirectionTrace(x=x, z=ZR[:, :h_dim], r=ZR[:, h_dim:], c=C, h=H)


def _run_layer(layer: GruLayerParams, x: np.ndarray) -> _LayerTrace:
    fwd = _run_direction(layer.fwd, x)
    bwd = _run_direction(layer.bwd, np.ascontiguousarray(x[::-1]))
    out = np.concatenate([fwd.h, bwd.h[::-1]], axis=1)
    return _LayerTrace(fwd=fwd, bwd=bwd, out=out)


def _direction_backward(p: GruDirectionParams, trace: _DirectionTrace, d_h: np.ndarray):
    """BPTT through one direction. Returns (grads dict, d_input)."""
    T, h_dim = trace.h.shape
    u_zr_t = np.ascontiguousarray(np.concatenate([p.u_z, p.u_r], axis=0).T)
    u_h_t = np.ascontiguousarray(p.u_h.T)
    dA_zr = np.empty((T, 2 * h_dim))
    dA_h = np.empty((T, h_dim))
    zeros = np.zeros(h_dim)
    gh = np.empty(h_dim)
    buf = np.empty(h_dim)
    drh = np.empty(h_dim)
    ucar = np.empty(h_dim)
    carry = np.zeros(h_dim)
    for t in range(T - 1, -1, -1):
        np.add(d_h[t], carry, out=gh)
        h_prev = trace.h[t - 1] if t > 0 else zeros
        z, r, c = trace.z[t], trace.r[t], trace.c[t]
        da_h = dA_h[t]
        np.multiply(c, c, out=buf)
        np.subtract(1.0, buf, out=buf)      # tanh'
        np.multiply(gh, z, out=da_h)
        da_h *= buf
        da_zr = dA_zr[t]
        da_z, da_r = da_zr[:h_dim], da_zr[h_dim:]
        np.subtract(c, h_prev, out=da_z)    # dz
        da_z *= gh
        np.subtract(1.0, z, out=buf)
        np.multiply(buf, gh, out=carry)     # (1-z) gh part of d h_{t-1}
        buf *= z                            # z (1-z) = sigmoid'
        da_z *= buf
        np.matmul(u_h_t, da_h, out=drh)
        np.multiply(drh, h_prev, out=da_r)  # dr
        np.subtract(1.0, r, out=buf)
        buf *= r
        da_r *= buf
        drh *= r
        carry += drh
        np.matmul(u_zr_t, da_zr, out=ucar)
        carry += ucar
    h_prev_all = np.vstack([np.zeros((1, h_dim)), trace.h[:-1]])
    dA_z, dA_r = dA_zr[:, :h_dim], dA_zr[:, h_dim:]
    grads = {
        "w_z": dA_z.T @ trace.x,
        "w_r": dA_r.T @ trace.x,
        "w_h": dA_h.T @ trace.x,
        "u_z": dA_z.T @ h_prev_all,
        "u_r": dA_r.T @ h_prev_all,
        "u_h": dA_h.T @ (trace.r * h_prev_all),
        "b_z": dA_z.sum(axis=0),
        "b_r": dA_r.sum(axis=0),
        "b_h": dA_h.sum(axis=0),
    }
    d_x = dA_z @ p.w_z + dA_r @ p.w_r + dA_h @ p.w_h
    return grads, d_x


def _layer_backward(layer: GruLayerParams, trace: _LayerTrace, d_out: np.ndarray):
    h_dim = layer.hidden_dim
    g_fwd, dx_fwd = _direction_backward(layer.fwd, trace.fwd, d_out[:, :h_dim])
    d_bwd = np.ascontiguousarray(d_out[:, h_dim:][::-1])
    g_bwd, dx_bwd_rev = _direction_backward(layer.bwd, trace.bwd, d_bwd)
    return g_fwd, g_bwd, dx_fwd + dx_bwd_rev[::-1]


def _stream_inputs(params: ModelParams, streams) -> dict[str, np.ndarray]:
    mats = {
        "lips": np.asarray(streams.lips, dtype=float),
        "hand": np.asarray(streams.hand, dtype=float),
        "fingertip": np.asarray(streams.fingertip, dtype=float),
    }
    if params.architecture == "early-fusion":
        mats = {"concat": np.concatenate([mats["lips"], mats["hand"], mats["fingertip"]], axis=1)}
    inputs = {}
    for name in STREAMS_BY_ARCH[params.architecture]:
        x = mats[name]
        want = params.stream_layers[name].input_dim
        if x.shape[1] != want:
            raise ValueError(f"stream {name!r} has dimension {x.shape[1]}, model expects {want}")
        inputs[name] = x
    return inputs


def forward(params: ModelParams, streams) -> tuple[Posteriorgram, ForwardTrace]:
    """Run the network over one utterance's StreamSet."""
    inputs = _stream_inputs(params, streams)
    T = next(iter(inputs.values())).shape[0]
    if T == 0:
        raise ValueError("cannot run the network on an empty utterance")
    stream_traces = {}
    outs = []
    for name in STREAMS_BY_ARCH[params.architecture]:
        tr = _run_layer(params.stream_layers[name], inputs[name])
        stream_traces[name] = tr
        outs.append(tr.out)
    fusion_trace = None
    if params.fusion_layer is not None:
        fusion_in = np.concatenate(outs, axis=1)
        fusion_trace = _run_layer(params.fusion_layer, fusion_in)
        last = fusion_trace.out
    else:
        last = outs[0]
    logits = last @ params.output_weights.T + params.output_bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    probs = expd / expd.sum(axis=1, keepdims=True)
    trace = ForwardTrace(
        stream_inputs=inputs,
        stream=stream_traces,
        fusion=fusion_trace,
        last=last,
        logits=logits,
        probs=probs,
    )
    return Posteriorgram(probs=probs), trace


def backward(params: ModelParams, trace: ForwardTrace, grad_wrt_logits: np.ndarray) -> dict[str, np.ndarray]:
    """Exact parameter gradients for a loss with the given logit gradient."""
    grad_wrt_logits = np.asarray(grad_wrt_logits, dtype=float)
    if grad_wrt_logits.shape != trace.logits.shape:
        raise ValueError(
            f"grad_wrt_logits shape {grad_wrt_logits.shape} does not match logits {trace.logits.shape}"
        )
    grads: dict[str, np.ndarray] = {
        "output.weight": grad_wrt_logits.T @ trace.last,
        "output.bias": grad_wrt_logits.sum(axis=0),
    }
    d_last = grad_wrt_logits @ params.output_weights
    names = STREAMS_BY_ARCH[params.architecture]
    if params.fusion_layer is not None:
        g_fwd, g_bwd, d_fusion_in = _layer_backward(params.fusion_layer, trace.fusion, d_last)
        _store_layer_grads(grads, "fusion", g_fwd, g_bwd)
        width = params.stream_layers[names[0]].output_dim
        d_stream_outs = [d_fusion_in[:, i * width : (i + 1) * width] for i in range(len(names))]
    else:
        d_stream_outs = [d_last]
    for name, d_out in zip(names, d_stream_outs):
        g_fwd, g_bwd, _ = _layer_backward(params.stream_layers[name], trace.stream[name], d_out)
        _store_layer_grads(grads, f"stream.{name}", g_fwd, g_bwd)
    return grads


def _store_layer_grads(grads: dict, prefix: str, g_fwd: dict, g_bwd: dict):
    for tname in _DIRECTION_TENSORS:
        grads[f"{prefix}.fwd.{tname}"] = g_fwd[tname]
        grads[f"{prefix}.bwd.{tname}"] = g_bwd[tname]


# ---------------------------------------------------------------------------
# tensor bookkeeping (optimiser and checkpoint support)


def named_tensors(params: ModelParams) -> dict[str, np.ndarray]:
    """All parameter tensors in a fixed, deterministic order."""
    out: dict[str, np.ndarray] = {}
    for name in STREAMS_BY_ARCH[params.architecture]:
        layer = params.stream_layers[name]
        for dname, direction in (("fwd", layer.fwd), ("bwd", layer.bwd)):
            for tname in _DIRECTION_TENSORS:
                out[f"stream.{name}.{dname}.{tname}"] = getattr(direction, tname)
    if params.fusion_layer is not None:
        for dname, direction in (("fwd", params.fusion_layer.fwd), ("bwd", params.fusion_layer.bwd)):
            for tname in _DIRECTION_TENSORS:
                out[f"fusion.{dname}.{tname}"] = getattr(direction, tname)
    out["output.weight"] = params.output_weights
    out["output.bias"] = params.output_bias
    return out


def _direction_from(tensors: dict, prefix: str) -> GruDirectionParams:
    return GruDirectionParams(**{t: tensors[f"{prefix}.{t}"] for t in _DIRECTION_TENSORS})


def replace_tensors(params: ModelParams, tensors: dict[str, np.ndarray]) -> ModelParams:
    """Rebuild a ModelParams with the given tensors (same architecture/shapes)."""
    stream_layers = {}
    for name in STREAMS_BY_ARCH[params.architecture]:
        stream_layers[name] = GruLayerParams(
            fwd=_direction_from(tensors, f"stream.{name}.fwd"),
            bwd=_direction_from(tensors, f"stream.{name}.bwd"),
        )
    fusion_layer = None
    if params.fusion_layer is not None:
        fusion_layer = GruLayerParams(
            fwd=_direction_from(tensors, "fusion.fwd"),
            bwd=_direction_from(tensors, "fusion.bwd"),
        )
    return ModelParams(
        architecture=params.architecture,
        stream_layers=stream_layers,
        fusion_layer=fusion_layer,
        output_weights=tensors["output.weight"],
        output_bias=tensors["output.bias"],
    )


def copy_params(params: ModelParams) -> ModelParams:
    return replace_tensors(params, {k: v.copy() for k, v in named_tensors(params).items()})


def save_checkpoint(params: ModelParams, path, alphabet_version: str = "custom"):
    hidden = next(iter(params.stream_layers.values())).hidden_dim
    obj = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "architecture": params.architecture,
        "alphabet": alphabet_version,
        "alphabet_size": params.alphabet_size,
        "hidden": hidden,
        "fusion_hidden": params.fusion_layer.hidden_dim if params.fusion_layer else None,
        "tensors": {k: v.tolist() for k, v in named_tensors(params).items()},
    }
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if obj.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a model checkpoint file")
    if obj.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {obj.get('version')}")
    tensors = {k: np.asarray(v, dtype=float) for k, v in obj["tensors"].items()}
    skeleton = init_params(
        obj["architecture"],
        obj["alphabet_size"],
        seed=0,
        hidden=obj["hidden"],
        fusion_hidden=obj["fusion_hidden"] or DEFAULT_FUSION_HIDDEN,
    )
    params = replace_tensors(skeleton, tensors)
    meta = {k: obj[k] for k in ("architecture", "alphabet", "alphabet_size", "hidden", "fusion_hidden")}
    return params, meta
