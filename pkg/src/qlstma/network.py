"""Recurrent sequence models: a classical LSTM baseline and two quantum cells.

All three variants share one gate algebra. At each step the input row and
the previous hidden state are concatenated into v = [x_t; h_{t-1}] and four
gate pre-activations are produced, then

    f, i, o = sigmoid(...),  c_tilde = tanh(...)
    c_t = f * c_{t-1} + i * c_tilde
    h_t = o * tanh(c_t)

The variants differ only in how v becomes the four pre-activations:

* ``lstma``      four linear maps straight from v.
* ``qlstma-sg``  one linear map compresses v to n_qubits rotation angles,
                 a single shared circuit turns them into Z expectations,
                 and four per-gate linear maps read the expectations out to
                 hidden width. The gates differ through their readouts.
* ``qlstma-ig``  four independent (compress, circuit, readout) triples.

After the unroll, self-attention mixes the hidden states across time,
dropout regularizes the mixed sequence during training, and a two-layer
head (relu then linear) maps each time step to one output value.

Gradient flow through a circuit uses the exact parameter-shift jacobians
from :mod:`qlstma.qsim`; everything classical is differentiated
analytically. Parameter gradients are returned as flat dicts keyed by the
same tensor names used for checkpoints (``gate_f.pre.weight``,
``vqc.angles``, ``attn.w_q``, ``head.l1.weight`` and so on).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import nncore, qsim
from .nncore import AttentionParams, LinearParams
from .qsim import VqcParams

VARIANTS = ("lstma", "qlstma-sg", "qlstma-ig")
GATE_NAMES = ("f", "i", "c", "o")


@dataclass
class CellState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, d_h: int) -> "CellState":
        return cls(np.zeros(d_h), np.zeros(d_h))


@dataclass
class LstmGateParams:
    """Four linear maps from [x; h] to hidden width, one per gate."""

    f: LinearParams
    i: LinearParams
    c: LinearParams
    o: LinearParams

    def gate(self, name: str) -> LinearParams:
        return getattr(self, name)


@dataclass
class QlstmGateBranch:
    """One gate's pipeline in the independent-gate cell."""

    pre: LinearParams  # (d_in + d_h) -> n_qubits
    vqc: VqcParams
    post: LinearParams  # n_qubits -> d_h


@dataclass
class QlstmSgParams:
    """Shared compression and circuit, per-gate readouts."""

    pre: LinearParams
    vqc: VqcParams
    post_f: LinearParams
    post_i: LinearParams
    post_c: LinearParams
    post_o: LinearParams

    def post(self, name: str) -> LinearParams:
        return getattr(self, f"post_{name}")


@dataclass
class QlstmIgParams:
    f: QlstmGateBranch
    i: QlstmGateBranch
    c: QlstmGateBranch
    o: QlstmGateBranch

    def gate(self, name: str) -> QlstmGateBranch:
        return getattr(self, name)


CellParams = Union[LstmGateParams, QlstmSgParams, QlstmIgParams]


@dataclass
class ModelParams:
    variant: str
    cell: CellParams
    attn: AttentionParams
    head1: LinearParams  # d_h -> dense, relu
    head2: LinearParams  # dense -> 1
    n_qubits: int | None = None

    @property
    def d_h(self) -> int:
        return self.attn.w_q.shape[0]


def init_model_params(
    variant: str,
    rng: np.random.Generator,
    d_in: int = 4,
    d_h: int = 64,
    dense: int = 32,
    n_qubits: int | None = None,
    n_layers: int = 1,
) -> ModelParams:
    """Seeded initialization: glorot-uniform weights, zero biases, circuit
    angles uniform in [0, 2pi). Draw order is fixed, so one seed pins the
    whole model."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant '{variant}', expected one of {VARIANTS}")
    d_cat = d_in + d_h
    if variant == "lstma":
        cell: CellParams = LstmGateParams(
            *[LinearParams.glorot(d_h, d_cat, rng) for _ in GATE_NAMES]
        )
    else:
        if n_qubits is None:
            raise ValueError(f"variant '{variant}' needs n_qubits")
        if variant == "qlstma-sg":
            cell = QlstmSgParams(
                LinearParams.glorot(n_qubits, d_cat, rng),
                VqcParams.random(n_qubits, n_layers, rng),
                *[LinearParams.glorot(d_h, n_qubits, rng) for _ in GATE_NAMES],
            )
        else:
            cell = QlstmIgParams(
                *[
                    QlstmGateBranch(
                        LinearParams.glorot(n_qubits, d_cat, rng),
                        VqcParams.random(n_qubits, n_layers, rng),
                        LinearParams.glorot(d_h, n_qubits, rng),
                    )
                    for _ in GATE_NAMES
                ]
            )
    return ModelParams(
        variant=variant,
        cell=cell,
        attn=AttentionParams.glorot(d_h, rng),
        head1=LinearParams.glorot(dense, d_h, rng),
        head2=LinearParams.glorot(1, dense, rng),
        n_qubits=None if variant == "lstma" else n_qubits,
    )


# ---------------------------------------------------------------------------
# cells


@dataclass
class LstmCellCache:
    v: np.ndarray
    c_prev: np.ndarray
    f: np.ndarray
    i: np.ndarray
    c_tilde: np.ndarray
    o: np.ndarray
    tanh_c: np.ndarray
    params: LstmGateParams


def lstm_cell(x: np.ndarray, prev: CellState, p: LstmGateParams):
    v = np.concatenate([x, prev.h])
    pre = {name: p.gate(name).weight @ v + p.gate(name).bias for name in GATE_NAMES}
    f = nncore.sigmoid(pre["f"])
    i = nncore.sigmoid(pre["i"])
    c_tilde = nncore.tanh(pre["c"])
    o = nncore.sigmoid(pre["o"])
    c_t = f * prev.c + i * c_tilde
    tanh_c = np.tanh(c_t)
    h_t = o * tanh_c
    return CellState(h_t, c_t), LstmCellCache(v, prev.c, f, i, c_tilde, o, tanh_c, p)


def _gate_preact_grads(cache, dh, dc_in):
    """Shared gate algebra backward: upstream dh/dc to pre-activation grads."""
    do = dh * cache.tanh_c
    dc = dc_in + dh * cache.o * (1.0 - cache.tanh_c**2)
    dpre = {
        "f": (dc * cache.c_prev) * cache.f * (1.0 - cache.f),
        "i": (dc * cache.c_tilde) * cache.i * (1.0 - cache.i),
        "c": (dc * cache.i) * (1.0 - cache.c_tilde**2),
        "o": do * cache.o * (1.0 - cache.o),
    }
    dc_prev = dc * cache.f
    return dpre, dc_prev


def lstm_cell_backward(cache: LstmCellCache, dh: np.ndarray, dc_in: np.ndarray, d_in: int):
    dpre, dc_prev = _gate_preact_grads(cache, dh, dc_in)
    grads: dict[str, np.ndarray] = {}
    dv = np.zeros_like(cache.v)
    for name in GATE_NAMES:
        g = cache.params.gate(name)
        dv += g.weight.T @ dpre[name]
        grads[f"gate_{name}.weight"] = np.outer(dpre[name], cache.v)
        grads[f"gate_{name}.bias"] = dpre[name].copy()
    return dv[:d_in], dv[d_in:], dc_prev, grads


@dataclass
class QlstmSgCellCache:
    v: np.ndarray
    c_prev: np.ndarray
    angles_in: np.ndarray  # circuit input angles
    z: np.ndarray  # circuit expectations
    f: np.ndarray
    i: np.ndarray
    c_tilde: np.ndarray
    o: np.ndarray
    tanh_c: np.ndarray
    params: QlstmSgParams


def qlstm_sg_cell(x: np.ndarray, prev: CellState, p: QlstmSgParams):
    v = np.concatenate([x, prev.h])
    angles_in = p.pre.weight @ v + p.pre.bias
    z = qsim.vqc_forward(angles_in, p.vqc)
    pre = {name: p.post(name).weight @ z + p.post(name).bias for name in GATE_NAMES}
    f = nncore.sigmoid(pre["f"])
    i = nncore.sigmoid(pre["i"])
    c_tilde = nncore.tanh(pre["c"])
    o = nncore.sigmoid(pre["o"])
    c_t = f * prev.c + i * c_tilde
    tanh_c = np.tanh(c_t)
    h_t = o * tanh_c
    return CellState(h_t, c_t), QlstmSgCellCache(
        v, prev.c, angles_in, z, f, i, c_tilde, o, tanh_c, p
    )


def qlstm_sg_cell_backward(
    cache: QlstmSgCellCache, dh: np.ndarray, dc_in: np.ndarray, d_in: int
):
    p = cache.params
    dpre, dc_prev = _gate_preact_grads(cache, dh, dc_in)
    grads: dict[str, np.ndarray] = {}
    dz = np.zeros_like(cache.z)
    for name in GATE_NAMES:
        post = p.post(name)
        dz += post.weight.T @ dpre[name]
        grads[f"gate_{name}.post.weight"] = np.outer(dpre[name], cache.z)
        grads[f"gate_{name}.post.bias"] = dpre[name].copy()
    jac_in, jac_par = qsim.vqc_gradient(cache.angles_in, p.vqc)
    da = jac_in.T @ dz
    grads["vqc.angles"] = np.tensordot(dz, jac_par, axes=1)
    grads["pre.weight"] = np.outer(da, cache.v)
    grads["pre.bias"] = da
    dv = p.pre.weight.T @ da
    return dv[:d_in], dv[d_in:], dc_prev, grads


@dataclass
class QlstmIgCellCache:
    v: np.ndarray
    c_prev: np.ndarray
    angles_in: dict[str, np.ndarray]
    z: dict[str, np.ndarray]
    f: np.ndarray
    i: np.ndarray
    c_tilde: np.ndarray
    o: np.ndarray
    tanh_c: np.ndarray
    params: QlstmIgParams


def qlstm_ig_cell(x: np.ndarray, prev: CellState, p: QlstmIgParams):
    v = np.concatenate([x, prev.h])
    angles_in: dict[str, np.ndarray] = {}
    z: dict[str, np.ndarray] = {}
    pre: dict[str, np.ndarray] = {}
    for name in GATE_NAMES:
        branch = p.gate(name)
        angles_in[name] = branch.pre.weight @ v + branch.pre.bias
        z[name] = qsim.vqc_forward(angles_in[name], branch.vqc)
        pre[name] = branch.post.weight @ z[name] + branch.post.bias
    f = nncore.sigmoid(pre["f"])
    i = nncore.sigmoid(pre["i"])
    c_tilde = nncore.tanh(pre["c"])
    o = nncore.sigmoid(pre["o"])
    c_t = f * prev.c + i * c_tilde
    tanh_c = np.tanh(c_t)
    h_t = o * tanh_c
    return CellState(h_t, c_t), QlstmIgCellCache(
        v, prev.c, angles_in, z, f, i, c_tilde, o, tanh_c, p
    )


def qlstm_ig_cell_backward(
    cache: QlstmIgCellCache, dh: np.ndarray, dc_in: np.ndarray, d_in: int
):
    p = cache.params
    dpre, dc_prev = _gate_preact_grads(cache, dh, dc_in)
    grads: dict[str, np.ndarray] = {}
    dv = np.zeros_like(cache.v)
    for name in GATE_NAMES:
        branch = p.gate(name)
        dz = branch.post.weight.T @ dpre[name]
        grads[f"gate_{name}.post.weight"] = np.outer(dpre[name], cache.z[name])
        grads[f"gate_{name}.post.bias"] = dpre[name].copy()
        jac_in, jac_par = qsim.vqc_gradient(cache.angles_in[name], branch.vqc)
        da = jac_in.T @ dz
        grads[f"gate_{name}.vqc.angles"] = np.tensordot(dz, jac_par, axes=1)
        grads[f"gate_{name}.pre.weight"] = np.outer(da, cache.v)
        grads[f"gate_{name}.pre.bias"] = da
        dv += branch.pre.weight.T @ da
    return dv[:d_in], dv[d_in:], dc_prev, grads


def _cell_step(x: np.ndarray, prev: CellState, cell: CellParams):
    if isinstance(cell, LstmGateParams):
        return lstm_cell(x, prev, cell)
    if isinstance(cell, QlstmSgParams):
        return qlstm_sg_cell(x, prev, cell)
    return qlstm_ig_cell(x, prev, cell)


def _cell_step_backward(cache, dh, dc, d_in):
    if isinstance(cache, LstmCellCache):
        return lstm_cell_backward(cache, dh, dc, d_in)
    if isinstance(cache, QlstmSgCellCache):
        return qlstm_sg_cell_backward(cache, dh, dc, d_in)
    return qlstm_ig_cell_backward(cache, dh, dc, d_in)


# ---------------------------------------------------------------------------
# full model


@dataclass
class ModelCache:
    d_in: int
    step_caches: list
    hidden: np.ndarray  # (T, d_h)
    attn_cache: tuple
    drop_mask: np.ndarray | None
    dropout_rate: float
    head1_cache: tuple
    head1_pre: np.ndarray
    head2_cache: tuple


def model_forward(
    features: np.ndarray,
    p: ModelParams,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    dropout_rate: float = 0.5,
):
    """Run the model over a (T, d_in) feature block.

    Returns per-step predictions of shape (T,) plus the cache consumed by
    :func:`model_backward`. Dropout fires only in ``train`` mode.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError(f"features must be 2-D (T, d_in), got shape {features.shape}")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got '{mode}'")
    steps, d_in = features.shape
    state = CellState.zeros(p.d_h)
    step_caches = []
    rows = []
    for t in range(steps):
        state, cache = _cell_step(features[t], state, p.cell)
        step_caches.append(cache)
        rows.append(state.h)
    hidden = np.stack(rows)
    if not np.all(np.isfinite(hidden)):
        bad = int(np.argmin(np.isfinite(hidden).all(axis=1)))
        raise FloatingPointError(f"non-finite hidden state at step {bad}")
    attn_out, attn_cache = nncore.attention_forward(hidden, p.attn)
    dropped, drop_mask = nncore.dropout_forward(
        attn_out, dropout_rate, training=(mode == "train"), rng=rng
    )
    head1_pre, head1_cache = nncore.linear_forward(dropped, p.head1)
    head1_out = nncore.relu(head1_pre)
    out, head2_cache = nncore.linear_forward(head1_out, p.head2)
    predictions = out[:, 0]
    if not np.all(np.isfinite(predictions)):
        raise FloatingPointError("non-finite prediction")
    return predictions, ModelCache(
        d_in,
        step_caches,
        hidden,
        attn_cache,
        drop_mask,
        dropout_rate,
        head1_cache,
        head1_pre,
        head2_cache,
    )


def model_backward(cache: ModelCache, dpred: np.ndarray) -> dict[str, np.ndarray]:
    """Backpropagate d loss / d predictions to every named parameter."""
    dpred = np.asarray(dpred, dtype=np.float64)
    grads: dict[str, np.ndarray] = {}

    dhead1_out, dw2, db2 = nncore.linear_backward(cache.head2_cache, dpred[:, None])
    grads["head.l2.weight"] = dw2
    grads["head.l2.bias"] = db2
    dhead1_pre = nncore.relu_backward(cache.head1_pre, dhead1_out)
    ddropped, dw1, db1 = nncore.linear_backward(cache.head1_cache, dhead1_pre)
    grads["head.l1.weight"] = dw1
    grads["head.l1.bias"] = db1
    dattn_out = nncore.dropout_backward(cache.drop_mask, cache.dropout_rate, ddropped)
    dhidden, dw_q, dw_k, dw_v = nncore.attention_backward(cache.attn_cache, dattn_out)
    grads["attn.w_q"] = dw_q
    grads["attn.w_k"] = dw_k
    grads["attn.w_v"] = dw_v

    d_h = dhidden.shape[1]
    dh_next = np.zeros(d_h)
    dc_next = np.zeros(d_h)
    cell_grads: dict[str, np.ndarray] = {}
    for t in reversed(range(len(cache.step_caches))):
        dh_t = dhidden[t] + dh_next
        _, dh_next, dc_next, step_grads = _cell_step_backward(
            cache.step_caches[t], dh_t, dc_next, cache.d_in
        )
        for name, g in step_grads.items():
            if name in cell_grads:
                cell_grads[name] += g
            else:
                cell_grads[name] = g
    grads.update(cell_grads)
    return grads


# ---------------------------------------------------------------------------
# parameter bookkeeping


def flatten_params(p: ModelParams) -> dict[str, np.ndarray]:
    """Named view of every tensor; arrays are shared, not copied."""
    flat: dict[str, np.ndarray] = {}
    cell = p.cell
    if isinstance(cell, LstmGateParams):
        for name in GATE_NAMES:
            flat[f"gate_{name}.weight"] = cell.gate(name).weight
            flat[f"gate_{name}.bias"] = cell.gate(name).bias
    elif isinstance(cell, QlstmSgParams):
        flat["pre.weight"] = cell.pre.weight
        flat["pre.bias"] = cell.pre.bias
        flat["vqc.angles"] = cell.vqc.angles
        for name in GATE_NAMES:
            flat[f"gate_{name}.post.weight"] = cell.post(name).weight
            flat[f"gate_{name}.post.bias"] = cell.post(name).bias
    else:
        for name in GATE_NAMES:
            branch = cell.gate(name)
            flat[f"gate_{name}.pre.weight"] = branch.pre.weight
            flat[f"gate_{name}.pre.bias"] = branch.pre.bias
            flat[f"gate_{name}.vqc.angles"] = branch.vqc.angles
            flat[f"gate_{name}.post.weight"] = branch.post.weight
            flat[f"gate_{name}.post.bias"] = branch.post.bias
    flat["attn.w_q"] = p.attn.w_q
    flat["attn.w_k"] = p.attn.w_k
    flat["attn.w_v"] = p.attn.w_v
    flat["head.l1.weight"] = p.head1.weight
    flat["head.l1.bias"] = p.head1.bias
    flat["head.l2.weight"] = p.head2.weight
    flat["head.l2.bias"] = p.head2.bias
    return flat


def unflatten_params(template: ModelParams, flat: dict[str, np.ndarray]) -> ModelParams:
    """Rebuild a ModelParams from named tensors, validated against a template."""
    expected = flatten_params(template)
    missing = sorted(set(expected) - set(flat))
    if missing:
        raise KeyError(f"missing tensors: {missing}")
    arrays: dict[str, np.ndarray] = {}
    for name, ref in expected.items():
        arr = np.asarray(flat[name], dtype=np.float64)
        if arr.shape != ref.shape:
            raise ValueError(
                f"tensor '{name}' has shape {arr.shape}, expected {ref.shape}"
            )
        arrays[name] = arr

    def lin(prefix: str) -> LinearParams:
        return LinearParams(arrays[f"{prefix}.weight"], arrays[f"{prefix}.bias"])

    variant = template.variant
    if variant == "lstma":
        cell: CellParams = LstmGateParams(*[lin(f"gate_{n}") for n in GATE_NAMES])
    elif variant == "qlstma-sg":
        cell = QlstmSgParams(
            lin("pre"),
            VqcParams(arrays["vqc.angles"]),
            *[lin(f"gate_{n}.post") for n in GATE_NAMES],
        )
    else:
        cell = QlstmIgParams(
            *[
                QlstmGateBranch(
                    lin(f"gate_{n}.pre"),
                    VqcParams(arrays[f"gate_{n}.vqc.angles"]),
                    lin(f"gate_{n}.post"),
                )
                for n in GATE_NAMES
            ]
        )
    return ModelParams(
        variant=variant,
        cell=cell,
        attn=AttentionParams(arrays["attn.w_q"], arrays["attn.w_k"], arrays["attn.w_v"]),
        head1=lin("head.l1"),
        head2=lin("head.l2"),
        n_qubits=template.n_qubits,
    )


def param_count(p: ModelParams) -> dict[str, int]:
    """Tensor-size totals split into recurrent, attention and head blocks."""
    flat = flatten_params(p)
    attn = sum(flat[k].size for k in flat if k.startswith("attn."))
    head = sum(flat[k].size for k in flat if k.startswith("head."))
    total = sum(v.size for v in flat.values())
    return {
        "recurrent": total - attn - head,
        "attention": attn,
        "head": head,
        "total": total,
    }
