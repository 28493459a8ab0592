"""Forward and reverse-mode passes over dense/GRU stacks.

Dense layers broadcast over any leading axes. A GRU layer consumes time-major
input ``(T, B, D)`` and keeps one hidden vector per batch row:

    z  = sigmoid(Wx_z x + Wh_z h + b_z)
    r  = sigmoid(Wx_r x + Wh_r h + b_r)
    h~ = tanh(Wx_c x + b_c + r * (Wh_c h))
    h' = (1 - z) * h + z * h~

``resets[t, b]`` zeroes the carried hidden state before step ``t`` (episode
starts), and gradients do not flow across a reset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from .params import LayerSpec, NetworkParams


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _activate(pre: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(pre, 0)
    if activation == "tanh":
        return np.tanh(pre)
    return pre


def dense_forward(block: dict[str, np.ndarray], x: np.ndarray, activation: str = "identity") -> np.ndarray:
    """activation(W x + b) for a single dense block ``{"W": (out, in), "b": (out,)}``."""
    W, b = block["W"], block["b"]
    x = np.asarray(x, dtype=W.dtype)
    if x.shape[-1] != W.shape[1]:
        raise ConfigurationError(f"dense layer expects input width {W.shape[1]}, got {x.shape[-1]}")
    return _activate(x @ W.T + b, activation)


def gru_step(block: dict[str, np.ndarray], h_prev: np.ndarray, x: np.ndarray) -> np.ndarray:
    """One GRU transition for a block ``{"Wx": (3H, D), "Wh": (3H, H), "b": (3H,)}``."""
    Wx, Wh, b = block["Wx"], block["Wh"], block["b"]
    H = Wh.shape[1]
    x = np.asarray(x, dtype=Wx.dtype)
    h_prev = np.asarray(h_prev, dtype=Wx.dtype)
    if x.shape[-1] != Wx.shape[1] or h_prev.shape[-1] != H:
        raise ConfigurationError(
            f"gru expects input {Wx.shape[1]} / hidden {H}, got {x.shape[-1]} / {h_prev.shape[-1]}"
        )
    gx = x @ Wx.T + b
    gh = h_prev @ Wh.T
    z = _sigmoid(gx[..., :H] + gh[..., :H])
    r = _sigmoid(gx[..., H:2 * H] + gh[..., H:2 * H])
    c = np.tanh(gx[..., 2 * H:] + r * gh[..., 2 * H:])
    return h_prev + z * (c - h_prev)


def layer_block(params: NetworkParams, index: int) -> dict[str, np.ndarray]:
    prefix = f"{index}."
    return {k[len(prefix):]: v for k, v in params.tensors.items() if k.startswith(prefix)}


@dataclass
class Trace:
    """Everything a backward pass needs from the matching forward pass."""

    output: np.ndarray
    final_hidden: list[np.ndarray]
    caches: list[tuple] = field(repr=False)


def _dense_fwd(block, spec: LayerSpec, x):
    pre = x @ block["W"].T + block["b"]
    out = _activate(pre, spec.activation)
    return out, (x, out)


def _dense_bwd(block, spec: LayerSpec, cache, dout, need_dx: bool, param_grads: bool = True):
    x, out = cache
    if spec.activation == "relu":
        dpre = dout * (out > 0)
    elif spec.activation == "tanh":
        dpre = dout * (1 - out * out)
    else:
        dpre = dout
    grads = {}
    if param_grads:
        d2 = dpre.reshape(-1, dpre.shape[-1])
        grads = {"W": d2.T @ x.reshape(-1, x.shape[-1]), "b": d2.sum(axis=0)}
    dx = dpre @ block["W"] if need_dx else None
    return grads, dx


def _gru_fwd(block, spec: LayerSpec, x, keep, h0):
    Wx, Wh, b = block["Wx"], block["Wh"], block["b"]
    T, B, _ = x.shape
    H = spec.out_dim
    dt = Wx.dtype
    gx = x @ Wx.T + b
    hs = np.empty((T, B, H), dtype=dt)
    hp_all = np.empty((T, B, H), dtype=dt)
    zr_all = np.empty((T, B, 2 * H), dtype=dt)
    c_all = np.empty((T, B, H), dtype=dt)
    ghc_all = np.empty((T, B, H), dtype=dt)
    h = np.zeros((B, H), dtype=dt) if h0 is None else np.asarray(h0, dtype=dt)
    WhT = Wh.T
    keep_col = keep[..., None]
    for t in range(T):
        hp = np.multiply(h, keep_col[t], out=hp_all[t])
        gh = hp @ WhT
        g = gx[t]
        zr = zr_all[t]
        np.add(g[:, :2 * H], gh[:, :2 * H], out=zr)
        zr[:] = _sigmoid(zr)
        ghc = gh[:, 2 * H:]
        ghc_all[t] = ghc
        c = np.tanh(g[:, 2 * H:] + zr[:, H:] * ghc, out=c_all[t])
        h = np.add(hp, zr[:, :H] * (c - hp), out=hs[t])
    return hs, h.copy(), (x, keep, hp_all, zr_all, c_all, ghc_all)


def _gru_bwd(block, spec: LayerSpec, cache, dH, need_dx: bool):
    x, keep, hp_all, zr_all, c_all, ghc_all = cache
    Wx, Wh = block["Wx"], block["Wh"]
    T, B, H = dH.shape
    dt = Wh.dtype
    dgx = np.empty((T, B, 3 * H), dtype=dt)
    dgh_all = np.empty((T, B, 3 * H), dtype=dt)
    dh_next = np.zeros((B, H), dtype=dt)
    keep_col = keep[..., None]
    for t in range(T - 1, -1, -1):
        hp, c = hp_all[t], c_all[t]
        z, r = zr_all[t, :, :H], zr_all[t, :, H:]
        dh = dH[t] + dh_next
        dgx_t, dgh = dgx[t], dgh_all[t]
        dac = np.multiply(dh * z, 1 - c * c, out=dgx_t[:, 2 * H:])
        np.multiply(dh * (c - hp), z * (1 - z), out=dgx_t[:, :H])
        np.multiply(dac * ghc_all[t], r * (1 - r), out=dgx_t[:, H:2 * H])
        dgh[:, :2 * H] = dgx_t[:, :2 * H]
        np.multiply(dac, r, out=dgh[:, 2 * H:])
        dh_next = (dh * (1 - z) + dgh @ Wh) * keep_col[t]
    g2 = dgx.reshape(-1, 3 * H)
    dWh = dgh_all.reshape(-1, 3 * H).T @ hp_all.reshape(-1, H)
    grads = {"Wx": g2.T @ x.reshape(-1, x.shape[-1]), "Wh": dWh, "b": g2.sum(axis=0)}
    dx = dgx @ Wx if need_dx else None
    return grads, dx


def has_recurrence(params: NetworkParams) -> bool:
    return any(layer.kind == "gru" for layer in params.topology)


def forward(params: NetworkParams, x: np.ndarray, resets: np.ndarray | None = None,
            h0: list[np.ndarray] | None = None) -> Trace:
    """Run the whole stack. ``x`` is ``(T, B, D)`` when the topology has a GRU layer,
    otherwise any ``(..., D)``. ``h0`` holds one initial state per GRU layer."""
    dt = params.dtype
    x = np.asarray(x, dtype=dt)
    if x.shape[-1] != params.topology[0].in_dim:
        raise ConfigurationError(f"network expects input width {params.topology[0].in_dim}, got {x.shape[-1]}")
    keep = None
    if has_recurrence(params):
        if x.ndim != 3:
            raise ConfigurationError(f"recurrent network needs (T, B, D) input, got shape {x.shape}")
        keep = np.ones(x.shape[:2], dtype=dt) if resets is None else (1 - np.asarray(resets, dtype=bool)).astype(dt)
    caches, finals, gru_index = [], [], 0
    for i, spec in enumerate(params.topology):
        block = layer_block(params, i)
        if spec.kind == "dense":
            x, cache = _dense_fwd(block, spec, x)
        else:
            start = None if h0 is None else h0[gru_index]
            x, h_last, cache = _gru_fwd(block, spec, x, keep, start)
            finals.append(h_last)
            gru_index += 1
        caches.append(cache)
    return Trace(x, finals, caches)


def backward(params: NetworkParams, trace: Trace, dout: np.ndarray, need_input_grad: bool = False,
             param_grads: bool = True) -> tuple[NetworkParams | None, np.ndarray | None]:
    """Reverse pass for ``d loss / d output = dout``. Returns parameter gradients
    (same topology) and, on request, ``d loss / d input``.

    ``param_grads=False`` skips weight gradients (returns ``None`` for them) when
    only the input gradient is wanted, e.g. a critic's action gradient.
    """
    if not param_grads and has_recurrence(params):
        raise ConfigurationError("input-only backward is implemented for feed-forward stacks")
    dout = np.asarray(dout, dtype=params.dtype)
    grads: dict[str, np.ndarray] = {}
    n = len(params.topology)
    for i in range(n - 1, -1, -1):
        spec = params.topology[i]
        block = layer_block(params, i)
        need_dx = need_input_grad or i > 0
        if spec.kind == "dense":
            g, dout = _dense_bwd(block, spec, trace.caches[i], dout, need_dx, param_grads)
        else:
            g, dout = _gru_bwd(block, spec, trace.caches[i], dout, need_dx)
        for k, v in g.items():
            grads[f"{i}.{k}"] = v.astype(params.dtype, copy=False)
    out = NetworkParams(params.topology, grads) if param_grads else None
    return out, dout if need_input_grad else None


def initial_hidden(params: NetworkParams, batch: int) -> list[np.ndarray]:
    return [np.zeros((batch, spec.out_dim), dtype=params.dtype) for spec in params.topology if spec.kind == "gru"]
