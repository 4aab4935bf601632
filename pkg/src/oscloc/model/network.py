"""A small pre-norm transformer over frame features, with its own gradients.

Everything is float64 numpy. The forward pass returns a cache from which
`backward` reproduces exact reverse-mode gradients; `masked_cross_entropy`
supplies the loss gradient. Batches are padded to a common length and padded
frames are masked out of both attention keys and the loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelConfig",
    "init_params",
    "positional_encoding",
    "forward",
    "backward",
    "masked_cross_entropy",
    "softmax_scores",
    "infer",
]

LN_EPS = 1e-5
_GELU_C = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class ModelConfig:
    """Shape of the frame classifier."""

    input_dim: int
    hidden_dim: int
    num_layers: int
    num_heads: int
    num_classes: int

    def __post_init__(self):
        for name in ("input_dim", "hidden_dim", "num_layers", "num_heads",
                     "num_classes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.hidden_dim % self.num_heads:
            raise ValueError("hidden_dim must be divisible by num_heads")
        if self.hidden_dim % 2:
            raise ValueError("hidden_dim must be even for sin/cos positions")


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(config: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    """Seeded initial parameters: Xavier-uniform weights, zero biases,
    unit layer-norm gains. Fixed creation order keeps this reproducible."""
    rng = np.random.default_rng(seed)
    h, c = config.hidden_dim, config.num_classes
    params: dict[str, np.ndarray] = {
        "proj.w": _xavier(rng, config.input_dim, h),
        "proj.b": np.zeros(h),
    }
    for i in range(config.num_layers):
        p = f"layers.{i}."
        params[p + "ln1.g"] = np.ones(h)
        params[p + "ln1.b"] = np.zeros(h)
        for mat in ("wq", "wk", "wv", "wo"):
            params[p + "attn." + mat] = _xavier(rng, h, h)
        # no key bias: softmax is invariant to the per-row constant shift a
        # shared key offset induces, so the parameter would be dead weight
        for vec in ("bq", "bv", "bo"):
            params[p + "attn." + vec] = np.zeros(h)
        params[p + "ln2.g"] = np.ones(h)
        params[p + "ln2.b"] = np.zeros(h)
        params[p + "ff.w1"] = _xavier(rng, h, 4 * h)
        params[p + "ff.b1"] = np.zeros(4 * h)
        params[p + "ff.w2"] = _xavier(rng, 4 * h, h)
        params[p + "ff.b2"] = np.zeros(h)
    params["final_ln.g"] = np.ones(h)
    params["final_ln.b"] = np.zeros(h)
    params["head.w"] = _xavier(rng, h, c)
    params["head.b"] = np.zeros(c)
    return params


def positional_encoding(length: int, dim: int) -> np.ndarray:
    """Sinusoidal frame-position table, shape (length, dim)."""
    pos = np.arange(length, dtype=np.float64)[:, None]
    freq = np.exp(-math.log(10000.0) * np.arange(0, dim, 2) / dim)
    pe = np.empty((length, dim), dtype=np.float64)
    pe[:, 0::2] = np.sin(pos * freq)
    pe[:, 1::2] = np.cos(pos * freq)
    return pe


def _layer_norm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def _layer_norm_backward(dy, g, cache):
    xhat, inv = cache
    dg = (dy * xhat).sum(axis=(0, 1))
    db = dy.sum(axis=(0, 1))
    dxhat = dy * g
    dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, dg, db


def _gelu(u):
    t = np.tanh(_GELU_C * (u + 0.044715 * u ** 3))
    return 0.5 * u * (1.0 + t), t


def _gelu_backward(du_out, u, t):
    dt = _GELU_C * (1.0 + 3 * 0.044715 * u * u) * (1.0 - t * t)
    return du_out * (0.5 * (1.0 + t) + 0.5 * u * dt)


def _split_heads(x, num_heads):
    b, t, h = x.shape
    return x.reshape(b, t, num_heads, h // num_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, nh, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, nh * dh)


def forward(params: dict, config: ModelConfig, x: np.ndarray,
            pad_mask: np.ndarray | None = None):
    """Run the classifier on a padded batch.

    x is (batch, frames, input_dim); pad_mask is (batch, frames) with True
    marking real frames (None means no padding). Padded frames are hidden
    from attention keys. Returns (logits, cache) with logits
    (batch, frames, num_classes).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] != config.input_dim:
        raise ValueError(f"expected (B, T, {config.input_dim}) input, "
                         f"got shape {x.shape}")
    bsz, length, _ = x.shape
    if pad_mask is None:
        pad_mask = np.ones((bsz, length), dtype=bool)
    else:
        pad_mask = np.asarray(pad_mask, dtype=bool)
        if pad_mask.shape != (bsz, length):
            raise ValueError("pad_mask shape mismatch")
        if not pad_mask.any(axis=1).all():
            raise ValueError("every sequence needs at least one real frame")

    nh = config.num_heads
    scale = 1.0 / math.sqrt(config.hidden_dim // nh)
    h = x @ params["proj.w"] + params["proj.b"]
    h = h + positional_encoding(length, config.hidden_dim)

    key_bias = np.where(pad_mask, 0.0, -np.inf)[:, None, None, :]
    layer_caches = []
    for i in range(config.num_layers):
        p = f"layers.{i}."
        h_in = h
        y1, ln1 = _layer_norm(h_in, params[p + "ln1.g"], params[p + "ln1.b"])
        q = _split_heads(y1 @ params[p + "attn.wq"] + params[p + "attn.bq"], nh)
        k = _split_heads(y1 @ params[p + "attn.wk"], nh)
        v = _split_heads(y1 @ params[p + "attn.wv"] + params[p + "attn.bv"], nh)
        scores = q @ k.swapaxes(-1, -2) * scale + key_bias
        scores -= scores.max(axis=-1, keepdims=True)
        e = np.exp(scores)
        att = e / e.sum(axis=-1, keepdims=True)
        ctx = _merge_heads(att @ v)
        h = h_in + ctx @ params[p + "attn.wo"] + params[p + "attn.bo"]

        h_mid = h
        y2, ln2 = _layer_norm(h_mid, params[p + "ln2.g"], params[p + "ln2.b"])
        u = y2 @ params[p + "ff.w1"] + params[p + "ff.b1"]
        a, gelu_t = _gelu(u)
        h = h_mid + a @ params[p + "ff.w2"] + params[p + "ff.b2"]
        layer_caches.append({
            "y1": y1, "ln1": ln1, "q": q, "k": k, "v": v, "att": att,
            "ctx": ctx, "y2": y2, "ln2": ln2, "u": u, "a": a,
            "gelu_t": gelu_t,
        })

    yf, lnf = _layer_norm(h, params["final_ln.g"], params["final_ln.b"])
    logits = yf @ params["head.w"] + params["head.b"]
    cache = {"x": x, "layers": layer_caches, "yf": yf, "lnf": lnf,
             "scale": scale}
    return logits, cache


def backward(params: dict, config: ModelConfig, cache: dict,
             dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss with respect to every parameter, given the
    loss gradient at the logits. Keys mirror the parameter dict."""
    grads: dict[str, np.ndarray] = {}
    nh, scale = config.num_heads, cache["scale"]

    grads["head.w"] = np.einsum("bth,btc->hc", cache["yf"], dlogits)
    grads["head.b"] = dlogits.sum(axis=(0, 1))
    dyf = dlogits @ params["head.w"].T
    dh, grads["final_ln.g"], grads["final_ln.b"] = _layer_norm_backward(
        dyf, params["final_ln.g"], cache["lnf"])

    for i in reversed(range(config.num_layers)):
        p = f"layers.{i}."
        lc = cache["layers"][i]

        da = dh @ params[p + "ff.w2"].T
        grads[p + "ff.w2"] = np.einsum("btf,bth->fh", lc["a"], dh)
        grads[p + "ff.b2"] = dh.sum(axis=(0, 1))
        du = _gelu_backward(da, lc["u"], lc["gelu_t"])
        grads[p + "ff.w1"] = np.einsum("bth,btf->hf", lc["y2"], du)
        grads[p + "ff.b1"] = du.sum(axis=(0, 1))
        dy2 = du @ params[p + "ff.w1"].T
        dmid, grads[p + "ln2.g"], grads[p + "ln2.b"] = _layer_norm_backward(
            dy2, params[p + "ln2.g"], lc["ln2"])
        dh = dh + dmid

        dctx = dh @ params[p + "attn.wo"].T
        grads[p + "attn.wo"] = np.einsum("bth,btj->hj", lc["ctx"], dh)
        grads[p + "attn.bo"] = dh.sum(axis=(0, 1))
        dctx = _split_heads(dctx, nh)
        datt = dctx @ lc["v"].swapaxes(-1, -2)
        dv = lc["att"].swapaxes(-1, -2) @ dctx
        # masked positions have zero attention weight, so the mask needs no
        # explicit handling here
        dscores = lc["att"] * (datt - (datt * lc["att"]).sum(axis=-1,
                                                             keepdims=True))
        dq = dscores @ lc["k"] * scale
        dk = dscores.swapaxes(-1, -2) @ lc["q"] * scale
        dq, dk, dv = (_merge_heads(t) for t in (dq, dk, dv))
        dy1 = np.zeros_like(dh)
        for mat, bias, d in (("wq", "bq", dq), ("wk", None, dk),
                             ("wv", "bv", dv)):
            grads[p + "attn." + mat] = np.einsum("bth,btj->hj", lc["y1"], d)
            if bias is not None:
                grads[p + "attn." + bias] = d.sum(axis=(0, 1))
            dy1 += d @ params[p + "attn." + mat].T
        din, grads[p + "ln1.g"], grads[p + "ln1.b"] = _layer_norm_backward(
            dy1, params[p + "ln1.g"], lc["ln1"])
        dh = dh + din

    grads["proj.w"] = np.einsum("btd,bth->dh", cache["x"], dh)
    grads["proj.b"] = dh.sum(axis=(0, 1))
    return grads


def masked_cross_entropy(logits: np.ndarray, targets: np.ndarray,
                         pad_mask: np.ndarray | None = None):
    """Mean cross-entropy over frames with a real target.

    targets holds class indices; negative entries (convention: -1 for
    pseudo-label frames marked ambiguous) and padded frames are excluded.
    When nothing remains the loss is 0 with zero gradients. Returns
    (loss, dlogits).
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets)
    bsz, length, c = logits.shape
    if targets.shape != (bsz, length):
        raise ValueError("targets shape mismatch")
    if targets.max() >= c:
        raise ValueError("target class out of range")
    include = targets >= 0
    if pad_mask is not None:
        include &= np.asarray(pad_mask, dtype=bool)
    n = int(include.sum())
    if n == 0:
        return 0.0, np.zeros_like(logits)

    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=-1, keepdims=True)
    logp = shifted - np.log(e.sum(axis=-1, keepdims=True))
    safe = np.where(include, targets, 0)
    picked = np.take_along_axis(logp, safe[..., None], axis=-1)[..., 0]
    loss = -float(picked[include].sum()) / n

    dlogits = probs.copy()
    np.put_along_axis(dlogits, safe[..., None],
                      np.take_along_axis(dlogits, safe[..., None], -1) - 1.0,
                      axis=-1)
    dlogits *= include[..., None] / n
    return loss, dlogits


def softmax_scores(logits: np.ndarray) -> np.ndarray:
    """Per-frame class probabilities, the score matrix the decoders consume."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def infer(params: dict, config: ModelConfig, features: np.ndarray) -> np.ndarray:
    """Class probabilities for one video, shape (frames, num_classes)."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError("expected a (frames, input_dim) feature matrix")
    logits, _ = forward(params, config, features[None])
    return softmax_scores(logits[0])
