"""Point-wise CF models with hand-derived gradients.

Both models map a (user, item) pair to a real-valued logit z_ui; the
loss side squashes logits with a logistic. The same architectures serve
as teacher (large latent dim) and student (small latent dim). Training
goes through per-user contexts so the CDAE hidden state is computed once
per step; the MF update path is a fused kernel (compiled or numpy,
selected in ``codist._core``).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import _core

CHECKPOINT_MAGIC = b"CDCKPT01"
_KIND_CODES = {"mf": 0, "cdae": 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


class ModelError(Exception):
    pass


class OptimizerError(Exception):
    pass


def gaussian_init(shape, rng, std=1.0):
    """I.i.d. N(0, std^2) parameters; deterministic given the generator state."""
    if std <= 0:
        raise ValueError("std must be > 0")
    return rng.normal(0.0, std, size=shape)


@dataclass
class OptimizerConfig:
    kind: str = "adagrad"          # "sgd" | "adagrad"
    learning_rate: float = 0.2
    l2: float = 0.001
    eps: float = 1e-8

    def validate(self):
        if self.kind not in ("sgd", "adagrad"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        return self


class Optimizer:
    """SGD / Adagrad with per-parameter accumulated squared gradients.

    Updates: p <- p - lr * (g + l2*p), with Adagrad dividing by
    sqrt(acc + eps) after acc += g^2 (raw gradient, l2 excluded).
    Sparse variants touch only the given rows/entries.
    """

    def __init__(self, cfg, params):
        cfg.validate()
        self.cfg = cfg
        self.acc = {}
        if cfg.kind == "adagrad":
            self.acc = {name: np.zeros_like(p) for name, p in params.items()}

    @property
    def kind(self):
        return self.cfg.kind

    def _check(self, grad):
        if not np.all(np.isfinite(grad)):
            raise OptimizerError("non-finite gradient; step rejected")

    def step_dense(self, name, param, grad):
        self._check(grad)
        lr, l2 = self.cfg.learning_rate, self.cfg.l2
        if self.cfg.kind == "sgd":
            param -= lr * (grad + l2 * param)
        else:
            acc = self.acc[name]
            acc += grad ** 2
            param -= lr * (grad + l2 * param) / np.sqrt(acc + self.cfg.eps)

    def step_rows(self, name, param, rows, grads):
        self._check(grads)
        lr, l2 = self.cfg.learning_rate, self.cfg.l2
        if self.cfg.kind == "sgd":
            param[rows] -= lr * (grads + l2 * param[rows])
        else:
            acc = self.acc[name]
            acc[rows] += grads ** 2
            param[rows] -= lr * (grads + l2 * param[rows]) / np.sqrt(acc[rows] + self.cfg.eps)

    step_entries = step_rows   # 1-d parameters: same arithmetic


class MFModel:
    """Logistic matrix factorization: z_ui = p_u . q_i + b_i."""

    kind = "mf"

    def __init__(self, user_factors, item_factors, item_bias, seed=0):
        self.user_factors = user_factors
        self.item_factors = item_factors
        self.item_bias = item_bias
        self.seed = seed

    @classmethod
    def init(cls, num_users, num_items, dim, seed, std=1.0):
        rng = np.random.default_rng(seed)
        return cls(
            user_factors=gaussian_init((num_users, dim), rng, std),
            item_factors=gaussian_init((num_items, dim), rng, std),
            item_bias=gaussian_init((num_items,), rng, std),
            seed=seed,
        )

    @property
    def num_users(self):
        return self.user_factors.shape[0]

    @property
    def num_items(self):
        return self.item_factors.shape[0]

    @property
    def dim(self):
        return self.user_factors.shape[1]

    @property
    def model_id(self):
        return f"mf-d{self.dim}"

    def params(self):
        return {"user_factors": self.user_factors,
                "item_factors": self.item_factors,
                "item_bias": self.item_bias}

    def param_count(self):
        return self.dim * (self.num_users + self.num_items) + self.num_items

    def copy(self):
        return MFModel(self.user_factors.copy(), self.item_factors.copy(),
                       self.item_bias.copy(), seed=self.seed)

    def begin_user(self, u, pos_items=None, corrupt_mask=None):
        if not 0 <= u < self.num_users:
            raise ModelError(f"user index {u} out of range")
        return _MFUserContext(self, u)

    def score_user(self, u, pos_items=None, items=None, training=False,
                   corrupt_mask=None):
        """Logits of user u over ``items`` (None = full catalogue)."""
        return self.begin_user(u).score(items)

    def forward_logit(self, u, i):
        if not 0 <= i < self.num_items:
            raise ModelError(f"item index {i} out of range")
        z = self.score_user(u, items=np.asarray([i], dtype=np.int64))
        return float(z[0])

    def backward(self, u, pos_items, items, gz, corrupt_mask=None):
        return self.begin_user(u).backward(items, gz)


class _MFUserContext:
    def __init__(self, model, u):
        self.model = model
        self.u = u

    def score(self, items=None):
        m = self.model
        p = m.user_factors[self.u]
        if items is None:
            return _core.mf_score_all(p, m.item_factors, m.item_bias)
        items = np.asarray(items, dtype=np.int64)
        if items.shape[0] == 0:
            return np.empty(0, dtype=np.float64)
        if items.min() < 0 or items.max() >= m.num_items:
            raise ModelError("item index out of range")
        return _core.mf_score_subset(p, m.item_factors, m.item_bias, items)

    def backward(self, items, gz):
        """Analytic parameter gradients for dL/dz = gz over ``items``."""
        m = self.model
        items = np.asarray(items, dtype=np.int64)
        gz = np.asarray(gz, dtype=np.float64)
        g_user = gz @ m.item_factors[items]
        grad_rows = np.outer(gz, m.user_factors[self.u])
        return {
            "user_factors": (np.asarray([self.u], dtype=np.int64), g_user[None, :]),
            "item_factors": (items, grad_rows),
            "item_bias": (items, gz.copy()),
        }

    def apply(self, items, gz, optimizer):
        """Fused gradient + update step through the kernel backend."""
        m = self.model
        if not np.all(np.isfinite(gz)):
            raise OptimizerError("non-finite gradient; step rejected")
        cfg = optimizer.cfg
        if optimizer.kind == "sgd":
            _core.mf_user_step_sgd(m.user_factors[self.u], m.item_factors,
                                   m.item_bias, items, gz,
                                   cfg.learning_rate, cfg.l2)
        else:
            _core.mf_user_step_adagrad(
                m.user_factors[self.u], m.item_factors, m.item_bias, items, gz,
                cfg.learning_rate, cfg.l2, cfg.eps,
                optimizer.acc["user_factors"][self.u],
                optimizer.acc["item_factors"], optimizer.acc["item_bias"])


def _sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class CDAEModel:
    """Denoising-autoencoder scorer with a per-user input node.

    Forward: h = sigmoid(sum of encoder rows over (corrupted) positives
    + user embedding + hidden bias); z_i = decoder_i . h + out bias.
    Corruption zeroes each positive input independently and applies only
    when a mask is passed (training); inference never corrupts. The
    decoder is stored item-major (num_items x dim) for row updates.
    """

    kind = "cdae"

    def __init__(self, encoder_w, user_embed, hidden_bias, decoder_w,
                 decoder_bias, corruption=0.1, seed=0):
        self.encoder_w = encoder_w        # (n, d)
        self.user_embed = user_embed      # (m, d)
        self.hidden_bias = hidden_bias    # (d,)
        self.decoder_w = decoder_w        # (n, d)
        self.decoder_bias = decoder_bias  # (n,)
        self.corruption = corruption
        self.seed = seed

    @classmethod
    def init(cls, num_users, num_items, dim, seed, std=1.0, corruption=0.1):
        if not 0.0 <= corruption < 1.0:
            raise ValueError("corruption must be in [0, 1)")
        rng = np.random.default_rng(seed)
        return cls(
            encoder_w=gaussian_init((num_items, dim), rng, std),
            user_embed=gaussian_init((num_users, dim), rng, std),
            hidden_bias=gaussian_init((dim,), rng, std),
            decoder_w=gaussian_init((num_items, dim), rng, std),
            decoder_bias=gaussian_init((num_items,), rng, std),
            corruption=corruption,
            seed=seed,
        )

    @property
    def num_users(self):
        return self.user_embed.shape[0]

    @property
    def num_items(self):
        return self.encoder_w.shape[0]

    @property
    def dim(self):
        return self.encoder_w.shape[1]

    @property
    def model_id(self):
        return f"cdae-d{self.dim}"

    def params(self):
        return {"encoder_w": self.encoder_w, "user_embed": self.user_embed,
                "hidden_bias": self.hidden_bias, "decoder_w": self.decoder_w,
                "decoder_bias": self.decoder_bias}

    def param_count(self):
        m, n, d = self.num_users, self.num_items, self.dim
        return 2 * n * d + m * d + d + n

    def copy(self):
        return CDAEModel(self.encoder_w.copy(), self.user_embed.copy(),
                         self.hidden_bias.copy(), self.decoder_w.copy(),
                         self.decoder_bias.copy(), self.corruption, self.seed)

    def draw_corrupt_mask(self, n_pos, rng):
        """Keep-mask over the positive inputs; each zeroed w.p. corruption."""
        return rng.random(n_pos) >= self.corruption

    def begin_user(self, u, pos_items=None, corrupt_mask=None):
        if not 0 <= u < self.num_users:
            raise ModelError(f"user index {u} out of range")
        pos = np.asarray(pos_items, dtype=np.int64) if pos_items is not None \
            else np.empty(0, dtype=np.int64)
        if corrupt_mask is not None:
            pos = pos[np.asarray(corrupt_mask, dtype=bool)]
        return _CDAEUserContext(self, u, pos)

    def score_user(self, u, pos_items=None, items=None, training=False,
                   corrupt_mask=None):
        if training and corrupt_mask is None and self.corruption > 0:
            raise ModelError("training-mode scoring needs an explicit corrupt_mask")
        mask = corrupt_mask if training else None
        return self.begin_user(u, pos_items, mask).score(items)

    def forward_logit(self, u, i, pos_items=None):
        if not 0 <= i < self.num_items:
            raise ModelError(f"item index {i} out of range")
        z = self.score_user(u, pos_items, items=np.asarray([i], dtype=np.int64))
        return float(z[0])

    def backward(self, u, pos_items, items, gz, corrupt_mask=None):
        return self.begin_user(u, pos_items, corrupt_mask).backward(items, gz)


class _CDAEUserContext:
    """Caches the hidden state so score and backward share one forward."""

    def __init__(self, model, u, kept_pos):
        self.model = model
        self.u = u
        self.kept_pos = kept_pos
        a = model.encoder_w[kept_pos].sum(axis=0) + model.user_embed[u] + model.hidden_bias
        self.hidden = _sigmoid(a)

    def score(self, items=None):
        m = self.model
        if items is None:
            return m.decoder_w @ self.hidden + m.decoder_bias
        items = np.asarray(items, dtype=np.int64)
        if items.shape[0] == 0:
            return np.empty(0, dtype=np.float64)
        if items.min() < 0 or items.max() >= m.num_items:
            raise ModelError("item index out of range")
        return m.decoder_w[items] @ self.hidden + m.decoder_bias[items]

    def backward(self, items, gz):
        m = self.model
        items = np.asarray(items, dtype=np.int64)
        gz = np.asarray(gz, dtype=np.float64)
        h = self.hidden
        g_dec_rows = np.outer(gz, h)                      # dL/d decoder rows
        g_h = gz @ m.decoder_w[items]                     # (d,)
        g_a = g_h * h * (1.0 - h)                         # through sigmoid
        g_enc_rows = np.broadcast_to(g_a, (self.kept_pos.shape[0], g_a.shape[0])).copy()
        return {
            "decoder_w": (items, g_dec_rows),
            "decoder_bias": (items, gz.copy()),
            "encoder_w": (self.kept_pos, g_enc_rows),
            "user_embed": (np.asarray([self.u], dtype=np.int64), g_a[None, :]),
            "hidden_bias": (None, g_a),
        }

    def apply(self, items, gz, optimizer):
        grads = self.backward(items, gz)
        m = self.model
        params = m.params()
        for name, (idx, g) in grads.items():
            if idx is None:
                optimizer.step_dense(name, params[name], g)
            elif idx.shape[0]:
                optimizer.step_rows(name, params[name], idx, g)


def save_checkpoint(model, path):
    """Versioned binary checkpoint: header (kind, dims, seed), then
    float64 parameter arrays in row-major order."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<B", _KIND_CODES[model.kind]))
        fh.write(struct.pack("<qqqq", model.num_users, model.num_items,
                             model.dim, model.seed))
        if model.kind == "cdae":
            fh.write(struct.pack("<d", model.corruption))
        for name in sorted(model.params()):
            fh.write(np.ascontiguousarray(model.params()[name], dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != CHECKPOINT_MAGIC:
            raise ModelError(f"{path}: not a model checkpoint (magic {magic!r})")
        (code,) = struct.unpack("<B", fh.read(1))
        if code not in _KIND_NAMES:
            raise ModelError(f"{path}: unknown model kind code {code}")
        m, n, d, seed = struct.unpack("<qqqq", fh.read(32))
        if _KIND_NAMES[code] == "mf":
            model = MFModel(np.zeros((m, d)), np.zeros((n, d)), np.zeros(n), seed=seed)
        else:
            (corruption,) = struct.unpack("<d", fh.read(8))
            model = CDAEModel(np.zeros((n, d)), np.zeros((m, d)), np.zeros(d),
                              np.zeros((n, d)), np.zeros(n), corruption, seed=seed)
        for name in sorted(model.params()):
            arr = model.params()[name]
            raw = fh.read(8 * arr.size)
            if len(raw) != 8 * arr.size:
                raise ModelError(f"{path}: truncated checkpoint")
            arr[...] = np.frombuffer(raw, dtype="<f8").reshape(arr.shape)
    return model


def params_equal(a, b):
    """Bitwise parameter equality (determinism checks)."""
    pa, pb = a.params(), b.params()
    return pa.keys() == pb.keys() and all(
        np.array_equal(pa[k], pb[k]) for k in pa)


def new_model(kind, num_users, num_items, dim, seed, std=1.0, corruption=0.1):
    if kind == "mf":
        return MFModel.init(num_users, num_items, dim, seed, std)
    if kind == "cdae":
        return CDAEModel.init(num_users, num_items, dim, seed, std, corruption)
    raise ValueError(f"unknown model kind {kind!r}")
