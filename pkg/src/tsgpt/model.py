"""Decoder-only retention model for continuous and event time series.

Stack: optional convolution-subsampling tokenizer, input projection, a
learned start-of-sequence embedding, then ``layers`` decoder blocks of
pre-norm multihead retention, a temporal convolution block and a pre-norm
feed-forward, all residual.  A task head reads either every position
(next-token prediction) or the mean of the final hidden states
(classification / regression fine-tuning).

Continuous next-token targets are the fixed 4:1 mean-pooled token values
(see :func:`pooled_tokens`), never the learned tokenizer features; a
learned target would collapse to a constant.  Event streams keep a
cross-entropy objective over the code vocabulary and bypass the tokenizer.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace

import numpy as np

from .convolution import CONV_VARIANTS, ConvSubsampler, TemporalConvModule, subsampled_length
from .datagen import SequenceBatch
from .errors import CheckpointError, ConfigError, InputError, TaskError
from .positional import DecaySchedule, RotaryAngles, merge_heads, xpos_qk, _split_heads
from .retention import ChunkPlan, DecayMask, RetentionState, retention_chunkwise, retention_parallel, retention_recurrent
from .tensor import (
    Rng,
    Tensor,
    add,
    broadcast_to,
    concat,
    layer_norm,
    log_softmax,
    matmul,
    mul,
    read_ndar1,
    swish,
    tmean,
    tsum,
    write_ndar1,
)

HEAD_KINDS = ("next_token", "classification", "regression")
RETENTION_FORMS = ("parallel", "recurrent", "chunkwise")


@dataclass
class ModelConfig:
    layers: int = 2
    heads: int = 2
    d_q: int = 16
    d_v: int = 16
    d_model: int | None = None
    ffn_expansion: int = 4
    chunk_size: int = 64
    gamma: float | None = None  # scalar override; None -> per-head schedule
    rotation_base: float = 10000.0
    conv_variant: str = "depthwise_pointwise"
    conv_kernel: int = 15
    retention_form: str = "parallel"
    retention_norm: bool = True
    output_gate: bool = False
    no_subsampler: bool = False
    no_temporal_conv: bool = False
    no_decay: bool = False
    no_rotation: bool = False
    head_kind: str = "next_token"
    n_inputs: int = 1
    n_classes: int = 2
    discrete: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.layers < 0:
            raise ConfigError(f"layers must be >= 0, got {self.layers}")
        if min(self.heads, self.d_q, self.d_v, self.ffn_expansion) < 1:
            raise ConfigError("heads, d_q, d_v and ffn_expansion must be positive")
        if self.d_model is None:
            self.d_model = self.heads * self.d_q
        elif self.d_model != self.heads * self.d_q:
            raise ConfigError(f"d_model {self.d_model} != heads*d_q = {self.heads * self.d_q}")
        if self.chunk_size <= 0:
            raise ConfigError(f"chunk_size must be >= 1, got {self.chunk_size}")
        if self.d_q % 2 != 0 and not self.no_rotation:
            raise ConfigError(f"rotary embedding needs even d_q, got {self.d_q}")
        if self.conv_variant not in CONV_VARIANTS:
            raise ConfigError(f"unknown conv_variant {self.conv_variant!r}")
        if self.retention_form not in RETENTION_FORMS:
            raise ConfigError(f"unknown retention_form {self.retention_form!r}")
        if self.head_kind not in HEAD_KINDS:
            raise ConfigError(f"unknown head_kind {self.head_kind!r}")
        if self.no_rotation and not self.no_decay:
            raise ConfigError("no_rotation requires no_decay: the decay rides on the relative rotary mechanism")
        if self.discrete and not self.no_subsampler:
            raise ConfigError("discrete event streams do not use the subsampling tokenizer; set no_subsampler")
        if self.gamma is not None and not (0.0 < self.gamma <= 1.0):
            raise ConfigError(f"gamma override must be in (0, 1], got {self.gamma}")
        if self.n_inputs <= 0:
            raise ConfigError("n_inputs must be positive")

    @property
    def gammas(self) -> np.ndarray:
        if self.no_decay:
            return np.ones(self.heads)
        if self.gamma is not None:
            return np.full(self.heads, self.gamma)
        return np.asarray(DecaySchedule.default(self.heads).gammas)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def backbone_hash(self) -> str:
        d = self.to_dict()
        for k in ("head_kind", "n_classes", "seed"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def multihead_retention(
    x,
    w_q,
    w_k,
    w_v,
    w_out,
    b_out,
    positions: np.ndarray,
    angles: RotaryAngles,
    gammas,
    form: str = "parallel",
    chunk_size: int = 64,
    apply_rotation: bool = True,
    norm_gain=None,
    norm_bias=None,
    gate_w=None,
    initial: RetentionState | None = None,
):
    """Per-head rotary q/k, retention in the chosen form, head concat,
    optional per-token layer norm, optional swish gate, output projection.

    x: [..., L, d_model]; w_q/w_k: [d_model, h*d_q]; w_v: [d_model, h*d_v];
    w_out: [h*d_v, d_model].  Head count comes from len(gammas).  Returns
    (out [..., L, d_model], state or None).
    """
    gammas = np.asarray(gammas, dtype=np.float64)
    heads = gammas.shape[0]
    schedule = DecaySchedule(tuple(np.maximum(gammas, 1e-12)))
    q, k = xpos_qk(x, w_q, w_k, positions, angles, schedule, apply_rotation=apply_rotation)
    v = _split_heads(matmul(x, w_v), heads)
    L = q.shape[-2]

    state = None
    if form == "parallel":
        out = retention_parallel(q, k, v, DecayMask.build(gammas, timestamps=positions))
    elif form == "recurrent":
        out, state = retention_recurrent(q, k, v, positions, gammas, initial=initial)
    elif form == "chunkwise":
        out, state = retention_chunkwise(q, k, v, positions, gammas, ChunkPlan.build(L, chunk_size), initial=initial)
    else:
        raise ConfigError(f"unknown retention form {form!r}")
    merged = merge_heads(out)
    if norm_gain is not None:
        merged = layer_norm(merged, norm_gain, norm_bias)
    if gate_w is not None:
        merged = mul(merged, swish(matmul(x, gate_w)))
    return add(matmul(merged, w_out), b_out), state


class DecoderLayer:
    """Pre-norm retention -> temporal convolution -> pre-norm feed-forward."""

    def __init__(self, cfg: ModelConfig, rng: Rng):
        self.cfg = cfg
        d, h = cfg.d_model, cfg.heads
        wq = h * cfg.d_q
        wv = h * cfg.d_v

        def u(tag, shape, fan_in):
            bound = 1.0 / np.sqrt(fan_in)
            return Tensor(rng.child(tag).uniform(shape, -bound, bound))

        self.ln1_gain = Tensor(np.ones(d))
        self.ln1_bias = Tensor(np.zeros(d))
        self.w_q = u("w_q", (d, wq), d)
        self.w_k = u("w_k", (d, wq), d)
        self.w_v = u("w_v", (d, wv), d)
        self.ret_gain = Tensor(np.ones(wv)) if cfg.retention_norm else None
        self.ret_bias = Tensor(np.zeros(wv)) if cfg.retention_norm else None
        self.w_gate = u("w_gate", (d, wv), d) if cfg.output_gate else None
        self.w_o = u("w_o", (wv, d), wv)
        self.b_o = Tensor(np.zeros(d))
        self.tconv = None if cfg.no_temporal_conv else TemporalConvModule(d, cfg.conv_kernel, cfg.conv_variant, rng.child("tconv"))
        self.ln2_gain = Tensor(np.ones(d))
        self.ln2_bias = Tensor(np.zeros(d))
        f = cfg.ffn_expansion * d
        self.ffn_w1 = u("ffn_w1", (d, f), d)
        self.ffn_b1 = Tensor(np.zeros(f))
        self.ffn_w2 = u("ffn_w2", (f, d), f)
        self.ffn_b2 = Tensor(np.zeros(d))
        self.angles = RotaryAngles(cfg.d_q, cfg.rotation_base)

    def named_params(self) -> list[tuple[str, Tensor]]:
        out = [
            ("ln1_gain", self.ln1_gain),
            ("ln1_bias", self.ln1_bias),
            ("w_q", self.w_q),
            ("w_k", self.w_k),
            ("w_v", self.w_v),
            ("w_o", self.w_o),
            ("b_o", self.b_o),
            ("ln2_gain", self.ln2_gain),
            ("ln2_bias", self.ln2_bias),
            ("ffn_w1", self.ffn_w1),
            ("ffn_b1", self.ffn_b1),
            ("ffn_w2", self.ffn_w2),
            ("ffn_b2", self.ffn_b2),
        ]
        if self.ret_gain is not None:
            out += [("ret_gain", self.ret_gain), ("ret_bias", self.ret_bias)]
        if self.w_gate is not None:
            out += [("w_gate", self.w_gate)]
        if self.tconv is not None:
            out += [(f"tconv.{n}", p) for n, p in self.tconv.named_params()]
        return out

    # -- retention sublayer -------------------------------------------------

    def _retention_inner(self, h: Tensor, positions: np.ndarray, form: str, initial: RetentionState | None):
        cfg = self.cfg
        return multihead_retention(
            h, self.w_q, self.w_k, self.w_v, self.w_o, self.b_o,
            positions, self.angles, cfg.gammas,
            form=form, chunk_size=cfg.chunk_size,
            apply_rotation=not cfg.no_rotation,
            norm_gain=self.ret_gain, norm_bias=self.ret_bias,
            gate_w=self.w_gate, initial=initial,
        )

    def _ffn(self, x: Tensor) -> Tensor:
        h = layer_norm(x, self.ln2_gain, self.ln2_bias)
        h = swish(add(matmul(h, self.ffn_w1), self.ffn_b1))
        return add(matmul(h, self.ffn_w2), self.ffn_b2)

    def forward(
        self,
        x: Tensor,
        positions: np.ndarray,
        train: bool,
        form: str | None = None,
        valid: np.ndarray | None = None,
        initial: RetentionState | None = None,
        want_state: bool = False,
        capture: dict | None = None,
    ):
        cfg = self.cfg
        form = form or cfg.retention_form
        if want_state and form == "parallel":
            form = "chunkwise"  # parallel has no state to return; chunkwise is equivalent
        r, state = self._retention_inner(layer_norm(x, self.ln1_gain, self.ln1_bias), positions, form, initial)
        x = add(x, r)
        if self.tconv is not None:
            x = self.tconv.forward(x, train=train, valid=valid, update_stats=train, capture=capture)
        x = add(x, self._ffn(x))
        return (x, state) if want_state else x

    def step(self, x_t: Tensor, position: np.ndarray, state: RetentionState, conv_bufs: list[np.ndarray] | None):
        """One-token continuation in eval mode; O(1) in the prefix length."""
        r, state = self._retention_inner(
            layer_norm(x_t, self.ln1_gain, self.ln1_bias), position, "recurrent", state
        )
        x = add(x_t, r)
        if self.tconv is not None:
            x, conv_bufs = self.tconv.step(x, conv_bufs)
        x = add(x, self._ffn(x))
        return x, state, conv_bufs


class Model:
    """Config-driven decoder stack plus a task head."""

    def __init__(self, config: ModelConfig):
        self.cfg = config
        rng = Rng(config.seed).child("init")
        V, D = config.n_inputs, config.d_model

        def u(tag, shape, fan_in):
            bound = 1.0 / np.sqrt(fan_in)
            return Tensor(rng.child(tag).uniform(shape, -bound, bound))

        self.subsampler = None if config.no_subsampler else ConvSubsampler(V, rng.child("subsampler"))
        self.w_in = u("w_in", (V, D), V)
        self.b_in = Tensor(np.zeros(D))
        self.sos = u("sos", (1, 1, D), D)
        self.layers = [DecoderLayer(config, rng.child(f"layer{i}")) for i in range(config.layers)]
        if config.head_kind == "next_token":
            self.w_head = u("w_head", (D, V), D)
            self.b_head = Tensor(np.zeros(V))
        elif config.head_kind == "classification":
            self.w_head = u("w_head", (D, config.n_classes), D)
            self.b_head = Tensor(np.zeros(config.n_classes))
        else:
            self.w_head = u("w_head", (D, 1), D)
            self.b_head = Tensor(np.zeros(1))

    # -- parameters and state ------------------------------------------------

    def named_params(self) -> list[tuple[str, Tensor]]:
        out = [("w_in", self.w_in), ("b_in", self.b_in), ("sos", self.sos)]
        if self.subsampler is not None:
            out += [(f"subsampler.{n}", p) for n, p in self.subsampler.named_params()]
        for i, layer in enumerate(self.layers):
            out += [(f"layer{i}.{n}", p) for n, p in layer.named_params()]
        out += [("w_head", self.w_head), ("b_head", self.b_head)]
        return out

    def param_count(self) -> int:
        return sum(p.value.size for _, p in self.named_params())

    def named_norm_stats(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            if layer.tconv is not None and layer.tconv.bn_state is not None:
                st = layer.tconv.bn_state
                if st.running_mean is not None:
                    out.append((f"layer{i}.tconv.bn_mean", st.running_mean))
                    out.append((f"layer{i}.tconv.bn_var", st.running_var))
        return out

    # -- encoding ------------------------------------------------------------

    def _token_features(self, batch: SequenceBatch) -> tuple[Tensor, np.ndarray]:
        """Token features [B, L, V] plus integer positions [L] or [B, L]."""
        values = np.asarray(batch.values, dtype=np.float64)
        if values.ndim != 3:
            raise InputError(f"batch values must be [B, T, V], got {values.shape}")
        if values.shape[-1] != self.cfg.n_inputs:
            raise InputError(f"batch has {values.shape[-1]} variates, model expects {self.cfg.n_inputs}")
        if self.subsampler is not None:
            if batch.timestamps is not None:
                raise ConfigError("subsampling is undefined for irregular timestamps; use no_subsampler")
            feats = self.subsampler.forward(Tensor(values))
            positions = np.arange(1, feats.shape[1] + 1, dtype=np.int64)
        else:
            feats = Tensor(values)
            if batch.timestamps is not None:
                positions = np.asarray(batch.timestamps, dtype=np.int64)
            else:
                positions = np.arange(1, values.shape[1] + 1, dtype=np.int64)
        return feats, positions

    def encode(
        self,
        batch: SequenceBatch,
        train: bool = False,
        form: str | None = None,
        want_states: bool = False,
        capture: list | None = None,
    ):
        """Hidden states [B, L+1, d_model]: position 0 is the start token."""
        feats, positions = self._token_features(batch)
        B = feats.shape[0]
        emb = add(matmul(feats, self.w_in), self.b_in)
        x = concat([broadcast_to(self.sos, (B, 1, self.cfg.d_model)), emb], axis=1)
        if positions.ndim == 1:
            pos = np.concatenate([[0], positions]).astype(np.int64)
        else:
            pos = np.concatenate([np.zeros((B, 1), dtype=np.int64), positions], axis=1)
        valid = batch.valid
        if valid is not None:
            valid = np.concatenate([np.ones((B, 1)), np.asarray(valid, dtype=np.float64)], axis=1)
        states = []
        for layer in self.layers:
            cap = None
            if capture is not None:
                cap = {}
                capture.append(cap)
            if want_states:
                x, st = layer.forward(x, pos, train=train, form=form, valid=valid, want_state=True, capture=cap)
                states.append(st)
            else:
                x = layer.forward(x, pos, train=train, form=form, valid=valid, capture=cap)
        return (x, states, pos) if want_states else x

    def forward(self, batch: SequenceBatch, train: bool = False, form: str | None = None) -> Tensor:
        """Token-aligned embeddings [B, L, d_model] (start token dropped)."""
        return self.encode(batch, train=train, form=form)[:, 1:, :]

    # -- objectives ------------------------------------------------------------

    def _head(self, x: Tensor) -> Tensor:
        return add(matmul(x, self.w_head), self.b_head)

    def pretrain_loss(self, batch: SequenceBatch, train: bool = True, form: str | None = None) -> Tensor:
        """Next-token objective: MSE for continuous values, cross-entropy for codes."""
        if self.cfg.head_kind != "next_token":
            raise TaskError(f"pretrain_loss needs a next_token head, model has {self.cfg.head_kind!r}")
        hidden = self.encode(batch, train=train, form=form)
        preds = self._head(hidden[:, :-1, :])  # position i predicts token i+1
        n_tokens = preds.shape[1]
        if n_tokens < 2:
            raise InputError(f"need at least 2 tokens for next-token training, got {n_tokens}")
        if self.cfg.discrete:
            if batch.codes is None:
                raise InputError("discrete pretraining needs integer codes in the batch")
            logp = log_softmax(preds)
            onehot = np.eye(self.cfg.n_inputs)[np.asarray(batch.codes, dtype=np.int64)]
            tok_ll = tsum(mul(logp, onehot), axis=-1)  # [B, L]
            if batch.valid is not None:
                w = np.asarray(batch.valid, dtype=np.float64)
                return mul(tsum(mul(tok_ll, -w)), 1.0 / max(w.sum(), 1.0))
            return tmean(mul(tok_ll, -1.0))
        targets = self.token_targets(batch)
        err = preds - Tensor(targets)
        if batch.valid is not None:
            w = np.asarray(batch.valid, dtype=np.float64)[..., None]
            return mul(tsum(mul(mul(err, err), w)), 1.0 / max(w.sum() * targets.shape[-1], 1.0))
        return tmean(mul(err, err))

    def token_targets(self, batch: SequenceBatch) -> np.ndarray:
        """Token-granularity ground truth for continuous next-token training."""
        values = np.asarray(batch.values, dtype=np.float64)
        if self.subsampler is not None:
            return pooled_tokens(values)
        return values

    def mean_hidden(self, batch: SequenceBatch, train: bool = False, form: str | None = None) -> Tensor:
        hidden = self.encode(batch, train=train, form=form)[:, 1:, :]
        if batch.valid is not None:
            w = np.asarray(batch.valid, dtype=np.float64)[..., None]
            total = tsum(mul(hidden, w), axis=1)
            return mul(total, 1.0 / np.maximum(w.sum(axis=1), 1.0))
        return tmean(hidden, axis=1)

    def classify_logits(self, batch: SequenceBatch, train: bool = False) -> Tensor:
        if self.cfg.head_kind != "classification":
            raise TaskError(f"classification needs a classification head, model has {self.cfg.head_kind!r}")
        return self._head(self.mean_hidden(batch, train=train))

    def classification_loss(self, batch: SequenceBatch, train: bool = True) -> Tensor:
        logits = self.classify_logits(batch, train=train)
        logp = log_softmax(logits)
        onehot = np.eye(self.cfg.n_classes)[np.asarray(batch.labels, dtype=np.int64)]
        return tmean(tsum(mul(logp, mul(onehot, -1.0)), axis=-1))

    def regression_output(self, batch: SequenceBatch, train: bool = False) -> Tensor:
        if self.cfg.head_kind != "regression":
            raise TaskError(f"regression needs a regression head, model has {self.cfg.head_kind!r}")
        return self._head(self.mean_hidden(batch, train=train))

    def regression_loss(self, batch: SequenceBatch, train: bool = True) -> Tensor:
        out = self.regression_output(batch, train=train)
        err = out - Tensor(np.asarray(batch.labels, dtype=np.float64)[:, None])
        return tmean(mul(err, err))

    def loss(self, batch: SequenceBatch, train: bool = True) -> Tensor:
        if self.cfg.head_kind == "next_token":
            return self.pretrain_loss(batch, train=train)
        if self.cfg.head_kind == "classification":
            return self.classification_loss(batch, train=train)
        return self.regression_loss(batch, train=train)

    # -- generation ------------------------------------------------------------

    def generate(self, prompt: SequenceBatch, horizon: int, recompute: bool = False) -> np.ndarray:
        """Autoregressive token forecast [B, horizon, V].

        The default path carries per-layer retention states and convolution
        buffers (O(1) per emitted token); ``recompute`` re-encodes the whole
        prefix each step with the parallel form instead (the equivalence
        oracle for tests).  Timestamped prompts are not supported: rollout
        emits one token per regular step.
        """
        if self.cfg.head_kind != "next_token":
            raise TaskError(f"generate needs a next_token head, model has {self.cfg.head_kind!r}")
        if horizon < 1:
            raise InputError(f"horizon must be >= 1, got {horizon}")
        if prompt.timestamps is not None:
            raise InputError("generate supports regularly sampled prompts only")
        if recompute:
            return self._generate_recompute(prompt, horizon)

        capture: list[dict] = []
        x, states, pos = self.encode(prompt, train=False, want_states=True, capture=capture)
        conv_bufs = [cap.get("dw_inputs") if cap else None for cap in capture]
        last_hidden = x[:, -1:, :]
        B = x.shape[0]
        next_pos = int(pos[-1]) + 1

        # states are detached each step: generation needs no gradients and
        # must not chain the whole rollout graph in memory
        states = [RetentionState(Tensor(st.s.value), st.last_t) for st in states]
        last_hidden = Tensor(last_hidden.value)

        preds = []
        for _ in range(horizon):
            y = self._head(last_hidden)  # [B, 1, V]
            preds.append(y.value.copy())
            emb = add(matmul(Tensor(y.value), self.w_in), self.b_in)
            h = emb
            new_states = []
            for li, layer in enumerate(self.layers):
                h, st, bufs = layer.step(h, np.array([next_pos], dtype=np.int64), states[li], conv_bufs[li])
                new_states.append(RetentionState(Tensor(st.s.value), st.last_t))
                conv_bufs[li] = bufs
            states = new_states
            last_hidden = Tensor(h.value)
            next_pos += 1
        return np.concatenate(preds, axis=1)

    def _generate_recompute(self, prompt: SequenceBatch, horizon: int) -> np.ndarray:
        feats, _ = self._token_features(prompt)
        token_vals = feats.value if self.subsampler is None else None
        raw = np.asarray(prompt.values, dtype=np.float64)
        preds = []
        extra: list[np.ndarray] = []
        for _ in range(horizon):
            if self.subsampler is not None:
                hidden = self._encode_mixed(raw, extra)
            else:
                vals = np.concatenate([token_vals] + extra, axis=1) if extra else token_vals
                hidden = self.encode(SequenceBatch(values=vals), train=False, form="parallel")
            y = self._head(hidden[:, -1:, :]).value.copy()
            preds.append(y)
            extra.append(y)
        return np.concatenate(preds, axis=1)

    def _encode_mixed(self, raw: np.ndarray, extra: list[np.ndarray]) -> Tensor:
        """Prefix encoding where generated tokens re-enter via the value path."""
        feats = self.subsampler.forward(Tensor(raw))
        if extra:
            feats = concat([feats, Tensor(np.concatenate(extra, axis=1))], axis=1)
        B, L = feats.shape[0], feats.shape[1]
        emb = add(matmul(feats, self.w_in), self.b_in)
        x = concat([broadcast_to(self.sos, (B, 1, self.cfg.d_model)), emb], axis=1)
        pos = np.arange(0, L + 1, dtype=np.int64)
        for layer in self.layers:
            x = layer.forward(x, pos, train=False, form="parallel")
        return x

    # -- checkpointing -----------------------------------------------------------

    def save(self, path) -> None:
        params = self.named_params()
        stats = self.named_norm_stats()
        header = {
            "format": "tsgpt-ckpt-v1",
            "config": self.cfg.to_dict(),
            "config_hash": self.cfg.config_hash(),
            "backbone_hash": self.cfg.backbone_hash(),
            "params": [n for n, _ in params],
            "norm_stats": [n for n, _ in stats],
        }
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            for _, p in params:
                write_ndar1(fh, p.value)
            for _, a in stats:
                write_ndar1(fh, a)

    @classmethod
    def load(cls, path) -> "Model":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode())
            if header.get("format") != "tsgpt-ckpt-v1":
                raise CheckpointError(f"unrecognized checkpoint format in {path}")
            cfg = ModelConfig(**header["config"])
            if cfg.config_hash() != header["config_hash"]:
                raise CheckpointError("checkpoint config hash mismatch")
            model = cls(cfg)
            by_name = dict(model.named_params())
            if [n for n, _ in model.named_params()] != header["params"]:
                raise CheckpointError("checkpoint parameter manifest does not match the config")
            for name in header["params"]:
                arr = read_ndar1(fh)
                if arr.shape != by_name[name].value.shape:
                    raise CheckpointError(f"parameter {name}: shape {arr.shape} != {by_name[name].value.shape}")
                by_name[name].value = arr
            stats = {}
            for name in header["norm_stats"]:
                stats[name] = read_ndar1(fh)
            for i, layer in enumerate(model.layers):
                if layer.tconv is not None and layer.tconv.bn_state is not None:
                    mkey, vkey = f"layer{i}.tconv.bn_mean", f"layer{i}.tconv.bn_var"
                    if mkey in stats:
                        layer.tconv.bn_state.running_mean = stats[mkey]
                        layer.tconv.bn_state.running_var = stats[vkey]
        return model

    def with_head(self, head_kind: str, n_classes: int | None = None) -> "Model":
        """Same backbone weights under a fresh task head (for fine-tuning)."""
        cfg = replace(self.cfg, head_kind=head_kind, n_classes=n_classes or self.cfg.n_classes)
        out = Model(cfg)
        mine = dict(self.named_params())
        for name, p in out.named_params():
            if name in ("w_head", "b_head"):
                continue
            p.value = mine[name].value.copy()
        for i, layer in enumerate(out.layers):
            src = self.layers[i]
            if (
                layer.tconv is not None
                and src.tconv is not None
                and src.tconv.bn_state is not None
                and src.tconv.bn_state.running_mean is not None
            ):
                layer.tconv.bn_state.running_mean = src.tconv.bn_state.running_mean.copy()
                layer.tconv.bn_state.running_var = src.tconv.bn_state.running_var.copy()
        return out


def pooled_tokens(values: np.ndarray) -> np.ndarray:
    """Fixed 4:1 token-granularity reduction of a raw sequence [B, T, V].

    Token i is the mean of the causal raw window (4i-3 .. 4i); this is the
    weight-free ground truth that next-token training and forecast scoring
    share.  The token count matches the tokenizer's length arithmetic.
    """
    values = np.asarray(values, dtype=np.float64)
    B, T, V = values.shape
    L = subsampled_length(T)
    out = np.zeros((B, L, V))
    for i in range(L):
        lo = max(0, 4 * i - 3)
        out[:, i, :] = values[:, lo : 4 * i + 1, :].mean(axis=1)
    return out
