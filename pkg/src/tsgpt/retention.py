"""Retention: causal decayed attention in three equivalent forward passes.

All three forms compute, per head and per step n,

    out_n = sum_{m <= n} gamma^(t_n - t_m) (q_n . k_m) v_m

where t are integer timestamps (t_n = n for regularly sampled data).  The
parallel form materializes the decay matrix D; the recurrent form carries a
d_k x d_v state; the chunk-wise form mixes parallel intra-chunk work with a
recurrent inter-chunk state.  Cross-chunk decays are defined in timestamp
space (gamma^(t - t_last_of_previous_chunk)), the unique choice that keeps
the chunk-wise form exactly equal to the recurrent one under irregular
gaps; for consecutive integer timestamps it reduces to the familiar
zeta_j = gamma^j and gamma^B factors.

Shape conventions: q, k are [lead..., L, d_k], v is [lead..., L, d_v],
where lead is (), (heads,) or (batch, heads).  ``gamma`` is a scalar or a
per-head vector aligned with axis -3.  Shared timestamps are 1-D [L];
per-sequence timestamps are [B, L], in which case lead must be (B, heads).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError
from .tensor import Tensor, add, as_f64, concat, matmul, mul, swapaxes

Array = np.ndarray


def _check_timestamps(t) -> Array:
    t = np.asarray(t)
    if not np.issubdtype(t.dtype, np.integer):
        raise InputError(f"timestamps must be integers, got dtype {t.dtype}")
    if t.ndim not in (1, 2):
        raise InputError(f"timestamps must be [L] or [B, L], got shape {t.shape}")
    if t.shape[-1] > 1 and np.any(np.diff(t, axis=-1) < 0):
        raise InputError("timestamps must be non-decreasing")
    return t


@dataclass(frozen=True)
class DecayMask:
    """Lower-triangular decay matrix D with D[n, m] = gamma^(t_n - t_m)."""

    matrix: Array
    gamma: float | Array
    timestamps: Array | None

    @classmethod
    def build(cls, gamma, length: int | None = None, timestamps=None) -> "DecayMask":
        """Regular mask needs ``length``; irregular mask takes timestamps.

        Support is strictly-lower-triangular-plus-diagonal in index order
        (diagonal = gamma^0 = 1, with the 0^0 = 1 convention for equal
        timestamps).  Output shape: [L, L] for scalar gamma, [h, L, L] for
        per-head gamma, with an extra leading batch axis (and broadcast
        head axis) for per-sequence timestamps [B, L].
        """
        g = np.asarray(gamma, dtype=np.float64)
        if np.any(g < 0) or np.any(g > 1):
            # 0 is allowed here (memoryless limit, 0^0 = 1 on the diagonal);
            # per-head schedules are restricted to (0, 1] separately.
            raise ConfigError(f"gamma must lie in [0, 1], got {gamma}")
        if timestamps is None:
            if length is None:
                raise InputError("DecayMask.build: need length or timestamps")
            t = np.arange(length, dtype=np.int64)
            stored = None
        else:
            t = _check_timestamps(timestamps)
            length = t.shape[-1]
            stored = t
        gaps = t[..., :, None] - t[..., None, :]
        tril = np.tril(np.ones((length, length), dtype=bool))
        gaps = np.where(tril, gaps, 0)
        if t.ndim == 2:
            gaps = gaps[:, None, :, :]  # room for the head axis
        if g.ndim == 0:
            d = np.where(tril, g**gaps, 0.0)
        else:
            d = np.where(tril, g[:, None, None] ** gaps, 0.0)
        return cls(matrix=as_f64(d), gamma=gamma, timestamps=stored)

    @property
    def length(self) -> int:
        return self.matrix.shape[-1]


@dataclass
class RetentionState:
    """Running per-head summary sum_m gamma^(t_last - t_m) k_m^T v_m."""

    s: Tensor
    last_t: Array

    @classmethod
    def zeros(cls, lead: tuple[int, ...], d_k: int, d_v: int, last_t=0) -> "RetentionState":
        return cls(Tensor(np.zeros(lead + (d_k, d_v))), np.asarray(last_t))


@dataclass(frozen=True)
class ChunkPlan:
    """Chunk boundaries for the chunk-wise form; the last chunk may be ragged."""

    chunk_size: int
    boundaries: tuple[int, ...]

    @classmethod
    def build(cls, length: int, chunk_size: int) -> "ChunkPlan":
        if chunk_size <= 0:
            raise ConfigError(f"chunk_size must be >= 1, got {chunk_size}")
        if length < 0:
            raise InputError(f"length must be >= 0, got {length}")
        bounds = list(range(0, length, chunk_size)) + [length]
        if len(bounds) >= 2 and bounds[-1] == bounds[-2]:
            bounds.pop()
        return cls(chunk_size, tuple(bounds))

    def zeta_exponents(self, timestamps) -> list[Array]:
        """Per-chunk inter-chunk decay exponents t_n - t_last(previous chunk).

        gamma ** exponent is the zeta scaling vector of each chunk.  The
        first chunk measures gaps from its own first timestamp; its
        inter-chunk term multiplies a zero state, so the value is moot.
        """
        t = _check_timestamps(timestamps)
        out = []
        prev_last = t[..., 0]
        for lo, hi in zip(self.boundaries[:-1], self.boundaries[1:]):
            out.append(t[..., lo:hi] - prev_last[..., None])
            prev_last = t[..., hi - 1]
        return out


def _decay_factor(gamma, exponent) -> Array:
    """gamma ** exponent shaped to broadcast against lead dims + (d_k, d_v).

    ``exponent`` is a timestamp gap: 0-D for shared timestamps, [B] for
    per-sequence ones.
    """
    g = np.asarray(gamma, dtype=np.float64)
    e = np.asarray(exponent, dtype=np.float64)
    if e.ndim > 0:
        e = e[..., None]  # head-axis placeholder: [B, 1]
    fac = g**e
    if fac.ndim > 0:
        fac = fac[..., None, None]
    return fac


def _decay_rows(gamma, exponents, batched: bool) -> Array:
    """Column vector [..., rows, 1] of gamma ** exponents for row scaling."""
    g = np.asarray(gamma, dtype=np.float64)
    e = np.asarray(exponents, dtype=np.float64)
    if batched:
        e = e[..., None, :]  # [B, 1, rows]
    if g.ndim > 0:
        if not batched:
            e = e[None, :]  # [1, rows]
        d = g[:, None] ** e  # [h, rows] or [B, h, rows]
    else:
        d = g**e
    return d[..., None]


def retention_parallel(q, k, v, mask: DecayMask) -> Tensor:
    """(q k^T elementwise-decayed) v over a full sequence."""
    q = q if isinstance(q, Tensor) else Tensor(q)
    k = k if isinstance(k, Tensor) else Tensor(k)
    v = v if isinstance(v, Tensor) else Tensor(v)
    L = q.shape[-2]
    if mask.length != L:
        raise InputError(f"decay mask built for length {mask.length}, sequence has {L}")
    if k.shape[-2] != L or v.shape[-2] != L:
        raise InputError(f"q/k/v lengths disagree: {q.shape} {k.shape} {v.shape}")
    scores = matmul(q, swapaxes(k, -1, -2))
    return matmul(mul(scores, mask.matrix), v)


def retention_recurrent(
    q,
    k,
    v,
    timestamps,
    gamma,
    initial: RetentionState | None = None,
) -> tuple[Tensor, RetentionState]:
    """Step-by-step form: s_n = gamma^dt s_(n-1) + k_n^T v_n, out_n = q_n s_n."""
    q = q if isinstance(q, Tensor) else Tensor(q)
    k = k if isinstance(k, Tensor) else Tensor(k)
    v = v if isinstance(v, Tensor) else Tensor(v)
    L = q.shape[-2]
    t = np.arange(L, dtype=np.int64) if timestamps is None else _check_timestamps(timestamps)
    if t.shape[-1] != L:
        raise InputError(f"timestamps length {t.shape[-1]} != sequence length {L}")

    if initial is None:
        s = Tensor(np.zeros(q.shape[:-2] + (q.shape[-1], v.shape[-1])))
        last_t = t[..., 0]
    else:
        s = initial.s
        last_t = np.asarray(initial.last_t)

    outs = []
    for n in range(L):
        t_n = t[..., n]
        k_n = k[..., n : n + 1, :]
        v_n = v[..., n : n + 1, :]
        s = add(mul(s, _decay_factor(gamma, t_n - last_t)), matmul(swapaxes(k_n, -1, -2), v_n))
        outs.append(matmul(q[..., n : n + 1, :], s))
        last_t = t_n
    out = concat(outs, axis=-2)
    return out, RetentionState(s, np.asarray(last_t))


def retention_chunkwise(
    q,
    k,
    v,
    timestamps,
    gamma,
    plan: ChunkPlan,
    initial: RetentionState | None = None,
) -> tuple[Tensor, RetentionState]:
    """Parallel within chunks, recurrent across them; equals the other forms.

    Per chunk: intra-chunk term (q_c k_c^T . D_c) v_c plus inter-chunk term
    (q_c s) scaled row-wise by zeta; the state update weights the chunk's
    k^T v rows by the last row of its decay matrix and carries the previous
    state decayed by the chunk's total timestamp span.
    """
    q = q if isinstance(q, Tensor) else Tensor(q)
    k = k if isinstance(k, Tensor) else Tensor(k)
    v = v if isinstance(v, Tensor) else Tensor(v)
    L = q.shape[-2]
    if plan.boundaries[-1] != L:
        raise InputError(f"chunk plan covers length {plan.boundaries[-1]}, sequence has {L}")
    t = np.arange(L, dtype=np.int64) if timestamps is None else _check_timestamps(timestamps)
    if t.shape[-1] != L:
        raise InputError(f"timestamps length {t.shape[-1]} != sequence length {L}")
    batched = t.ndim == 2

    if initial is None:
        s = Tensor(np.zeros(q.shape[:-2] + (q.shape[-1], v.shape[-1])))
        prev_last = t[..., 0]
    else:
        s = initial.s
        prev_last = np.asarray(initial.last_t)

    outs = []
    for lo, hi in zip(plan.boundaries[:-1], plan.boundaries[1:]):
        t_c = t[..., lo:hi]
        q_c = q[..., lo:hi, :]
        k_c = k[..., lo:hi, :]
        v_c = v[..., lo:hi, :]

        mask_c = DecayMask.build(gamma, timestamps=t_c)
        intra = matmul(mul(matmul(q_c, swapaxes(k_c, -1, -2)), mask_c.matrix), v_c)

        zeta = _decay_rows(gamma, t_c - prev_last[..., None], batched)
        inter = mul(matmul(q_c, s), zeta)
        outs.append(add(intra, inter))

        last = t_c[..., -1]
        tail = _decay_rows(gamma, last[..., None] - t_c, batched)
        s = add(
            matmul(swapaxes(k_c, -1, -2), mul(v_c, tail)),
            mul(s, _decay_factor(gamma, last - prev_last)),
        )
        prev_last = last

    out = concat(outs, axis=-2)
    return out, RetentionState(s, np.asarray(prev_last))
