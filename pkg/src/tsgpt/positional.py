"""Rotary position embedding and the per-head decay schedule.

Queries and keys are rotated pairwise by angles proportional to their
(integer) positions, which makes the query-key inner product a function of
relative distance only.  The exponential-decay half of the mechanism is not
applied here: scaling queries by gamma^n and keys by gamma^(-m) overflows
for long sequences, so the decay is realized entirely inside the retention
decay matrix, which is algebraically the same thing for every q-k product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError
from .tensor import Tensor, add, as_f64, concat, matmul, mul, reshape, swapaxes

Array = np.ndarray


@dataclass(frozen=True)
class RotaryAngles:
    """Per-pair rotation frequencies theta_i = base^(-2(i-1)/d), i = 1..d/2."""

    head_dim: int
    base: float = 10000.0
    thetas: Array = field(init=False, repr=False)

    def __post_init__(self):
        if self.head_dim % 2 != 0 or self.head_dim <= 0:
            raise ConfigError(f"rotary head_dim must be positive and even, got {self.head_dim}")
        if self.base <= 0:
            raise ConfigError(f"rotary base must be positive, got {self.base}")
        i = np.arange(self.head_dim // 2)
        object.__setattr__(self, "thetas", as_f64(self.base ** (-2.0 * i / self.head_dim)))


@dataclass(frozen=True)
class DecaySchedule:
    """One decay rate per head, each in (0, 1]."""

    gammas: tuple[float, ...]

    def __post_init__(self):
        for g in self.gammas:
            if not (0.0 < g <= 1.0):
                raise ConfigError(f"decay gamma must be in (0, 1], got {g}")

    @classmethod
    def default(cls, heads: int) -> "DecaySchedule":
        # Distinct windows per head: gamma_h = 1 - 2^-(5+h), h = 1..heads.
        return cls(tuple(1.0 - 2.0 ** (-(5 + h)) for h in range(1, heads + 1)))

    @classmethod
    def constant(cls, heads: int, gamma: float) -> "DecaySchedule":
        return cls((gamma,) * heads)


def rotation_tables(positions: Array, angles: RotaryAngles) -> tuple[Array, Array]:
    """cos/sin tables of shape positions.shape + (d/2,)."""
    ang = as_f64(positions)[..., None] * angles.thetas
    return np.cos(ang), np.sin(ang)


def rotate(x, positions: Array, angles: RotaryAngles) -> Tensor:
    """Rotate consecutive feature pairs (2i-1, 2i) by position * theta_i.

    x has shape [..., L, d] with d even; ``positions`` is an integer vector
    of length L (negative values are fine), or [B, L] for per-sequence
    positions against x shaped [B, heads, L, d].  Each pair is rotated in
    its own plane, so per-pair norms are preserved.
    """
    x = x if isinstance(x, Tensor) else Tensor(x)
    d = x.shape[-1]
    if d != angles.head_dim:
        raise ConfigError(f"rotate: x last dim {d} != angles head_dim {angles.head_dim}")
    positions = np.asarray(positions)
    if positions.ndim not in (1, 2) or positions.shape[-1] != x.shape[-2]:
        raise InputError(f"rotate: need {x.shape[-2]} positions, got shape {positions.shape}")
    cos, sin = rotation_tables(positions, angles)  # [..., L, d/2]
    if positions.ndim == 2:
        cos, sin = cos[:, None, :, :], sin[:, None, :, :]  # room for the head axis

    lead = x.shape[:-1]
    pairs = reshape(x, lead + (d // 2, 2))
    even = pairs[..., 0]
    odd = pairs[..., 1]
    r_even = add(mul(even, cos), mul(odd, -sin))
    r_odd = add(mul(even, sin), mul(odd, cos))
    stacked = concat(
        [reshape(r_even, lead + (d // 2, 1)), reshape(r_odd, lead + (d // 2, 1))],
        axis=-1,
    )
    return reshape(stacked, lead + (d,))


def xpos_qk(
    x,
    w_q,
    w_k,
    positions: Array,
    angles: RotaryAngles,
    schedule: DecaySchedule,
    apply_rotation: bool = True,
) -> tuple[Tensor, Tensor]:
    """Project to per-head queries/keys and apply the positional rotation.

    x: [..., L, d_model] with d_model = heads * head_dim; w_q, w_k:
    [d_model, heads * head_dim].  Returns (q, k), each
    [..., heads, L, head_dim].  Keys rotate by +m: the conjugate in the
    rotary formulation is supplied by the q.k inner product itself, which
    is what makes the product depend on n - m only.  The decay gammas ride
    along in ``schedule`` for the retention stage; no decay is applied here.
    """
    positions = np.asarray(positions)
    if positions.ndim not in (1, 2):
        raise InputError(f"xpos_qk: positions must be [L] or [B, L], got {positions.shape}")
    if positions.shape[-1] > 1 and np.any(np.diff(positions, axis=-1) <= 0):
        raise InputError("xpos_qk: positions must be strictly increasing")
    heads = len(schedule.gammas)
    x = x if isinstance(x, Tensor) else Tensor(x)
    d_model = x.shape[-1]
    dh = _val_shape(w_q)[-1] // heads
    if _val_shape(w_q)[-1] % heads != 0:
        raise ConfigError(f"xpos_qk: projection width {_val_shape(w_q)[-1]} not divisible by {heads} heads")

    q = _split_heads(matmul(x, w_q), heads)  # [..., h, L, dh]
    k = _split_heads(matmul(x, w_k), heads)
    if apply_rotation:
        if angles.head_dim != dh:
            raise ConfigError(f"xpos_qk: angles built for dim {angles.head_dim}, heads need {dh}")
        q = rotate(q, positions, angles)
        k = rotate(k, positions, angles)
    return q, k


def _val_shape(w) -> tuple[int, ...]:
    return w.shape if isinstance(w, Tensor) else np.asarray(w).shape


def _split_heads(x: Tensor, heads: int) -> Tensor:
    """[..., L, h*dh] -> [..., h, L, dh]."""
    lead = x.shape[:-2]
    L, width = x.shape[-2], x.shape[-1]
    dh = width // heads
    y = reshape(x, lead + (L, heads, dh))
    return swapaxes(y, -3, -2)


def merge_heads(x: Tensor) -> Tensor:
    """[..., h, L, dv] -> [..., L, h*dv]."""
    y = swapaxes(x, -3, -2)
    lead = y.shape[:-2]
    return reshape(y, lead + (y.shape[-2] * y.shape[-1],))
