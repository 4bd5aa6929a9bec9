"""Synthetic data factories with known generative ground truth.

Continuous signals are trend + seasonal + gaussian noise with the
components returned separately.  Event cohorts draw per-subject code
streams at irregular integer timestamps from class-conditional code
profiles, with an optional early "decoy" phase drawn from a different
class's profile so that recency actually matters; because the generator is
known, the exact Bayes classification rule (and hence the accuracy ceiling
any model can reach) is computable by enumeration.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, InputError
from .tensor import Rng, load_tensor, save_tensor

Array = np.ndarray


@dataclass
class SequenceBatch:
    """A batch of sequences: values [B, T, V] plus optional extras.

    ``timestamps`` [B, T] are strictly increasing integers per row (set for
    irregularly sampled data).  ``codes`` carries integer event codes when
    values are their one-hot encoding.  ``valid`` flags real (non-padding)
    positions; ``labels`` are per-sequence targets.
    """

    values: Array
    timestamps: Array | None = None
    codes: Array | None = None
    valid: Array | None = None
    labels: Array | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise InputError(f"values must be [B, T, V], got {self.values.shape}")
        if self.timestamps is not None:
            self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
            if self.timestamps.shape != self.values.shape[:2]:
                raise InputError(
                    f"timestamps shape {self.timestamps.shape} != values lead {self.values.shape[:2]}"
                )
            if self.timestamps.shape[1] > 1 and np.any(np.diff(self.timestamps, axis=1) <= 0):
                raise InputError("timestamps must be strictly increasing per sequence")

    def __len__(self) -> int:
        return self.values.shape[0]

    def take(self, idx) -> "SequenceBatch":
        idx = np.asarray(idx)
        pick = lambda a: None if a is None else a[idx]
        return SequenceBatch(
            values=self.values[idx],
            timestamps=pick(self.timestamps),
            codes=pick(self.codes),
            valid=pick(self.valid),
            labels=pick(self.labels),
        )


# ---------------------------------------------------------------------------
# continuous signals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Seasonal:
    amplitude: float
    period: float
    phase: float | None = None  # None: random per sequence


@dataclass
class SignalSpec:
    length: int = 1024
    variates: int = 1
    n_sequences: int = 8
    trend: str = "linear"  # linear | logistic | piecewise | none
    trend_scale: float = 1.0
    seasonal: tuple[Seasonal, ...] = (Seasonal(1.0, 64.0),)
    noise_sigma: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.trend not in ("linear", "logistic", "piecewise", "none"):
            raise ConfigError(f"unknown trend kind {self.trend!r}")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.trend == "none" and not self.seasonal:
            raise ConfigError("at least one component (trend or seasonal) must be active")
        if self.length < 1 or self.variates < 1 or self.n_sequences < 1:
            raise ConfigError("length, variates and n_sequences must be positive")


def gen_signal(spec: SignalSpec) -> tuple[SequenceBatch, dict[str, Array]]:
    """Values = trend + sum(seasonal) + noise, with components returned."""
    rng = Rng(spec.seed).child("signal")
    B, T, V = spec.n_sequences, spec.length, spec.variates
    t = np.arange(T, dtype=np.float64)[None, :, None]  # [1, T, 1]

    trend = np.zeros((B, T, V))
    if spec.trend != "none":
        r = rng.child("trend")
        if spec.trend == "linear":
            slope = r.uniform((B, 1, V), -1.0, 1.0) * spec.trend_scale / T
            intercept = r.uniform((B, 1, V), -0.5, 0.5)
            trend = intercept + slope * t
        elif spec.trend == "logistic":
            mid = r.uniform((B, 1, V), 0.3 * T, 0.7 * T)
            rate = r.uniform((B, 1, V), 4.0, 12.0) / T
            sign = np.where(r.uniform((B, 1, V)) < 0.5, -1.0, 1.0)
            trend = sign * spec.trend_scale / (1.0 + np.exp(-rate * (t - mid)))
        else:  # piecewise linear with one breakpoint
            brk = r.uniform((B, 1, V), 0.25 * T, 0.75 * T)
            s1 = r.uniform((B, 1, V), -1.0, 1.0) * spec.trend_scale / T
            s2 = r.uniform((B, 1, V), -1.0, 1.0) * spec.trend_scale / T
            trend = np.where(t < brk, s1 * t, s1 * brk + s2 * (t - brk))

    seasonal = np.zeros((B, T, V))
    for ci, comp in enumerate(spec.seasonal):
        r = rng.child(f"seasonal{ci}")
        phase = np.full((B, 1, V), comp.phase) if comp.phase is not None else r.uniform((B, 1, V), 0.0, 2 * np.pi)
        seasonal += comp.amplitude * np.sin(2 * np.pi * t / comp.period + phase)

    noise = rng.child("noise").normal((B, T, V), scale=spec.noise_sigma) if spec.noise_sigma > 0 else np.zeros((B, T, V))
    values = trend + seasonal + noise
    return SequenceBatch(values=values), {"trend": trend, "seasonal": seasonal, "noise": noise}


# ---------------------------------------------------------------------------
# irregular event cohorts
# ---------------------------------------------------------------------------


@dataclass
class EventCohortSpec:
    vocab: int = 20
    classes: int = 3
    subjects: int = 300
    min_events: int = 40
    max_events: int = 60
    gap_low: int = 1
    gap_high: int = 8
    separation: float = 0.9  # 0: identical uniform profiles, 1: disjoint code blocks
    decoy_fraction: float = 0.0  # early fraction of events drawn from a decoy class
    era_gap: int = 0  # extra quiet time between eras (decoy/true or cycle)
    cycle_eras: bool = False  # one era per class in random order; label = last era
    class_timing: bool = False  # odd classes arrive in tight bursts, even ones uniformly
    seed: int = 0

    def __post_init__(self):
        if self.min_events < 10:
            raise ConfigError("every subject needs at least 10 events")
        if self.max_events < self.min_events:
            raise ConfigError("max_events < min_events")
        if not (0.0 <= self.separation <= 1.0):
            raise ConfigError("separation must be in [0, 1]")
        if not (0.0 <= self.decoy_fraction < 1.0):
            raise ConfigError("decoy_fraction must be in [0, 1)")
        if self.gap_low < 1 or self.gap_high < self.gap_low:
            raise ConfigError("gaps must be positive with gap_high >= gap_low")
        if self.era_gap < 0:
            raise ConfigError("era_gap must be >= 0")
        if self.classes < 1 or self.vocab < self.classes:
            raise ConfigError("need vocab >= classes >= 1")


@dataclass
class CohortInfo:
    """Everything the Bayes oracle needs about the generator."""

    profiles: Array  # [classes, vocab]
    decoy_fraction: float
    class_prior: Array  # [classes]
    decoys: Array  # [subjects] decoy class per subject (-1 when unused)
    last_era_start: Array | None = None  # [subjects] index of the label era (cycled cohorts)
    class_timing: bool = False  # arrival process depends on class parity


def class_profiles(spec: EventCohortSpec) -> Array:
    """Per-class code distributions: uniform blended with disjoint blocks."""
    uniform = np.full((spec.classes, spec.vocab), 1.0 / spec.vocab)
    blocks = np.zeros((spec.classes, spec.vocab))
    edges = np.linspace(0, spec.vocab, spec.classes + 1).astype(int)
    for c in range(spec.classes):
        lo, hi = edges[c], edges[c + 1]
        blocks[c, lo:hi] = 1.0 / (hi - lo)
    return (1.0 - spec.separation) * uniform + spec.separation * blocks


UNIFORM_GAPS = (4, 8)  # class_timing: even classes draw gaps uniformly here
BURST_INNER_GAP = 1
BURST_BETWEEN_GAPS = (10, 16)  # and odd classes arrive in bursts of 2-3


def _burst_gaps(r: Rng, m: int) -> Array:
    gaps = np.empty(m, dtype=np.int64)
    i = 0
    while i < m:
        size = int(r.integers(2, 4))
        for j in range(size):
            if i >= m:
                break
            gaps[i] = int(r.integers(BURST_BETWEEN_GAPS[0], BURST_BETWEEN_GAPS[1] + 1)) if j == 0 else BURST_INNER_GAP
            i += 1
    return gaps


def gen_cohort(spec: EventCohortSpec) -> tuple[SequenceBatch, CohortInfo]:
    """Per-subject (code, timestamp) streams padded to a common length.

    History shapes: a single decoy era of ``decoy_fraction`` followed by
    true-class events; (``cycle_eras``) one era per class in random order
    with the label set by the final era; or (``class_timing``) a
    class-dependent arrival process, where odd classes arrive in tight
    bursts and even ones uniformly, so the label is carried by the gap
    structure rather than by aggregate code counts alone.
    """
    rng = Rng(spec.seed).child("cohort")
    profiles = class_profiles(spec)
    n, vmax = spec.subjects, spec.max_events

    labels = rng.child("labels").integers(0, spec.classes, (n,))
    counts = rng.child("counts").integers(spec.min_events, spec.max_events + 1, (n,))
    codes = np.zeros((n, vmax), dtype=np.int64)
    timestamps = np.zeros((n, vmax), dtype=np.int64)
    valid = np.zeros((n, vmax))
    decoys = np.full(n, -1, dtype=np.int64)
    last_era_start = np.zeros(n, dtype=np.int64) if spec.cycle_eras else None

    for i in range(n):
        r = rng.child(f"subject{i}")
        c = int(labels[i])
        m = int(counts[i])
        if spec.class_timing:
            if c % 2 == 1:
                gaps = _burst_gaps(r.child("gaps"), m)
            else:
                gaps = r.child("gaps").integers(UNIFORM_GAPS[0], UNIFORM_GAPS[1] + 1, (m,))
        else:
            gaps = r.child("gaps").integers(spec.gap_low, spec.gap_high + 1, (m,))
        draws = np.empty(m, dtype=np.int64)
        if spec.cycle_eras:
            order = list(r.child("order").permutation(spec.classes - 1))
            order = [k if k < c else k + 1 for k in order] + [c]
            # random era shares, the last era at least a fifth of the stream
            shares = r.child("shares").uniform((spec.classes,), 0.5, 1.5)
            shares = shares / shares.sum()
            edges = np.floor(np.cumsum(shares)[:-1] * m).astype(int)
            edges = np.clip(edges, 1, m - 1)
            bounds = [0] + sorted(set(edges.tolist())) + [m]
            while len(bounds) < spec.classes + 1:
                bounds.insert(1, bounds[1])
            for era_idx, cls in enumerate(order):
                lo, hi = bounds[era_idx], bounds[era_idx + 1]
                if hi > lo:
                    draws[lo:hi] = r.child(f"era{era_idx}").choice_p(spec.vocab, profiles[cls], (hi - lo,))
                if spec.era_gap and era_idx > 0 and lo < m:
                    gaps[lo] += spec.era_gap
            last_era_start[i] = bounds[-2]
        else:
            n_decoy = int(np.floor(spec.decoy_fraction * m))
            if n_decoy > 0 and spec.classes > 1:
                choices = [k for k in range(spec.classes) if k != c]
                decoy = choices[int(r.child("decoy").integers(0, len(choices)))]
                decoys[i] = decoy
                draws[:n_decoy] = r.child("early").choice_p(spec.vocab, profiles[decoy], (n_decoy,))
            if spec.era_gap and n_decoy > 0:
                gaps[n_decoy] += spec.era_gap
            draws[n_decoy:] = r.child("late").choice_p(spec.vocab, profiles[c], (m - n_decoy,))
        ts = np.cumsum(gaps)
        codes[i, :m] = draws
        timestamps[i, :m] = ts
        valid[i, :m] = 1.0
        # pad timestamps keep strictly increasing
        timestamps[i, m:] = ts[-1] + np.arange(1, vmax - m + 1)

    values = np.eye(spec.vocab)[codes]
    batch = SequenceBatch(values=values, timestamps=timestamps, codes=codes, valid=valid, labels=labels)
    prior = np.bincount(labels, minlength=spec.classes) / n
    return batch, CohortInfo(
        profiles=profiles,
        decoy_fraction=spec.decoy_fraction,
        class_prior=prior,
        decoys=decoys,
        last_era_start=last_era_start,
        class_timing=spec.class_timing,
    )


def bayes_predict(batch: SequenceBatch, info: CohortInfo) -> Array:
    """Exact Bayes rule under the known generator, by enumeration.

    Decoy cohorts marginalize the per-subject decoy class: the
    log-likelihood of a stream under (class c, decoy c') scores early
    events against c' and late events against c.  Cycled cohorts score the
    final era (whose start the generator recorded) against each profile.
    """
    n, vmax = batch.codes.shape
    classes = info.profiles.shape[0]
    logp = np.log(np.maximum(info.profiles, 1e-300))
    preds = np.zeros(n, dtype=np.int64)
    for i in range(n):
        m = int(batch.valid[i].sum()) if batch.valid is not None else vmax
        seq = batch.codes[i, :m]
        post = np.full(classes, -np.inf)
        if info.class_timing:
            gaps = np.diff(batch.timestamps[i, :m], prepend=0)
            bursty = bool(np.any(gaps == BURST_INNER_GAP) or np.any(gaps >= BURST_BETWEEN_GAPS[0]))
            for c in range(classes):
                if (c % 2 == 1) != bursty:
                    continue
                post[c] = np.log(max(info.class_prior[c], 1e-300)) + logp[c, seq].sum()
            preds[i] = int(np.argmax(post))
            continue
        if info.last_era_start is not None:
            late = seq[int(info.last_era_start[i]) :]
            for c in range(classes):
                post[c] = np.log(max(info.class_prior[c], 1e-300)) + logp[c, late].sum()
            preds[i] = int(np.argmax(post))
            continue
        n_decoy = int(np.floor(info.decoy_fraction * m))
        early, late = seq[:n_decoy], seq[n_decoy:]
        for c in range(classes):
            late_ll = logp[c, late].sum()
            if n_decoy == 0 or classes == 1:
                post[c] = np.log(max(info.class_prior[c], 1e-300)) + late_ll
            else:
                mix = []
                for cp in range(classes):
                    if cp == c:
                        continue
                    mix.append(logp[cp, early].sum())
                mix = np.asarray(mix)
                mmax = mix.max()
                post[c] = np.log(max(info.class_prior[c], 1e-300)) + late_ll + mmax + np.log(np.mean(np.exp(mix - mmax)))
        preds[i] = int(np.argmax(post))
    return preds


def bayes_accuracy(batch: SequenceBatch, info: CohortInfo) -> float:
    """Empirical accuracy ceiling of the exact Bayes rule on this cohort."""
    return float(np.mean(bayes_predict(batch, info) == batch.labels))


def majority_accuracy(labels: Array) -> float:
    counts = np.bincount(np.asarray(labels, dtype=np.int64))
    return float(counts.max() / counts.sum())


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------


def split_indices(n: int, fractions, seed: int) -> tuple[Array, ...]:
    """Deterministic shuffled split; sizes by largest remainder."""
    fracs = np.asarray(fractions, dtype=np.float64)
    if abs(fracs.sum() - 1.0) > 1e-9:
        raise InputError(f"fractions must sum to 1, got {fracs.tolist()}")
    raw = fracs * n
    sizes = np.floor(raw).astype(int)
    rem = n - sizes.sum()
    order = np.argsort(-(raw - sizes), kind="stable")
    for j in range(rem):
        sizes[order[j]] += 1
    if np.any(sizes == 0):
        raise InputError(f"split produced an empty part: sizes {sizes.tolist()} of n={n}")
    perm = Rng(seed).child("split").permutation(n)
    out, at = [], 0
    for s in sizes:
        out.append(np.sort(perm[at : at + s]))
        at += s
    return tuple(out)


def split(batch: SequenceBatch, fractions=(0.8, 0.1, 0.1), seed: int = 0) -> tuple[SequenceBatch, ...]:
    parts = split_indices(len(batch), fractions, seed)
    return tuple(batch.take(idx) for idx in parts)


def finetune_subset(batch: SequenceBatch, fraction: float = 0.2, seed: int = 0) -> SequenceBatch:
    """Deterministic subset of the training split used for fine-tuning."""
    n = len(batch)
    m = max(1, int(round(fraction * n)))
    perm = Rng(seed).child("finetune-subset").permutation(n)
    return batch.take(np.sort(perm[:m]))


# ---------------------------------------------------------------------------
# on-disk formats
# ---------------------------------------------------------------------------


def write_signal_csv(path, batch: SequenceBatch) -> None:
    """Single-sequence CSV with header t,v1..vV."""
    if len(batch) != 1:
        raise DataError(f"signal CSV holds one sequence; got {len(batch)} (use the binary container)")
    vals = batch.values[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"v{i}" for i in range(1, vals.shape[1] + 1)])
        for t in range(vals.shape[0]):
            w.writerow([t] + [repr(float(x)) for x in vals[t]])


def read_signal_csv(path) -> SequenceBatch:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0] != "t":
        raise DataError(f"{path}: expected header t,v1..vV")
    data = np.array([[float(x) for x in row[1:]] for row in rows[1:]])
    return SequenceBatch(values=data[None, :, :])


def write_signal_ndar(path, batch: SequenceBatch) -> None:
    save_tensor(path, batch.values)


def read_signal_ndar(path) -> SequenceBatch:
    return SequenceBatch(values=load_tensor(path))


def write_cohort_jsonl(path, batch: SequenceBatch) -> None:
    """One subject per line: {"id":…, "events":[[code,timestamp],…], "label":…}."""
    with open(path, "w") as fh:
        for i in range(len(batch)):
            m = int(batch.valid[i].sum()) if batch.valid is not None else batch.codes.shape[1]
            events = [[int(c), int(t)] for c, t in zip(batch.codes[i, :m], batch.timestamps[i, :m])]
            fh.write(json.dumps({"id": i, "events": events, "label": int(batch.labels[i])}) + "\n")


def read_cohort_jsonl(path, vocab: int) -> SequenceBatch:
    subjects = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                subjects.append(json.loads(line))
    if not subjects:
        raise DataError(f"{path}: empty cohort file")
    vmax = max(len(s["events"]) for s in subjects)
    n = len(subjects)
    codes = np.zeros((n, vmax), dtype=np.int64)
    timestamps = np.zeros((n, vmax), dtype=np.int64)
    valid = np.zeros((n, vmax))
    labels = np.zeros(n, dtype=np.int64)
    for i, s in enumerate(subjects):
        ev = s["events"]
        m = len(ev)
        codes[i, :m] = [e[0] for e in ev]
        timestamps[i, :m] = [e[1] for e in ev]
        valid[i, :m] = 1.0
        last = timestamps[i, m - 1] if m else 0
        timestamps[i, m:] = last + np.arange(1, vmax - m + 1)
        labels[i] = s["label"]
    if codes.max() >= vocab:
        raise DataError(f"{path}: code {codes.max()} outside vocab {vocab}")
    values = np.eye(vocab)[codes]
    return SequenceBatch(values=values, timestamps=timestamps, codes=codes, valid=valid, labels=labels)
