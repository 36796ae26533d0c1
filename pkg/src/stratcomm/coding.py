"""Finite-blocklength random-coding scheme facing a decoder that best-replies to exact posteriors.

A Wyner-Ziv style code (a W codebook split into message index m and bin index l) is
followed by a channel code carrying m. The decoder is strategic: it does not trust
the reconstruction the code suggests but computes the exact posterior of each U_t given
(y^n, z^n) by enumerating all |U|^n source sequences, then best-replies stage by stage.

Blocklengths are therefore limited to ``n_max`` (16 for binary sources by default).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .best_reply import TIE_TOL, _select
from .info import channel_capacity, entropy, kl_divergence

DEFAULT_DELTA_TYP = 0.1
DEFAULT_ALPHA = 0.5
TYPICAL_SLACK = 1e-12
MAX_TABLE_ENTRIES = 1 << 27


class BlocklengthTooLarge(ValueError):
    pass


class CodebookTooLarge(ValueError):
    pass


# ---------------------------------------------------------------------------
# target single-letter law


@dataclass(frozen=True)
class TargetLaw:
    """Joint law P_UZ(u, z) Q(w|u) the code is designed to mimic."""

    p_uz: np.ndarray
    q_w_given_u: np.ndarray

    def __post_init__(self):
        p_uz = np.asarray(self.p_uz, dtype=float)
        q = np.asarray(self.q_w_given_u, dtype=float)
        if q.ndim != 2 or q.shape[0] != p_uz.shape[0]:
            raise ValueError("q_w_given_u must have shape (|U|, |W|)")
        if np.any(q < 0) or np.max(np.abs(q.sum(axis=1) - 1)) > 1e-9:
            raise ValueError("rows of q_w_given_u must be probability vectors")
        object.__setattr__(self, "p_uz", p_uz)
        object.__setattr__(self, "q_w_given_u", q)

    @property
    def w_size(self) -> int:
        return self.q_w_given_u.shape[1]

    @property
    def p_uzw(self) -> np.ndarray:
        return self.p_uz[:, :, None] * self.q_w_given_u[:, None, :]

    @property
    def p_uw(self) -> np.ndarray:
        return self.p_uzw.sum(axis=1)

    @property
    def p_zw(self) -> np.ndarray:
        return self.p_uzw.sum(axis=0)

    @property
    def p_w(self) -> np.ndarray:
        return self.p_uw.sum(axis=0)

    def q_u_given_wz(self) -> np.ndarray:
        """Array ``[w, z, u]``; pairs of zero probability get the uniform belief."""
        joint = np.transpose(self.p_uzw, (2, 1, 0))
        total = joint.sum(axis=2, keepdims=True)
        return np.where(total > 0, joint / np.where(total > 0, total, 1.0), 1.0 / joint.shape[2])

    def info_uw(self) -> float:
        return float(entropy(self.p_uw.sum(axis=1)) + entropy(self.p_w) - entropy(self.p_uw.ravel()))

    def info_zw(self) -> float:
        return float(entropy(self.p_zw.sum(axis=1)) + entropy(self.p_w) - entropy(self.p_zw.ravel()))


def target_from_strategy(problem, q_w_given_u) -> TargetLaw:
    return TargetLaw(problem.p_uz, q_w_given_u)


# ---------------------------------------------------------------------------
# configuration and codebook


@dataclass(frozen=True)
class CodingConfig:
    n: int
    rate: float
    rate_l: float
    channel: np.ndarray
    target: TargetLaw
    input_law: np.ndarray | None = None
    eta: float = 0.05
    delta_typ: float = DEFAULT_DELTA_TYP
    alpha: float = DEFAULT_ALPHA
    seed: int = 0
    trials: int = 100
    n_max: int = 16

    def __post_init__(self):
        channel = np.asarray(self.channel, dtype=float)
        object.__setattr__(self, "channel", channel)
        if self.input_law is None:
            object.__setattr__(self, "input_law", channel_capacity(channel).input_law)
        else:
            object.__setattr__(self, "input_law", np.asarray(self.input_law, dtype=float))
        if self.n < 1:
            raise ValueError("blocklength must be positive")
        if self.n > self.n_max:
            raise BlocklengthTooLarge(f"blocklength {self.n} exceeds the enumeration cap n_max={self.n_max}")
        if self.rate < 0 or self.rate_l < 0:
            raise ValueError("rates must be non-negative")
        if self.delta_typ <= 0 or self.trials < 1:
            raise ValueError("delta_typ must be positive and trials at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_target(cls, target: TargetLaw, channel, n: int, eta: float = 0.05, **kwargs) -> "CodingConfig":
        """Rates on the boundary: ``R_L = I(Z;W) - eta`` (floored at 0) and ``R + R_L = I(U;W) + eta``."""
        rate_l = max(target.info_zw() - eta, 0.0)
        rate = target.info_uw() + eta - rate_l
        return cls(n=n, rate=rate, rate_l=rate_l, channel=channel, target=target, eta=eta, **kwargs)

    @property
    def m_size(self) -> int:
        return 2 ** math.ceil(self.n * self.rate - 1e-12)

    @property
    def l_size(self) -> int:
        return 2 ** math.ceil(self.n * self.rate_l - 1e-12)

    def rate_violations(self, capacity: float | None = None) -> list[str]:
        """Broken rate conditions; empty when the code is within its design region."""
        out = []
        if abs(self.rate + self.rate_l - self.target.info_uw() - self.eta) > 1e-9:
            out.append("R + R_L must equal I(U;W) + eta")
        if self.rate_l > self.target.info_zw() - self.eta + 1e-12 and self.rate_l > 0:
            out.append("R_L must not exceed I(Z;W) - eta")
        if capacity is None:
            capacity = channel_capacity(self.channel).capacity
        if self.rate > capacity - self.eta + 1e-12:
            out.append("R must not exceed capacity - eta")
        return out


@dataclass(frozen=True)
class Codebook:
    """``w[m * l_size + l]`` are the W sequences, ``x[m]`` the channel codewords."""

    w: np.ndarray
    x: np.ndarray
    m_size: int
    l_size: int

    def flat(self, m: int, l: int) -> int:
        return m * self.l_size + l

    def split(self, k: int) -> tuple[int, int]:
        return divmod(int(k), self.l_size)


def _draw(rng, law, shape):
    # inverse-cdf sampling; searchsorted keeps the stream layout independent of numpy's choice()
    cdf = np.cumsum(law)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(shape), side="right").astype(np.int64)


def generate_codebook(config: CodingConfig, rng=None) -> Codebook:
    if rng is None:
        rng = np.random.default_rng(config.seed)
    m_size, l_size = config.m_size, config.l_size
    if m_size * l_size * config.n > MAX_TABLE_ENTRIES:
        raise CodebookTooLarge(f"codebook of {m_size * l_size} sequences exceeds the memory cap")
    w = _draw(rng, config.target.p_w, (m_size * l_size, config.n))
    x = _draw(rng, config.input_law, (m_size, config.n))
    return Codebook(w, x, m_size, l_size)


# ---------------------------------------------------------------------------
# typicality


@lru_cache(maxsize=8)
def all_sequences(alphabet: int, n: int) -> np.ndarray:
    """Every sequence in lexicographic order; row ``i`` is ``i`` written in base ``alphabet``."""
    idx = np.arange(alphabet ** n)
    powers = alphabet ** np.arange(n - 1, -1, -1)
    out = (idx[:, None] // powers) % alphabet
    out.setflags(write=False)
    return out


def sequence_index(seq, alphabet: int) -> int:
    value = 0
    for s in seq:
        value = value * alphabet + int(s)
    return value


def joint_type_distance(a, b, law) -> np.ndarray:
    """L1 distance between the joint type of rows of ``a`` against rows of ``b`` and ``law``.

    ``a`` is ``(A, n)``, ``b`` is ``(B, n)``; the result is ``(A, B)``.
    """
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    law = np.asarray(law, dtype=float)
    if law.shape == (2, 2):
        return _binary_type_distance(a, b, law)
    n = a.shape[1]
    dist = np.zeros((a.shape[0], b.shape[0]))
    for i in range(law.shape[0]):
        ai = (a == i).astype(np.float64)
        for j in range(law.shape[1]):
            counts = ai @ (b == j).astype(np.float64).T
            dist += np.abs(counts / n - law[i, j])
    return dist


def _binary_type_distance(a, b, law):
    # the joint type of two binary sequences is fixed by (#ones in a, #ones in b, #common ones)
    n = a.shape[1]
    ones_a = a.sum(axis=1)
    ones_b = b.sum(axis=1)
    both = (a == 1).astype(np.float32) @ (b == 1).astype(np.float32).T
    ra, cb, k = np.meshgrid(np.arange(n + 1), np.arange(n + 1), np.arange(n + 1), indexing="ij")
    c10, c01 = ra - k, cb - k
    c00 = n - ra - cb + k
    table = (np.abs(c00 / n - law[0, 0]) + np.abs(c01 / n - law[0, 1])
             + np.abs(c10 / n - law[1, 0]) + np.abs(k / n - law[1, 1]))
    return table[ones_a[:, None], ones_b[None, :], both.astype(np.int64)]


def is_typical(seqs, law, delta: float) -> bool:
    """Joint typicality of equal-length sequences against the joint ``law``."""
    seqs = [np.asarray(s, dtype=np.int64) for s in seqs]
    n = len(seqs[0])
    law = np.asarray(law, dtype=float)
    flat = np.ravel_multi_index(tuple(seqs), law.shape)
    counts = np.bincount(flat, minlength=law.size) / n
    return float(np.abs(counts - law.ravel()).sum()) <= delta + TYPICAL_SLACK


# ---------------------------------------------------------------------------
# encoders


@dataclass(frozen=True)
class Encoder:
    """Deterministic map from every source sequence (by lexicographic index) to channel inputs.

    ``m`` and ``l`` hold the chosen indices and ``failed`` the encoding-failure flag; they are
    ``None`` for encoders that do not use a codebook.
    """

    inputs: np.ndarray
    m: np.ndarray | None = None
    l: np.ndarray | None = None
    failed: np.ndarray | None = None
    codebook: Codebook | None = field(default=None, repr=False)


def wz_encoder(codebook: Codebook, target: TargetLaw, delta_typ: float, u_size: int) -> Encoder:
    """For each source sequence, the lowest flat index (m, l) whose W sequence is typical with it."""
    n = codebook.w.shape[1]
    seqs = all_sequences(u_size, n)
    typical = joint_type_distance(seqs, codebook.w, target.p_uw) <= delta_typ + TYPICAL_SLACK
    found = typical.any(axis=1)
    k = np.where(found, typical.argmax(axis=1), 0)
    m, l = np.divmod(k, codebook.l_size)
    return Encoder(codebook.x[m], m, l, ~found, codebook)


def wz_encode(u_seq, codebook: Codebook, target: TargetLaw, delta_typ: float) -> tuple[int, int, bool]:
    """Lowest (m, l) whose W sequence is jointly typical with ``u_seq``; ``(0, 0, True)`` if none."""
    dist = joint_type_distance(np.asarray(u_seq)[None, :], codebook.w, target.p_uw)[0]
    hits = np.flatnonzero(dist <= delta_typ + TYPICAL_SLACK)
    if hits.size == 0:
        return 0, 0, True
    m, l = codebook.split(hits[0])
    return m, l, False


def identity_encoder(u_size: int, n: int) -> Encoder:
    """Sends the source sequence itself (full revelation over a noiseless channel)."""
    return Encoder(all_sequences(u_size, n).copy())


def constant_encoder(u_size: int, n: int, x_seq=None) -> Encoder:
    x_seq = np.zeros(n, dtype=np.int64) if x_seq is None else np.asarray(x_seq, dtype=np.int64)
    return Encoder(np.broadcast_to(x_seq, (u_size ** n, n)).copy())


# ---------------------------------------------------------------------------
# channel and decoding


def channel_output(x_seq, channel, rng) -> np.ndarray:
    channel = np.asarray(channel, dtype=float)
    cdf = np.cumsum(channel, axis=1)
    cdf[:, -1] = 1.0
    r = rng.random(len(x_seq))
    return (r[:, None] >= cdf[np.asarray(x_seq)]).sum(axis=1).astype(np.int64)


def decode_indices(y_seq, z_seq, codebook: Codebook, channel, input_law, target: TargetLaw,
                   delta_typ: float) -> tuple[int, int]:
    """Lowest m with (x(m), y) typical, then lowest l with (z, w(m, l)) typical; 0 when none."""
    p_xy = np.asarray(input_law)[:, None] * np.asarray(channel)
    dist_x = joint_type_distance(codebook.x, np.asarray(y_seq)[None, :], p_xy)[:, 0]
    hits = np.flatnonzero(dist_x <= delta_typ + TYPICAL_SLACK)
    m_hat = int(hits[0]) if hits.size else 0
    bin_w = codebook.w[m_hat * codebook.l_size:(m_hat + 1) * codebook.l_size]
    dist_w = joint_type_distance(np.asarray(z_seq)[None, :], bin_w, target.p_zw)[0]
    hits = np.flatnonzero(dist_w <= delta_typ + TYPICAL_SLACK)
    l_hat = int(hits[0]) if hits.size else 0
    return m_hat, l_hat


def transmit_and_decode(m: int, codebook: Codebook, channel, z_seq, delta_typ: float, rng,
                        input_law, target: TargetLaw):
    """Send ``x(m)`` through the channel and decode. Returns ``(m_hat, l_hat, y_seq)``."""
    y = channel_output(codebook.x[m], channel, rng)
    m_hat, l_hat = decode_indices(y, z_seq, codebook, channel, input_law, target, delta_typ)
    return m_hat, l_hat, y


# ---------------------------------------------------------------------------
# strategic decoder


def exact_posterior(y_seq, z_seq, encoder: Encoder, problem, channel) -> np.ndarray:
    """Per-stage beliefs ``P(u_t | y^n, z^n)`` as an ``(n, |U|)`` array, by full enumeration."""
    y_seq = np.asarray(y_seq, dtype=np.int64)
    z_seq = np.asarray(z_seq, dtype=np.int64)
    n = len(y_seq)
    seqs = all_sequences(problem.u_size, n)
    if encoder.inputs.shape[0] != seqs.shape[0]:
        raise ValueError("encoder does not cover every source sequence of this length")
    channel = np.asarray(channel, dtype=float)
    weight = np.prod(problem.p_uz[seqs, z_seq[None, :]], axis=1)
    weight = weight * np.prod(channel[encoder.inputs, y_seq[None, :]], axis=1)
    total = weight.sum()
    if total <= 0:
        raise ValueError("observed (y, z) has zero probability under the encoder")
    weight = weight / total
    post = np.stack([weight @ (seqs == u) for u in range(problem.u_size)], axis=1)
    return post / post.sum(axis=1, keepdims=True)


def stage_replies(posteriors, z_seq, problem, tie_tol: float = TIE_TOL, tie_break: str = "worst"):
    """Best reply at every stage. Returns ``(v_seq, decoder_costs)`` with costs of shape ``(n, |V|)``."""
    z_seq = np.asarray(z_seq, dtype=np.int64)
    dec = np.einsum("tu,utv->tv", posteriors, problem.d_d[:, z_seq, :])
    enc = np.einsum("tu,utv->tv", posteriors, problem.d_e[:, z_seq, :])
    chosen, _ = _select(dec, enc, tie_tol, tie_break)
    return chosen.astype(np.int64), dec


def best_reply_decode(y_seq, z_seq, encoder: Encoder, problem, channel) -> np.ndarray:
    post = exact_posterior(y_seq, z_seq, encoder, problem, channel)
    return stage_replies(post, z_seq, problem)[0]


def wz_reconstruct(w_seq, z_seq, target: TargetLaw, problem) -> np.ndarray:
    """Best reply to the target belief ``Q_U(. | w_t, z_t)`` at every stage."""
    beliefs = target.q_u_given_wz()[np.asarray(w_seq), np.asarray(z_seq)]
    return stage_replies(beliefs, z_seq, problem)[0]


# ---------------------------------------------------------------------------
# trials


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    encode_failed: bool
    index_error: bool
    error_event: bool
    d_e: float
    d_d: float
    kl_sum: float
    t_alpha_stages: int
    agreement: float
    stages: int


CSV_COLUMNS = ("trial", "encode_failed", "index_error", "error_event", "d_e", "d_d",
               "kl_mean", "t_alpha_fraction", "agreement")


def record_row(rec: TrialRecord) -> dict:
    clean = not rec.error_event
    return {
        "trial": rec.trial,
        "encode_failed": int(rec.encode_failed),
        "index_error": int(rec.index_error),
        "error_event": int(rec.error_event),
        "d_e": repr(rec.d_e),
        "d_d": repr(rec.d_d),
        "kl_mean": repr(rec.kl_sum / rec.stages) if clean else "",
        "t_alpha_fraction": repr(rec.t_alpha_stages / rec.stages) if clean else "",
        "agreement": repr(rec.agreement),
    }


@dataclass(frozen=True)
class TrialStats:
    trials: int
    n: int
    d_e: float
    d_d: float
    error_rate: float
    encode_failure_rate: float
    index_error_rate: float
    mean_kl: float
    t_alpha_fraction: float
    agreement: float
    records: tuple[TrialRecord, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("trials", "n", "d_e", "d_d", "error_rate", "encode_failure_rate",
                                               "index_error_rate", "mean_kl", "t_alpha_fraction", "agreement")}


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one trial, derived from the master seed and the trial number."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def _draw_source(problem, n, rng):
    pairs = _draw(rng, problem.p_uz.ravel(), n)
    return np.divmod(pairs, problem.z_size)


def run_trial(config: CodingConfig, problem, trial: int) -> TrialRecord:
    rng = trial_rng(config.seed, trial)
    target, n = config.target, config.n
    codebook = generate_codebook(config, rng)
    encoder = wz_encoder(codebook, target, config.delta_typ, problem.u_size)
    u, z = _draw_source(problem, n, rng)
    idx = sequence_index(u, problem.u_size)
    m, l, failed = int(encoder.m[idx]), int(encoder.l[idx]), bool(encoder.failed[idx])
    m_hat, l_hat, y = transmit_and_decode(m, codebook, config.channel, z, config.delta_typ, rng,
                                          config.input_law, target)
    x = codebook.x[m]
    w = codebook.w[codebook.flat(m, l)]
    index_error = (m, l) != (m_hat, l_hat)
    error = (failed or index_error
             or not is_typical([u, z, w], target.p_uzw, config.delta_typ)
             or not is_typical([x, y], config.input_law[:, None] * config.channel, config.delta_typ))

    post = exact_posterior(y, z, encoder, problem, config.channel)
    v, _ = stage_replies(post, z, problem)
    d_e = math.fsum(problem.d_e[u, z, v]) / n
    d_d = math.fsum(problem.d_d[u, z, v]) / n
    w_hat = codebook.w[codebook.flat(m_hat, l_hat)]
    agreement = float(np.mean(v == wz_reconstruct(w_hat, z, target, problem)))

    kl_sum, t_alpha = math.nan, 0
    if not error:
        beliefs = target.q_u_given_wz()[w, z]
        kls = [kl_divergence(post[t], beliefs[t]) for t in range(n)]
        kl_sum = math.fsum(kls)
        bound = config.alpha ** 2 / (2 * math.log(2))
        t_alpha = sum(k <= bound for k in kls)
    return TrialRecord(trial, failed, index_error, error, d_e, d_d, kl_sum, t_alpha, agreement, n)


def summarize(records, n: int) -> TrialStats:
    count = len(records)
    clean = [r for r in records if not r.error_event]
    stages = sum(r.stages for r in clean)
    return TrialStats(
        trials=count,
        n=n,
        d_e=math.fsum(r.d_e for r in records) / count,
        d_d=math.fsum(r.d_d for r in records) / count,
        error_rate=sum(r.error_event for r in records) / count,
        encode_failure_rate=sum(r.encode_failed for r in records) / count,
        index_error_rate=sum(r.index_error for r in records) / count,
        mean_kl=math.fsum(r.kl_sum for r in clean) / stages if stages else math.nan,
        t_alpha_fraction=sum(r.t_alpha_stages for r in clean) / stages if stages else math.nan,
        agreement=math.fsum(r.agreement for r in records) / count,
        records=tuple(records),
    )


def run_trials(config: CodingConfig, problem, threads: int = 1) -> TrialStats:
    """Run ``config.trials`` independent trials, each with a fresh codebook."""
    if problem.u_size ** config.n * config.n > MAX_TABLE_ENTRIES:
        raise BlocklengthTooLarge(f"|U|^n = {problem.u_size}^{config.n} is beyond exact enumeration")
    indices = range(config.trials)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda i: run_trial(config, problem, i), indices))
    else:
        records = [run_trial(config, problem, i) for i in indices]
    return summarize(records, config.n)
