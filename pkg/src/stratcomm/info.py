"""Entropy, divergence, the average-entropy function and channel capacity. All logs base 2."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DOMAIN_TOL = 1e-12


def _xlog2x(p):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)


def entropy(p, axis=-1):
    """Shannon entropy in bits along ``axis``; 0 log 0 = 0."""
    return -np.sum(_xlog2x(p), axis=axis)


def binary_entropy(p):
    """H_b(p) in bits. Raises ``ValueError`` outside [0, 1] (beyond a 1e-12 slack)."""
    arr = np.asarray(p, dtype=float)
    if np.any((arr < -DOMAIN_TOL) | (arr > 1 + DOMAIN_TOL)) or np.any(np.isnan(arr)):
        raise ValueError(f"binary_entropy: argument outside [0, 1]: {p!r}")
    arr = np.clip(arr, 0.0, 1.0)
    out = -(_xlog2x(arr) + _xlog2x(1.0 - arr))
    return float(out) if out.ndim == 0 else out


def kl_divergence(p, q) -> float:
    """D(p || q) in bits; ``inf`` when p is not absolutely continuous w.r.t. q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    support = p > 0
    if np.any(q[support] <= 0):
        return math.inf
    ps, qs = p[support], q[support]
    return max(0.0, float(np.sum(ps * (np.log2(ps) - np.log2(qs)))))


def mutual_information(p_x, t_yx) -> float:
    """I(X;Y) for input law ``p_x`` and channel rows ``t_yx[x]``."""
    p_x = np.asarray(p_x, dtype=float)
    t_yx = np.asarray(t_yx, dtype=float)
    p_y = p_x @ t_yx
    return float(entropy(p_y) - p_x @ entropy(t_yx))


def average_entropy(p, p_z_given_u):
    """h(p) = H(p) + sum_u p(u) H(P_Z(.|u)) - H(sum_u p(u) P_Z(.|u)).

    Equals the conditional entropy H(U|Z) of the joint law ``p * P_Z|U``.
    Accepts a single belief or a stack of beliefs of shape ``(..., |U|)``.
    """
    p = np.asarray(p, dtype=float)
    pz = np.asarray(p_z_given_u, dtype=float)
    return entropy(p) + p @ entropy(pz) - entropy(p @ pz)


def dsbs_entropy(q, delta):
    """Average entropy of the symmetric binary source with crossover ``delta`` at interim belief ``q``."""
    q = np.asarray(q, dtype=float)
    star = (1 - q) * delta + q * (1 - delta)
    return binary_entropy(delta) + binary_entropy(q) - binary_entropy(star)


def dsbs_entropy_derivative(q, delta):
    """d/dq of :func:`dsbs_entropy`; diverges at the endpoints, which are rejected."""
    q = np.asarray(q, dtype=float)
    if np.any((q <= 0) | (q >= 1)):
        raise ValueError(f"derivative undefined outside (0, 1): q={q!r}")
    star = (1 - q) * delta + q * (1 - delta)
    out = np.log2((1 - q) / q) - (1 - 2 * delta) * np.log2((1 - star) / star)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# channel capacity


class CapacityNotConverged(RuntimeError):
    def __init__(self, result: "CapacityResult"):
        self.result = result
        super().__init__(f"capacity iteration stopped after {result.iterations} steps "
                         f"with duality gap {result.gap:.3e} bits")


@dataclass(frozen=True)
class CapacityResult:
    capacity: float
    input_law: np.ndarray
    gap: float
    iterations: int
    history: tuple = field(default=(), repr=False)


def _row_divergences(t_yx, p_y):
    # D(T(.|x) || p_y) for every x, in bits
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(t_yx > 0, np.log2(np.where(t_yx > 0, t_yx, 1.0))
                         - np.log2(np.where(p_y > 0, p_y, 1.0)), 0.0)
    return np.sum(t_yx * ratio, axis=1)


def channel_capacity(t_yx, tol: float = 1e-9, max_iter: int = 10_000) -> CapacityResult:
    """Capacity of a discrete memoryless channel by alternating maximization (Blahut-Arimoto).

    Stops once ``max_x D(T(.|x) || P_Y) - I(X;Y)`` (an upper bound minus the current
    value) falls to ``tol``. The reported capacity is the lower bound I(X;Y).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    t_yx = np.asarray(t_yx, dtype=float)
    n_x = t_yx.shape[0]
    p_x = np.full(n_x, 1.0 / n_x)
    history = []
    gap = math.inf
    for it in range(1, max_iter + 1):
        p_y = p_x @ t_yx
        div = _row_divergences(t_yx, p_y)
        lower = float(p_x @ div)
        upper = float(div.max())
        history.append(lower)
        gap = upper - lower
        if gap <= tol:
            return CapacityResult(max(lower, 0.0), p_x, max(gap, 0.0), it, tuple(history))
        p_x = p_x * np.exp2(div)
        p_x /= p_x.sum()
    raise CapacityNotConverged(CapacityResult(max(history[-1], 0.0), p_x, gap, max_iter, tuple(history)))
