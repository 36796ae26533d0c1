"""Exact and low-dimensional solutions for the binary source with binary side information.

The symmetric case (uniform source, equal crossovers, ``kappa = 0``) has three regimes:
a three-posterior splitting (q*, 1/2, 1-q*) at small capacity, a two-posterior splitting
on the level set of h at larger capacity, and full revelation once C exceeds H(U|Z).
The general binary case is solved numerically over ordered posterior triples.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .best_reply import belief_thresholds, binary_average_distortion
from .info import binary_entropy, dsbs_entropy, dsbs_entropy_derivative
from .problem import DsbsParams

BISECT_TOL = 1e-12

THREE_POSTERIOR = "three-posterior"
TWO_POSTERIOR = "two-posterior"
ZERO_DISTORTION = "zero-distortion"


@dataclass(frozen=True)
class DsbsSolution:
    regime: str
    value: float
    posteriors: tuple[float, ...]
    weights: tuple[float, ...]
    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    q_star: float | None = None
    c_threshold: float | None = None

    def row(self, capacity: float) -> dict:
        q = list(self.posteriors) + [math.nan] * (3 - len(self.posteriors))
        lam = list(self.weights) + [math.nan] * (3 - len(self.weights))
        return {"capacity": capacity, "value": self.value, "regime": self.regime,
                "q_star": math.nan if self.q_star is None else self.q_star,
                "q1": q[0], "q2": q[1], "q3": q[2], "lambda1": lam[0], "lambda2": lam[1], "lambda3": lam[2]}


CSV_COLUMNS = ("capacity", "value", "regime", "q_star", "q1", "q2", "q3", "lambda1", "lambda2", "lambda3")


def strategy_tables(posteriors, weights, p0: float) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """``alpha_k = P(w_k | u0)`` and ``beta_k = P(w_k | u1)`` for a binary splitting."""
    q = np.asarray(posteriors, dtype=float)
    lam = np.asarray(weights, dtype=float)
    alpha = lam * (1 - q) / (1 - p0)
    beta = lam * q / p0
    return tuple(float(a) for a in alpha), tuple(float(b) for b in beta)


def _bisect(f, lo, hi, tol=BISECT_TOL, max_iter=200):
    """Root of ``f`` on ``[lo, hi]`` assuming ``f(lo) < 0 < f(hi)``."""
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = f(mid)
        if abs(val) <= tol or hi - lo <= 1e-16:
            return mid
        if val < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _tangent_gap(q, delta):
    # k(q) = H(U|Z) - h(q) - h'(q) (delta - q), increasing on (0, delta]
    top = binary_entropy(delta)
    return top - float(dsbs_entropy(q, delta)) - dsbs_entropy_derivative(q, delta) * (delta - q)


def _check_delta(delta):
    if not 0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta!r}")


def solve_q_star(delta: float, tol: float = BISECT_TOL) -> float:
    """Belief whose tangent to h passes through (delta, H(U|Z))."""
    _check_delta(delta)
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo = 1e-300
    while _tangent_gap(lo, delta) > 0:
        lo *= 1e-3
    return _bisect(lambda q: _tangent_gap(q, delta), lo, delta, tol)


def h_inverse(target: float, delta: float, tol: float = BISECT_TOL) -> float:
    """The q in [0, 1/2] with ``dsbs_entropy(q, delta) == target``."""
    _check_delta(delta)
    top = binary_entropy(delta)
    if target < -tol or target > top + tol:
        raise ValueError(f"target {target!r} outside [0, H(U|Z)={top!r}]")
    if target <= 0:
        return 0.0
    if target >= top:
        return 0.5
    return _bisect(lambda q: float(dsbs_entropy(q, delta)) - target, 0.0, 0.5, tol)


def dsbs_solve(params: DsbsParams) -> DsbsSolution:
    """Closed-form optimum for the symmetric case."""
    if not params.is_symmetric or params.kappa != 0:
        raise ValueError("closed form needs p0 = 1/2, delta0 = delta1 and kappa = 0")
    delta, cap, p0 = params.delta0, params.capacity, params.p0
    _check_delta(delta)
    top = binary_entropy(delta)
    q_star = solve_q_star(delta)
    c_threshold = top - float(dsbs_entropy(q_star, delta))

    if cap > top:
        post, lam = (0.0, 1.0), (0.5, 0.5)
        regime, value = ZERO_DISTORTION, 0.0
    elif cap <= c_threshold:
        lam1 = 0.5 * cap / (top - float(dsbs_entropy(q_star, delta)))
        post, lam = (q_star, 0.5, 1 - q_star), (lam1, 1 - 2 * lam1, lam1)
        regime = THREE_POSTERIOR
        value = delta - cap * (delta - q_star) / c_threshold
    else:
        q1 = h_inverse(top - cap, delta)
        post, lam = (q1, 0.5, 1 - q1), (0.5, 0.0, 0.5)
        regime, value = TWO_POSTERIOR, q1
    alpha, beta = strategy_tables(post, lam, p0)
    return DsbsSolution(regime, float(value), tuple(map(float, post)), tuple(map(float, lam)),
                        alpha, beta, q_star, c_threshold)


def feasibility_bound(q1: float, delta: float, capacity: float) -> bool:
    """Whether (q1, 1/2, 1-q1) carries non-negative weights meeting the information constraint with equality."""
    top = binary_entropy(delta)
    h1 = float(dsbs_entropy(q1, delta))
    if capacity > top or top - h1 <= 0:
        return capacity <= 0 or (capacity <= top and h1 == 0)
    lam1 = 0.5 * capacity / (top - h1)
    return 0 <= 2 * lam1 <= 1 + 1e-12


# ---------------------------------------------------------------------------
# general binary case


def _binary_h(q, p0, delta0, delta1):
    """Average entropy for a binary source with channel rows (1-d0, d0) and (d1, 1-d1)."""
    q = np.asarray(q, dtype=float)
    pz1 = (1 - q) * delta0 + q * (1 - delta1)
    return binary_entropy(q) + (1 - q) * binary_entropy(delta0) + q * binary_entropy(delta1) - binary_entropy(pz1)


def _weights(q1, q2, q3, p0, theta, h1, h2, h3):
    """Solve [1 1 1; q1 q2 q3; h1 h2 h3] lam = [1, p0, theta] by Cramer's rule (broadcasting)."""
    det = (q2 * h3 - q3 * h2) - (q1 * h3 - q3 * h1) + (q1 * h2 - q2 * h1)
    with np.errstate(divide="ignore", invalid="ignore"):
        l1 = ((q2 * h3 - q3 * h2) - (p0 * h3 - q3 * theta) + (p0 * h2 - q2 * theta)) / det
        l2 = ((p0 * h3 - q3 * theta) - (q1 * h3 - q3 * h1) + (q1 * theta - p0 * h1)) / det
    l3 = 1 - l1 - l2
    return l1, l2, l3


@dataclass
class _Best:
    value: float = math.inf
    q: tuple = ()
    lam: tuple = ()


def three_posterior_optimize(params: DsbsParams, search_tol: float = 1e-9, coarse: int = 200) -> DsbsSolution:
    """Minimize the weighted average distortion over three ordered posteriors meeting the constraint with equality.

    A coarse grid (augmented with the belief thresholds approached from both sides) is
    scanned, the best cell is refined by coordinate search, and two-posterior candidates
    are checked separately.
    """
    p0, d0, d1, kappa, cap = params.p0, params.delta0, params.delta1, params.kappa, params.capacity
    top = float(_binary_h(p0, p0, d0, d1))
    theta = top - cap

    def psi(q):
        return binary_average_distortion(q, d0, d1, kappa)

    def h(q):
        return _binary_h(q, p0, d0, d1)

    if theta < 0:
        post, lam = (0.0, 1.0), (1 - p0, p0)
        alpha, beta = strategy_tables(post, lam, p0)
        return DsbsSolution(ZERO_DISTORTION, float(np.dot(lam, psi(np.array(post)))), post, lam, alpha, beta)

    nu0, nu1, gamma = belief_thresholds(d0, d1, kappa)
    eps = 1e-12
    special = [x for t in (nu0, nu1, gamma, p0) for x in (t - eps, t, t + eps) if 0 <= x <= 1]
    axis = np.unique(np.concatenate([np.linspace(0, 1, coarse + 1), special]))
    hs, ps = h(axis), psi(axis)
    best = _Best()

    def consider(qs, lams, val):
        if val < best.value - 1e-15:
            best.value, best.q, best.lam = float(val), tuple(map(float, qs)), tuple(map(float, lams))

    # coarse scan, sliced over q2
    Q1, Q3 = np.meshgrid(axis, axis, indexing="ij")
    H1, H3 = np.meshgrid(hs, hs, indexing="ij")
    P1, P3 = np.meshgrid(ps, ps, indexing="ij")
    for j in range(len(axis)):
        q2, h2, p2 = axis[j], hs[j], ps[j]
        ok = (Q1 < q2) & (q2 < Q3)
        with np.errstate(invalid="ignore", divide="ignore"):
            l1, l2, l3 = _weights(Q1, q2, Q3, p0, theta, H1, h2, H3)
            ok &= (l1 >= 0) & (l2 >= 0) & (l3 >= 0) & (l1 <= 1) & (l2 <= 1) & (l3 <= 1)
            if not ok.any():
                continue
            vals = np.where(ok, l1 * P1 + l2 * p2 + l3 * P3, np.inf)
        k = np.unravel_index(np.argmin(vals), vals.shape)
        consider((Q1[k], q2, Q3[k]), (l1[k], l2[k], l3[k]), vals[k])

    def evaluate(q1, q2, q3):
        if not (0 <= q1 < q2 < q3 <= 1):
            return math.inf, None
        h1, h2, h3 = h(q1), h(q2), h(q3)
        with np.errstate(invalid="ignore", divide="ignore"):
            l1, l2, l3 = _weights(q1, q2, q3, p0, theta, h1, h2, h3)
        lam = np.array([l1, l2, l3], dtype=float)
        if not np.all(np.isfinite(lam)) or np.any(lam < 0) or np.any(lam > 1):
            return math.inf, None
        return float(lam @ psi(np.array([q1, q2, q3]))), lam

    # coordinate refinement with a shrinking step
    if best.q:
        q = list(best.q)
        step = 1.0 / coarse
        while step > search_tol:
            improved = False
            for i in range(3):
                for sign in (-1, 1):
                    trial = list(q)
                    trial[i] = trial[i] + sign * step
                    val, lam = evaluate(*trial)
                    if val < best.value - 1e-15:
                        q, improved = trial, True
                        consider(trial, lam, val)
            if not improved:
                step /= 2

    pair_value = lambda a: _pair_value(a, p0, theta, h, psi, search_tol)
    scanned = [(pair_value(a), a) for a in axis[axis < p0]]
    scanned = [item for item in scanned if item[0][0] < math.inf]
    if scanned:
        (val, qs, lams), a = min(scanned, key=lambda item: item[0][0])
        step = 1.0 / coarse
        while step > search_tol:
            moved = False
            for cand in (a - step, a + step):
                if 0 <= cand < p0:
                    trial = pair_value(cand)
                    if trial[0] < val - 1e-15:
                        (val, qs, lams), a, moved = trial, cand, True
            if not moved:
                step /= 2
        consider(qs, lams, val)

    if not best.q:
        raise RuntimeError("no splitting satisfies the information constraint")
    alpha, beta = strategy_tables(best.q, best.lam, p0)
    regime = THREE_POSTERIOR if len(best.q) == 3 else TWO_POSTERIOR
    return DsbsSolution(regime, best.value, best.q, best.lam, alpha, beta)


def _pair_value(a, p0, theta, h, psi, tol):
    """Best two-posterior splitting with lower posterior ``a`` whose chord of h at p0 equals theta.

    Returns ``(value, posteriors, weights)``, value ``inf`` if no partner exists.
    """
    def chord(b):
        lam_b = (p0 - a) / (b - a)
        return float((1 - lam_b) * h(a) + lam_b * h(b)) - theta

    # near b = p0 the chord is h(p0) - theta = C >= 0
    lo, hi = p0, 1.0
    if chord(hi) > 0:
        return math.inf, None, None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chord(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * 1e-3:
            break
    b = hi
    lam_b = (p0 - a) / (b - a)
    lams = (1 - lam_b, lam_b)
    return float(np.dot(lams, psi(np.array([a, b])))), (float(a), float(b)), lams


def curve_rows(params: DsbsParams, capacities) -> list[dict]:
    rows = []
    for c in capacities:
        p = DsbsParams(params.p0, params.delta0, params.delta1, params.kappa, float(c))
        sol = dsbs_solve(p) if p.is_symmetric and p.kappa == 0 else three_posterior_optimize(p)
        rows.append(sol.row(float(c)))
    return rows


def write_curve_csv(rows, stream=None) -> str:
    buf = stream if stream is not None else io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue() if stream is None else ""
