"""Optimal encoder distortion as a constrained convex closure over a belief grid.

The encoder splits the prior P_U into posteriors ``p_w`` with weights ``lambda_w``; its
cost is the weighted average distortion and the channel limits how informative the
splitting can be through ``sum_w lambda_w h(p_w) >= H(U|Z) - C``. Over a finite grid of
beliefs this is a linear program in the weights.

The average distortion jumps where the decoder's best reply switches, so the grid is
augmented with beliefs at +/- ``tie_probe_eps`` on both sides of every switching boundary.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .best_reply import TIE_TOL, average_distortion_many, best_reply
from .info import average_entropy
from .simplex import LPError, linprog_equality

DEFAULT_PROBE_EPS = 1e-7
JUMP_TOL = 1e-9


class SolverError(RuntimeError):
    pass


def default_grid_step(u_size: int) -> float:
    return {1: 1.0, 2: 1e-3, 3: 2e-2}.get(u_size, 5e-2)


def simplex_lattice(u_size: int, step: float) -> np.ndarray:
    """All beliefs with coordinates in multiples of ``1/N``, ``N = round(1/step)``."""
    n = max(1, int(round(1.0 / step)))
    if u_size == 1:
        return np.ones((1, 1))
    # stars and bars: choose u_size - 1 bar positions among n + u_size - 1 slots
    bars = np.array(list(itertools.combinations(range(n + u_size - 1), u_size - 1)), dtype=np.int64)
    padded = np.hstack([np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), n + u_size - 1)])
    counts = np.diff(padded, axis=1) - 1
    return counts / n


@dataclass(frozen=True)
class Splitting:
    """Weighted posteriors ``(weights[w], posteriors[w])`` averaging to the prior."""

    weights: np.ndarray
    posteriors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "posteriors", np.atleast_2d(np.asarray(self.posteriors, dtype=float)))

    def __len__(self):
        return len(self.weights)

    @property
    def barycenter(self) -> np.ndarray:
        return self.weights @ self.posteriors

    def check(self, prior, atol: float = 1e-8) -> None:
        if abs(self.weights.sum() - 1) > 1e-10 or np.any(self.weights < 0):
            raise ValueError("weights must be non-negative and sum to 1")
        if np.max(np.abs(self.barycenter - np.asarray(prior))) > atol:
            raise ValueError("posteriors do not average to the prior")


@dataclass(frozen=True)
class BeliefGrid:
    """Grid beliefs with their average distortion ``psi`` and average entropy ``h``.

    ``anchor[g]`` is -1 for ordinary points; probe points store the index of the
    boundary point they straddle.
    """

    points: np.ndarray
    psi: np.ndarray
    h: np.ndarray
    anchor: np.ndarray
    step: float
    prior_index: int
    vertex_index: np.ndarray

    def __len__(self):
        return len(self.points)


def _switching_probes(problem, lattice, step, eps, tie_tol, tie_break):
    """Boundary points where some decoder minimizer set changes, plus their +/- eps neighbours."""
    u_size = problem.u_size
    n = int(round(1.0 / step))
    counts = np.rint(lattice * n).astype(np.int64)
    index = {tuple(c): i for i, c in enumerate(counts)}
    starts, ends = [], []
    for i, j in itertools.permutations(range(u_size), 2):
        if i > j:
            continue
        shift = np.zeros(u_size, dtype=np.int64)
        shift[i], shift[j] = 1, -1
        for a, c in enumerate(counts):
            b = index.get(tuple(c + shift))
            if b is not None:
                starts.append(a)
                ends.append(b)
    if not starts:
        return np.empty((0, u_size)), np.empty(0, dtype=np.int64), np.empty((0, u_size))
    p0 = lattice[starts]
    p1 = lattice[ends]

    boundaries = []
    pzu = problem.p_z_given_u
    for z in range(problem.z_size):
        for v, w in itertools.combinations(range(problem.v_size), 2):
            coef = pzu[:, z] * (problem.d_d[:, z, v] - problem.d_d[:, z, w])
            f0, f1 = p0 @ coef, p1 @ coef
            cross = ((f0 <= 0) & (f1 >= 0)) | ((f0 >= 0) & (f1 <= 0))
            cross &= ~((f0 == 0) & (f1 == 0))
            for k in np.flatnonzero(cross):
                t = f0[k] / (f0[k] - f1[k])
                pt = p0[k] + t * (p1[k] - p0[k])
                weight = pt @ pzu[:, z]
                if weight <= 0:
                    continue
                post = pt * pzu[:, z] / weight
                mins = best_reply(z, post, problem.d_e, problem.d_d, tie_tol, tie_break).minimizers
                if v in mins and w in mins:
                    boundaries.append((pt, (p1[k] - p0[k]) / step))
    if not boundaries:
        return np.empty((0, u_size)), np.empty(0, dtype=np.int64), np.empty((0, u_size))

    anchors = np.array([b[0] for b in boundaries])
    dirs = np.array([b[1] for b in boundaries])
    # dedupe boundary points (several edges may hit the same lattice point)
    _, keep = np.unique(np.round(np.hstack([anchors, dirs]), 13), axis=0, return_index=True)
    keep.sort()
    anchors, dirs = anchors[keep], dirs[keep]
    probes, parent = [], []
    for a, (pt, d) in enumerate(zip(anchors, dirs)):
        for sign in (-1.0, 1.0):
            q = pt + sign * eps * d
            if np.all(q >= 0):
                probes.append(q / q.sum())
                parent.append(a)
    return anchors, np.array(parent, dtype=np.int64), np.array(probes).reshape(-1, u_size)


def build_grid(problem, grid_step: float | None = None, tie_probe_eps: float = DEFAULT_PROBE_EPS,
               tie_tol: float = TIE_TOL, tie_break: str = "worst") -> BeliefGrid:
    """Lattice on the belief simplex plus the prior and the switching-boundary probes."""
    if grid_step is None:
        grid_step = default_grid_step(problem.u_size)
    if not (0 < grid_step <= 0.5) and problem.u_size > 1:
        raise ValueError(f"grid_step must lie in (0, 0.5], got {grid_step!r}")
    lattice = simplex_lattice(problem.u_size, grid_step)
    anchors, parent, probes = _switching_probes(problem, lattice, grid_step, tie_probe_eps, tie_tol, tie_break)
    prior = problem.p_u

    n_lat = len(lattice)
    points = [lattice, anchors, probes]
    anchor = [np.full(n_lat, -1), np.full(len(anchors), -1), n_lat + parent]
    hit = np.flatnonzero(np.all(lattice == prior, axis=1))
    if hit.size:
        prior_index = int(hit[0])
    else:
        prior_index = n_lat + len(anchors) + len(probes)
        points.append(prior[None, :])
        anchor.append(np.array([-1]))
    points = np.vstack(points)
    anchor = np.concatenate(anchor).astype(np.int64)

    psi = average_distortion_many(points, problem, tie_tol, tie_break)
    h = average_entropy(points, problem.p_z_given_u)
    h[prior_index] = average_entropy(prior, problem.p_z_given_u)
    vertex_index = np.array([int(np.flatnonzero(lattice[:, u] == 1.0)[0]) for u in range(problem.u_size)])
    return BeliefGrid(points, psi, h, anchor, grid_step, prior_index, vertex_index)


@dataclass(frozen=True)
class SolveResult:
    value: float
    splitting: Splitting
    slack_bits: float
    threshold_bits: float
    capacity_bits: float
    grid_step: float
    infimum_flag: bool
    support: tuple[int, ...] = field(default=(), repr=False)
    iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "capacity_bits": self.capacity_bits,
            "threshold_bits": self.threshold_bits,
            "slack_bits": self.slack_bits,
            "splitting": [{"weight": float(w), "posterior": [float(x) for x in p]}
                          for w, p in zip(self.splitting.weights, self.splitting.posteriors)],
            "grid_step": self.grid_step,
            "infimum_flag": self.infimum_flag,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _start_basis(grid: BeliefGrid, prior) -> list[int]:
    """Feasible basis at the trivial splitting: the prior column plus all but one vertex."""
    ref = int(np.argmax(prior))
    cols = [grid.prior_index]
    cols += [int(grid.vertex_index[u]) for u in range(len(prior)) if u != ref]
    if len(set(cols)) < len(cols):
        # prior is itself a vertex: swap in the reference vertex's duplicate-free set
        cols = [int(grid.vertex_index[u]) for u in range(len(prior))]
    return cols


def solve_splitting(problem, capacity: float, grid_step: float | None = None,
                    tie_probe_eps: float = DEFAULT_PROBE_EPS, *, grid: BeliefGrid | None = None,
                    tie_tol: float = TIE_TOL, tie_break: str = "worst") -> SolveResult:
    """Minimal weighted average distortion over grid splittings meeting the information constraint."""
    if capacity < 0:
        raise ValueError("capacity must be non-negative")
    if grid is None:
        grid = build_grid(problem, grid_step, tie_probe_eps, tie_tol, tie_break)
    prior = problem.p_u
    u_size = problem.u_size
    theta = float(grid.h[grid.prior_index] - capacity)

    G = len(grid)
    A = np.zeros((u_size + 1, G + 1))
    A[:u_size, :G] = grid.points.T
    A[u_size, :G] = grid.h
    A[u_size, G] = -1.0
    b = np.concatenate([prior, [theta]])
    c = np.concatenate([grid.psi, [0.0]])
    try:
        res = linprog_equality(c, A, b, basis=_start_basis(grid, prior) + [G])
    except LPError as exc:
        raise SolverError(f"splitting LP failed: {exc}") from exc

    lam = res.x[:G]
    support = tuple(int(g) for g in np.flatnonzero(lam > 1e-12))
    weights = lam[list(support)]
    weights = weights / weights.sum()
    splitting = Splitting(weights, grid.points[list(support)])
    value = float(weights @ grid.psi[list(support)])
    slack = float(weights @ grid.h[list(support)] - theta)
    flag = any(grid.anchor[g] >= 0 and abs(grid.psi[g] - grid.psi[grid.anchor[g]]) > JUMP_TOL for g in support)
    return SolveResult(value, splitting, slack, theta, float(capacity), grid.step, flag, support, res.iterations)


def zero_capacity_value(problem, tie_tol: float = TIE_TOL, tie_break: str = "worst") -> float:
    """Encoder distortion when the decoder relies on side information alone."""
    total = []
    for z in range(problem.z_size):
        col = problem.p_uz[:, z]
        pz = col.sum()
        if pz <= 0:
            continue
        reply = best_reply(z, col / pz, problem.d_e, problem.d_d, tie_tol, tie_break)
        total.append(float(col @ problem.d_e[:, z, reply.selected]))
    return math.fsum(total)


def convex_envelope_at_prior(grid: BeliefGrid, prior, values, basis=None):
    """Lower convex envelope of ``values`` (given on grid points) at the prior.

    Returns ``(value, basis)``; the basis stays feasible for any other ``values`` and can warm-start the next call.
    """
    res = linprog_equality(values, grid.points.T, prior, basis=basis or _start_basis(grid, prior))
    return res.value, list(res.basis)


def lagrangian_value(problem, capacity: float, t_grid=None, grid_step: float | None = None,
                     *, grid: BeliefGrid | None = None, t_tol: float = 1e-9, t_max: float = 1e6) -> float:
    """Dual route: ``max_t { vex[Psi - t h](P_U) + t theta }`` with ``theta = H(U|Z) - C``.

    With an explicit ``t_grid`` the maximum is taken over those multipliers only. Otherwise
    the dual function (concave in t) is bracketed by doubling and maximized by golden section.
    """
    if grid is None:
        grid = build_grid(problem, grid_step)
    prior = problem.p_u
    theta = float(grid.h[grid.prior_index] - capacity)

    warm = [None]

    def dual(t):
        value, warm[0] = convex_envelope_at_prior(grid, prior, grid.psi - t * grid.h, warm[0])
        return value + t * theta

    if t_grid is not None:
        ts = [float(t) for t in t_grid]
        if not ts or min(ts) < 0:
            raise ValueError("t_grid must be non-empty and non-negative")
        return max(dual(t) for t in ts)

    lo, g_lo = 0.0, dual(0.0)
    mid, g_mid = 2.0 ** -6, dual(2.0 ** -6)
    if g_mid <= g_lo:
        hi = mid
        mid, g_mid = hi / 2, dual(hi / 2)
        if g_mid <= g_lo:
            return g_lo
    else:
        while True:
            hi = 2 * mid
            g_hi = dual(hi)
            if g_hi < g_mid or hi >= t_max:
                break
            lo, g_lo, mid, g_mid = mid, g_mid, hi, g_hi
        if hi >= t_max and g_hi >= g_mid:
            return g_hi
    # golden-section search on [lo, hi] around mid
    inv_phi = (math.sqrt(5) - 1) / 2
    a, b_ = lo, hi
    x1 = b_ - inv_phi * (b_ - a)
    x2 = a + inv_phi * (b_ - a)
    f1, f2 = dual(x1), dual(x2)
    best = max(g_lo, g_mid, f1, f2)
    while b_ - a > t_tol * max(1.0, b_):
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv_phi * (b_ - a)
            f2 = dual(x2)
        else:
            b_, x2, f2 = x2, x1, f1
            x1 = b_ - inv_phi * (b_ - a)
            f1 = dual(x1)
        best = max(best, f1, f2)
    return best


def strategy_from_splitting(splitting: Splitting, prior) -> np.ndarray:
    """Encoder strategy Q(w|u) = lambda_w p_w(u) / P(u) as an array of shape ``(|U|, |W|)``."""
    prior = np.asarray(prior, dtype=float)
    joint = splitting.posteriors.T * splitting.weights          # (U, W)
    out = np.empty_like(joint)
    for u, pu in enumerate(prior):
        if pu > 0:
            out[u] = joint[u] / pu
        elif np.any(joint[u] > 0):
            raise ValueError(f"source symbol u={u} has zero prior but positive posterior mass")
        else:
            out[u] = 1.0 / joint.shape[1]
    return out


def splitting_from_strategy(q_w_given_u, prior, merge_tol: float = 1e-12) -> Splitting:
    """Weights and posteriors induced by an encoder strategy; identical posteriors are merged."""
    prior = np.asarray(prior, dtype=float)
    joint = prior[:, None] * np.asarray(q_w_given_u, dtype=float)    # (U, W)
    lam = joint.sum(axis=0)
    weights, posts = [], []
    for w in np.flatnonzero(lam > 0):
        post = joint[:, w] / lam[w]
        for k, existing in enumerate(posts):
            if np.max(np.abs(existing - post)) <= merge_tol:
                weights[k] += lam[w]
                break
        else:
            weights.append(lam[w])
            posts.append(post)
    return Splitting(np.array(weights), np.array(posts))


def tradeoff_curve(problem, capacities, grid_step: float | None = None, **kwargs) -> list[tuple[float, float]]:
    """``(C, D_e*)`` for each capacity, reusing one belief grid."""
    capacities = [float(c) for c in capacities]
    if any(b < a for a, b in zip(capacities, capacities[1:])):
        raise ValueError("capacities must be sorted ascending")
    grid = build_grid(problem, grid_step, **kwargs)
    return [(c, solve_splitting(problem, c, grid=grid).value) for c in capacities]
