"""Belief geometry: Bayes updates, the decoder's best replies and the encoder's resulting distortion.

The decoder picks a symbol minimizing its expected distortion; among (near-)minimizers it
plays the one worst for the encoder, lowest index on remaining ties. ``tie_break="best"``
flips the encoder-side selection and exists for comparisons only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TIE_TOL = 1e-9


class UnreachableSideInformation(ValueError):
    """The observed side-information symbol has zero probability under the belief."""


def bayes_interim_to_posterior(q, z: int, p_z_given_u) -> np.ndarray:
    """Posterior over U after observing ``z`` from interim belief ``q``."""
    q = np.asarray(q, dtype=float)
    joint = q * np.asarray(p_z_given_u, dtype=float)[:, z]
    total = joint.sum()
    if total <= 0:
        raise UnreachableSideInformation(f"side information z={z} has zero probability under belief {q}")
    return joint / total


@dataclass(frozen=True)
class BestReplySet:
    minimizers: tuple[int, ...]
    selected: int
    decoder_cost: float
    encoder_cost: float


def _select(dec_costs, enc_costs, tie_tol, tie_break):
    """Vectorized selection over the trailing axis (v). Returns (index, minimizer mask)."""
    mask = dec_costs <= dec_costs.min(axis=-1, keepdims=True) + tie_tol
    if tie_break == "worst":
        score = np.where(mask, enc_costs, -np.inf)
        chosen = np.argmax(score, axis=-1)
    elif tie_break == "best":
        score = np.where(mask, enc_costs, np.inf)
        chosen = np.argmin(score, axis=-1)
    else:
        raise ValueError(f"tie_break must be 'worst' or 'best', got {tie_break!r}")
    return chosen, mask


def best_reply(z: int, p, d_e, d_d, tie_tol: float = TIE_TOL, tie_break: str = "worst") -> BestReplySet:
    p = np.asarray(p, dtype=float)
    dec = p @ np.asarray(d_d, dtype=float)[:, z, :]
    enc = p @ np.asarray(d_e, dtype=float)[:, z, :]
    chosen, mask = _select(dec, enc, tie_tol, tie_break)
    chosen = int(chosen)
    return BestReplySet(tuple(int(v) for v in np.flatnonzero(mask)), chosen, float(dec.min()), float(enc[chosen]))


def robust_distortion(z: int, p, d_e, d_d, tie_tol: float = TIE_TOL, tie_break: str = "worst") -> float:
    """Encoder's expected distortion when the decoder best-replies to belief ``p`` at ``z``."""
    return best_reply(z, p, d_e, d_d, tie_tol, tie_break).encoder_cost


def average_distortion_many(beliefs, problem, tie_tol: float = TIE_TOL, tie_break: str = "worst") -> np.ndarray:
    """Average distortion at each row of ``beliefs`` (shape ``(G, |U|)``).

    Works on unnormalized posteriors q(u) P(z|u): the weight P_q(z) cancels the
    normalization, so z-terms with zero probability contribute nothing.
    """
    beliefs = np.atleast_2d(np.asarray(beliefs, dtype=float))
    pzu = problem.p_z_given_u
    total = np.zeros(beliefs.shape[0])
    for z in range(problem.z_size):
        joint = beliefs * pzu[:, z]                       # (G, U)
        weight = joint.sum(axis=1)
        safe = np.where(weight > 0, weight, 1.0)
        post = joint / safe[:, None]
        dec = post @ problem.d_d[:, z, :]                 # (G, V)
        enc = post @ problem.d_e[:, z, :]
        chosen, _ = _select(dec, enc, tie_tol, tie_break)
        psi = np.take_along_axis(enc, chosen[:, None], axis=1)[:, 0]
        total += np.where(weight > 0, weight * psi, 0.0)
    return total


def average_distortion(q, problem, tie_tol: float = TIE_TOL, tie_break: str = "worst") -> float:
    """Psi_e(q): expected robust distortion over the side information, from interim belief ``q``."""
    return float(average_distortion_many(np.asarray(q, dtype=float)[None, :], problem, tie_tol, tie_break)[0])


def reply_signature(q, problem, tie_tol: float = TIE_TOL, tie_break: str = "worst") -> tuple[int, ...]:
    """The recommended symbol for every side-information value (-1 where z is unreachable)."""
    q = np.asarray(q, dtype=float)
    out = []
    for z in range(problem.z_size):
        if (q * problem.p_z_given_u[:, z]).sum() <= 0:
            out.append(-1)
            continue
        post = bayes_interim_to_posterior(q, z, problem.p_z_given_u)
        out.append(best_reply(z, post, problem.d_e, problem.d_d, tie_tol, tie_break).selected)
    return tuple(out)


# ---------------------------------------------------------------------------
# closed forms for the binary example (Hamming d_e, decoder extra cost kappa)


def belief_thresholds(delta0: float, delta1: float, kappa: float) -> tuple[float, float, float]:
    """Interim thresholds ``(nu0, nu1, gamma)``.

    ``gamma`` is the posterior at which the decoder switches from v0 to v1; ``nu0`` and ``nu1``
    are the interim beliefs whose posteriors after z0 and z1 respectively reach ``gamma``.
    """
    gamma = (1 + kappa) / 2
    nu0 = gamma * (1 - delta0) / (delta1 * (1 - gamma) + gamma * (1 - delta0))
    nu1 = gamma * delta0 / (gamma * delta0 + (1 - delta1) * (1 - gamma))
    return nu0, nu1, gamma


def binary_robust_distortion(p, kappa: float):
    gamma = (1 + kappa) / 2
    p = np.asarray(p, dtype=float)
    return np.where(p <= gamma, p, 1 - p)


def binary_average_distortion(q, delta0: float, delta1: float, kappa: float):
    """Piecewise-linear Psi_e for the binary example; assumes ``delta0 + delta1 < 1``."""
    nu0, nu1, _ = belief_thresholds(delta0, delta1, kappa)
    q = np.asarray(q, dtype=float)
    return np.where(q <= nu1, q, np.where(q <= nu0, q * delta1 + (1 - q) * delta0, 1 - q))


def dsbs_average_distortion(q, delta: float):
    q = np.asarray(q, dtype=float)
    return np.where(q <= delta, q, np.where(q <= 1 - delta, delta, 1 - q))
