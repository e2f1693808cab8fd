"""
Penalty Accumulation Analysis
Closed-form probability that p penalties have accumulated on the correct path
by the j-th critical bit of a segment, for sanity-checking simulated trends
"""
from dataclasses import dataclass
from math import comb
from typing import Sequence, Tuple

import numpy as np
from scipy.special import erfc

from construction import ReliabilityProfile

PBAR_MODES = ("mean", "sum", "literal")


@dataclass(frozen=True)
class PenaltyModel:
    """
    Per-bit error probabilities p_{e,j} over the critical bits of a segment.

    pbar_mode selects how the average error probability of the earlier bits
    is formed:
        mean    - (1/j) * sum_{k<j} p_{e,k}   (default, always a probability)
        sum     - sum_{k<j} p_{e,k}
        literal - sum_{k<j} p_{e,j} = j * p_{e,j}, exactly as printed
    """
    error_probs: Tuple[float, ...]
    pbar_mode: str = "mean"

    def __post_init__(self):
        probs = tuple(float(p) for p in self.error_probs)
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("error probabilities must lie in [0, 1]")
        if self.pbar_mode not in PBAR_MODES:
            raise ValueError(f"unknown pbar mode: {self.pbar_mode}")
        object.__setattr__(self, "error_probs", probs)


def mean_error_probability(model: PenaltyModel, j: int) -> float:
    """p-bar_e over the bits before j (0 for j = 0)"""
    if j == 0:
        return 0.0
    if model.pbar_mode == "literal":
        return j * model.error_probs[j]
    total = sum(model.error_probs[:j])
    return total / j if model.pbar_mode == "mean" else total


def penalty_prob(model: PenaltyModel, j: int, p: int) -> float:
    """P_j^p = p_{e,j} * C(j, p-1) * pbar^(p-1) * (1 - pbar)^(j-(p-1))"""
    if p < 1:
        raise ValueError(f"penalty count must be >= 1, got {p}")
    if j < p - 1:
        raise ValueError(f"bit {j} cannot carry {p} penalties (needs j >= p-1)")
    if j >= len(model.error_probs):
        raise ValueError(f"bit {j} beyond the model's {len(model.error_probs)} probabilities")
    pbar = mean_error_probability(model, j)
    return model.error_probs[j] * comb(j, p - 1) * pbar ** (p - 1) * (1.0 - pbar) ** (j - (p - 1))


def penalty_distribution(model: PenaltyModel, j: int) -> np.ndarray:
    """P_j^p for p = 1 .. j+1"""
    return np.array([penalty_prob(model, j, p) for p in range(1, j + 2)])


def penalty_curve(model: PenaltyModel, p: int) -> np.ndarray:
    """P_j^p over the bits j >= p-1 that can carry p penalties"""
    return np.array([penalty_prob(model, j, p) for j in range(p - 1, len(model.error_probs))])


def peak_position(model: PenaltyModel, p: int) -> int:
    return int(np.argmax(penalty_curve(model, p))) + p - 1


def bit_error_probabilities(profile: ReliabilityProfile, positions: Sequence[int]) -> np.ndarray:
    """
    GA error probability of each listed bit-channel: the decision LLR is
    N(m, 2m), so P(error) = Q(sqrt(m/2)) = erfc(sqrt(m)/2)/2.
    """
    means = profile.llr_means[np.asarray(positions, dtype=int)]
    return 0.5 * erfc(np.sqrt(means) / 2.0)
