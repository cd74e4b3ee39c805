import math
import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from lib.errors import StructuralError
from lib.model import Applicant, ProblemInstance, ThresholdPolicy

logger = logging.getLogger(__name__)

THRESHOLD_RTOL = 1e-12
THRESHOLD_ATOL = 1e-12


@dataclass(frozen=True)
class Coefficients:
    """LP coefficients of one applicant under a fixed threshold policy.

    Attributes:
        q: Probability a screened applicant is allocated
        qe: E[D * allocated | screened], the product q*e
        o: Probability an unscreened applicant is allocated
    """
    q: float
    qe: float
    o: float


def compare_to_threshold(values: np.ndarray, alloc_cost, threshold: float) -> Tuple[np.ndarray, np.ndarray]:
    """Classify cost-normalised values against a threshold.

    Args:
        values: Utility values (NaN entries are neither above nor at)
        alloc_cost: Allocation cost(s), broadcast against ``values``
        threshold: Extended real threshold

    Returns:
        Tuple[np.ndarray, np.ndarray]: (strictly above, at the threshold) masks
    """
    scaled = np.asarray(values, dtype=float) / np.asarray(alloc_cost, dtype=float)
    if threshold == -math.inf:
        above = ~np.isnan(scaled)
        return above, np.zeros_like(above)
    if threshold == math.inf:
        none = np.zeros(scaled.shape, dtype=bool)
        return none, none.copy()
    at = np.isclose(scaled, threshold, rtol=THRESHOLD_RTOL, atol=THRESHOLD_ATOL)
    above = (scaled > threshold) & ~at
    return above, at


def derive_coefficients(applicant: Applicant, policy: ThresholdPolicy) -> Coefficients:
    """Coefficients (q, qe, o) of an applicant under a threshold policy.

    Atoms sitting exactly at the threshold enter q and qe with weight α.
    Unscreenable applicants report q = o and qe = o*mu.

    Args:
        applicant: The applicant
        policy: Threshold policy covering the applicant's group

    Returns:
        Coefficients: The three coefficients
    """
    if not (0 <= applicant.group < policy.num_groups):
        raise StructuralError(
            f"applicant {applicant.id} has group {applicant.group}, policy covers {policy.num_groups} groups"
        )
    t = policy.thresholds[applicant.group]
    alpha = policy.boundary_probs[applicant.group]
    above, at = compare_to_threshold(np.array([applicant.mu]), applicant.alloc_cost, t)
    o = 1.0 if above[0] else (alpha if at[0] else 0.0)
    if applicant.posterior is None:
        return Coefficients(q=o, qe=o * applicant.mu, o=o)
    support, probs = applicant.posterior.as_arrays()
    above, at = compare_to_threshold(support, applicant.alloc_cost, t)
    q = float(probs[above].sum() + alpha * probs[at].sum())
    qe = float(np.dot(support[above], probs[above]) + alpha * np.dot(support[at], probs[at]))
    return Coefficients(q=q, qe=qe, o=o)


@dataclass(frozen=True)
class CoefficientParts:
    """Strict and boundary parts of the coefficients of a group at one threshold.

    The coefficient at boundary probability α is ``strict + α * atom``.
    """
    q_strict: np.ndarray
    q_atom: np.ndarray
    qe_strict: np.ndarray
    qe_atom: np.ndarray
    o_strict: np.ndarray
    o_atom: np.ndarray

    def at(self, alpha: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Coefficient vectors (q, qe, o) at boundary probability alpha."""
        return (
            self.q_strict + alpha * self.q_atom,
            self.qe_strict + alpha * self.qe_atom,
            self.o_strict + alpha * self.o_atom,
        )


class CoefficientTable:
    """Vectorised coefficient computation for the members of one group.

    Posteriors are stored as a padded support matrix (NaN padding) and a
    matching probability matrix (zero padding).
    """

    def __init__(self, instance: ProblemInstance, group: int):
        self.group = group
        self.positions: List[int] = instance.group_members(group)
        members = [instance.applicants[i] for i in self.positions]
        self.mu = np.array([a.mu for a in members], dtype=float)
        self.alloc_cost = np.array([a.alloc_cost for a in members], dtype=float)
        self.screen_cost = np.array([a.screen_cost for a in members], dtype=float)
        self.screenable = np.array([a.screenable for a in members], dtype=bool)
        width = max([len(a.posterior) for a in members if a.posterior is not None] or [1])
        self.support = np.full((len(members), width), np.nan)
        self.probs = np.zeros((len(members), width))
        for row, a in enumerate(members):
            if a.posterior is not None:
                support, probs = a.posterior.as_arrays()
                self.support[row, :len(support)] = support
                self.probs[row, :len(probs)] = probs
        self.weighted = np.nan_to_num(self.support) * self.probs

    def __len__(self) -> int:
        return len(self.positions)

    def parts(self, threshold: float) -> CoefficientParts:
        """Strict and atom parts of (q, qe, o) at a threshold.

        Args:
            threshold: Extended real threshold for the group

        Returns:
            CoefficientParts: Per-member arrays
        """
        above, at = compare_to_threshold(self.mu, self.alloc_cost, threshold)
        o_strict = above.astype(float)
        o_atom = at.astype(float)
        s_above, s_at = compare_to_threshold(self.support, self.alloc_cost[:, None], threshold)
        q_strict = np.where(self.screenable, (self.probs * s_above).sum(axis=1), o_strict)
        q_atom = np.where(self.screenable, (self.probs * s_at).sum(axis=1), o_atom)
        qe_strict = np.where(self.screenable, (self.weighted * s_above).sum(axis=1), o_strict * self.mu)
        qe_atom = np.where(self.screenable, (self.weighted * s_at).sum(axis=1), o_atom * self.mu)
        return CoefficientParts(q_strict, q_atom, qe_strict, qe_atom, o_strict, o_atom)

    def candidate_values(self) -> np.ndarray:
        """Cost-normalised support points and means of the group, unsorted."""
        scaled_support = (self.support / self.alloc_cost[:, None])[~np.isnan(self.support)]
        return np.concatenate([scaled_support, self.mu / self.alloc_cost])


def build_tables(instance: ProblemInstance) -> List[CoefficientTable]:
    return [CoefficientTable(instance, j) for j in range(instance.num_groups)]
