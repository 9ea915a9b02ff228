"""Kendall rank correlation with explicit tie handling.

The fast path counts discordant pairs with a Fenwick tree in O(n log n), the brute-force path enumerates all pairs.
Both reduce to the same pair counts, so they agree exactly.
"""

import math
from dataclasses import dataclass
from enum import Enum, unique
from typing import NamedTuple, Sequence, Union

import numpy as np

from qppm.dataclasses.results import TauResult
from qppm.exceptions import UndefinedCorrelation, ValidationError

ArrayLike = Union[Sequence[float], np.ndarray]


@unique
class TauVariant(Enum):
    """Kendall τ variant."""

    A = "a"
    """τ-a, (C − D) / (n(n−1)/2), ties count as neither concordant nor discordant."""

    B = "b"
    """τ-b, tie-corrected."""


@dataclass(frozen=True)
class PairedSample:
    """Two equally long vectors of finite values, paired by position.

    Args:
        xs (np.ndarray): First vector.
        ys (np.ndarray): Second vector.
    """

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self) -> None:
        if self.xs.ndim != 1 or self.xs.shape != self.ys.shape:
            raise ValidationError(
                f"Paired vectors must be 1-D of equal length, got {self.xs.shape} and {self.ys.shape}"
            )
        if not (np.all(np.isfinite(self.xs)) and np.all(np.isfinite(self.ys))):
            raise ValidationError("Paired vectors contain non-finite values")

    @classmethod
    def of(cls, xs: ArrayLike, ys: ArrayLike) -> "PairedSample":
        return cls(np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64))

    def __len__(self) -> int:
        return int(self.xs.shape[0])


class PairCounts(NamedTuple):
    """Classification of all n(n−1)/2 pairs of a paired sample."""

    concordant: int
    discordant: int
    x_ties_only: int
    y_ties_only: int
    joint_ties: int

    @property
    def total(self) -> int:
        return self.concordant + self.discordant + self.x_ties_only + self.y_ties_only + self.joint_ties


def _require_pairs(sample: PairedSample) -> None:
    if len(sample) < 2:
        raise UndefinedCorrelation(
            "singleton", f"Kendall's tau is undefined for fewer than 2 paired values, got {len(sample)}"
        )


def _dense_ranks(sorted_values: np.ndarray) -> np.ndarray:
    """1-based dense ranks of an ascending array."""

    return np.r_[True, sorted_values[1:] != sorted_values[:-1]].cumsum(dtype=np.intp)


def _tied_pairs(ranks: np.ndarray) -> int:
    counts = np.bincount(ranks).astype(np.int64)
    counts = counts[counts > 1]
    return int((counts * (counts - 1) // 2).sum())


def pair_counts(sample: PairedSample) -> PairCounts:
    """Pair counts via sorting and a Fenwick tree over the dense y ranks."""

    _require_pairs(sample)
    size = len(sample)
    perm = np.argsort(sample.ys, kind="mergesort")
    x, y = sample.xs[perm], _dense_ranks(sample.ys[perm])

    # stable sort on x, then dense x ranks
    perm = np.argsort(x, kind="mergesort")
    x, y = x[perm], y[perm]
    x = _dense_ranks(x)

    # for each x group, count earlier elements (strictly smaller x) with a strictly greater y
    sup = int(y.max()) + 1
    tree = np.zeros(sup, dtype=np.int64)
    discordant = 0
    i = k = 0
    while i < size:
        while k < size and x[i] == x[k]:
            discordant += i
            idx = int(y[k])
            while idx != 0:
                discordant -= int(tree[idx])
                idx &= idx - 1
            k += 1
        while i < k:
            idx = int(y[i])
            while idx < sup:
                tree[idx] += 1
                idx += idx & -idx
            i += 1

    boundaries = np.r_[True, (x[1:] != x[:-1]) | (y[1:] != y[:-1]), True]
    runs = np.diff(np.nonzero(boundaries)[0]).astype(np.int64)
    joint = int((runs * (runs - 1) // 2).sum())
    x_ties = _tied_pairs(x)
    y_ties = _tied_pairs(y)

    total = size * (size - 1) // 2
    x_only = x_ties - joint
    y_only = y_ties - joint
    concordant = total - x_only - y_only - joint - discordant
    return PairCounts(concordant, discordant, x_only, y_only, joint)


def pair_counts_bruteforce(sample: PairedSample) -> PairCounts:
    """Pair counts by an explicit O(n²) double loop."""

    _require_pairs(sample)
    xs, ys = sample.xs.tolist(), sample.ys.tolist()
    concordant = discordant = x_only = y_only = joint = 0
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            dx = xs[i] - xs[j]
            dy = ys[i] - ys[j]
            if dx == 0 and dy == 0:
                joint += 1
            elif dx == 0:
                x_only += 1
            elif dy == 0:
                y_only += 1
            elif (dx > 0) == (dy > 0):
                concordant += 1
            else:
                discordant += 1
    return PairCounts(concordant, discordant, x_only, y_only, joint)


def tau_from_counts(counts: PairCounts, variant: TauVariant = TauVariant.B) -> TauResult:
    """Kendall τ of the given pair counts, undefined when either side is entirely tied."""

    total = counts.total
    x_ties = counts.x_ties_only + counts.joint_ties
    y_ties = counts.y_ties_only + counts.joint_ties
    if x_ties == total:
        return TauResult.undefined("x degenerate")
    if y_ties == total:
        return TauResult.undefined("y degenerate")

    if variant is TauVariant.A:
        tau = (counts.concordant - counts.discordant) / total
    else:
        tau = (counts.concordant - counts.discordant) / math.sqrt((total - x_ties) * (total - y_ties))
    return TauResult(min(1.0, max(-1.0, tau)))


def kendall_tau_b(sample: PairedSample) -> TauResult:
    """Kendall τ-b, (C − D) / sqrt((C + D + T_x)(C + D + T_y)).

    Args:
        sample (PairedSample): Paired values, at least 2.

    Raises:
        UndefinedCorrelation: Fewer than 2 pairs (reason "singleton").

    Returns:
        τ-b in [−1, 1], or an undefined result with reason "x degenerate" / "y degenerate".
    """

    return tau_from_counts(pair_counts(sample), TauVariant.B)


def kendall_tau_b_bruteforce(sample: PairedSample) -> TauResult:
    """Same contract as kendall_tau_b(), computed by enumerating all pairs."""

    return tau_from_counts(pair_counts_bruteforce(sample), TauVariant.B)


def kendall_tau_a(sample: PairedSample) -> TauResult:
    """Kendall τ-a, with the same degeneracy rule as τ-b."""

    return tau_from_counts(pair_counts(sample), TauVariant.A)


def kendall_tau(xs: ArrayLike, ys: ArrayLike, variant: TauVariant = TauVariant.B) -> TauResult:
    """Kendall τ of two vectors.

    Raises:
        ValidationError: Length mismatch or non-finite values.
        UndefinedCorrelation: Fewer than 2 pairs.
    """

    sample = PairedSample.of(xs, ys)
    if variant is TauVariant.A:
        return kendall_tau_a(sample)
    return kendall_tau_b(sample)


def permutation_tau(positions: np.ndarray) -> np.ndarray:
    """Kendall τ between the identity order and each row of a batch of permutations.

    Args:
        positions (np.ndarray): (s, n) integer array, row r holds the new position of each of n items.

    Returns:
        (s,) array of τ values, all 1.0 when n < 2.
    """

    positions = np.atleast_2d(positions)
    n = positions.shape[1]
    if n < 2:
        return np.ones(positions.shape[0])
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    inversions = ((positions[:, :, None] > positions[:, None, :]) & upper).sum(axis=(1, 2))
    total = n * (n - 1) // 2
    return (total - 2 * inversions) / total
