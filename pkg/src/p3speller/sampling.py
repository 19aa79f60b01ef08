"""Class-balanced subset construction for the five-member ensemble.

The target class is outnumbered 5:1 in the paradigm (2 of 12 flashes per
repetition), so the non-target pool is split into five equal parts and
the full target set rides along with each part. Subsets hold indices
into the parent EpochSet; the target indices are shared, not copied.
"""

import json

import numpy as np


class BalancedSubset:
    """Epoch indices of one balanced training subset."""

    def __init__(self, epochs, p300_indices, non_p300_indices, subset_index,
                 rng_seed, remainder_absorbed=False):
        self.epochs = epochs
        self.p300_indices = np.asarray(p300_indices, dtype=np.int64)
        self.non_p300_indices = np.asarray(non_p300_indices, dtype=np.int64)
        self.subset_index = subset_index
        self.rng_seed = rng_seed
        self.remainder_absorbed = remainder_absorbed

    @property
    def p300_count(self):
        return len(self.p300_indices)

    @property
    def non_p300_count(self):
        return len(self.non_p300_indices)

    @property
    def indices(self):
        """All member indices, targets first."""
        return np.concatenate([self.p300_indices, self.non_p300_indices])

    def arrays(self):
        """Materialize (x, y) for training: (n, 160, ch) float32 and bool labels."""
        idx = self.indices
        x = self.epochs.data[idx]
        y = self.epochs.is_target[idx]
        return x, y


def balance_subsets(epochs, k=5, seed=0, strict=True):
    """Split the non-target pool into ``k`` equal parts, sharing all targets.

    The non-target pool is shuffled with ``seed`` and partitioned; every
    subset carries the complete target set by reference. Deterministic
    given (seed, input order). When the pool is not divisible by ``k``,
    ``strict`` raises; otherwise the last subset absorbs the remainder
    and is flagged.
    """
    pos = np.flatnonzero(epochs.is_target)
    neg = np.flatnonzero(~epochs.is_target)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("both classes must be present to balance")
    remainder = len(neg) % k
    if remainder and strict:
        raise ValueError(f"non-target pool of {len(neg)} is not divisible "
                         f"by {k} subsets")
    rng = np.random.default_rng(seed)
    shuffled = neg[rng.permutation(len(neg))]
    base = len(neg) // k
    subsets = []
    start = 0
    for i in range(k):
        size = base + (remainder if i == k - 1 else 0)
        subsets.append(BalancedSubset(
            epochs, pos, shuffled[start:start + size], subset_index=i,
            rng_seed=seed, remainder_absorbed=(i == k - 1 and remainder > 0)))
        start += size
    return subsets


def split_validation(subset, fraction=0.1, seed=0):
    """Stratified train/validation split of one balanced subset.

    Holds out round(n * fraction) of each class, clamped so both parts
    keep at least one sample per class. Returns (train, validation) as
    BalancedSubsets over the same parent EpochSet.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction {fraction} outside (0, 1)")
    rng = np.random.default_rng(seed)

    def _split(indices):
        n = len(indices)
        if n < 2:
            raise ValueError("need at least 2 samples of each class to split")
        n_val = int(round(n * fraction))
        n_val = max(1, min(n - 1, n_val))
        order = indices[rng.permutation(n)]
        return order[n_val:], order[:n_val]

    pos_train, pos_val = _split(subset.p300_indices)
    neg_train, neg_val = _split(subset.non_p300_indices)
    train = BalancedSubset(subset.epochs, np.sort(pos_train), np.sort(neg_train),
                           subset.subset_index, seed)
    val = BalancedSubset(subset.epochs, np.sort(pos_val), np.sort(neg_val),
                         subset.subset_index, seed)
    return train, val


def subsets_manifest(subsets):
    """JSON-ready manifest of subset membership for reproducibility audits."""
    return {
        "k": len(subsets),
        "seed": subsets[0].rng_seed if subsets else None,
        "subsets": [{
            "index": s.subset_index,
            "p300_count": s.p300_count,
            "non_p300_count": s.non_p300_count,
            "remainder_absorbed": s.remainder_absorbed,
            "p300_indices": s.p300_indices.tolist(),
            "non_p300_indices": s.non_p300_indices.tolist(),
        } for s in subsets],
    }


def write_manifest(subsets, path):
    with open(path, "w") as fh:
        json.dump(subsets_manifest(subsets), fh)
