"""Sufficient statistics of observed interaction data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._validation import DataError
from ..interaction import InteractionSet, parent_map


@dataclass
class DataSummary:
    """Block sizes and length counts of a fine interaction set, plus the coarse grouping.

    ``block_sizes[i]`` is the slot count of the ``i``-th fine label (ordered by
    label id).  For paired data ``coarse_groups`` lists, per coarse label, the
    indices of its fine children; ``coarse_slot_sizes`` and ``coarse_counts``
    are the slot sizes ``|A'|`` and child counts ``|B~|`` of the coarse blocks.
    """

    block_sizes: np.ndarray
    length_counts: dict
    coarse_groups: list | None = None
    coarse_slot_sizes: np.ndarray | None = None
    coarse_counts: np.ndarray | None = None

    def __post_init__(self):
        self.block_sizes = np.asarray(self.block_sizes, dtype=np.int64)
        if self.block_sizes.size == 0:
            raise DataError("data has no labels")
        n_q = sum(self.length_counts.values())
        slots = sum(q * c for q, c in self.length_counts.items())
        if slots != int(self.block_sizes.sum()):
            raise DataError(f"length counts cover {slots} slots but blocks cover "
                            f"{int(self.block_sizes.sum())}")
        if n_q < 1:
            raise DataError("data has no interactions")
        values, mult = np.unique(self.block_sizes, return_counts=True)
        self.size_values = values.astype(np.float64)
        self.size_mult = mult.astype(np.float64)

    @property
    def k(self):
        return int(self.block_sizes.size)

    @property
    def n(self):
        return int(sum(self.length_counts.values()))

    @property
    def ell_bar(self):
        return int(self.block_sizes.sum())

    @property
    def k_coarse(self):
        return None if self.coarse_counts is None else int(self.coarse_counts.size)

    @classmethod
    def from_interactions(cls, fine: InteractionSet, coarse: InteractionSet | None = None):
        counts = fine.label_counts()
        ids = sorted(counts)
        sizes = np.array([counts[i] for i in ids], dtype=np.int64)
        if coarse is None:
            return cls(sizes, fine.length_counts())
        pm = parent_map(fine, coarse)
        index = {lab: j for j, lab in enumerate(ids)}
        groups = {}
        for f, c in pm.mapping.items():
            groups.setdefault(c, []).append(index[f])
        keys = sorted(groups)
        coarse_groups = [np.array(sorted(groups[c]), dtype=np.int64) for c in keys]
        slot_sizes = np.array([sizes[g].sum() for g in coarse_groups], dtype=np.int64)
        child_counts = np.array([g.size for g in coarse_groups], dtype=np.int64)
        return cls(sizes, fine.length_counts(), coarse_groups, slot_sizes, child_counts)

    @classmethod
    def from_groups(cls, block_sizes, coarse_groups, length_counts=None):
        """Build directly from fine block sizes and a grouping of block indices."""
        sizes = np.asarray(block_sizes, dtype=np.int64)
        if length_counts is None:
            length_counts = {1: int(sizes.sum())}
        groups = [np.array(sorted(g), dtype=np.int64) for g in coarse_groups]
        flat = np.sort(np.concatenate(groups)) if groups else np.zeros(0, dtype=np.int64)
        if not np.array_equal(flat, np.arange(sizes.size)):
            raise DataError("coarse groups must partition the fine blocks")
        return cls(sizes, dict(length_counts), groups,
                   np.array([sizes[g].sum() for g in groups], dtype=np.int64),
                   np.array([g.size for g in groups], dtype=np.int64))
