"""Interaction sets and their correspondence with (partition, composition) pairs.

An interaction is an ordered tuple of labels; an interaction set is an
unordered multiset of interactions.  Labels are dense integer ids internally
and the display names live in a separate table.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import DataError, DomainError, check_rng
from .partition import Partition, samp


@dataclass(frozen=True)
class Composition:
    lengths: tuple

    def __post_init__(self):
        lengths = tuple(int(x) for x in self.lengths)
        if any(x < 1 for x in lengths):
            raise DomainError("composition entries must be positive")
        object.__setattr__(self, "lengths", lengths)

    @property
    def total(self):
        return sum(self.lengths)

    def __len__(self):
        return len(self.lengths)


class InteractionSet:
    """Multiset of ordered label-id sequences plus a label table.

    Parameters
    ----------
    interactions : iterable of sequences of int
        Label ids of each interaction, in interaction order.
    labels : sequence, optional
        Display label for each id.  Defaults to the ids themselves.
    """

    def __init__(self, interactions, labels=None):
        inter = tuple(tuple(int(x) for x in it) for it in interactions)
        if any(len(it) == 0 for it in inter):
            raise DataError("interactions must be nonempty")
        used = {x for it in inter for x in it}
        if labels is None:
            labels = tuple(range(max(used) + 1)) if used else ()
        labels = tuple(labels)
        if used and (min(used) < 0 or max(used) >= len(labels)):
            raise DataError("interaction uses a label id missing from the label table")
        self.interactions = inter
        self.labels = labels

    @classmethod
    def from_tokens(cls, rows):
        """Build from rows of display labels, assigning ids by first appearance."""
        ids = {}
        inter = []
        for row in rows:
            inter.append(tuple(ids.setdefault(tok, len(ids)) for tok in row))
        return cls(inter, tuple(ids))

    @classmethod
    def empty(cls):
        return cls((), ())

    def __len__(self):
        return len(self.interactions)

    def __repr__(self):
        return f"InteractionSet(n={len(self)}, labels={self.n_labels})"

    def __eq__(self, other):
        if not isinstance(other, InteractionSet):
            return NotImplemented
        return Counter(self.as_tokens()) == Counter(other.as_tokens())

    def __hash__(self):
        return hash(frozenset(Counter(self.as_tokens()).items()))

    def as_tokens(self):
        return [tuple(self.labels[x] for x in it) for it in self.interactions]

    @property
    def composition(self):
        return Composition(tuple(len(it) for it in self.interactions))

    @property
    def n_slots(self):
        return sum(len(it) for it in self.interactions)

    @property
    def n_labels(self):
        """Number of distinct labels that actually occur."""
        return len({x for it in self.interactions for x in it})

    def slot_labels(self, order=None):
        """Concatenated label ids, optionally after reordering the interactions."""
        seq = self.interactions if order is None else [self.interactions[i] for i in order]
        return np.fromiter((x for it in seq for x in it), dtype=np.int64, count=-1)

    def label_counts(self):
        """Slot count (degree with multiplicity) of every label id that occurs."""
        if not self.interactions:
            return {}
        return dict(Counter(x for it in self.interactions for x in it))

    def length_counts(self):
        """``n_q``: number of interactions of each length."""
        return dict(sorted(Counter(len(it) for it in self.interactions).items()))

    def relabel(self, mapping, labels):
        """Apply ``mapping`` (old id -> new id) and attach the new label table."""
        mapping = np.asarray(mapping)
        return InteractionSet(
            (tuple(int(mapping[x]) for x in it) for it in self.interactions), labels)

    def write(self, path):
        """One interaction per line, whitespace-separated display labels."""
        with open(path, "w") as fh:
            for row in self.as_tokens():
                fh.write(" ".join(str(tok) for tok in row) + "\n")

    @classmethod
    def read(cls, path):
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                rows.append(line.split())
        return cls.from_tokens(rows)


@dataclass(frozen=True)
class ParentMap:
    """Fine label id -> coarse label id for a slot-aligned pair of interaction sets."""

    mapping: dict
    fine_labels: tuple
    coarse_labels: tuple

    def children(self):
        """Coarse label id -> sorted list of its fine children."""
        out = {}
        for f, c in sorted(self.mapping.items()):
            out.setdefault(c, []).append(f)
        return out

    def children_counts(self):
        return {c: len(kids) for c, kids in self.children().items()}

    def write_tsv(self, path):
        with open(path, "w") as fh:
            for f, c in sorted(self.mapping.items()):
                fh.write(f"{self.fine_labels[f]}\t{self.coarse_labels[c]}\n")


def part_comp(iset: InteractionSet, random_state=None, order=None, shuffle_within=False):
    """PART and COMP of an interaction set under a uniform random ordering.

    Returns
    -------
    partition : Partition
        Partition of the slot positions ``1..m`` of the concatenated sequence.
    composition : Composition
        Interaction lengths in the chosen order.
    order : ndarray
        The permutation of interactions that was used.  Pass it back to
        reproduce the same PART.  Only the multiset of block sizes enters any
        likelihood, and that is invariant to the ordering.
    """
    if len(iset) == 0:
        raise DomainError("PART/COMP of an empty interaction set is undefined")
    rng = check_rng(random_state) if (order is None or shuffle_within) else None
    if order is None:
        order = rng.permutation(len(iset))
    order = np.asarray(order, dtype=np.int64)
    seq = [iset.interactions[i] for i in order]
    if shuffle_within:
        seq = [tuple(it[j] for j in rng.permutation(len(it))) for it in seq]
    flat = [x for it in seq for x in it]
    return samp(flat), Composition(tuple(len(it) for it in seq)), order


def inter(pi: Partition, comp: Composition, labels=None, random_state=None) -> InteractionSet:
    """Interaction set of a partition cut by a composition.

    Block ``i`` gets label ``labels[i]``; when ``labels`` is omitted the blocks
    receive i.i.d. Uniform(0, 1) labels, which are distinct almost surely.
    """
    if not isinstance(comp, Composition):
        comp = Composition(tuple(comp))
    if comp.total != pi.n:
        raise DomainError(f"composition total {comp.total} != partition size {pi.n}")
    if labels is None:
        labels = tuple(check_rng(random_state).random(pi.k).tolist())
    labels = tuple(labels)
    if len(labels) < pi.k or len(set(labels[:pi.k])) != pi.k:
        raise DomainError("need one distinct label per block")
    owner = pi.block_index()
    out = []
    pos = 0
    for length in comp.lengths:
        out.append(tuple(int(x) for x in owner[pos:pos + length]))
        pos += length
    return InteractionSet(out, labels[:pi.k])


def _label_signature(iset):
    sig = {}
    for it in iset.interactions:
        for pos, x in enumerate(it):
            sig.setdefault(x, []).append((len(it), pos))
    return {x: tuple(sorted(v)) for x, v in sig.items()}


def isomorphic(a: InteractionSet, b: InteractionSet) -> bool:
    """True iff some label bijection maps the multiset ``a`` onto ``b``."""
    if len(a) != len(b):
        return False
    if sorted(len(it) for it in a.interactions) != sorted(len(it) for it in b.interactions):
        return False
    sig_a, sig_b = _label_signature(a), _label_signature(b)
    if Counter(sig_a.values()) != Counter(sig_b.values()):
        return False

    # Match interactions in a fixed order; the bijection is extended as we go.
    items_a = sorted(a.interactions, key=lambda it: (len(it), [sig_a[x] for x in it]))
    pool = Counter(b.interactions)
    fwd, bwd = {}, {}

    def extend(it_a, it_b, added):
        for x, y in zip(it_a, it_b):
            if x in fwd:
                if fwd[x] != y:
                    return False
            elif y in bwd or sig_a[x] != sig_b[y]:
                return False
            else:
                fwd[x] = y
                bwd[y] = x
                added.append(x)
        return True

    def rec(i):
        if i == len(items_a):
            return True
        it_a = items_a[i]
        for it_b in list(pool):
            if pool[it_b] == 0 or len(it_b) != len(it_a):
                continue
            added = []
            if extend(it_a, it_b, added):
                pool[it_b] -= 1
                if rec(i + 1):
                    return True
                pool[it_b] += 1
            for x in added:
                del bwd[fwd.pop(x)]
        return False

    return rec(0)


def parent_map(fine: InteractionSet, coarse: InteractionSet) -> ParentMap:
    """Parent of each fine label, read off slot by slot from an aligned pair."""
    if len(fine) != len(coarse):
        raise DataError(f"interaction counts differ: {len(fine)} vs {len(coarse)}")
    mapping = {}
    for j, (it_f, it_c) in enumerate(zip(fine.interactions, coarse.interactions)):
        if len(it_f) != len(it_c):
            raise DataError(f"interaction {j} has lengths {len(it_f)} vs {len(it_c)}")
        for x, y in zip(it_f, it_c):
            prev = mapping.setdefault(x, y)
            if prev != y:
                raise DataError(
                    f"fine label {fine.labels[x]!r} maps to both "
                    f"{coarse.labels[prev]!r} and {coarse.labels[y]!r}")
    return ParentMap(mapping, fine.labels, coarse.labels)


def read_pair(fine_path, coarse_path):
    """Read a slot-aligned pair of interaction-set files and their parent map."""
    fine = InteractionSet.read(fine_path)
    coarse = InteractionSet.read(coarse_path)
    return fine, coarse, parent_map(fine, coarse)


def write_pair(fine, coarse, directory, prefix=""):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    fine.write(directory / f"{prefix}fine.txt")
    coarse.write(directory / f"{prefix}coarse.txt")
    parent_map(fine, coarse).write_tsv(directory / f"{prefix}parents.tsv")
