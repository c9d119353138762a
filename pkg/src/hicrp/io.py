"""Edge-list ingestion, timestamp coagulation and run manifests."""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import platform
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ._validation import DataError, DomainError
from .interaction import InteractionSet, ParentMap

FIXTURE_NAME = "wiki_elec_fixture.txt"
# Counts fixed by how the fixture was constructed (see ``make_fixture``).
FIXTURE_EXPECTED = {"labels": 30, "interactions": 50, "coarse_labels": {1: 1, 10: 8, 20000: 29}}


@dataclass
class EdgeTable:
    """Interactions read from an edge list, with one optional timestamp per row."""

    iset: InteractionSet
    timestamps: np.ndarray | None
    lines: np.ndarray


def parse_timestamp(text):
    """A float epoch value or an ISO-8601 date-time (read as UTC)."""
    try:
        return float(text)
    except ValueError:
        pass
    stamp = _dt.datetime.fromisoformat(text.strip().replace("T", " "))
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=_dt.timezone.utc)
    return stamp.timestamp()


def _detect_format(path):
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return "csv"
    with open(path) as fh:
        for line in fh:
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            return "wiki-elec" if s.split()[0] in {"E", "T", "U", "N", "V"} else "tsv"
    return "tsv"


def ingest_edges(path, format="auto") -> EdgeTable:
    """Read a 2- or 3-column edge list into length-2 interactions.

    Parameters
    ----------
    format : {"auto", "tsv", "csv", "wiki-elec"}
        ``tsv`` splits on whitespace, ``csv`` on commas.  ``wiki-elec`` reads
        the SNAP Wikipedia election format, where every ``V`` line is a vote
        from a user to the candidate named by the preceding ``U`` line.

    Raises
    ------
    DataError
        On a malformed line (the message names its line number) or when no
        edges are found.
    """
    if format == "auto":
        format = _detect_format(path)
    if format not in {"tsv", "csv", "wiki-elec"}:
        raise DomainError(f"unknown edge-list format {format!r}")
    reader = _read_wiki_elec if format == "wiki-elec" else _read_columns
    rows, stamps, lines = reader(path, format)
    if not rows:
        raise DataError(f"{path}: no edges found")
    if stamps and any(s is None for s in stamps):
        if all(s is None for s in stamps):
            stamps = None
        else:
            first = next(ln for ln, s in zip(lines, stamps) if s is None)
            raise DataError(f"{path}: line {first}: missing timestamp")
    ts = None if not stamps else np.array(stamps, dtype=np.float64)
    return EdgeTable(InteractionSet.from_tokens(rows), ts, np.array(lines, dtype=np.int64))


def _read_columns(path, format):
    rows, stamps, lines = [], [], []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            cols = next(csv.reader([s])) if format == "csv" else s.split()
            cols = [c.strip() for c in cols]
            if len(cols) not in (2, 3) or not all(cols):
                raise DataError(f"{path}: line {lineno}: expected 2 or 3 columns, "
                                f"got {len(cols)}")
            ts = None
            if len(cols) == 3:
                try:
                    ts = parse_timestamp(cols[2])
                except ValueError:
                    if not rows and not _is_number(cols[0]):
                        continue  # header row
                    raise DataError(f"{path}: line {lineno}: bad timestamp {cols[2]!r}")
            rows.append((cols[0], cols[1]))
            stamps.append(ts)
            lines.append(lineno)
    return rows, stamps, lines


def _is_number(text):
    try:
        float(text)
        return True
    except ValueError:
        return False


def _read_wiki_elec(path, format):
    rows, stamps, lines = [], [], []
    candidate = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            tok = s.split()
            kind = tok[0]
            try:
                if kind == "E":
                    candidate = None
                elif kind == "U":
                    candidate = tok[1]
                elif kind == "V":
                    if candidate is None:
                        raise DataError("vote before any candidate")
                    rows.append((tok[2], candidate))
                    stamps.append(parse_timestamp(tok[3] + " " + tok[4]))
                    lines.append(lineno)
                elif kind not in {"T", "N"}:
                    raise DataError(f"unknown record type {kind!r}")
            except (IndexError, ValueError) as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
    return rows, stamps, lines


def timestamp_coagulate(iset: InteractionSet, timestamps, bins, binning="equal-width"):
    """Merge labels whose latest timestamp falls in the same bin.

    Each label's representative time is the largest timestamp over every row
    it takes part in.  Bins split ``[min, max]`` of all timestamps into
    ``bins`` equal-width intervals (the maximum goes to the last bin), or into
    equal-count intervals with ``binning="quantile"``.

    Returns
    -------
    coarse : InteractionSet
        Slot-aligned with ``iset``; coarse labels are named ``bin<index>``.
    pm : ParentMap
    """
    bins = int(bins)
    if bins < 1:
        raise DomainError(f"bins must be >= 1, got {bins}")
    ts = np.asarray(timestamps, dtype=np.float64)
    if ts.shape != (len(iset),):
        raise DataError("need exactly one timestamp per interaction")
    rep = np.full(len(iset.labels), -np.inf)
    for it, t in zip(iset.interactions, ts):
        for x in it:
            if t > rep[x]:
                rep[x] = t
    used = np.isfinite(rep)
    lo, hi = float(ts.min()), float(ts.max())
    if binning == "equal-width":
        width = (hi - lo) / bins
        idx = np.zeros(rep.size, dtype=np.int64) if width == 0 else \
            np.floor((np.where(used, rep, lo) - lo) / width).astype(np.int64)
    elif binning == "quantile":
        edges = np.quantile(ts, np.linspace(0.0, 1.0, bins + 1))
        idx = np.searchsorted(edges, np.where(used, rep, lo), side="right") - 1
    else:
        raise DomainError(f"unknown binning {binning!r}")
    idx = np.clip(idx, 0, bins - 1)
    occupied = sorted(set(idx[used].tolist()))
    coarse_id = {b: j for j, b in enumerate(occupied)}
    mapping = np.array([coarse_id.get(int(b), -1) for b in idx], dtype=np.int64)
    coarse = iset.relabel(mapping, tuple(f"bin{b}" for b in occupied))
    pm = ParentMap({x: int(mapping[x]) for x in np.flatnonzero(used)}, iset.labels,
                   coarse.labels)
    return coarse, pm


def fixture_path() -> Path:
    """Path of the bundled synthetic election file."""
    return Path(str(resources.files("hicrp") / "data" / FIXTURE_NAME))


def make_fixture(path, seed=0):
    """Write the synthetic election file whose counts are ``FIXTURE_EXPECTED``.

    Thirty users have designed latest-vote times over ``[0, 1000]`` seconds:
    users 1-28 sit four to a bin in the first seven of ten equal-width bins
    and users 29-30 share the last bin, so ten bins give eight coarse labels
    and 20,000 bins give one per distinct latest time, 29 in all.
    Each user casts one anchor vote at its latest time, to the next user in
    time order; twenty filler votes and one vote at time 0 never exceed
    either participant's latest time.
    """
    rng = np.random.default_rng(seed)
    rep = {i: 100 * ((i - 1) // 4) + 10 + 20 * ((i - 1) % 4) for i in range(1, 29)}
    rep[29] = rep[30] = 1000
    order = sorted(rep, key=lambda i: (rep[i], i))
    votes = [(order[j], order[j + 1], rep[order[j]]) for j in range(len(order) - 1)]
    for _ in range(20):
        a, b = rng.choice(30, size=2, replace=False) + 1
        votes.append((int(a), int(b), int(rng.integers(0, min(rep[a], rep[b]) + 1))))
    votes.append((1, 2, 0))
    base = _dt.datetime(2005, 1, 1, tzinfo=_dt.timezone.utc)
    by_cand = {}
    for v, c, t in votes:
        by_cand.setdefault(c, []).append((v, t))
    with open(path, "w") as fh:
        fh.write("# synthetic election data in the SNAP wiki-Elec layout\n")
        for c in sorted(by_cand):
            fh.write(f"E 1\nT {base:%Y-%m-%d %H:%M:%S}\nU {c} user{c}\nN {c} user{c}\n")
            for v, t in by_cand[c]:
                stamp = base + _dt.timedelta(seconds=t)
                fh.write(f"V 1 {v} {stamp:%Y-%m-%d %H:%M:%S} user{v}\n")


# ---------------------------------------------------------------------------
# manifests


def versions():
    import numpy
    import scipy
    import sklearn

    from . import __version__

    return {"python": platform.python_version(), "numpy": numpy.__version__,
            "scipy": scipy.__version__, "scikit-learn": sklearn.__version__,
            "hicrp": __version__}


def write_manifest(directory, command, config, seed, outputs, started, extra=None):
    """Record what a run did, in enough detail to repeat it."""
    directory = Path(directory)
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "outputs": sorted(str(o) for o in outputs),
        "versions": versions(),
        "wall_time_seconds": round(time.time() - started, 3),
    }
    if extra:
        manifest.update(extra)
    with open(directory / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_jsonable)
    return manifest


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return None if not math.isfinite(obj) else float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
