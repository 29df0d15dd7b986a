"""Frequency-weighted isA taxonomy: loading, indexing, count-based probabilities.

The taxonomy is a set of (hyponym, hypernym, count) edges.  A term may play
both roles (``developing country`` is an entity of ``country`` and a concept
for ``china``), so the two marginals are tracked independently:

* ``n_hypo(x)``  -- total count of x's outgoing (hyponym-role) edges,
* ``n_hyper(c)`` -- total count of c's incoming (hypernym-role) edges.

All probabilities are ratios of these 64-bit integer counts, computed on
demand in double precision.  A loaded taxonomy is immutable; every read
operation is pure and thread-safe.
"""

from __future__ import annotations

import io
import logging
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Union

import numpy as np

logger = logging.getLogger(__name__)

TermId = int

Source = Union[str, os.PathLike, bytes, IO[bytes], IO[str]]


class TaxonomyError(Exception):
    """Base for taxonomy loading/lookup failures."""


class TaxonomyFormatError(TaxonomyError):
    """A malformed input line (strict mode); carries the 1-based line number."""

    def __init__(self, lineno: int, reason: str):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno
        self.reason = reason


class UnknownTermError(TaxonomyError, KeyError):
    def __init__(self, term):
        super().__init__(f"unknown term: {term!r}")
        self.term = term


def normalize_name(raw: str) -> str:
    """Trim, lowercase, and collapse internal whitespace."""
    return " ".join(raw.split()).lower()


@dataclass(frozen=True)
class IsAEdge:
    hypo: TermId
    hyper: TermId
    count: int


@dataclass
class LoadReport:
    """Lines skipped during a lenient load, as (lineno, reason) pairs."""

    skipped: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_skipped(self) -> int:
        return len(self.skipped)


class Taxonomy:
    """Interned term table plus role-specific CSR edge indexes.

    Construct via :func:`load_taxonomy` or :meth:`Taxonomy.from_edges`.
    """

    def __init__(self, names, hypo, hyper, counts, report=None):
        self._names: list[str] = names
        self._ids: dict[str, TermId] = {s: i for i, s in enumerate(names)}
        n = len(names)

        # primary order: sorted by (hypo, hyper) -> hypernym edges of a node
        order = np.lexsort((hyper, hypo))
        self._e_hypo = hypo[order]
        self._e_hyper = hyper[order]
        self._e_count = counts[order]
        self._hypo_ptr = np.searchsorted(self._e_hypo, np.arange(n + 1))

        # secondary order: sorted by (hyper, hypo) -> hyponym edges of a node
        inv = np.lexsort((self._e_hypo, self._e_hyper))
        self._inv_order = inv
        self._hyper_ptr = np.searchsorted(self._e_hyper[inv], np.arange(n + 1))

        # counts fit far below 2**53, so float64 accumulation is exact
        self._n_hypo = np.bincount(
            self._e_hypo, weights=self._e_count, minlength=n
        ).astype(np.int64)
        self._n_hyper = np.bincount(
            self._e_hyper, weights=self._e_count, minlength=n
        ).astype(np.int64)
        self._total_mass = int(self._e_count.sum())

        # per-edge upward transition probability, used by the random walker
        with np.errstate(divide="ignore", invalid="ignore"):
            self._e_prob = self._e_count / self._n_hypo[self._e_hypo]

        self.load_report: LoadReport = report or LoadReport()

    # -- construction ---------------------------------------------------

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[str, str, int]], strict: bool = True) -> "Taxonomy":
        """Build from (hypo, hyper, count) name triples; same rules as loading."""
        triples = []
        report = LoadReport()
        for lineno, (h, c, n) in enumerate(edges, start=1):
            t = _check_triple(normalize_name(h), normalize_name(c), n, lineno, strict, report)
            if t is not None:
                triples.append(t)
        return _build(triples, report)

    # -- term table -----------------------------------------------------

    @property
    def n_terms(self) -> int:
        return len(self._names)

    @property
    def n_edges(self) -> int:
        return len(self._e_count)

    def term_id(self, name: str) -> TermId:
        """Resolve a (raw) name to its TermId; raises UnknownTermError."""
        tid = self._ids.get(normalize_name(name))
        if tid is None:
            raise UnknownTermError(name)
        return tid

    def name(self, tid: TermId) -> str:
        self._check(tid)
        return self._names[tid]

    def __contains__(self, name: str) -> bool:
        return normalize_name(name) in self._ids

    def _check(self, tid: TermId) -> None:
        if not 0 <= tid < len(self._names):
            raise UnknownTermError(tid)

    # -- marginals and incidence ----------------------------------------

    def n_hypo(self, tid: TermId) -> int:
        self._check(tid)
        return int(self._n_hypo[tid])

    def n_hyper(self, tid: TermId) -> int:
        self._check(tid)
        return int(self._n_hyper[tid])

    @property
    def total_hyper_mass(self) -> int:
        return self._total_mass

    def concepts_of(self, e: TermId) -> list[tuple[TermId, int]]:
        """Hypernym edges of e as (concept id, count), in concept-id order."""
        self._check(e)
        lo, hi = self._hypo_ptr[e], self._hypo_ptr[e + 1]
        return list(zip(self._e_hyper[lo:hi].tolist(), self._e_count[lo:hi].tolist()))

    def entities_of(self, c: TermId) -> list[tuple[TermId, int]]:
        """Hyponym edges of c as (entity id, count), in entity-id order."""
        self._check(c)
        lo, hi = self._hyper_ptr[c], self._hyper_ptr[c + 1]
        rows = self._inv_order[lo:hi]
        return list(zip(self._e_hypo[rows].tolist(), self._e_count[rows].tolist()))

    def edge_count(self, e: TermId, c: TermId) -> int:
        """n(e, c); 0 when the edge is absent."""
        self._check(e)
        self._check(c)
        lo, hi = self._hypo_ptr[e], self._hypo_ptr[e + 1]
        pos = lo + np.searchsorted(self._e_hyper[lo:hi], c)
        if pos < hi and self._e_hyper[pos] == c:
            return int(self._e_count[pos])
        return 0

    def concept_ids(self) -> list[TermId]:
        """Terms with hypernym-role mass, i.e. usable as concepts."""
        return np.nonzero(self._n_hyper)[0].tolist()

    def entity_ids(self) -> list[TermId]:
        """Terms with hyponym-role mass, i.e. usable as entities."""
        return np.nonzero(self._n_hypo)[0].tolist()

    # -- probabilities ----------------------------------------------------

    def typicality_e_given_c(self, e: TermId, c: TermId) -> float:
        """P(e|c) = n(e,c) / n_hyper(c).  Errors if c has no hyponyms."""
        nc = self.n_hyper(c)
        if nc == 0:
            raise TaxonomyError(f"{self._names[c]!r} has no hyponym edges; P(e|c) undefined")
        return self.edge_count(e, c) / nc

    def typicality_c_given_e(self, e: TermId, c: TermId) -> float:
        """P(c|e) = n(e,c) / n_hypo(e).  Errors if e has no hypernyms."""
        ne = self.n_hypo(e)
        if ne == 0:
            raise TaxonomyError(f"{self._names[e]!r} has no hypernym edges; P(c|e) undefined")
        return self.edge_count(e, c) / ne

    def concept_prior(self, c: TermId) -> float:
        """P(c) = n_hyper(c) / total hypernym-role mass."""
        self._check(c)
        if self._total_mass == 0:
            raise TaxonomyError("empty taxonomy has no priors")
        return int(self._n_hyper[c]) / self._total_mass

    def entity_prior(self, e: TermId) -> float:
        """P(e) = n_hypo(e) / total hyponym-role mass."""
        self._check(e)
        if self._total_mass == 0:
            raise TaxonomyError("empty taxonomy has no priors")
        return int(self._n_hypo[e]) / self._total_mass

    # -- serialization ----------------------------------------------------

    def edges(self) -> Iterator[IsAEdge]:
        for h, c, n in zip(self._e_hypo.tolist(), self._e_hyper.tolist(), self._e_count.tolist()):
            yield IsAEdge(h, c, n)

    def to_tsv(self, destination) -> None:
        """Write `hypo<TAB>hyper<TAB>count` lines sorted by names; round-trips."""
        rows = sorted(
            (self._names[h], self._names[c], n)
            for h, c, n in zip(
                self._e_hypo.tolist(), self._e_hyper.tolist(), self._e_count.tolist()
            )
        )
        text = "".join(f"{h}\t{c}\t{n}\n" for h, c, n in rows)
        if hasattr(destination, "write"):
            destination.write(text)
        else:
            with open(destination, "w", encoding="utf-8") as fh:
                fh.write(text)

    def __repr__(self) -> str:
        return f"Taxonomy({self.n_terms} terms, {self.n_edges} edges, mass={self._total_mass})"


def _check_triple(hypo, hyper, count, lineno, strict, report):
    reason = None
    if not hypo or not hyper:
        reason = "empty term name"
    elif hypo == hyper:
        reason = f"self-loop edge {hypo!r}"
    else:
        try:
            count = int(count)
        except (TypeError, ValueError):
            reason = f"count {count!r} is not an integer"
        else:
            if count < 1:
                reason = f"count must be positive, got {count}"
    if reason is None:
        return hypo, hyper, count
    if strict:
        raise TaxonomyFormatError(lineno, reason)
    logger.warning("skipping line %d: %s", lineno, reason)
    report.skipped.append((lineno, reason))
    return None


def _build(triples: list[tuple[str, str, int]], report: LoadReport) -> Taxonomy:
    ids: dict[str, int] = {}
    names: list[str] = []

    def intern(s: str) -> int:
        tid = ids.get(s)
        if tid is None:
            tid = len(names)
            ids[s] = tid
            names.append(s)
        return tid

    m = len(triples)
    hypo = np.empty(m, dtype=np.int64)
    hyper = np.empty(m, dtype=np.int64)
    counts = np.empty(m, dtype=np.int64)
    for i, (h, c, n) in enumerate(triples):
        hypo[i] = intern(h)
        hyper[i] = intern(c)
        counts[i] = n

    if m:
        # merge duplicate (hypo, hyper) pairs by summing counts
        order = np.lexsort((hyper, hypo))
        hypo, hyper, counts = hypo[order], hyper[order], counts[order]
        new_group = np.empty(m, dtype=bool)
        new_group[0] = True
        np.logical_or(hypo[1:] != hypo[:-1], hyper[1:] != hyper[:-1], out=new_group[1:])
        starts = np.nonzero(new_group)[0]
        counts = np.add.reduceat(counts, starts)
        hypo, hyper = hypo[starts], hyper[starts]

    return Taxonomy(names, hypo, hyper, counts, report)


def _iter_lines(source: Source) -> Iterator[str]:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from fh
    elif isinstance(source, bytes):
        yield from io.StringIO(source.decode("utf-8"))
    else:
        first = source.read(0)
        if isinstance(first, bytes):
            yield from io.TextIOWrapper(source, encoding="utf-8")
        else:
            yield from source


def load_taxonomy(source: Source, strict: bool = True) -> Taxonomy:
    """Load a taxonomy from TSV `hypo<TAB>hyper<TAB>count` lines.

    Names are normalized (trimmed, lowercased, inner whitespace collapsed);
    duplicate pairs merge by summing counts; `#`-prefixed and blank lines are
    ignored.  Malformed lines (wrong field count, non-positive count,
    self-loop) raise :class:`TaxonomyFormatError` in strict mode; in lenient
    mode they are skipped, logged, and counted in ``taxonomy.load_report``.
    """
    report = LoadReport()
    triples: list[tuple[str, str, int]] = []
    norm_cache: dict[str, str] = {}

    def norm(s: str) -> str:
        v = norm_cache.get(s)
        if v is None:
            v = normalize_name(s)
            norm_cache[s] = v
        return v

    try:
        for lineno, line in enumerate(_iter_lines(source), start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.rstrip("\n").rstrip("\r").split("\t")
            if len(parts) != 3:
                if strict:
                    raise TaxonomyFormatError(lineno, f"expected 3 tab-separated fields, got {len(parts)}")
                logger.warning("skipping line %d: %d fields", lineno, len(parts))
                report.skipped.append((lineno, f"expected 3 fields, got {len(parts)}"))
                continue
            t = _check_triple(norm(parts[0]), norm(parts[1]), parts[2], lineno, strict, report)
            if t is not None:
                triples.append(t)
    except OSError as exc:
        raise TaxonomyError(f"unreadable taxonomy source: {exc}") from exc

    return _build(triples, report)
