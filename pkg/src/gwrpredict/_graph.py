"""Undirected neuron graph with integer edge ages.

Shared by the plain and the predictive growing networks. Ages are stored
symmetrically and every mutation keeps both directions in sync; at most one
edge may exist per unordered node pair, and self-edges are rejected.
"""

from __future__ import annotations

from typing import Iterator


class NeuronGraph:
    __slots__ = ("_adj",)

    def __init__(self) -> None:
        self._adj: dict[int, dict[int, int]] = {}

    # -- nodes ---------------------------------------------------------

    def add_node(self, nid: int) -> None:
        if nid in self._adj:
            raise ValueError(f"node {nid} already present")
        self._adj[nid] = {}

    def remove_node(self, nid: int) -> int:
        """Remove a node with its incident edges; returns the edge count lost."""
        nbrs = self._adj.pop(nid)
        for other in nbrs:
            del self._adj[other][nid]
        return len(nbrs)

    def has_node(self, nid: int) -> bool:
        return nid in self._adj

    def nodes(self) -> list[int]:
        return sorted(self._adj)

    @property
    def node_count(self) -> int:
        return len(self._adj)

    # -- edges ---------------------------------------------------------

    def connect(self, a: int, b: int) -> None:
        """Create edge a-b with age 0, or reset its age to 0 if present."""
        if a == b:
            raise ValueError("self-edges are not allowed")
        if a not in self._adj or b not in self._adj:
            raise KeyError("both endpoints must be existing nodes")
        self._adj[a][b] = 0
        self._adj[b][a] = 0

    def disconnect(self, a: int, b: int) -> bool:
        """Remove edge a-b if present; returns whether it existed."""
        if b in self._adj.get(a, ()):
            del self._adj[a][b]
            del self._adj[b][a]
            return True
        return False

    def has_edge(self, a: int, b: int) -> bool:
        return b in self._adj.get(a, ())

    def age(self, a: int, b: int) -> int:
        try:
            return self._adj[a][b]
        except KeyError:
            raise KeyError(f"no edge between {a} and {b}") from None

    def neighbors(self, nid: int) -> list[int]:
        # Sorted so that every caller iterates in a reproducible order.
        return sorted(self._adj[nid])

    def degree(self, nid: int) -> int:
        return len(self._adj[nid])

    @property
    def edge_count(self) -> int:
        return sum(len(nbrs) for nbrs in self._adj.values()) // 2

    def edges(self) -> Iterator[tuple[int, int, int]]:
        """Yield (a, b, age) with a < b, in sorted order."""
        for a in sorted(self._adj):
            row = self._adj[a]
            for b in sorted(row):
                if a < b:
                    yield a, b, row[b]

    # -- aging and pruning ----------------------------------------------

    def age_incident(self, nid: int, skip: int | None = None) -> None:
        """Add 1 to the age of every edge at `nid` except the one to `skip`."""
        row = self._adj[nid]
        for other in row:
            if other == skip:
                continue
            age = row[other] + 1
            row[other] = age
            self._adj[other][nid] = age

    def prune_incident(self, nid: int, max_age: int) -> list[tuple[int, int]]:
        """Drop edges at `nid` whose age exceeds `max_age`; returns the pairs.

        Ages only ever grow through age_incident, so checking the node whose
        edges were just aged is enough to keep the whole graph within bounds.
        """
        row = self._adj.get(nid)
        if not row:
            return []
        doomed = sorted(other for other, age in row.items() if age > max_age)
        for other in doomed:
            del row[other]
            del self._adj[other][nid]
        return [(min(nid, o), max(nid, o)) for o in doomed]

    def isolated_among(self, candidates) -> list[int]:
        """Subset of `candidates` that currently have no edges, sorted."""
        return sorted(n for n in set(candidates) if not self._adj[n])
