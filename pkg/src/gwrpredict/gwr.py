"""Growing-when-required (GWR) network for online vector quantization.

A GWR network is a set of prototype neurons joined by aged edges. Each
training step finds the two neurons nearest the input, refreshes the edge
between them, and either inserts a new neuron (when the best match is both
poor and already well trained) or adapts the best match and its graph
neighbors toward the input. Edges that go unrefreshed for too long are
pruned, and neurons left without edges are discarded.

Neuron habituation is tracked as a "firing" value that starts at 1 and
decays toward 1 - 1/kappa each time the neuron or its neighborhood wins;
insertion is allowed only once the winner's firing has dropped below the
firing threshold, which forces several adaptations of an existing neuron
before the network may grow near it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from ._graph import NeuronGraph
from ._serial import (
    LineReader,
    expect_header,
    float_to_hex,
    hex_to_float,
    parse_int,
    read_field,
)

__all__ = [
    "GwrParams",
    "StepReport",
    "EpochReport",
    "GwrNetwork",
    "activation",
    "habituation_step",
    "save_network",
    "load_network",
    "write_network",
    "read_network",
]


@dataclass(frozen=True)
class GwrParams:
    """Training constants for a growing-when-required network.

    Attributes:
        activation_threshold: Insertion gate on the best match's activation,
            exp(-distance); a new neuron may be inserted only while the
            activation is below this value. Higher values demand a tighter
            fit and therefore grow more neurons. In (0, 1).
        firing_threshold: Insertion gate on the best match's firing value;
            a neuron must have been trained down below this level before a
            new neuron may be inserted next to it. In (0, 1).
        learning_rate_bmu: Step size of the best match's weight update.
        learning_rate_neighbor: Step size of the neighbors' weight updates.
            Must not exceed learning_rate_bmu.
        firing_rho_bmu: Firing decay speed applied to the best match.
        firing_rho_neighbor: Firing decay speed applied to its neighbors.
        firing_kappa: Firing curve shape; the decay fixed point is
            1 - 1/firing_kappa. Must satisfy rho * kappa <= 1 for both rho
            values so that firing decays monotonically and stays within
            [1 - 1/kappa, 1].
        max_edge_age: Edges older than this are pruned. Ages reset to 0
            whenever the edge's endpoints win together.
        max_epochs: Default epoch budget experiment drivers may consult.
        max_neurons: Optional hard cap on the neuron count; None (default)
            means growth is unbounded.
    """

    activation_threshold: float = 0.98
    firing_threshold: float = 0.1
    learning_rate_bmu: float = 0.1
    learning_rate_neighbor: float = 0.01
    firing_rho_bmu: float = 0.3
    firing_rho_neighbor: float = 0.1
    firing_kappa: float = 1.05
    max_edge_age: int = 100
    max_epochs: int = 50
    max_neurons: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.activation_threshold < 1.0:
            raise ValueError("activation_threshold must lie in (0, 1)")
        if not 0.0 < self.firing_threshold < 1.0:
            raise ValueError("firing_threshold must lie in (0, 1)")
        if not 0.0 < self.learning_rate_neighbor <= self.learning_rate_bmu < 1.0:
            raise ValueError(
                "learning rates must satisfy 0 < learning_rate_neighbor"
                " <= learning_rate_bmu < 1"
            )
        if self.firing_rho_bmu <= 0.0 or self.firing_rho_neighbor <= 0.0:
            raise ValueError("firing_rho_bmu and firing_rho_neighbor must be > 0")
        if self.firing_kappa <= 1.0:
            raise ValueError("firing_kappa must be > 1")
        big_rho = max(self.firing_rho_bmu, self.firing_rho_neighbor)
        if big_rho * self.firing_kappa > 1.0:
            raise ValueError(
                "rho * kappa must be <= 1 so firing decays monotonically"
            )
        if self.max_edge_age < 1:
            raise ValueError("max_edge_age must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.max_neurons is not None and self.max_neurons < 2:
            raise ValueError("max_neurons must be None or >= 2")


def activation(x, bmu_weight) -> float:
    """Match quality exp(-||x - w||) of a sample against a prototype.

    Equals 1 for an exact match and falls toward 0 with distance.
    """
    x = _as_vector(x, name="x")
    w = _as_vector(bmu_weight, dim=x.shape[0], name="bmu_weight")
    return math.exp(-float(np.linalg.norm(x - w)))


def habituation_step(firing: float, rho: float, kappa: float) -> float:
    """One firing decay step: h + rho * kappa * (1 - h) - rho."""
    return firing + rho * kappa * (1.0 - firing) - rho


@dataclass(frozen=True)
class StepReport:
    """What one training step did.

    bmu_weight is the best match's weight after the step (a copy).
    output_sq_error is only set by predictive networks: the pre-update mean
    squared residual of the winner's output vector against the target.
    """

    bmu_id: int
    second_bmu_id: int
    activity: float
    distance: float
    inserted: bool
    new_neuron_id: int | None
    removed_neuron_ids: tuple[int, ...]
    removed_edge_count: int
    neuron_count: int
    bmu_weight: np.ndarray
    output_sq_error: float | None = None

    @property
    def removed_neuron_count(self) -> int:
        return len(self.removed_neuron_ids)


@dataclass(frozen=True)
class EpochReport:
    """Aggregates over one pass of train_epoch."""

    sample_count: int
    mean_quantization_error: float
    neuron_count: int
    inserted_count: int
    removed_neuron_count: int
    removed_edge_count: int


def _as_vector(x, dim: int | None = None, name: str = "sample") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _as_matrix(x, dim: int, name: str = "samples") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"{name} must have shape (m, {dim}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


class _BaseNetwork:
    """Storage, nearest-neighbor search, and pruning shared by both networks.

    Neurons live in the first `_n` rows of preallocated arrays, ordered by
    strictly increasing id; nearest-neighbor ties therefore resolve to the
    smallest id. Subclasses own the training-step logic.
    """

    def __init__(self, dims: Sequence[int], params: GwrParams):
        if not isinstance(params, GwrParams):
            raise TypeError("params must be a GwrParams instance")
        self.params = params
        self._dims = tuple(int(d) for d in dims)
        if any(d < 1 for d in self._dims):
            raise ValueError("weight dimensions must be >= 1")
        cap = 4
        self._mats = [np.zeros((cap, d)) for d in self._dims]
        self._ids = np.zeros(cap, dtype=np.int64)
        self._firing = np.zeros(cap)
        self._n = 0
        self._next_id = 0
        self._row_of: dict[int, int] = {}
        self._graph = NeuronGraph()
        self.train_step_counter = 0
        # Number of neuron-distance evaluations performed by searches; lets
        # tests assert linear scan cost without timing anything.
        self.distance_eval_count = 0

    # -- storage ---------------------------------------------------------

    def _append(self, vectors: Sequence[np.ndarray], firing: float = 1.0,
                nid: int | None = None) -> int:
        if nid is None:
            nid = self._next_id
        elif nid < self._next_id:
            raise ValueError("neuron ids must be strictly increasing")
        self._next_id = nid + 1
        if self._n == self._ids.shape[0]:
            self._grow()
        row = self._n
        for mat, vec in zip(self._mats, vectors):
            mat[row] = vec
        self._ids[row] = nid
        self._firing[row] = firing
        self._row_of[nid] = row
        self._graph.add_node(nid)
        self._n += 1
        return nid

    def _grow(self) -> None:
        cap = self._ids.shape[0] * 2
        self._mats = [np.resize(mat, (cap, mat.shape[1])) for mat in self._mats]
        self._ids = np.resize(self._ids, cap)
        self._firing = np.resize(self._firing, cap)

    def _remove_ids(self, doomed: Iterable[int]) -> None:
        doomed = sorted(doomed)
        if not doomed:
            return
        for nid in doomed:
            self._graph.remove_node(nid)
        keep = np.ones(self._n, dtype=bool)
        for nid in doomed:
            keep[self._row_of[nid]] = False
        kept = int(keep.sum())
        for mat in self._mats:
            mat[:kept] = mat[:self._n][keep]
        self._ids[:kept] = self._ids[:self._n][keep]
        self._firing[:kept] = self._firing[:self._n][keep]
        self._n = kept
        self._row_of = {int(self._ids[r]): r for r in range(self._n)}

    # -- search ----------------------------------------------------------

    def _distances_sq(self, x: np.ndarray, mat: int = 0) -> np.ndarray:
        live = self._mats[mat][: self._n]
        diff = live - x
        self.distance_eval_count += self._n
        return np.einsum("ij,ij->i", diff, diff)

    def _bmu_rows(self, x: np.ndarray, mat: int = 0) -> tuple[int, int]:
        d2 = self._distances_sq(x, mat)
        r1 = int(np.argmin(d2))
        d2[r1] = np.inf
        r2 = int(np.argmin(d2))
        return r1, r2

    def _nearest_rows(self, xs: np.ndarray, mat: int = 0) -> np.ndarray:
        """Row index of the nearest neuron for every row of `xs` (batched)."""
        live = self._mats[mat][: self._n]
        d2 = np.einsum("ij,ij->i", live, live)[None, :] - 2.0 * (xs @ live.T)
        self.distance_eval_count += self._n * xs.shape[0]
        return np.argmin(d2, axis=1)

    def find_bmus(self, x) -> tuple[int, int]:
        """Ids of the nearest and second-nearest neurons to `x`.

        Ties break toward the smaller (older) neuron id.
        """
        x = _as_vector(x, self._dims[0])
        if self._n < 2:
            raise ValueError("network must hold at least 2 neurons")
        r1, r2 = self._bmu_rows(x)
        return int(self._ids[r1]), int(self._ids[r2])

    # -- shared step plumbing ---------------------------------------------

    def _prune_after_step(self, bmu_id: int,
                          touched: tuple[int, ...]) -> tuple[int, tuple[int, ...]]:
        removed_pairs = self._graph.prune_incident(bmu_id, self.params.max_edge_age)
        candidates = {bmu_id, *touched}
        for a, b in removed_pairs:
            candidates.add(a)
            candidates.add(b)
        isolated = self._graph.isolated_among(candidates)
        # Neuron floor: never drop below 2 neurons. When the floor bites,
        # the oldest isolated neurons go first and the newest survive.
        allowed = max(0, self._n - 2)
        doomed = tuple(isolated[:allowed])
        self._remove_ids(doomed)
        return len(removed_pairs), doomed

    # -- read access -------------------------------------------------------

    @property
    def neuron_count(self) -> int:
        return self._n

    @property
    def edge_count(self) -> int:
        return self._graph.edge_count

    def neuron_ids(self) -> list[int]:
        return [int(i) for i in self._ids[: self._n]]

    def firing_of(self, nid: int) -> float:
        return float(self._firing[self._require_row(nid)])

    def neighbors_of(self, nid: int) -> list[int]:
        self._require_row(nid)
        return self._graph.neighbors(nid)

    def has_edge(self, a: int, b: int) -> bool:
        return self._graph.has_edge(a, b)

    def edge_age(self, a: int, b: int) -> int:
        return self._graph.age(a, b)

    def edges(self) -> Iterator[tuple[int, int, int]]:
        return self._graph.edges()

    def _require_row(self, nid: int) -> int:
        try:
            return self._row_of[nid]
        except KeyError:
            raise KeyError(f"no neuron with id {nid}") from None


class GwrNetwork(_BaseNetwork):
    """Plain growing-when-required network over fixed-dimension samples."""

    def __init__(self, first_sample, second_sample, params: GwrParams | None = None):
        params = GwrParams() if params is None else params
        first = _as_vector(first_sample, name="first_sample")
        second = _as_vector(second_sample, dim=first.shape[0], name="second_sample")
        super().__init__((first.shape[0],), params)
        self._append((first,))
        self._append((second,))

    @property
    def input_dim(self) -> int:
        return self._dims[0]

    def weight_of(self, nid: int) -> np.ndarray:
        return self._mats[0][self._require_row(nid)].copy()

    def weights(self) -> np.ndarray:
        """Copy of all live prototype rows, ordered by ascending neuron id."""
        return self._mats[0][: self._n].copy()

    def quantize(self, x) -> tuple[np.ndarray, float]:
        """Best-match weight and its activation for `x`; never mutates."""
        x = _as_vector(x, self.input_dim)
        if self._n < 2:
            raise ValueError("network must hold at least 2 neurons")
        d2 = self._distances_sq(x)
        r = int(np.argmin(d2))
        w = self._mats[0][r].copy()
        return w, activation(x, w)

    def quantize_batch(self, xs) -> np.ndarray:
        """Best-match weights for every row of `xs`; never mutates."""
        xs = _as_matrix(xs, self.input_dim)
        if self._n < 2:
            raise ValueError("network must hold at least 2 neurons")
        rows = self._nearest_rows(xs)
        return self._mats[0][rows].copy()

    def train_step(self, x) -> StepReport:
        x = _as_vector(x, self.input_dim)
        if self._n < 2:
            raise ValueError("network must hold at least 2 neurons")
        p = self.params
        r_b, r_s = self._bmu_rows(x)
        b = int(self._ids[r_b])
        s = int(self._ids[r_s])
        w_b = self._mats[0][r_b]
        dist = float(np.linalg.norm(x - w_b))
        act = math.exp(-dist)

        graph = self._graph
        graph.connect(b, s)
        graph.age_incident(b, skip=s)

        h_b = float(self._firing[r_b])
        may_grow = p.max_neurons is None or self._n < p.max_neurons
        inserted = act < p.activation_threshold and h_b < p.firing_threshold and may_grow
        new_id: int | None = None
        if inserted:
            new_id = self._append((0.5 * (x + w_b),))
            graph.connect(new_id, b)
            graph.connect(new_id, s)
            graph.disconnect(b, s)
        else:
            nbrs = graph.neighbors(b)
            self._mats[0][r_b] += (p.learning_rate_bmu * h_b) * (x - self._mats[0][r_b])
            for nid in nbrs:
                r = self._row_of[nid]
                h_i = float(self._firing[r])
                self._mats[0][r] += (p.learning_rate_neighbor * h_i) * (x - self._mats[0][r])
            self._firing[r_b] = habituation_step(h_b, p.firing_rho_bmu, p.firing_kappa)
            for nid in nbrs:
                r = self._row_of[nid]
                self._firing[r] = habituation_step(
                    float(self._firing[r]), p.firing_rho_neighbor, p.firing_kappa
                )

        removed_edges, removed_ids = self._prune_after_step(b, (s,))
        self.train_step_counter += 1
        return StepReport(
            bmu_id=b,
            second_bmu_id=s,
            activity=act,
            distance=dist,
            inserted=inserted,
            new_neuron_id=new_id,
            removed_neuron_ids=removed_ids,
            removed_edge_count=removed_edges,
            neuron_count=self._n,
            bmu_weight=self._mats[0][self._row_of[b]].copy(),
        )

    def train_epoch(self, samples) -> EpochReport:
        samples = _as_matrix(samples, self.input_dim)
        if samples.shape[0] == 0:
            raise ValueError("train_epoch needs at least one sample")
        dist_sum = 0.0
        inserted = removed_n = removed_e = 0
        for row in samples:
            report = self.train_step(row)
            dist_sum += report.distance
            inserted += int(report.inserted)
            removed_n += report.removed_neuron_count
            removed_e += report.removed_edge_count
        return EpochReport(
            sample_count=samples.shape[0],
            mean_quantization_error=dist_sum / samples.shape[0],
            neuron_count=self._n,
            inserted_count=inserted,
            removed_neuron_count=removed_n,
            removed_edge_count=removed_e,
        )


# -- snapshot format ------------------------------------------------------

_MAGIC = "gwr-network"
_VERSION = 1
_PARAM_FIELDS = [f.name for f in fields(GwrParams)]


def _write_params(fh: IO[str], params: GwrParams, tag: str = "param") -> None:
    for name in _PARAM_FIELDS:
        value = getattr(params, name)
        if value is None:
            token = "none"
        elif isinstance(value, int):
            token = str(value)
        else:
            token = float_to_hex(value)
        fh.write(f"{tag} {name} {token}\n")


def _read_params(reader: LineReader, tag: str = "param") -> GwrParams:
    seen: dict[str, object] = {}
    for expected in _PARAM_FIELDS:
        num, line = reader.next(f"{tag} {expected}")
        parts = line.split()
        if len(parts) != 3 or parts[0] != tag:
            raise ValueError(f"line {num}: expected '{tag} <name> <value>', got {line!r}")
        name, token = parts[1], parts[2]
        if name != expected:
            raise ValueError(f"line {num}: expected parameter {expected!r}, got {name!r}")
        if name in ("max_edge_age", "max_epochs"):
            seen[name] = parse_int(token, name)
        elif name == "max_neurons":
            seen[name] = None if token == "none" else parse_int(token, name)
        else:
            seen[name] = hex_to_float(token)
    return GwrParams(**seen)


def write_network(net: GwrNetwork, fh: IO[str]) -> None:
    """Write a lossless text snapshot of `net` to an open text handle."""
    fh.write(f"{_MAGIC} {_VERSION}\n")
    fh.write(f"input_dim {net.input_dim}\n")
    fh.write(f"train_steps {net.train_step_counter}\n")
    fh.write(f"next_id {net._next_id}\n")
    _write_params(fh, net.params)
    fh.write(f"neurons {net.neuron_count}\n")
    for row in range(net._n):
        nid = int(net._ids[row])
        firing = float_to_hex(net._firing[row])
        ws = " ".join(float_to_hex(v) for v in net._mats[0][row])
        fh.write(f"neuron {nid} {firing} {ws}\n")
    edges = list(net.edges())
    fh.write(f"edges {len(edges)}\n")
    for a, b, age in edges:
        fh.write(f"edge {a} {b} {age}\n")
    fh.write("end\n")


def read_network(fh: IO[str]) -> GwrNetwork:
    """Read a snapshot written by write_network; exact round trip."""
    reader = LineReader(fh)
    version = expect_header(reader, _MAGIC)
    if version != _VERSION:
        raise ValueError(f"unsupported {_MAGIC} version {version}")
    input_dim = parse_int(read_field(reader, "input_dim"), "input_dim")
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    train_steps = parse_int(read_field(reader, "train_steps"), "train_steps")
    next_id = parse_int(read_field(reader, "next_id"), "next_id")
    params = _read_params(reader)

    net = GwrNetwork.__new__(GwrNetwork)
    _BaseNetwork.__init__(net, (input_dim,), params)
    _read_body(reader, net, per_neuron_dims=(input_dim,))
    if net.neuron_count < 2:
        raise ValueError("snapshot holds fewer than 2 neurons")
    if next_id < net._next_id:
        raise ValueError("next_id is smaller than an existing neuron id + 1")
    net._next_id = next_id
    net.train_step_counter = train_steps
    return net


def _read_body(reader: LineReader, net: _BaseNetwork,
               per_neuron_dims: tuple[int, ...]) -> None:
    """Shared neuron/edge/end section reader for both snapshot formats."""
    total = sum(per_neuron_dims)
    n = parse_int(read_field(reader, "neurons"), "neuron count")
    last_id = -1
    for _ in range(n):
        num, line = reader.next("neuron record")
        parts = line.split()
        if len(parts) != 3 + total or parts[0] != "neuron":
            raise ValueError(f"line {num}: malformed neuron record")
        nid = parse_int(parts[1], "neuron id")
        if nid <= last_id:
            raise ValueError(f"line {num}: neuron ids must be strictly increasing")
        last_id = nid
        firing = hex_to_float(parts[2])
        values = [hex_to_float(tok) for tok in parts[3:]]
        vectors = []
        at = 0
        for dim in per_neuron_dims:
            vectors.append(np.array(values[at: at + dim]))
            at += dim
        net._append(vectors, firing=firing, nid=nid)
    m = parse_int(read_field(reader, "edges"), "edge count")
    for _ in range(m):
        num, line = reader.next("edge record")
        parts = line.split()
        if len(parts) != 4 or parts[0] != "edge":
            raise ValueError(f"line {num}: malformed edge record")
        a = parse_int(parts[1], "edge endpoint")
        b = parse_int(parts[2], "edge endpoint")
        age = parse_int(parts[3], "edge age")
        if a == b:
            raise ValueError(f"line {num}: self-edge not allowed")
        if a not in net._row_of or b not in net._row_of:
            raise ValueError(f"line {num}: edge endpoint does not exist")
        if net._graph.has_edge(a, b):
            raise ValueError(f"line {num}: duplicate edge {a}-{b}")
        if age < 0:
            raise ValueError(f"line {num}: negative edge age")
        net._graph.connect(a, b)
        net._graph._adj[a][b] = age
        net._graph._adj[b][a] = age
    num, line = reader.next("end marker")
    if line != "end":
        raise ValueError(f"line {num}: expected 'end', got {line!r}")


def save_network(net: GwrNetwork, path) -> None:
    with open(Path(path), "w", encoding="ascii") as fh:
        write_network(net, fh)


def load_network(path) -> GwrNetwork:
    with open(Path(path), "r", encoding="ascii") as fh:
        return read_network(fh)
