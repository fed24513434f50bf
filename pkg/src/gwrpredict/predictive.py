"""Growing network that learns a vector autoregression by quantization.

Each neuron carries two weight vectors: an input weight over a window of
`regressor_order` past elements, and an output weight holding the next
`output_steps` elements. The best match is found by regressor distance
alone; training moves both weight vectors of the winner (and, more gently,
of its neighbors) toward the sample with the same scalar factor, so the
input and output sides stay coupled. Prediction is a lookup: the output
weight of the winner. Multi-step prediction either recurses (drop the
oldest element, prepend the prediction) or, in vector mode, reads several
future elements from one lookup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .gwr import (
    GwrParams,
    StepReport,
    EpochReport,
    _BaseNetwork,
    _as_vector,
    _as_matrix,
    _read_body,
    _read_params,
    _write_params,
    activation,
    habituation_step,
)
from ._serial import LineReader, expect_header, float_to_hex, parse_int, read_field

__all__ = [
    "RegressorSample",
    "split_window",
    "PredictiveGwrNetwork",
    "save_predictive_network",
    "load_predictive_network",
    "write_predictive_network",
    "read_predictive_network",
]


@dataclass(frozen=True)
class RegressorSample:
    """One training pair: past window `x_in` and future target `x_out`.

    x_in concatenates the most recent elements newest first:
    x(t), x(t-1), ..., x(t-p+1). x_out concatenates the following elements
    in time order: x(t+1), ..., x(t+output_steps).
    """

    x_in: np.ndarray
    x_out: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_in", _as_vector(self.x_in, name="x_in"))
        object.__setattr__(self, "x_out", _as_vector(self.x_out, name="x_out"))
        self.x_in.flags.writeable = False
        self.x_out.flags.writeable = False


def split_window(window, regressor_order: int, output_steps: int) -> RegressorSample:
    """Split a newest-first window into a regressor/target training pair.

    The window must concatenate `regressor_order + output_steps` equally
    sized elements, newest first. The newest `output_steps` elements become
    the target (reversed into time order) and the remaining elements become
    the regressor (kept newest first).
    """
    if regressor_order < 1:
        raise ValueError("regressor_order must be >= 1")
    if output_steps < 1:
        raise ValueError("output_steps must be >= 1")
    window = _as_vector(window, name="window")
    blocks = regressor_order + output_steps
    if window.shape[0] % blocks != 0:
        raise ValueError(
            f"window length {window.shape[0]} is not divisible into"
            f" {blocks} equally sized elements"
        )
    d = window.shape[0] // blocks
    parts = window.reshape(blocks, d)
    x_out = parts[:output_steps][::-1].reshape(-1)
    x_in = parts[output_steps:].reshape(-1)
    return RegressorSample(x_in=x_in, x_out=x_out)


class PredictiveGwrNetwork(_BaseNetwork):
    """Growing-when-required network with paired input/output weights."""

    def __init__(self, first: RegressorSample, second: RegressorSample,
                 regressor_order: int, output_steps: int,
                 params: GwrParams | None = None):
        params = GwrParams() if params is None else params
        if not isinstance(first, RegressorSample) or not isinstance(second, RegressorSample):
            raise TypeError("seed samples must be RegressorSample instances")
        if regressor_order < 1:
            raise ValueError("regressor_order must be >= 1")
        if output_steps < 1:
            raise ValueError("output_steps must be >= 1")
        if first.x_in.shape[0] % regressor_order != 0:
            raise ValueError("x_in length is not a multiple of regressor_order")
        element_dim = first.x_in.shape[0] // regressor_order
        if first.x_out.shape[0] != element_dim * output_steps:
            raise ValueError(
                f"x_out has length {first.x_out.shape[0]}, expected"
                f" {element_dim * output_steps}"
            )
        self._element_dim = element_dim
        self._order = regressor_order
        self._steps = output_steps
        super().__init__((element_dim * regressor_order, element_dim * output_steps),
                         params)
        self._append(self._pair(first))
        self._append(self._pair(second))

    def _pair(self, sample: RegressorSample) -> tuple[np.ndarray, np.ndarray]:
        if not isinstance(sample, RegressorSample):
            raise TypeError("expected a RegressorSample")
        x_in = _as_vector(sample.x_in, self.regressor_dim, "x_in")
        x_out = _as_vector(sample.x_out, self.output_dim, "x_out")
        return x_in, x_out

    @property
    def element_dim(self) -> int:
        return self._element_dim

    @property
    def regressor_order(self) -> int:
        return self._order

    @property
    def output_steps(self) -> int:
        return self._steps

    @property
    def regressor_dim(self) -> int:
        return self._dims[0]

    @property
    def output_dim(self) -> int:
        return self._dims[1]

    def input_weight_of(self, nid: int) -> np.ndarray:
        return self._mats[0][self._require_row(nid)].copy()

    def output_weight_of(self, nid: int) -> np.ndarray:
        return self._mats[1][self._require_row(nid)].copy()

    def input_weights(self) -> np.ndarray:
        return self._mats[0][: self._n].copy()

    def output_weights(self) -> np.ndarray:
        return self._mats[1][: self._n].copy()

    # -- prediction --------------------------------------------------------

    def predict_one(self, x_in) -> np.ndarray:
        """Output weight of the regressor's best match (a copy)."""
        x_in = _as_vector(x_in, self.regressor_dim, "x_in")
        if self._n < 2:
            raise ValueError("network must hold at least 2 neurons")
        d2 = self._distances_sq(x_in)
        return self._mats[1][int(np.argmin(d2))].copy()

    def predict_recursive(self, x_in, horizon: int) -> list[np.ndarray]:
        """Predictions for the next `horizon` elements, one element each.

        Only defined for output_steps == 1. Each step's prediction is
        prepended to the regressor while its oldest element is dropped.
        """
        if self._steps != 1:
            raise ValueError("recursive prediction requires output_steps == 1")
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        x = _as_vector(x_in, self.regressor_dim, "x_in").copy()
        d = self._element_dim
        out: list[np.ndarray] = []
        for _ in range(horizon):
            y = self.predict_one(x)
            out.append(y)
            x = np.concatenate([y, x[:-d]]) if self._order > 1 else y.copy()
        return out

    def predict_batch(self, xs, horizon: int) -> np.ndarray:
        """Predicted elements for a batch of regressors, shape (m, horizon, d).

        Recursive mode iterates lookups; vector mode slices blocks out of a
        single lookup and requires horizon <= output_steps.
        """
        xs = _as_matrix(xs, self.regressor_dim, "regressors")
        if self._n < 2:
            raise ValueError("network must hold at least 2 neurons")
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        d = self._element_dim
        m = xs.shape[0]
        if self._steps == 1:
            out = np.empty((m, horizon, d))
            cur = xs.copy()
            for step in range(horizon):
                rows = self._nearest_rows(cur)
                y = self._mats[1][rows]
                out[:, step, :] = y
                cur = np.hstack([y, cur[:, :-d]]) if self._order > 1 else y.copy()
            return out
        if horizon > self._steps:
            raise ValueError(
                f"horizon {horizon} exceeds output_steps {self._steps};"
                " vector-mode networks cannot recurse"
            )
        rows = self._nearest_rows(xs)
        blocks = self._mats[1][rows].reshape(m, self._steps, d)
        return blocks[:, :horizon, :].copy()

    def prediction_error(self, samples: Iterable[RegressorSample]) -> tuple[float, float]:
        """(MSE, MAE) of predicted outputs against x_out over the samples.

        Averaged over every sample and vector component. Uses the same
        batched best-match lookup as predict_batch, so results agree with
        it exactly.
        """
        pairs = [self._pair(sample) for sample in samples]
        if not pairs:
            raise ValueError("prediction_error needs at least one sample")
        if self._n < 2:
            raise ValueError("network must hold at least 2 neurons")
        xs = np.vstack([x_in for x_in, _ in pairs])
        outs = np.vstack([x_out for _, x_out in pairs])
        resid = self._mats[1][self._nearest_rows(xs)] - outs
        return float(np.mean(resid * resid)), float(np.mean(np.abs(resid)))

    # -- training ------------------------------------------------------------

    def train_step(self, sample: RegressorSample) -> StepReport:
        x_in, x_out = self._pair(sample)
        if self._n < 2:
            raise ValueError("network must hold at least 2 neurons")
        p = self.params
        r_b, r_s = self._bmu_rows(x_in)
        b = int(self._ids[r_b])
        s = int(self._ids[r_s])
        w_in = self._mats[0][r_b]
        w_out = self._mats[1][r_b]
        dist = float(np.linalg.norm(x_in - w_in))
        act = math.exp(-dist)
        out_resid = x_out - w_out
        out_sq = float(np.mean(out_resid * out_resid))

        graph = self._graph
        graph.connect(b, s)
        graph.age_incident(b, skip=s)

        h_b = float(self._firing[r_b])
        may_grow = p.max_neurons is None or self._n < p.max_neurons
        inserted = act < p.activation_threshold and h_b < p.firing_threshold and may_grow
        new_id: int | None = None
        if inserted:
            new_id = self._append((0.5 * (x_in + w_in), 0.5 * (x_out + w_out)))
            graph.connect(new_id, b)
            graph.connect(new_id, s)
            graph.disconnect(b, s)
        else:
            nbrs = graph.neighbors(b)
            factor = p.learning_rate_bmu * h_b
            self._mats[0][r_b] += factor * (x_in - self._mats[0][r_b])
            self._mats[1][r_b] += factor * (x_out - self._mats[1][r_b])
            for nid in nbrs:
                r = self._row_of[nid]
                f_i = p.learning_rate_neighbor * float(self._firing[r])
                self._mats[0][r] += f_i * (x_in - self._mats[0][r])
                self._mats[1][r] += f_i * (x_out - self._mats[1][r])
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
            output_sq_error=out_sq,
        )

    def train_epoch(self, samples: Sequence[RegressorSample]) -> EpochReport:
        samples = list(samples)
        if not samples:
            raise ValueError("train_epoch needs at least one sample")
        dist_sum = 0.0
        inserted = removed_n = removed_e = 0
        for sample in samples:
            report = self.train_step(sample)
            dist_sum += report.distance
            inserted += int(report.inserted)
            removed_n += report.removed_neuron_count
            removed_e += report.removed_edge_count
        return EpochReport(
            sample_count=len(samples),
            mean_quantization_error=dist_sum / len(samples),
            neuron_count=self._n,
            inserted_count=inserted,
            removed_neuron_count=removed_n,
            removed_edge_count=removed_e,
        )


# -- snapshot format --------------------------------------------------------

_MAGIC = "predictive-gwr-network"
_VERSION = 1


def write_predictive_network(net: PredictiveGwrNetwork, fh: IO[str]) -> None:
    fh.write(f"{_MAGIC} {_VERSION}\n")
    fh.write(f"element_dim {net.element_dim}\n")
    fh.write(f"regressor_order {net.regressor_order}\n")
    fh.write(f"output_steps {net.output_steps}\n")
    fh.write(f"train_steps {net.train_step_counter}\n")
    fh.write(f"next_id {net._next_id}\n")
    _write_params(fh, net.params)
    fh.write(f"neurons {net.neuron_count}\n")
    for row in range(net._n):
        nid = int(net._ids[row])
        firing = float_to_hex(net._firing[row])
        win = " ".join(float_to_hex(v) for v in net._mats[0][row])
        wout = " ".join(float_to_hex(v) for v in net._mats[1][row])
        fh.write(f"neuron {nid} {firing} {win} {wout}\n")
    edges = list(net.edges())
    fh.write(f"edges {len(edges)}\n")
    for a, b, age in edges:
        fh.write(f"edge {a} {b} {age}\n")
    fh.write("end\n")


def read_predictive_network(fh: IO[str]) -> PredictiveGwrNetwork:
    reader = LineReader(fh)
    version = expect_header(reader, _MAGIC)
    if version != _VERSION:
        raise ValueError(f"unsupported {_MAGIC} version {version}")
    element_dim = parse_int(read_field(reader, "element_dim"), "element_dim")
    order = parse_int(read_field(reader, "regressor_order"), "regressor_order")
    steps = parse_int(read_field(reader, "output_steps"), "output_steps")
    if element_dim < 1 or order < 1 or steps < 1:
        raise ValueError("element_dim, regressor_order, output_steps must be >= 1")
    train_steps = parse_int(read_field(reader, "train_steps"), "train_steps")
    next_id = parse_int(read_field(reader, "next_id"), "next_id")
    params = _read_params(reader)

    net = PredictiveGwrNetwork.__new__(PredictiveGwrNetwork)
    net._element_dim = element_dim
    net._order = order
    net._steps = steps
    _BaseNetwork.__init__(net, (element_dim * order, element_dim * steps), params)
    _read_body(reader, net, per_neuron_dims=(element_dim * order, element_dim * steps))
    if net.neuron_count < 2:
        raise ValueError("snapshot holds fewer than 2 neurons")
    if next_id < net._next_id:
        raise ValueError("next_id is smaller than an existing neuron id + 1")
    net._next_id = next_id
    net.train_step_counter = train_steps
    return net


def save_predictive_network(net: PredictiveGwrNetwork, path) -> None:
    with open(Path(path), "w", encoding="ascii") as fh:
        write_predictive_network(net, fh)


def load_predictive_network(path) -> PredictiveGwrNetwork:
    with open(Path(path), "r", encoding="ascii") as fh:
        return read_predictive_network(fh)
