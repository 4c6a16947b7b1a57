"""A minimal Broad Learning System with input-incremental training."""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DimensionError
from .incremental import (
    BStrategy,
    IncrementBatch,
    PinvState,
    UpdateOutcome,
    add_inputs,
)
from .linalg import as_matrix, left_pinv, svd_pinv

MODEL_FORMAT = "incbls-model/1"

_ACTIVATIONS = {
    "identity": lambda z: z,
    "tanh": np.tanh,
    "sigmoid": lambda z: 0.5 * (1.0 + np.tanh(0.5 * z)),
}


@dataclass(frozen=True)
class Architecture:
    n_feature_groups: int = 10
    nodes_per_feature_group: int = 10
    n_enhancement_groups: int = 1
    nodes_per_enhancement_group: int = 400
    shrink_scale: float = 0.8
    feature_activation: str = "identity"
    enhancement_activation: str = "tanh"
    lam: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.n_feature_nodes <= 0:
            raise ValueError("architecture needs at least one feature node")
        if self.n_enhancement_groups < 0 or self.nodes_per_enhancement_group < 0:
            raise ValueError("enhancement node counts must be nonnegative")
        for act in (self.feature_activation, self.enhancement_activation):
            if act not in _ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
        if self.lam < 0:
            raise ValueError("ridge parameter must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def n_feature_nodes(self) -> int:
        return self.n_feature_groups * self.nodes_per_feature_group

    @property
    def n_enhancement_nodes(self) -> int:
        return self.n_enhancement_groups * self.nodes_per_enhancement_group

    @property
    def total_nodes(self) -> int:
        return self.n_feature_nodes + self.n_enhancement_nodes

    @property
    def structure(self) -> tuple[int, int]:
        return (self.n_feature_nodes, self.n_enhancement_nodes)


@dataclass(frozen=True)
class BlsModel:
    arch: Architecture
    feature_weights: tuple[np.ndarray, ...]
    enhancement_weights: tuple[np.ndarray, ...]
    state: PinvState
    W: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.feature_weights[0].shape[0] - 1

    @property
    def n_classes(self) -> int:
        return self.W.shape[1]


def init_weights(arch: Architecture, d: int):
    """Draw the random feature and enhancement mappings for input width ``d``.

    Feature maps are uniform(-1, 1) with the bias as the last row. Enhancement
    maps are uniform(-1, 1) divided by sqrt(fan-in) to keep tanh out of
    saturation; ``shrink_scale`` is applied at evaluation time.
    """
    rng = np.random.default_rng(arch.seed)
    feat = tuple(
        rng.uniform(-1.0, 1.0, size=(d + 1, arch.nodes_per_feature_group))
        for _ in range(arch.n_feature_groups)
    )
    fan_in = arch.n_feature_nodes + 1
    enh = tuple(
        rng.uniform(-1.0, 1.0, size=(fan_in, arch.nodes_per_enhancement_group))
        / np.sqrt(fan_in)
        for _ in range(arch.n_enhancement_groups)
    )
    return feat, enh


def _with_bias(M: np.ndarray) -> np.ndarray:
    return np.hstack([M, np.ones((M.shape[0], 1))])


def _activations(arch, feat, enh, X) -> np.ndarray:
    X = as_matrix(X, "X")
    if X.shape[1] != feat[0].shape[0] - 1:
        raise DimensionError(f"X has {X.shape[1]} columns, model expects {feat[0].shape[0] - 1}")
    act_f = _ACTIVATIONS[arch.feature_activation]
    act_e = _ACTIVATIONS[arch.enhancement_activation]
    Xb = _with_bias(X)
    Z = np.hstack([act_f(Xb @ We) for We in feat])
    Zb = _with_bias(Z)
    H = [act_e(Zb @ (arch.shrink_scale * Wh)) for Wh in enh]
    return np.hstack([Z, *H])


def build_activations(model: BlsModel, X) -> np.ndarray:
    """Expanded input matrix ``[Z_1 .. Z_n H_1 .. H_m]`` for the rows of ``X``."""
    return _activations(model.arch, model.feature_weights, model.enhancement_weights, X)


def train_initial(arch: Architecture, X, Y, keep_matrix: bool = True) -> BlsModel:
    """Fit output weights on ``(X, Y)`` with the ridge left inverse.

    Falls back to the SVD pseudoinverse (with a warning) when there are
    fewer samples than nodes. ``keep_matrix=False`` drops the activation
    matrix after training; later increments must then assume full rank.
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise DimensionError(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
    feat, enh = init_weights(arch, X.shape[1])
    A = _activations(arch, feat, enh, X)
    if A.shape[0] < A.shape[1]:
        warnings.warn(
            f"{A.shape[0]} samples < {A.shape[1]} nodes; using the SVD pseudoinverse",
            stacklevel=2,
        )
        Apinv = svd_pinv(A)
    else:
        Apinv = left_pinv(A, arch.lam)
    state = PinvState(A if keep_matrix else None, Apinv, arch.lam)
    return BlsModel(arch, feat, enh, state, Apinv @ Y)


def increment_inputs(
    model: BlsModel,
    X_a,
    Y_a,
    strategy: BStrategy = BStrategy.AUTO,
    assume_full_rank: bool = False,
) -> tuple[BlsModel, UpdateOutcome]:
    """Return a new model that has also learned ``(X_a, Y_a)``."""
    t0 = time.perf_counter()
    Ax = build_activations(model, X_a)
    t_act = time.perf_counter() - t0
    batch = IncrementBatch(Ax, as_matrix(Y_a, "Y_a"))
    outcome = add_inputs(model.state, model.W, batch, strategy, assume_full_rank)
    outcome.timings["activations"] = t_act
    return replace(model, state=outcome.new_state, W=outcome.new_W), outcome


def predict(model: BlsModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Class indices and the score matrix; ties go to the lowest index."""
    scores = build_activations(model, X) @ model.W
    return np.argmax(scores, axis=1), scores


def accuracy(predicted, labels) -> float:
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    if predicted.shape != labels.shape:
        raise DimensionError("prediction and label counts differ")
    return float(np.mean(predicted == labels)) if labels.size else 0.0


def save_model(model: BlsModel, path) -> None:
    """Write ``model`` to an ``.npz`` archive.

    Layout: ``format`` (str), ``arch`` (JSON str), ``feature_<i>``,
    ``enhancement_<j>``, ``Apinv``, ``W`` and, unless dropped, ``A``.
    """
    arrays = {
        "format": np.array(MODEL_FORMAT),
        "arch": np.array(json.dumps(asdict(model.arch))),
        "lam": np.array(model.state.lam),
        "Apinv": model.state.Apinv,
        "W": model.W,
    }
    for i, w in enumerate(model.feature_weights):
        arrays[f"feature_{i}"] = w
    for j, w in enumerate(model.enhancement_weights):
        arrays[f"enhancement_{j}"] = w
    if model.state.A is not None:
        arrays["A"] = model.state.A
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path) -> BlsModel:
    with np.load(Path(path), allow_pickle=False) as data:
        fmt = str(data["format"])
        if fmt != MODEL_FORMAT:
            raise ValueError(f"unsupported model format {fmt!r}")
        arch = Architecture(**json.loads(str(data["arch"])))
        feat = tuple(data[f"feature_{i}"] for i in range(arch.n_feature_groups))
        enh = tuple(data[f"enhancement_{j}"] for j in range(arch.n_enhancement_groups))
        A = data["A"] if "A" in data.files else None
        state = PinvState(A, data["Apinv"], float(data["lam"]))
        return BlsModel(arch, feat, enh, state, data["W"])
