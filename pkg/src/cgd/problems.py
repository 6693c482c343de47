"""Benchmark objectives: the Rosenbrock valley and a product-learning network.

Both problems expose the same small surface the run harness consumes:
``dim``, ``initial_params(seed)``, ``loss(q, batch_seed=None)`` and
``gradient(q, batch_seed=None)``. The Rosenbrock objective is deterministic
and ignores the batch seed; the network objective draws a fresh training
batch from the seed, so passing the same seed to ``loss`` and ``gradient``
evaluates both on the same data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray


class DimensionTooSmall(ValueError):
    """Problem dimension below the minimum the objective is defined for."""


class EmptyBatch(ValueError):
    """Requested batch size is not a positive integer."""


# --- Rosenbrock ---------------------------------------------------------


def rosenbrock_loss(q: NDArray[np.float64]) -> float:
    """Generalized Rosenbrock value, sum over consecutive coordinate pairs.

    For two dimensions this is the classic (1-x)^2 + 100(y - x^2)^2 with the
    minimum at (1, 1).
    """
    q = np.asarray(q, dtype=np.float64)
    if q.shape[0] < 2:
        raise DimensionTooSmall("rosenbrock needs at least 2 dimensions")
    head, tail = q[:-1], q[1:]
    return float(np.sum((1.0 - head) ** 2 + 100.0 * (tail - head**2) ** 2))


def rosenbrock_grad(q: NDArray[np.float64]) -> NDArray[np.float64]:
    q = np.asarray(q, dtype=np.float64)
    if q.shape[0] < 2:
        raise DimensionTooSmall("rosenbrock needs at least 2 dimensions")
    head, tail = q[:-1], q[1:]
    grad = np.zeros_like(q)
    grad[:-1] += -2.0 * (1.0 - head) - 400.0 * head * (tail - head**2)
    grad[1:] += 200.0 * (tail - head**2)
    return grad


class RosenbrockProblem:
    """Deterministic valley benchmark; the 2-D start point sits at (0, 0.5)."""

    def __init__(self, dim: int = 2):
        if dim < 2:
            raise DimensionTooSmall("rosenbrock needs at least 2 dimensions")
        self.dim = dim

    def initial_params(self, seed: int = 0) -> NDArray[np.float64]:
        # Fixed start regardless of seed: the objective has no sampling.
        q = np.zeros(self.dim)
        if self.dim == 2:
            q[1] = 0.5
        return q

    def loss(self, q, batch_seed=None) -> float:
        return rosenbrock_loss(q)

    def gradient(self, q, batch_seed=None) -> NDArray[np.float64]:
        return rosenbrock_grad(q)


# --- Product-learning network -------------------------------------------

N_NEURONS = 23
DEPTH = 5
N_PARAMS = N_NEURONS * N_NEURONS + N_NEURONS  # 552
INPUT_NEURONS = (0, 1)
OUTPUT_NEURON = 2


@dataclass
class UnconstrainedNet:
    """All-to-all recurrent net: one shared weight matrix applied DEPTH times.

    State starts at zero except the two input neurons; after DEPTH synchronous
    tanh updates the output neuron's activation is the prediction. Every
    neuron connects to every neuron (self-loops included), so there is no
    layer structure to exploit — the same 23x23 matrix is reused each
    iteration, and gradients accumulate across all of them.
    """

    weights: NDArray[np.float64]  # (N_NEURONS, N_NEURONS)
    biases: NDArray[np.float64]  # (N_NEURONS,)

    @classmethod
    def from_vector(cls, q: NDArray[np.float64]) -> "UnconstrainedNet":
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (N_PARAMS,):
            raise ValueError(f"expected parameter vector of shape ({N_PARAMS},), got {q.shape}")
        w = q[: N_NEURONS * N_NEURONS].reshape(N_NEURONS, N_NEURONS)
        b = q[N_NEURONS * N_NEURONS :]
        return cls(weights=w, biases=b)

    def to_vector(self) -> NDArray[np.float64]:
        return np.concatenate([self.weights.ravel(), self.biases])


def net_forward(net: UnconstrainedNet, inputs: NDArray[np.float64]) -> NDArray[np.float64]:
    """Predictions for a batch of (x, y) rows."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    x = np.zeros((inputs.shape[0], N_NEURONS))
    x[:, INPUT_NEURONS[0]] = inputs[:, 0]
    x[:, INPUT_NEURONS[1]] = inputs[:, 1]
    for _ in range(DEPTH):
        x = np.tanh(x @ net.weights.T + net.biases)
    return x[:, OUTPUT_NEURON]


def net_loss(q: NDArray[np.float64], batch: NDArray[np.float64]) -> float:
    """Mean squared error of the network on a (n, 3) batch of (x, y, target)."""
    net = UnconstrainedNet.from_vector(q)
    pred = net_forward(net, batch[:, :2])
    return float(np.mean((pred - batch[:, 2]) ** 2))


def net_loss_and_grad(
    q: NDArray[np.float64], batch: NDArray[np.float64]
) -> tuple[float, NDArray[np.float64]]:
    """MSE and its gradient w.r.t. the 552 parameters, by reverse accumulation.

    The weight matrix is shared across all DEPTH applications, so the
    backward pass adds each iteration's contribution into the same gradient
    buffers rather than keeping per-layer copies.
    """
    net = UnconstrainedNet.from_vector(q)
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    n = batch.shape[0]

    states = [np.zeros((n, N_NEURONS))]
    states[0][:, INPUT_NEURONS[0]] = batch[:, 0]
    states[0][:, INPUT_NEURONS[1]] = batch[:, 1]
    for _ in range(DEPTH):
        states.append(np.tanh(states[-1] @ net.weights.T + net.biases))

    pred = states[-1][:, OUTPUT_NEURON]
    residual = pred - batch[:, 2]
    loss = float(np.mean(residual**2))

    gw = np.zeros_like(net.weights)
    gb = np.zeros_like(net.biases)
    sensitivity = np.zeros((n, N_NEURONS))
    sensitivity[:, OUTPUT_NEURON] = 2.0 * residual / n
    for k in range(DEPTH, 0, -1):
        # d tanh(z)/dz expressed through the activation: 1 - x^2
        u = sensitivity * (1.0 - states[k] ** 2)
        gw += u.T @ states[k - 1]
        gb += u.sum(axis=0)
        sensitivity = u @ net.weights
    return loss, np.concatenate([gw.ravel(), gb])


def sample_batch(seed: int, size: int) -> NDArray[np.float64]:
    """(size, 3) rows of x, y, x*y with x, y uniform on [-1, 1]."""
    if size < 1:
        raise EmptyBatch(f"batch size must be >= 1, got {size}")
    rng = np.random.default_rng(seed)
    xy = rng.uniform(-1.0, 1.0, size=(size, 2))
    return np.column_stack([xy, xy[:, 0] * xy[:, 1]])


class MultiplyProblem:
    """Learn f(x, y) = x*y with the 23-neuron unconstrained network.

    Stochastic: each step's batch is drawn from the supplied batch seed, so
    the loss surface changes step to step. A None seed means seed 0, keeping
    direct loss(q) probes deterministic.
    """

    def __init__(self, batch_size: int = 100):
        if batch_size < 1:
            raise EmptyBatch(f"batch size must be >= 1, got {batch_size}")
        self.dim = N_PARAMS
        self.batch_size = batch_size

    def initial_params(self, seed: int = 0) -> NDArray[np.float64]:
        rng = np.random.default_rng(seed)
        return rng.uniform(-0.5, 0.5, size=N_PARAMS) / np.sqrt(N_NEURONS)

    def _batch(self, batch_seed) -> NDArray[np.float64]:
        return sample_batch(0 if batch_seed is None else int(batch_seed), self.batch_size)

    def loss(self, q, batch_seed=None) -> float:
        return net_loss(np.asarray(q, dtype=np.float64), self._batch(batch_seed))

    def gradient(self, q, batch_seed=None) -> NDArray[np.float64]:
        _, grad = net_loss_and_grad(np.asarray(q, dtype=np.float64), self._batch(batch_seed))
        return grad


def finite_diff_grad(problem, q, h: float, batch_seed=None) -> NDArray[np.float64]:
    """Central-difference gradient of problem.loss at q, one coordinate at a time."""
    q = np.asarray(q, dtype=np.float64)
    grad = np.zeros_like(q)
    for i in range(q.shape[0]):
        bumped = q.copy()
        bumped[i] = q[i] + h
        up = problem.loss(bumped, batch_seed)
        bumped[i] = q[i] - h
        down = problem.loss(bumped, batch_seed)
        grad[i] = (up - down) / (2.0 * h)
    return grad


__all__ = [
    "DimensionTooSmall",
    "EmptyBatch",
    "rosenbrock_loss",
    "rosenbrock_grad",
    "RosenbrockProblem",
    "UnconstrainedNet",
    "net_forward",
    "net_loss",
    "net_loss_and_grad",
    "sample_batch",
    "MultiplyProblem",
    "finite_diff_grad",
    "N_NEURONS",
    "DEPTH",
    "N_PARAMS",
    "INPUT_NEURONS",
    "OUTPUT_NEURON",
]
