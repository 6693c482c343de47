"""Streaming exponential-moving-average estimates of gradient moments.

The running average follows the backward-difference recursion
``avg(t) = sample(t)/(1+tau) + avg(t-1)*tau/(1+tau)``, so ``tau`` is the
memory length in steps and ``tau = 0`` replaces the state with the sample.
The retention factor ``tau/(1+tau)`` plays the role of the usual momentum
coefficient beta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DIAGONAL = "diagonal"
FULL = "full"


class DimensionMismatch(ValueError):
    """Gradient dimension does not match the tracked state."""


@dataclass(frozen=True)
class Timescales:
    """EMA memory lengths for the first and second moment, in steps."""

    tau1: float
    tau2: float

    def __post_init__(self):
        for name in ("tau1", "tau2"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class MomentState:
    """Running first moment, second-moment statistic, and step counter.

    ``m2`` is a length-d vector in diagonal mode (per-coordinate mean of
    squared gradients) or a d x d symmetric matrix in full mode (mean of
    gradient outer products).
    """

    m1: np.ndarray
    m2: np.ndarray
    step: int = 0

    @classmethod
    def initial(cls, dim: int, mode: str = DIAGONAL) -> "MomentState":
        """Fresh state: zero first moment, identity second moment."""
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if mode == DIAGONAL:
            m2 = np.ones(dim)
        elif mode == FULL:
            m2 = np.eye(dim)
        else:
            raise ValueError(f"unknown moment mode {mode!r}")
        return cls(m1=np.zeros(dim), m2=m2, step=0)

    @property
    def dim(self) -> int:
        return self.m1.shape[0]

    @property
    def mode(self) -> str:
        return FULL if self.m2.ndim == 2 else DIAGONAL


def ema_update(prev, sample, tau: float):
    """One backward-difference EMA step; elementwise for arrays.

    Exact fixed point: ``ema_update(x, x, tau) == x``. With ``tau == 0`` the
    sample is returned bit-for-bit.
    """
    if not np.isfinite(tau) or tau < 0.0:
        raise ValueError(f"tau must be finite and >= 0, got {tau}")
    return sample / (1.0 + tau) + prev * (tau / (1.0 + tau))


def update_moments(state: MomentState, grad, ts: Timescales) -> MomentState:
    """Fold one gradient sample into the moment state.

    The second-moment sample is the squared gradient in diagonal mode and
    the outer product in full mode; both keep ``m2`` exactly symmetric.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != (state.dim,):
        raise DimensionMismatch(
            f"gradient shape {grad.shape} does not match state dimension {state.dim}"
        )
    if state.mode == FULL:
        sample2 = np.outer(grad, grad)
    else:
        sample2 = grad * grad
    return MomentState(
        m1=ema_update(state.m1, grad, ts.tau1),
        m2=ema_update(state.m2, sample2, ts.tau2),
        step=state.step + 1,
    )


def covariance(state: MomentState) -> np.ndarray:
    """Centered second moment: m2 - m1 (x) m1.

    May contain negative entries (or eigenvalues) when the two timescales
    differ; consumers clamp at zero before taking fractional powers.
    """
    if state.mode == FULL:
        return state.m2 - np.outer(state.m1, state.m1)
    return state.m2 - state.m1 * state.m1


__all__ = [
    "DIAGONAL",
    "FULL",
    "DimensionMismatch",
    "Timescales",
    "MomentState",
    "ema_update",
    "update_moments",
    "covariance",
]
