"""Incremental-stability bounds and the executable symbolic controller.

A sampled system whose source is incrementally input-to-state stable admits
a state-quantized twin that is approximately bisimilar to it: whenever

    beta1(eps, tau) + beta2(mu) + eta/2 <= eps

holds for the contraction bound ``beta1``, the input-gain bound ``beta2``,
the input pitch ``mu`` and the state pitch ``eta``, trajectories of the two
systems under inputs within ``mu`` stay within ``eps`` of each other.  The
symbolic controller below executes that twin on demand: its state lives
exactly on the grid ``eta * Z^n``.
"""

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import linalg
from .errors import CertificateError, ContractViolationError, ParameterError
from .systems import (
    DiscreteLti,
    LtiModel,
    NonlinearModel,
    SampledModel,
    quantize_nearest,
)

__all__ = [
    "DeltaIssBound",
    "BisimVerdict",
    "SymbolicController",
    "lti_delta_iss",
    "check_bisim_params",
    "symbolic_step",
    "symbolic_output",
    "lipschitz_output_bound",
]


@dataclass(frozen=True)
class DeltaIssBound:
    """Exponential/linear incremental-stability bound.

    ``beta1(r, t) = scale * exp(-rate * t) * r`` bounds the effect of an
    initial-state mismatch and ``beta2(s) = input_gain * s`` the effect of
    an input mismatch.
    """

    scale: float
    rate: float
    input_gain: float

    def __post_init__(self):
        if self.scale < 1.0:
            raise ParameterError(f"scale must be >= 1, got {self.scale}")
        if self.rate <= 0:
            raise ParameterError(f"decay rate must be positive, got {self.rate}")
        if self.input_gain < 0:
            raise ParameterError(f"input gain must be nonnegative, got {self.input_gain}")

    def beta1(self, r, t):
        return self.scale * math.exp(-self.rate * t) * r

    def beta2(self, s):
        return self.input_gain * s


@dataclass(frozen=True)
class BisimVerdict:
    passed: bool
    slack: float


def lti_delta_iss(a, b) -> DeltaIssBound:
    """Incremental-stability bound for a Hurwitz LTI system.

    Solves ``A'P + PA = -I`` and reads off the standard Lyapunov estimates:
    decay rate ``1/(2 lambda_max(P))``, overshoot
    ``sqrt(lambda_max(P)/lambda_min(P))`` and input gain
    ``scale * ||B||_2 / rate`` from the variation-of-constants convolution.
    """
    a = np.atleast_2d(np.asarray(a, float))
    b = np.atleast_2d(np.asarray(b, float))
    p = linalg.lyap(a, np.eye(a.shape[0]))
    eigs = np.linalg.eigvalsh(p)
    rate = 1.0 / (2.0 * eigs[-1])
    scale = math.sqrt(eigs[-1] / eigs[0])
    gain = scale * np.linalg.norm(b, 2) / rate
    return DeltaIssBound(scale=scale, rate=rate, input_gain=gain)


def check_bisim_params(bound: DeltaIssBound, eps, tau, mu, eta) -> BisimVerdict:
    """Feasibility of the (eps, mu)-bisimulation parameter inequality.

    ``slack = eps - (beta1(eps, tau) + beta2(mu) + eta/2)``; nonnegative
    slack certifies that the sampled system and its state-quantized twin
    are (eps, mu)-approximately bisimilar.
    """
    if min(eps, tau, mu, eta) <= 0:
        raise ParameterError("eps, tau, mu and eta must all be positive")
    slack = eps - (bound.beta1(eps, tau) + bound.beta2(mu) + eta / 2.0)
    return BisimVerdict(passed=bool(slack >= 0.0), slack=float(slack))


def _on_grid(values, pitch):
    values = np.asarray(values, float)
    return bool(np.array_equal(np.round(values / pitch) * pitch, values))


class SymbolicController:
    """State-quantized executable twin of a sampled controller.

    The state is stored as integer grid coordinates, so it remains exactly
    on ``eta * Z^n`` for all time.  Inputs must already lie on the ``mu``
    grid (quantize with the input quantizer first); each step applies the
    exact sampled transition from the grid state and rounds the successor
    to the nearest grid point, which is the tightest admissible choice
    under the half-pitch transition rule.

    Construction verifies the bisimulation parameter inequality for the
    supplied incremental-stability bound unless ``unchecked`` is set.
    """

    def __init__(
        self,
        model: Union[LtiModel, NonlinearModel, SampledModel],
        tau: float,
        eta: float,
        mu: float,
        eps: float,
        x0,
        iss_bound: Optional[DeltaIssBound] = None,
        unchecked: bool = False,
        substeps: int = 64,
    ):
        if min(eta, mu, eps) <= 0:
            raise ParameterError("eta, mu and eps must be positive")
        if isinstance(model, SampledModel):
            self.model = model
        else:
            self.model = SampledModel(model, tau, substeps=substeps)
        self.tau = self.model.tau
        self.eta = float(eta)
        self.mu = float(mu)
        self.eps = float(eps)
        if not unchecked:
            if iss_bound is None:
                raise ParameterError(
                    "an incremental-stability bound is required unless unchecked=True"
                )
            verdict = check_bisim_params(iss_bound, eps, self.tau, mu, eta)
            if not verdict.passed:
                raise CertificateError(
                    f"bisimulation parameter inequality fails (slack {verdict.slack:.3e})",
                    slack=verdict.slack,
                )
        self.iss_bound = iss_bound
        x0 = np.asarray(x0, float)
        if x0.shape != (self.model.n,):
            raise ParameterError(f"initial state must have shape ({self.model.n},)")
        self._coords = np.asarray(
            np.round(quantize_nearest(x0, self.eta) / self.eta), dtype=np.int64
        )

    @property
    def state(self):
        return self._coords * self.eta

    def _require_grid_input(self, u):
        u = np.asarray(u, float)
        if u.shape != (self.model.m,):
            raise ContractViolationError(f"input must have shape ({self.model.m},)")
        if not _on_grid(u, self.mu):
            raise ContractViolationError(
                f"input must lie on the {self.mu} grid; quantize it first"
            )
        return u

    def step(self, u):
        """Advance one sampling period; returns the new grid state."""
        u = self._require_grid_input(u)
        nxt = self.model.step(self.state, u)
        self._coords = np.asarray(
            np.round(quantize_nearest(nxt, self.eta) / self.eta), dtype=np.int64
        )
        return self.state

    def output(self, u):
        """Output map evaluated at the grid state and the grid input."""
        u = self._require_grid_input(u)
        return self.model.output(self.state, u)

    def clone(self):
        twin = object.__new__(SymbolicController)
        twin.model = self.model
        twin.tau = self.tau
        twin.eta = self.eta
        twin.mu = self.mu
        twin.eps = self.eps
        twin.iss_bound = self.iss_bound
        twin._coords = self._coords.copy()
        return twin


def symbolic_step(ctrl: SymbolicController, u):
    """Functional form of :meth:`SymbolicController.step`."""
    return ctrl.step(u)


def symbolic_output(ctrl: SymbolicController, u):
    """Functional form of :meth:`SymbolicController.output`."""
    return ctrl.output(u)


def lipschitz_output_bound(model):
    """Bound L with ``|h1(z1) - h1(z2)|_2 <= L |z1 - z2|_inf``.

    For LTI output maps ``h1(x) = Cx`` this is the induced (inf -> 2) norm
    ``sqrt(sum_i (sum_j |C_ij|)^2)``.  Nonlinear models must carry a
    user-supplied ``h1_lipschitz``.
    """
    if isinstance(model, (LtiModel, DiscreteLti)):
        c = model.c
        return float(math.sqrt(float(np.sum(np.abs(c).sum(axis=1) ** 2))))
    if isinstance(model, SampledModel):
        return lipschitz_output_bound(model.source)
    if isinstance(model, NonlinearModel):
        if model.h1_lipschitz is None:
            raise ParameterError(
                "nonlinear models need a user-supplied h1_lipschitz bound"
            )
        return float(model.h1_lipschitz)
    raise ParameterError(f"unsupported model type {type(model).__name__}")
