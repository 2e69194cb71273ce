"""Passivity indices: LMI verification, degradation, composition, audits.

A system is IF-OFP(nu, rho) when it is dissipative for the supply rate
``u'y - nu u'u - rho y'y``; the quasi-passive variant IF-OFQP(nu, rho, delta)
adds a constant internal-generation allowance ``delta >= 0``.  Implementing a
continuous system under sampling and quantization degrades these indices;
the operations here quantify the degradation and compose indices across a
feedback interconnection.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import CertificateError, DimensionError, ParameterError
from .systems import DiscreteLti, LtiModel

__all__ = [
    "IndexSet",
    "QuadraticStorage",
    "GainCertificate",
    "LambdaChoices",
    "ComposedIndices",
    "LmiVerdict",
    "verify_lti_passivity",
    "max_index_bisection",
    "verify_gain_assumption",
    "degrade_sampling",
    "degrade_quantization",
    "symbolic_quant_bias",
    "compose_feedback",
    "choose_nu_hat",
    "dissipation_audit",
]


@dataclass(frozen=True)
class IndexSet:
    """Passivity/quasi-passivity indices.

    ``nu`` is the input-feedforward index, ``rho`` the output-feedback index,
    ``delta`` the constant quasi-passivity bias, and ``w`` the weight of a
    state-dependent bias ``delta(x0) = w * beta(x0)`` picked up when indices
    are derived by sampling degradation.  Pure IF-OFP means delta = w = 0.
    """

    nu: float
    rho: float
    delta: float = 0.0
    w: float = 0.0

    def __post_init__(self):
        if self.delta < 0:
            raise ParameterError(f"delta must be nonnegative, got {self.delta}")
        if self.w < 0:
            raise ParameterError(f"bias weight must be nonnegative, got {self.w}")

    @property
    def is_pure(self) -> bool:
        return self.delta == 0.0 and self.w == 0.0


@dataclass(frozen=True)
class QuadraticStorage:
    """Quadratic storage function ``V(x) = x' P x`` with P symmetric PSD."""

    p: np.ndarray

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.p, dtype=float))
        p = 0.5 * (p + p.T)
        if linalg.min_eig(p) < -1e-10:
            raise ParameterError("storage matrix must be positive semidefinite")
        object.__setattr__(self, "p", p)

    def __call__(self, x):
        x = np.asarray(x, float)
        return float(x @ self.p @ x)


@dataclass(frozen=True)
class GainCertificate:
    """Gain bound on the state part of the output map.

    Witnesses ``int |d/dt h1(x)|^2 <= gamma^2 int |u|^2 + beta(x0)`` with
    ``beta(x) = x' Mb x``.
    """

    gamma: float
    beta_matrix: np.ndarray

    def __post_init__(self):
        if self.gamma <= 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        mb = np.atleast_2d(np.asarray(self.beta_matrix, dtype=float))
        mb = 0.5 * (mb + mb.T)
        if linalg.min_eig(mb) < -1e-10:
            raise ParameterError("beta matrix must be positive semidefinite")
        object.__setattr__(self, "beta_matrix", mb)

    def beta(self, x):
        x = np.asarray(x, float)
        return float(x @ self.beta_matrix @ x)


@dataclass(frozen=True)
class LambdaChoices:
    """Free positive parameters of the degradation formulas.

    Defaults follow the worked examples bundled with the package:
    ``lambda1 = 10`` for the sampling stage and 20 for the quantization
    stage.  Larger values trade a larger constant bias for larger indices.
    """

    lambda1: float = 10.0
    lambda2: float = 20.0
    lambda3: float = 20.0
    lambda4: float = 20.0
    lambda5: float = 20.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4", "lambda5"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class ComposedIndices:
    """Loop indices with the per-subsystem bias weights carried through.

    The state bias of the interconnection splits as
    ``delta(x0) = w1 * beta1(x1_0) + w2 * beta2(x2_0)``.
    """

    nu: float
    rho: float
    delta: float
    w1: float = 0.0
    w2: float = 0.0


@dataclass(frozen=True)
class LmiVerdict:
    """Outcome of a feasibility check: ``margin`` is the critical eigenvalue."""

    passed: bool
    margin: float


def _storage_matrix(storage):
    if isinstance(storage, QuadraticStorage):
        return storage.p
    p = np.atleast_2d(np.asarray(storage, dtype=float))
    return 0.5 * (p + p.T)


def _passivity_lmi(model, p, nu, rho):
    """Quadratic form in (x, u) whose negative semidefiniteness certifies
    the dissipation inequality for the candidate (P, nu, rho)."""
    c, d = model.c, model.d
    m = c.shape[0]
    if p.shape[0] != model.n:
        raise DimensionError(
            f"storage is {p.shape[0]}x{p.shape[0]} but the state dimension is {model.n}"
        )
    if isinstance(model, DiscreteLti):
        ad, bd = model.ad, model.bd
        m11 = ad.T @ p @ ad - p + rho * c.T @ c
        m12 = ad.T @ p @ bd - 0.5 * c.T + rho * c.T @ d
        m22 = bd.T @ p @ bd + nu * np.eye(m) - 0.5 * (d + d.T) + rho * d.T @ d
    else:
        a, b = model.a, model.b
        m11 = a.T @ p + p @ a + rho * c.T @ c
        m12 = p @ b - 0.5 * c.T + rho * c.T @ d
        m22 = nu * np.eye(m) - 0.5 * (d + d.T) + rho * d.T @ d
    blk = np.block([[m11, m12], [m12.T, m22]])
    return 0.5 * (blk + blk.T)


def verify_lti_passivity(model, storage, nu, rho, tol=1e-8) -> LmiVerdict:
    """Check whether an LTI system is IF-OFP(nu, rho) for a given storage.

    Parameters
    ----------
    model : LtiModel or DiscreteLti
        Continuous models are checked against the differential dissipation
        inequality, discrete ones against the one-step difference form.
    storage : QuadraticStorage or array
        Candidate storage matrix P (V(x) = x'Px).
    nu, rho : float
        Candidate passivity indices.
    tol : float
        Feasibility tolerance on the max eigenvalue of the assembled form.

    Returns
    -------
    LmiVerdict
        ``passed`` is True iff the form is negative semidefinite within
        ``tol``; ``margin`` is its max eigenvalue.
    """
    if not isinstance(model, (LtiModel, DiscreteLti)):
        raise DimensionError("model must be an LtiModel or DiscreteLti")
    p = _storage_matrix(storage)
    margin = linalg.max_eig(_passivity_lmi(model, p, nu, rho))
    return LmiVerdict(passed=bool(margin <= tol), margin=float(margin))


def max_index_bisection(model, storage, fixed, fixed_value, tol=1e-8):
    """Largest value of the free index passing :func:`verify_lti_passivity`.

    ``fixed`` names which index ("nu" or "rho") is held at ``fixed_value``;
    the other is bisected over [-10, 10] to a resolution of 1e-5.  Raises a
    :class:`CertificateError` when even the lower bound is infeasible.
    """
    if fixed not in ("nu", "rho"):
        raise ParameterError("fixed must be 'nu' or 'rho'")
    p = _storage_matrix(storage)

    def feasible(free):
        nu, rho = (fixed_value, free) if fixed == "nu" else (free, fixed_value)
        return linalg.max_eig(_passivity_lmi(model, p, nu, rho)) <= tol

    lo, hi = -10.0, 10.0
    if not feasible(lo):
        raise CertificateError(
            f"no feasible index at the search lower bound {lo}", lower_bound=lo
        )
    if feasible(hi):
        return hi
    while hi - lo > 1e-5:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def verify_gain_assumption(model: LtiModel, cert: GainCertificate, tol=1e-8):
    """Check the derivative-gain bound for the state output ``h1(x) = Cx``.

    Assembles the 2x2-block form whose negative semidefiniteness certifies
    ``d/dt beta(x) <= gamma^2 |u|^2 - |d/dt (Cx)|^2`` with ``beta = x'Mb x``.
    """
    a, b, c = model.a, model.b, model.c
    if cert.beta_matrix.shape[0] != model.n:
        raise DimensionError("beta matrix size must match the state dimension")
    pb = cert.beta_matrix
    g = cert.gamma
    m11 = a.T @ pb + pb @ a + a.T @ c.T @ c @ a
    m12 = pb @ b + a.T @ c.T @ c @ b
    m22 = -g * g * np.eye(model.m) + b.T @ c.T @ c @ b
    blk = np.block([[m11, m12], [m12.T, m22]])
    margin = linalg.max_eig(0.5 * (blk + blk.T))
    return LmiVerdict(passed=bool(margin <= tol), margin=float(margin))


def degrade_sampling(nu, rho, gamma, tau, lambda1=10.0) -> IndexSet:
    """Passivity indices of the ZOH-sampled system from the continuous ones.

    Given a continuous IF-OFP(nu, rho) system whose state output satisfies a
    derivative-gain bound with constant ``gamma``, the sampled system with
    period ``tau`` satisfies the quasi-passivity inequality (with storage
    scaled by ``1/tau``) for::

        nu' = nu - tau*gamma - tau^2*gamma^2*(1 + lambda1)*|rho|
        rho' = rho - |rho|/lambda1
        delta(x0) = w * beta(x0),   w = |rho|*tau*(1 + lambda1) + 1/gamma

    Returns an :class:`IndexSet` with ``delta = 0`` and the weight ``w`` set.
    """
    if tau <= 0 or gamma <= 0 or lambda1 <= 0:
        raise ParameterError("tau, gamma and lambda1 must be strictly positive")
    nu_s = nu - tau * gamma - tau**2 * gamma**2 * (1.0 + lambda1) * abs(rho)
    rho_s = rho - abs(rho) / lambda1
    w = abs(rho) * tau * (1.0 + lambda1) + 1.0 / gamma
    return IndexSet(nu=nu_s, rho=rho_s, delta=0.0, w=w)


def degrade_quantization(
    nu, rho, mu1, mu2, m, lambda2=20.0, lambda3=20.0, lambda4=20.0, lambda5=20.0, w=0.0
) -> IndexSet:
    """Indices after uniform input/output quantization of a sampled system.

    ``mu1`` and ``mu2`` are the input and output quantizer precisions and
    ``m`` the signal dimension::

        nu~ = nu - |nu|/lambda3 - 1/(4 lambda4)
        rho~ = rho - |rho|/lambda2 - 1/(4 lambda5)
        delta~ = [|rho|(1+lambda2) + lambda4] m mu2^2
               + [|nu|(1+lambda3) + lambda5] m mu1^2

    A state-bias weight ``w`` from a previous sampling stage passes through.
    """
    if min(lambda2, lambda3, lambda4, lambda5) <= 0:
        raise ParameterError("lambda2..lambda5 must be strictly positive")
    if mu1 < 0 or mu2 < 0:
        raise ParameterError("quantizer precisions must be nonnegative")
    if m < 1:
        raise ParameterError("signal dimension must be >= 1")
    nu_q = nu - abs(nu) / lambda3 - 1.0 / (4.0 * lambda4)
    rho_q = rho - abs(rho) / lambda2 - 1.0 / (4.0 * lambda5)
    delta_q = (abs(rho) * (1.0 + lambda2) + lambda4) * m * mu2**2 + (
        abs(nu) * (1.0 + lambda3) + lambda5
    ) * m * mu1**2
    return IndexSet(nu=nu_q, rho=rho_q, delta=delta_q, w=w)


def symbolic_quant_bias(
    nu, rho, lip, eps, mu1, mu2, m, lambda2=20.0, lambda3=20.0, lambda4=20.0, lambda5=20.0
):
    """Constant bias when the quantized controller is replaced by its
    state-quantized symbolic twin.

    The output error radius grows from ``sqrt(m) mu2`` to
    ``lip*eps + 3 sqrt(m) mu2`` (state mismatch up to ``eps`` through the
    output Lipschitz bound, plus quantizer effects on both sides)::

        delta~ = [|rho|(1+lambda2) + lambda4] (lip*eps + 3 sqrt(m) mu2)^2
               + [|nu|(1+lambda3) + lambda5] m mu1^2
    """
    if min(lambda2, lambda3, lambda4, lambda5) <= 0:
        raise ParameterError("lambda parameters must be strictly positive")
    if lip < 0 or eps < 0:
        raise ParameterError("lip and eps must be nonnegative")
    out_radius = lip * eps + 3.0 * math.sqrt(m) * mu2
    return (abs(rho) * (1.0 + lambda2) + lambda4) * out_radius**2 + (
        abs(nu) * (1.0 + lambda3) + lambda5
    ) * m * mu1**2


def compose_feedback(idx1: IndexSet, idx2: IndexSet, nu_hat) -> ComposedIndices:
    """Indices of the negative-feedback interconnection of two subsystems.

    For any choice ``nu_hat < min(nu1, nu2)`` (strict) the loop satisfies a
    quasi-passivity inequality from the stacked reference to the stacked
    output with::

        rho_hat = min(rho1 - nu_hat*nu2/(nu2 - nu_hat),
                      rho2 - nu_hat*nu1/(nu1 - nu_hat))
        delta_hat = delta1 + delta2

    The per-subsystem bias weights are carried so the state bias remains
    evaluable as ``w1*beta1(x1) + w2*beta2(x2)``.
    """
    bound = min(idx1.nu, idx2.nu)
    if not nu_hat < bound:
        raise ParameterError(
            f"nu_hat must satisfy nu_hat < min(nu1, nu2) = {bound}, got {nu_hat}"
        )
    rho_hat = min(
        idx1.rho - nu_hat * idx2.nu / (idx2.nu - nu_hat),
        idx2.rho - nu_hat * idx1.nu / (idx1.nu - nu_hat),
    )
    return ComposedIndices(
        nu=nu_hat,
        rho=rho_hat,
        delta=idx1.delta + idx2.delta,
        w1=idx1.w,
        w2=idx2.w,
    )


def choose_nu_hat(idx1: IndexSet, idx2: IndexSet, span=10.0, tol=1e-6):
    """Golden-section search for the ``nu_hat`` maximizing the loop ``rho``.

    Searches ``(min(nu1, nu2) - span, min(nu1, nu2))``.  The objective is
    monotone in ``nu_hat`` for fixed subsystem indices, so the maximizer
    typically sits at the far end of the window; the search still confirms
    local optimality at the returned point.
    """
    bound = min(idx1.nu, idx2.nu)
    if not np.isfinite(bound):
        raise ParameterError("subsystem nu indices must be finite")

    def objective(nh):
        return min(
            idx1.rho - nh * idx2.nu / (idx2.nu - nh),
            idx2.rho - nh * idx1.nu / (idx1.nu - nh),
        )

    lo, hi = bound - span, bound - 1e-9
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    while b - a > tol:
        c = b - gr * (b - a)
        d = a + gr * (b - a)
        if objective(c) > objective(d):
            b = d
        else:
            a = c
    return 0.5 * (a + b)


def dissipation_audit(states, inputs, outputs, storage, indices: IndexSet, bias=None):
    """Maximum violation of the quasi-passivity inequality over all windows.

    Parameters
    ----------
    states, inputs, outputs : arrays
        Aligned trajectory data of shapes (K+1, n), (K, m), (K, m).
    storage : callable or QuadraticStorage
        Storage function evaluated on states.
    indices : IndexSet
        Candidate indices; ``indices.delta`` enters the per-step supply and
        ``indices.w`` weights the start-of-window state bias.
    bias : callable, optional
        ``beta(x)`` for the state bias; required when ``indices.w > 0``.

    Returns
    -------
    float
        ``max over k0 < k1`` of ``V(x[k1]) - V(x[k0]) - w*beta(x[k0])
        - sum(supply)``; a value <= 0 means the inequality held empirically.
        Audits at most the first 500 steps.
    """
    states = np.asarray(states, float)
    inputs = np.asarray(inputs, float)
    outputs = np.asarray(outputs, float)
    if states.shape[0] != inputs.shape[0] + 1 or inputs.shape != outputs.shape:
        raise DimensionError("trajectory arrays are misaligned")
    k_steps = min(inputs.shape[0], 500)
    states = states[: k_steps + 1]
    inputs = inputs[:k_steps]
    outputs = outputs[:k_steps]

    v_fun = storage if callable(storage) else QuadraticStorage(storage)
    v = np.array([v_fun(x) for x in states])
    supply = (
        np.einsum("ki,ki->k", inputs, outputs)
        - indices.nu * np.einsum("ki,ki->k", inputs, inputs)
        - indices.rho * np.einsum("ki,ki->k", outputs, outputs)
        + indices.delta
    )
    cum = np.concatenate([[0.0], np.cumsum(supply)])
    if indices.w > 0:
        if bias is None:
            raise ParameterError("a bias callback is required when indices.w > 0")
        b = indices.w * np.array([bias(x) for x in states])
    else:
        b = np.zeros(k_steps + 1)

    # violation(k0, k1) = V[k1] - V[k0] - b[k0] - (cum[k1] - cum[k0]), k0 < k1
    rhs = v - cum
    lhs = v - cum + b  # subtracted at the window start
    diff = rhs[None, :] - lhs[:, None]
    mask = np.triu(np.ones_like(diff, dtype=bool), k=1)
    return float(diff[mask].max())
