"""Invariant and ultimate level sets for quasi-passive, detectable systems.

Given a quasi-passivity certificate with positive output index and a
strong-detectability certificate, the storage value along any trajectory
stays below a global level (the set ``D1``) and eventually enters and stays
below an ultimate level (the set ``D2``).  The operations here compute those
levels for a single system, for the sampled-and-quantized feedback loop, and
for the loop closed around a state-quantized symbolic controller; they also
implement the bias-margin condition and ISpS-style certificates.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from . import linalg
from .detectability import SdCertificate
from .errors import ParameterError
from .passivity import ComposedIndices, IndexSet, QuadraticStorage

__all__ = [
    "BoundReport",
    "MarginCertificate",
    "Monomial",
    "IspsCertificate",
    "single_system_bounds",
    "loop_bounds",
    "symbolic_loop_bounds",
    "loop_detectability_matrix",
    "margin_check",
    "isps_certificate",
    "ultimate_bound_class_k",
]


@dataclass(frozen=True)
class BoundReport:
    """Certified storage levels: ``V <= level_d1`` always, ``V <= level_d2``
    ultimately.  ``constants`` holds the intermediate quantities by name."""

    eta1: float
    eta2: float
    level_d1: float
    level_d2: float
    constants: dict = field(default_factory=dict)
    storage: Optional[np.ndarray] = None


@dataclass(frozen=True)
class MarginCertificate:
    """Minimum eigenvalue of ``eta2 * Mp - blockdiag(w1 Mb1, w2 Mb2)``.

    A positive margin makes the detectability decrease dominate the state
    bias globally; the matrix itself is the certified decrease form.
    """

    margin: float
    passed: bool
    kappa_matrix: np.ndarray


def _storage_matrix(storage):
    if isinstance(storage, QuadraticStorage):
        return storage.p
    p = np.atleast_2d(np.asarray(storage, dtype=float))
    return 0.5 * (p + p.T)


def _split(nu, rho, lam):
    if rho <= 0:
        raise ParameterError(f"output index must be positive, got rho = {rho}")
    if lam is None:
        lam = rho / 2.0
    if not 0.0 < lam < rho:
        raise ParameterError(f"lam must lie in (0, rho) = (0, {rho}), got {lam}")
    eta1 = 1.0 / (4.0 * lam) - nu
    eta2 = rho - lam
    if eta1 <= 0:
        raise ParameterError(
            f"eta1 = 1/(4 lam) - nu = {eta1:.6g} must be positive; "
            "pick a smaller lam or note that nu is too large"
        )
    return lam, eta1, eta2


def single_system_bounds(
    indices: IndexSet,
    cert: SdCertificate,
    storage,
    u_norm,
    lam=None,
    c5=None,
    p_x0=0.0,
    v_first=None,
) -> BoundReport:
    """Global and ultimate storage levels for one quasi-passive SD system.

    Parameters
    ----------
    indices : IndexSet
        Quasi-passivity indices with ``rho > 0`` and constant bias only
        (``w`` must be zero; state-dependent biases are a loop-level notion).
    cert : SdCertificate
        N-step strong-detectability certificate of the same system.
    storage : array or QuadraticStorage
        Matrix of the quadratic storage the indices were certified with.
    u_norm : float
        Sup norm of the input over the horizon of interest.
    lam : float, optional
        Split of ``rho`` (default ``rho/2``); must lie in (0, rho).
    c5 : float, optional
        Free positive constant trading entry time against the ultimate
        level; defaults to ``1e-3 * (c2 + 1)``.
    p_x0 : float
        Value of the certificate quadratic at the initial state.
    v_first : sequence of float, optional
        Observed storage values on a simulation prefix; when given, the
        global level is enlarged to cover them.
    """
    if indices.w != 0.0:
        raise ParameterError("single-system bounds require a constant bias (w = 0)")
    if u_norm < 0:
        raise ParameterError("u_norm must be nonnegative")
    lam, eta1, eta2 = _split(indices.nu, indices.rho, lam)
    v = _storage_matrix(storage)
    n_win = cert.window + 1
    c2 = n_win * ((eta1 + cert.theta * eta2) * u_norm**2 + indices.delta)
    c3 = n_win * (eta1 * u_norm**2 + indices.delta)
    if c5 is None:
        c5 = 1e-3 * (c2 + 1.0)
    if c5 <= 0:
        raise ParameterError("c5 must be strictly positive")
    xi2 = max(p_x0, c2 / eta2)
    c1 = linalg.quad_sublevel_max(v, cert.mp, xi2)
    xi1 = c1 + c3
    xi4 = (c2 + c5) / eta2
    c4 = linalg.quad_sublevel_max(v, cert.mp, xi4)
    xi3 = c2 + c4
    level_d1 = xi1 if v_first is None else max(xi1, max(v_first))
    return BoundReport(
        eta1=eta1,
        eta2=eta2,
        level_d1=float(level_d1),
        level_d2=float(xi3),
        constants={
            "lam": lam,
            "c1": c1,
            "c2": c2,
            "c3": c3,
            "c4": c4,
            "c5": c5,
            "xi1": xi1,
            "xi2": xi2,
            "xi3": xi3,
            "xi4": xi4,
        },
        storage=v,
    )


def loop_detectability_matrix(cert1: SdCertificate, cert2: SdCertificate):
    """Composed detectability data used by the loop bounds.

    Returns ``(n_window, theta, mp)`` where the quadratic weights the
    quantized subsystem's certificate by one half:
    ``p(x) = (1 - theta)(p1(x1) + p2(x2)/2)``.
    """
    theta = max(
        2.0 * cert1.theta / (2.0 * cert1.theta + 1.0),
        2.0 * cert2.theta / (2.0 * cert2.theta + 1.0),
    )
    mp = (1.0 - theta) * scipy.linalg.block_diag(cert1.mp, 0.5 * cert2.mp)
    return max(cert1.window, cert2.window), theta, mp


def _loop_report(idx, cert1, cert2, storage, r_norm, d2, lam, d3, v_first, extra):
    lam, eta1, eta2 = _split(idx.nu, idx.rho, lam)
    n_win, theta, mp = loop_detectability_matrix(cert1, cert2)
    d1 = (n_win + 1) * ((eta1 + theta * eta2) * r_norm**2 + idx.delta)
    if d3 is None:
        d3 = 1e-3 * (d1 + d2 + 1.0)
    if d3 <= 0:
        raise ParameterError("d3 must be strictly positive")
    v = _storage_matrix(storage)
    d4 = linalg.quad_sublevel_max(v, mp, d1 + d2 + d3)
    level_d2 = d1 + d2 + d4
    level_d1 = level_d2 if v_first is None else max(level_d2, max(v_first))
    constants = {"lam": lam, "theta": theta, "d1": d1, "d2": d2, "d3": d3, "d4": d4}
    constants.update(extra)
    return BoundReport(
        eta1=eta1,
        eta2=eta2,
        level_d1=float(level_d1),
        level_d2=float(level_d2),
        constants=constants,
        storage=v,
    )


def loop_bounds(
    idx: ComposedIndices,
    cert1: SdCertificate,
    cert2: SdCertificate,
    storage,
    r_norm,
    mu1,
    mu2,
    m,
    lam=None,
    d3=None,
    v_first=None,
) -> BoundReport:
    """Storage levels for the loop closed on a quantized controller.

    ``idx`` are the composed loop indices (``rho`` must be positive; its
    ``delta`` is the controller's quantization bias), ``cert1``/``cert2``
    the subsystem detectability certificates (subsystem 2 being the
    quantized one), ``storage`` the loop storage matrix and ``r_norm`` the
    sup norm of the stacked reference.  The levels are::

        d1 = (N+1) [(eta1 + theta*eta2) r_norm^2 + delta]
        d2 = m (1 - theta) (N2+1) (theta2 mu1^2 + mu2^2)
        level_d2 = d1 + d2 + max{V : p <= d1 + d2 + d3}

    with the global level covering the observed prefix values ``v_first``.
    """
    if r_norm < 0 or mu1 < 0 or mu2 < 0:
        raise ParameterError("r_norm, mu1 and mu2 must be nonnegative")
    _, theta, _ = loop_detectability_matrix(cert1, cert2)
    d2 = m * (1.0 - theta) * (cert2.window + 1) * (cert2.theta * mu1**2 + mu2**2)
    return _loop_report(
        idx, cert1, cert2, storage, r_norm, d2, lam, d3, v_first,
        {"mu1": mu1, "mu2": mu2, "m": m},
    )


def symbolic_loop_bounds(
    idx: ComposedIndices,
    cert1: SdCertificate,
    cert2: SdCertificate,
    storage,
    r_norm,
    lip,
    eps,
    mu1,
    mu2,
    m,
    lam=None,
    d3=None,
    v_first=None,
) -> BoundReport:
    """Storage levels for the loop closed on the symbolic controller.

    Mirrors :func:`loop_bounds` with the controller's output error radius
    inflated by the state-quantization mismatch: ``idx.delta`` should be the
    bias from :func:`passivity.symbolic_quant_bias`, and the detectability
    adjustment becomes ``d2 = (N2+1) [theta2 m mu1^2 +
    (lip*eps + 3 sqrt(m) mu2)^2]``.
    """
    if lip < 0 or eps < 0:
        raise ParameterError("lip and eps must be nonnegative")
    if r_norm < 0 or mu1 < 0 or mu2 < 0:
        raise ParameterError("r_norm, mu1 and mu2 must be nonnegative")
    radius = lip * eps + 3.0 * math.sqrt(m) * mu2
    d2 = (cert2.window + 1) * (cert2.theta * m * mu1**2 + radius**2)
    return _loop_report(
        idx, cert1, cert2, storage, r_norm, d2, lam, d3, v_first,
        {"mu1": mu1, "mu2": mu2, "m": m, "lip": lip, "eps": eps},
    )


def margin_check(eta2, mp, w1, mbeta1, w2, mbeta2, tol=1e-9) -> MarginCertificate:
    """Check that the detectability decrease dominates the state bias.

    Forms ``eta2 * Mp - blockdiag(w1 Mb1, w2 Mb2)`` and passes iff its
    minimum eigenvalue exceeds ``tol``.  This is a global check (stronger
    than needed on any particular invariant set); the matrix doubles as the
    certified decrease quadratic when it passes.
    """
    mp = np.atleast_2d(np.asarray(mp, float))
    mb = scipy.linalg.block_diag(
        w1 * np.atleast_2d(np.asarray(mbeta1, float)),
        w2 * np.atleast_2d(np.asarray(mbeta2, float)),
    )
    if mb.shape != mp.shape:
        raise ParameterError(
            f"bias blocks stack to {mb.shape} but Mp is {mp.shape}"
        )
    kappa = eta2 * mp - mb
    margin = linalg.min_eig(kappa)
    return MarginCertificate(margin=float(margin), passed=bool(margin > tol), kappa_matrix=kappa)


@dataclass(frozen=True)
class Monomial:
    """Class-K monomial ``s -> coeff * s**exponent`` with explicit inverse."""

    coeff: float
    exponent: float

    def __post_init__(self):
        if self.coeff <= 0:
            raise ParameterError(f"monomial coefficient must be positive, got {self.coeff}")
        if self.exponent <= 0:
            raise ParameterError(f"monomial exponent must be positive, got {self.exponent}")

    def __call__(self, s):
        return self.coeff * s**self.exponent

    def inverse(self, t):
        return (t / self.coeff) ** (1.0 / self.exponent)


@dataclass(frozen=True)
class IspsCertificate:
    """Comparison functions witnessing input-to-state practical stability."""

    alpha1: Monomial
    alpha2: Monomial
    alpha3: Monomial
    sigma: Monomial
    d1: float
    d2: float
    lam_star: float
    eta1: float
    eta2: float


def isps_certificate(exponent, a, b, c, d1, nu, rho, delta, theta) -> IspsCertificate:
    """ISpS-Lyapunov data for a 0-step SD, quasi-passive system.

    Assumes ``p(x) >= c |x|^exponent`` and ``a |x|^exponent <= V(x) <=
    b |x|^exponent + d1`` (the caller asserts these).  With the split
    ``lam* = rho/2``::

        alpha1 = a s^q,  alpha2 = b s^q,  alpha3 = eta2 c s^q,
        sigma = (eta1 + theta*eta2) s^2,  d2 = delta
    """
    if theta < 0 or delta < 0 or d1 < 0:
        raise ParameterError("theta, delta and d1 must be nonnegative")
    lam_star, eta1, eta2 = _split(nu, rho, None)
    return IspsCertificate(
        alpha1=Monomial(a, exponent),
        alpha2=Monomial(b, exponent),
        alpha3=Monomial(eta2 * c, exponent),
        sigma=Monomial(eta1 + theta * eta2, 2.0),
        d1=d1,
        d2=delta,
        lam_star=lam_star,
        eta1=eta1,
        eta2=eta2,
    )


def ultimate_bound_class_k(eta1, eta2, theta, delta, u_norm, p_monomial, v_monomial):
    """Ultimate storage level via class-K comparison functions.

    With ``alpha3 = eta2 * p_monomial`` (the certified decrease) and
    ``alpha2 = v_monomial`` (the storage upper bound), choose
    ``alpha4 = min(alpha3 o alpha2^{-1}, id/2)`` and ``alpha5 = id/2``.
    The ultimate level is::

        xi5 = alpha4^{-1}( alpha5^{-1}( (eta1 + theta*eta2) u_norm^2 + delta ) )

    All comparison functions are monomials, so the inverses are explicit:
    the inverse of a pointwise min of increasing maps is the max of their
    inverses.
    """
    if u_norm < 0 or delta < 0 or theta < 0:
        raise ParameterError("u_norm, delta and theta must be nonnegative")
    energy = (eta1 + theta * eta2) * u_norm**2 + delta
    if energy == 0.0:
        return 0.0
    alpha3 = Monomial(eta2 * p_monomial.coeff, p_monomial.exponent)
    q = alpha3.exponent / v_monomial.exponent
    composed = Monomial(
        alpha3.coeff * (1.0 / v_monomial.coeff) ** q, q
    )  # alpha3 o alpha2^{-1}
    t = 2.0 * energy  # alpha5^{-1}
    return float(max(composed.inverse(t), 2.0 * t))
