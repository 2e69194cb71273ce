"""Strong-detectability certificates and their feedback composition.

A discrete system is N-step strongly detectable (SD) when weighted
input-plus-output energy over any window of N+1 steps dominates a positive
definite function of the window's initial state:

    sum_{k=k0}^{k0+N} theta |u[k]|^2 + |y[k]|^2  >=  p(x[k0]).

Certificates here restrict ``p`` to quadratics ``p(x) = x' Mp x`` so that
sublevel-set maxima needed by the bound computations stay exact.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from . import linalg
from .errors import CertificateError, DimensionError, NotDetectableError, ParameterError
from .passivity import LmiVerdict
from .systems import DiscreteLti

__all__ = [
    "SdCertificate",
    "FalsifyResult",
    "observability_stack",
    "lti_sd_certificate",
    "check_sd_certificate",
    "compose_sd",
    "sd_falsify",
]


@dataclass(frozen=True)
class SdCertificate:
    """(window, theta, Mp) witnessing N-step strong detectability."""

    window: int
    theta: float
    mp: np.ndarray

    def __post_init__(self):
        if self.window < 0 or int(self.window) != self.window:
            raise ParameterError(f"window must be a nonnegative integer, got {self.window}")
        if self.theta < 0:
            raise ParameterError(f"theta must be nonnegative, got {self.theta}")
        mp = np.atleast_2d(np.asarray(self.mp, dtype=float))
        mp = 0.5 * (mp + mp.T)
        if linalg.min_eig(mp) <= 0:
            raise ParameterError("Mp must be positive definite")
        object.__setattr__(self, "mp", mp)
        object.__setattr__(self, "window", int(self.window))

    def p(self, x):
        x = np.asarray(x, float)
        return float(x @ self.mp @ x)


@dataclass(frozen=True)
class FalsifyResult:
    """Worst sampled ratio p(x0) / energy and a counterexample when > 1."""

    worst_ratio: float
    counterexample: Optional[Tuple[np.ndarray, np.ndarray]]

    @property
    def falsified(self) -> bool:
        return self.counterexample is not None


def _as_quad(system) -> DiscreteLti:
    if isinstance(system, DiscreteLti):
        return system
    try:
        ad, bd, c, d = system
    except Exception as exc:
        raise DimensionError("expected a DiscreteLti or an (Ad, Bd, C, D) quadruple") from exc
    return DiscreteLti(
        np.atleast_2d(np.asarray(ad, float)),
        np.atleast_2d(np.asarray(bd, float)),
        np.atleast_2d(np.asarray(c, float)),
        np.atleast_2d(np.asarray(d, float)),
    )


def observability_stack(system, window: int):
    """Stacked maps O, H with ``Y = O x[k0] + H U`` over ``window + 1`` steps."""
    quad = _as_quad(system)
    ad, bd, c, d = quad.ad, quad.bd, quad.c, quad.d
    n = quad.n
    mo = c.shape[0]
    mi = bd.shape[1]
    powers = [np.eye(n)]
    for _ in range(window):
        powers.append(powers[-1] @ ad)
    o = np.vstack([c @ pw for pw in powers])
    h = np.zeros(((window + 1) * mo, (window + 1) * mi))
    for i in range(window + 1):
        for j in range(i + 1):
            blk = d if j == i else c @ powers[i - 1 - j] @ bd
            h[i * mo : (i + 1) * mo, j * mi : (j + 1) * mi] = blk
    return o, h


def _schur_complement(o, h, theta):
    g = theta * np.eye(h.shape[1]) + h.T @ h
    s = o.T @ o - o.T @ h @ np.linalg.solve(g, h.T @ o)
    return 0.5 * (s + s.T)


def lti_sd_certificate(system, window: int, floor=1e-8) -> SdCertificate:
    """Construct an SD certificate for a discrete LTI system.

    Requires the stacked observability matrix over the window to have full
    rank (otherwise :class:`NotDetectableError` carries the rank).  The
    smallest ``theta`` in (0, 1e3] making the Schur complement

        S(theta) = O'O - O'H (theta I + H'H)^{-1} H'O

    positive definite (min eigenvalue >= ``floor``) is found by bisection
    and the certificate is returned with ``Mp = S(theta)/2``; the halving
    makes the certificate inequality strict and robust to round-off.
    """
    quad = _as_quad(system)
    o, h = observability_stack(quad, window)
    rank = int(np.linalg.matrix_rank(o))
    if rank < quad.n:
        raise NotDetectableError(
            f"system is not detectable over a {window}-step window "
            f"(observability rank {rank} < {quad.n})",
            rank=rank,
            window=window,
        )

    def feasible(theta):
        return linalg.min_eig(_schur_complement(o, h, theta)) >= floor

    lo, hi = 1e-9, 1e3
    if not feasible(hi):
        raise CertificateError(
            f"no theta <= {hi} certifies detectability at window {window}",
            window=window,
        )
    if feasible(lo):
        theta = lo
    else:
        # geometric bisection: theta spans twelve orders of magnitude
        for _ in range(80):
            mid = (lo * hi) ** 0.5
            if feasible(mid):
                hi = mid
            else:
                lo = mid
        theta = hi
    return SdCertificate(window=window, theta=theta, mp=0.5 * _schur_complement(o, h, theta))


def check_sd_certificate(system, cert: SdCertificate, tol=1e-9) -> LmiVerdict:
    """Exact verification of an SD certificate for a discrete LTI system.

    The certificate inequality holds for all (x, U) iff the block form
    ``[[O'O - Mp, O'H], [H'O, theta I + H'H]]`` is positive semidefinite.
    """
    quad = _as_quad(system)
    if cert.mp.shape[0] != quad.n:
        raise DimensionError("certificate Mp size must match the state dimension")
    o, h = observability_stack(quad, cert.window)
    blk = np.block(
        [
            [o.T @ o - cert.mp, o.T @ h],
            [h.T @ o, cert.theta * np.eye(h.shape[1]) + h.T @ h],
        ]
    )
    margin = linalg.min_eig(0.5 * (blk + blk.T))
    return LmiVerdict(passed=bool(margin >= -tol), margin=float(margin))


def compose_sd(cert1: SdCertificate, cert2: SdCertificate) -> SdCertificate:
    """SD certificate of the feedback loop from the subsystem certificates.

    The loop (reference input, stacked output) is N-step SD with::

        N = max(N1, N2)
        theta = max(2 theta1 / (2 theta1 + 1), 2 theta2 / (2 theta2 + 1))
        p(x) = (1 - theta) (p1(x1) + p2(x2))
    """
    theta = max(
        2.0 * cert1.theta / (2.0 * cert1.theta + 1.0),
        2.0 * cert2.theta / (2.0 * cert2.theta + 1.0),
    )
    mp = (1.0 - theta) * scipy.linalg.block_diag(cert1.mp, cert2.mp)
    return SdCertificate(window=max(cert1.window, cert2.window), theta=theta, mp=mp)


def sd_falsify(system, cert: SdCertificate, trials=10000, box=3.0, seed=0, rtol=1e-9):
    """Sampling-based falsifier for an SD certificate.

    Draws ``trials`` pairs of an initial state and an input sequence
    uniformly from ``[-box, box]`` and evaluates the certificate ratio
    ``p(x0) / sum(theta |u|^2 + |y|^2)``.  Intended for systems where the
    exact block-form check is unavailable (nonlinear dynamics); ``system``
    only needs ``step``/``output`` methods and ``n``/``m`` attributes.

    Returns
    -------
    FalsifyResult
        Worst observed ratio and, if some draw exceeded ``1 + rtol``, the
        offending ``(x0, U)`` pair.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    steps = cert.window + 1
    worst = 0.0
    witness = None
    for _ in range(trials):
        x0 = rng.uniform(-box, box, system.n)
        useq = rng.uniform(-box, box, (steps, system.m))
        energy = 0.0
        x = x0
        for k in range(steps):
            y = np.asarray(system.output(x, useq[k]), float)
            energy += cert.theta * float(useq[k] @ useq[k]) + float(y @ y)
            if k + 1 < steps:
                x = np.asarray(system.step(x, useq[k]), float)
        p0 = cert.p(x0)
        if p0 == 0.0:
            continue
        ratio = np.inf if energy == 0.0 else p0 / energy
        if ratio > worst:
            worst = ratio
            if ratio > 1.0 + rtol:
                witness = (x0, useq)
    return FalsifyResult(worst_ratio=float(worst), counterexample=witness)
