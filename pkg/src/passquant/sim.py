"""Closed-loop execution with quantized and symbolic controller variants.

The loop wiring follows the sign convention ``u1 = r1 - y2~`` and
``u2~ = r2 + y1``: the plant output feeds the controller through the input
quantizer, the controller output returns through the output quantizer with
negative feedback.  One step evaluates, in order: plant output, controller
input quantization, controller output, output quantization (plus an optional
bounded disturbance), plant input, then both state advances.  This order is
explicit only because the plant is required to be strictly proper; loops
where both sides have feedthrough are rejected rather than iterated.
"""

import csv
from dataclasses import dataclass, replace
from typing import List, Optional, Union

import numpy as np

from .abstraction import DeltaIssBound, SymbolicController
from .bounds import BoundReport
from .errors import DivergenceError, ParameterError, WellPosednessError
from .passivity import QuadraticStorage
from .systems import LtiModel, NonlinearModel, SampledModel, quantize

__all__ = [
    "LoopConfig",
    "Trajectory",
    "AuditResult",
    "SweepPoint",
    "simulate",
    "ultimate_bound_audit",
    "eta_sweep",
]

MODES = ("sampled-quantized", "symbolic", "disturbance-injected")


@dataclass
class LoopConfig:
    """Full description of one closed-loop run.

    ``r1``/``r2`` may be None (zero), a constant vector, or a (horizon, m)
    array.  Symbolic mode needs ``eta`` and ``eps`` and optionally an
    incremental-stability bound (otherwise the controller is built
    unchecked).  Disturbance mode draws ``w[k]`` uniformly from the ball of
    radius ``disturbance_bound`` using ``seed``.
    """

    plant: Union[LtiModel, NonlinearModel]
    controller: Union[LtiModel, NonlinearModel]
    mode: str
    tau: float
    mu1: float
    mu2: float
    horizon: int
    x1_0: np.ndarray
    x2_0: np.ndarray
    eta: Optional[float] = None
    eps: Optional[float] = None
    x2s_0: Optional[np.ndarray] = None
    r1: Optional[np.ndarray] = None
    r2: Optional[np.ndarray] = None
    disturbance_bound: Optional[float] = None
    seed: int = 0
    substeps: int = 64
    iss_bound: Optional[DeltaIssBound] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.tau <= 0 or self.mu1 <= 0 or self.mu2 <= 0:
            raise ParameterError("tau, mu1 and mu2 must be positive")
        if self.horizon < 1:
            raise ParameterError("horizon must be >= 1")
        if self.plant.m != self.controller.m:
            raise ParameterError("plant and controller must share the signal dimension")
        if self.mode == "symbolic":
            if self.eta is None or self.eps is None:
                raise ParameterError("symbolic mode requires eta and eps")
        if self.mode == "disturbance-injected" and self.disturbance_bound is None:
            raise ParameterError("disturbance mode requires disturbance_bound")
        self.x1_0 = np.asarray(self.x1_0, float)
        self.x2_0 = np.asarray(self.x2_0, float)
        if self.x2s_0 is not None:
            self.x2s_0 = np.asarray(self.x2s_0, float)
            if self.eps is not None and np.max(np.abs(self.x2s_0 - self.x2_0)) > self.eps:
                raise ParameterError("|x2_0 - x2s_0|_inf must not exceed eps")


def _reference(r, horizon, m, name):
    if r is None:
        return np.zeros((horizon, m))
    r = np.asarray(r, float)
    if r.ndim == 1:
        if r.shape[0] != m:
            raise ParameterError(f"{name} must have {m} entries")
        return np.tile(r, (horizon, 1))
    if r.shape != (horizon, m):
        raise ParameterError(f"{name} must have shape ({horizon}, {m})")
    return r


@dataclass
class Trajectory:
    """Recorded closed-loop signals.

    State arrays have ``horizon + 1`` rows, signal arrays ``horizon`` rows.
    In symbolic mode ``x2`` holds the shadow exact controller state driven
    by the same quantized inputs and ``x2s`` the grid state actually in the
    loop.
    """

    mode: str
    x1: np.ndarray
    x2: np.ndarray
    u1: np.ndarray
    u2_tilde: np.ndarray
    u2: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    y2_tilde: np.ndarray
    x2s: Optional[np.ndarray] = None
    y2_tilde_shadow: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None

    @property
    def horizon(self) -> int:
        return self.u1.shape[0]

    def loop_state(self, k):
        """Stacked certified state at step k: (x1, x2s) in symbolic mode."""
        second = self.x2s if self.x2s is not None else self.x2
        return np.concatenate([self.x1[k], second[k]])

    def storage_values(self, storage):
        v = storage if callable(storage) else QuadraticStorage(storage)
        return np.array([v(self.loop_state(k)) for k in range(self.x1.shape[0])])

    def to_csv(self, path, storage=None):
        """Write one row per step with 17 significant digits.

        Columns: ``k``, plant state, controller (grid) state, then
        ``u1, u2tilde, u2, y1, y2, y2tilde`` and ``V`` when a storage is
        attached.  A final row carries the terminal states.
        """
        n1 = self.x1.shape[1]
        n2 = self.x2.shape[1]
        m = self.u1.shape[1]
        second = self.x2s if self.x2s is not None else self.x2
        header = (
            ["k"]
            + [f"x1_{i+1}" for i in range(n1)]
            + [f"x2_{i+1}" for i in range(n2)]
            + [f"u1_{i+1}" for i in range(m)]
            + [f"u2tilde_{i+1}" for i in range(m)]
            + [f"u2_{i+1}" for i in range(m)]
            + [f"y1_{i+1}" for i in range(m)]
            + [f"y2_{i+1}" for i in range(m)]
            + [f"y2tilde_{i+1}" for i in range(m)]
            + ["V"]
        )
        vvals = self.storage_values(storage) if storage is not None else None
        fmt = lambda x: format(float(x), ".17g")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k in range(self.horizon):
                row = (
                    [k]
                    + [fmt(v) for v in self.x1[k]]
                    + [fmt(v) for v in second[k]]
                    + [fmt(v) for v in self.u1[k]]
                    + [fmt(v) for v in self.u2_tilde[k]]
                    + [fmt(v) for v in self.u2[k]]
                    + [fmt(v) for v in self.y1[k]]
                    + [fmt(v) for v in self.y2[k]]
                    + [fmt(v) for v in self.y2_tilde[k]]
                    + ([fmt(vvals[k])] if vvals is not None else [""])
                )
                writer.writerow(row)
            k = self.horizon
            row = (
                [k]
                + [fmt(v) for v in self.x1[k]]
                + [fmt(v) for v in second[k]]
                + [""] * (6 * m)
                + ([fmt(vvals[k])] if vvals is not None else [""])
            )
            writer.writerow(row)


def _check_well_posed(plant):
    if isinstance(plant, LtiModel):
        if not plant.strictly_proper:
            raise WellPosednessError(
                "the plant must be strictly proper (no feedthrough); "
                "otherwise the loop contains an algebraic cycle"
            )
    elif isinstance(plant, NonlinearModel):
        if not plant.strictly_proper:
            raise WellPosednessError(
                "the plant output must not depend on the current input"
            )
    else:
        raise ParameterError(f"unsupported plant type {type(plant).__name__}")


def simulate(config: LoopConfig) -> Trajectory:
    """Run the closed loop and record every signal.

    Per step k: plant output ``y1`` (state only), ``u2~ = r2 + y1``, input
    quantization ``u2 = Q1(u2~)``, controller output ``y2`` and its
    quantization ``y2~ = Q2(y2)`` (plus ``w[k]`` in disturbance mode),
    plant input ``u1 = r1 - y2~``, then the plant advances by its flow over
    ``tau`` and the controller by its exact discrete step (or the symbolic
    grid step).  Raises :class:`DivergenceError` if a state leaves the
    finite range.
    """
    _check_well_posed(config.plant)
    plant = SampledModel(config.plant, config.tau, substeps=config.substeps)
    ctrl_exact = SampledModel(config.controller, config.tau, substeps=config.substeps)
    m = config.plant.m
    horizon = config.horizon
    r1 = _reference(config.r1, horizon, m, "r1")
    r2 = _reference(config.r2, horizon, m, "r2")

    symbolic = config.mode == "symbolic"
    ctrl_sym = None
    if symbolic:
        x2s0 = config.x2s_0 if config.x2s_0 is not None else config.x2_0
        ctrl_sym = SymbolicController(
            ctrl_exact,
            config.tau,
            config.eta,
            config.mu1,
            config.eps,
            x2s0,
            iss_bound=config.iss_bound,
            unchecked=config.iss_bound is None,
        )

    rng = np.random.default_rng(config.seed)

    x1 = config.x1_0.copy()
    x2 = config.x2_0.copy()
    X1 = [x1.copy()]
    X2 = [x2.copy()]
    X2s = [ctrl_sym.state.copy()] if symbolic else None
    U1, U2T, U2, Y1, Y2, Y2T = [], [], [], [], [], []
    Y2TS = [] if symbolic else None
    W = [] if config.mode == "disturbance-injected" else None

    for k in range(horizon):
        y1 = np.asarray(config.plant.h1(x1), float) if isinstance(
            config.plant, NonlinearModel
        ) else config.plant.c @ x1
        u2_tilde = r2[k] + y1
        u2 = quantize(u2_tilde, config.mu1)
        if symbolic:
            y2 = ctrl_sym.output(u2)
            y2_shadow = ctrl_exact.output(x2, u2)
            Y2TS.append(quantize(y2_shadow, config.mu2))
        else:
            y2 = ctrl_exact.output(x2, u2)
        y2_tilde = quantize(y2, config.mu2)
        applied = y2_tilde
        if W is not None:
            direction = rng.normal(size=m)
            norm = np.linalg.norm(direction)
            if norm == 0.0:
                direction = np.zeros(m)
            else:
                direction = direction / norm
            w = rng.uniform(0.0, config.disturbance_bound) * direction
            W.append(w)
            applied = y2_tilde + w
        u1 = r1[k] - applied
        x1 = plant.step(x1, u1)
        x2 = ctrl_exact.step(x2, u2)
        if symbolic:
            ctrl_sym.step(u2)
            X2s.append(ctrl_sym.state.copy())
        if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(x2))):
            raise DivergenceError(f"loop state diverged at step {k}", step=k)
        X1.append(x1.copy())
        X2.append(x2.copy())
        U1.append(u1)
        U2T.append(u2_tilde)
        U2.append(u2)
        Y1.append(y1)
        Y2.append(y2)
        Y2T.append(y2_tilde)

    return Trajectory(
        mode=config.mode,
        x1=np.array(X1),
        x2=np.array(X2),
        u1=np.array(U1),
        u2_tilde=np.array(U2T),
        u2=np.array(U2),
        y1=np.array(Y1),
        y2=np.array(Y2),
        y2_tilde=np.array(Y2T),
        x2s=np.array(X2s) if symbolic else None,
        y2_tilde_shadow=np.array(Y2TS) if symbolic else None,
        w=np.array(W) if W is not None else None,
    )


@dataclass(frozen=True)
class AuditResult:
    global_ok: bool
    entry_index: Optional[int]
    post_entry_ok: bool
    max_v_after_entry: Optional[float]


def ultimate_bound_audit(traj: Trajectory, report: BoundReport, storage) -> AuditResult:
    """Check a trajectory against certified storage levels.

    ``global_ok`` requires ``V(x[k]) <= level_d1`` for every step;
    ``entry_index`` is the first step after which the trajectory never
    leaves ``{V <= level_d2}`` again.
    """
    v = traj.storage_values(storage)
    global_ok = bool(np.all(v <= report.level_d1 + 1e-12))
    above = np.nonzero(v > report.level_d2 + 1e-12)[0]
    if above.size == 0:
        entry = 0
    elif above[-1] + 1 < v.shape[0]:
        entry = int(above[-1] + 1)
    else:
        entry = None
    post_ok = entry is not None
    max_after = float(v[entry:].max()) if post_ok else None
    return AuditResult(
        global_ok=global_ok,
        entry_index=entry,
        post_entry_ok=post_ok,
        max_v_after_entry=max_after,
    )


@dataclass(frozen=True)
class SweepPoint:
    eta: float
    sup_x1: float
    sup_x2s: float
    sup_combined: float


def eta_sweep(config: LoopConfig, etas) -> List[SweepPoint]:
    """Ultimate sup norms of the loop states for each grid pitch.

    Runs the symbolic loop per ``eta`` and reports the sup of ``|x|_inf``
    over the final third of the horizon (the first two thirds are treated
    as transient; this is a reporting convention, not a certified entry
    time).
    """
    if config.mode != "symbolic":
        raise ParameterError("eta sweeps require symbolic mode")
    points = []
    for eta in etas:
        traj = simulate(replace(config, eta=float(eta)))
        cut = (traj.x1.shape[0] * 2) // 3
        sup1 = float(np.max(np.abs(traj.x1[cut:])))
        sup2 = float(np.max(np.abs(traj.x2s[cut:])))
        points.append(
            SweepPoint(
                eta=float(eta),
                sup_x1=sup1,
                sup_x2s=sup2,
                sup_combined=max(sup1, sup2),
            )
        )
    return points
