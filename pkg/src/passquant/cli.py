"""Command-line front end tying the analyses together.

Each subcommand reads a JSON configuration (see :mod:`passquant.config`),
prints a deterministic report to stdout (text or JSON; the JSON mirrors
the text field for field) and exits 0 iff every requested check passed.
Failures are collected in a machine-readable list.
"""

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy.linalg

from . import abstraction, bounds, detectability, passivity, sim
from .config import AnalysisConfig, SystemSpec, load_config
from .detectability import SdCertificate
from .errors import ToolkitError
from .systems import SampledModel, discretize_exact

__all__ = ["main"]


# ---------------------------------------------------------------------------
# pipeline helpers


def _discrete(spec: SystemSpec, tau):
    if not spec.is_lti:
        raise ToolkitError("operation requires an LTI system")
    return discretize_exact(spec.model, tau)


def _sampled_stage_indices(spec: SystemSpec, tau, lambdas):
    """Indices of the sampled (pre-quantization) stage of one subsystem.

    Prefers directly certified discrete indices (no state bias); otherwise
    degrades the continuous indices through the sampling formula, which
    requires the gain certificate.
    """
    if spec.discrete_indices is not None:
        return spec.discrete_indices
    if spec.indices is None:
        raise ToolkitError("system needs indices or discrete_indices")
    if spec.gain is None:
        raise ToolkitError("sampling degradation needs a gain certificate")
    return passivity.degrade_sampling(
        spec.indices.nu, spec.indices.rho, spec.gain.gamma, tau, lambdas.lambda1
    )


def _controller_quantized_indices(cfg: AnalysisConfig, symbolic: bool):
    stage = _sampled_stage_indices(cfg.controller, cfg.tau, cfg.lambdas)
    if cfg.mu1 is None:
        raise ToolkitError("quantization section required")
    lam = cfg.lambdas
    m = cfg.controller.model.m
    if symbolic:
        if cfg.eps is None:
            raise ToolkitError("symbolic analysis requires the symbolic section")
        lip = abstraction.lipschitz_output_bound(cfg.controller.model)
        delta = passivity.symbolic_quant_bias(
            stage.nu, stage.rho, lip, cfg.eps, cfg.mu1, cfg.mu2, m,
            lam.lambda2, lam.lambda3, lam.lambda4, lam.lambda5,
        )
        base = passivity.degrade_quantization(
            stage.nu, stage.rho, cfg.mu1, cfg.mu2, m,
            lam.lambda2, lam.lambda3, lam.lambda4, lam.lambda5, w=stage.w,
        )
        return passivity.IndexSet(nu=base.nu, rho=base.rho, delta=delta, w=stage.w)
    return passivity.degrade_quantization(
        stage.nu, stage.rho, cfg.mu1, cfg.mu2, m,
        lam.lambda2, lam.lambda3, lam.lambda4, lam.lambda5, w=stage.w,
    )


def _sd_certificate(spec: SystemSpec, cfg: AnalysisConfig, seed):
    """Certificate for one subsystem: explicit (verified) or constructed."""
    explicit = None
    if spec.sd_theta is not None:
        explicit = SdCertificate(window=spec.sd_window, theta=spec.sd_theta, mp=spec.sd_p)
    if spec.is_lti:
        quad = _discrete(spec, cfg.tau)
        if explicit is not None:
            verdict = detectability.check_sd_certificate(quad, explicit)
            return explicit, {"source": "supplied", "passed": verdict.passed, "margin": verdict.margin}
        cert = detectability.lti_sd_certificate(quad, spec.sd_window)
        verdict = detectability.check_sd_certificate(quad, cert)
        return cert, {"source": "constructed", "passed": verdict.passed, "margin": verdict.margin}
    if explicit is None:
        raise ToolkitError("nonlinear systems need an explicit sd certificate")
    system = SampledModel(spec.model, cfg.tau)
    result = detectability.sd_falsify(system, explicit, trials=cfg.trials, seed=seed)
    return explicit, {
        "source": "supplied",
        "passed": not result.falsified,
        "worst_ratio": result.worst_ratio,
    }


def _compose(cfg: AnalysisConfig, symbolic: bool):
    if cfg.plant is None:
        raise ToolkitError("composition requires a plant section")
    plant_idx = _sampled_stage_indices(cfg.plant, cfg.tau, cfg.lambdas)
    ctrl_idx = _controller_quantized_indices(cfg, symbolic)
    nu_hat = cfg.nu_hat
    if nu_hat is None:
        nu_hat = passivity.choose_nu_hat(plant_idx, ctrl_idx)
    composed = passivity.compose_feedback(plant_idx, ctrl_idx, nu_hat)
    return plant_idx, ctrl_idx, composed


def _loop_storage(cfg: AnalysisConfig):
    if cfg.storage_plant is None or cfg.storage_controller is None:
        raise ToolkitError("storage section with plant and controller matrices required")
    v = scipy.linalg.block_diag(cfg.storage_plant, cfg.storage_controller)
    if cfg.storage_tau_scaled:
        v = v / cfg.tau
    return v


def _loop_config(cfg: AnalysisConfig, mode=None):
    if cfg.plant is None:
        raise ToolkitError("simulation requires a plant section")
    if cfg.horizon is None or cfg.x1_0 is None or cfg.x2_0 is None:
        raise ToolkitError("simulation section needs horizon, x1_0 and x2_0")
    if cfg.mu1 is None:
        raise ToolkitError("quantization section required")
    mode = mode or cfg.mode or "sampled-quantized"
    disturbance_bound = None
    if mode == "disturbance-injected":
        # the radius the symbolic replacement could inject: lip*eps + 2 sqrt(m) mu2
        if cfg.eps is None:
            raise ToolkitError("disturbance mode needs the symbolic section for eps")
        lip = abstraction.lipschitz_output_bound(cfg.controller.model)
        disturbance_bound = lip * cfg.eps + 2.0 * np.sqrt(cfg.controller.model.m) * cfg.mu2
    return sim.LoopConfig(
        plant=cfg.plant.model,
        controller=cfg.controller.model,
        mode=mode,
        tau=cfg.tau,
        mu1=cfg.mu1,
        mu2=cfg.mu2,
        horizon=cfg.horizon,
        x1_0=cfg.x1_0,
        x2_0=cfg.x2_0,
        x2s_0=cfg.x2s_0,
        eta=cfg.eta,
        eps=cfg.eps,
        r1=cfg.r1,
        r2=cfg.r2,
        disturbance_bound=disturbance_bound,
        seed=cfg.seed,
    )


def _reference_norm(cfg: AnalysisConfig):
    m = cfg.controller.model.m
    r1 = np.zeros(m) if cfg.r1 is None else cfg.r1
    r2 = np.zeros(m) if cfg.r2 is None else cfg.r2
    return float(np.linalg.norm(np.concatenate([r1, r2])))


def _v_first(cfg: AnalysisConfig, storage, n_window):
    """Storage values on a simulated prefix of the first N+1 steps."""
    if cfg.horizon is None or cfg.x1_0 is None or cfg.x2_0 is None:
        return None
    prefix = _loop_config(cfg)
    prefix.horizon = max(n_window, 1)
    traj = sim.simulate(prefix)
    v = traj.storage_values(storage)
    return [float(x) for x in v[: n_window + 1]]


def _compute_bounds(cfg: AnalysisConfig):
    """Full bound pipeline; returns (report, margin, composed, details).

    Disturbance-injected runs use the symbolic-style constants: the injected
    radius is exactly what a symbolic replacement would produce.
    """
    symbolic = cfg.mode in ("symbolic", "disturbance-injected")
    plant_idx, ctrl_idx, composed = _compose(cfg, symbolic)
    cert1, info1 = _sd_certificate(cfg.plant, cfg, cfg.seed)
    cert2, info2 = _sd_certificate(cfg.controller, cfg, cfg.seed + 1)
    storage = _loop_storage(cfg)
    n_window = max(cert1.window, cert2.window)
    v_first = _v_first(cfg, storage, n_window)
    r_norm = _reference_norm(cfg)
    m = cfg.controller.model.m
    if symbolic:
        lip = abstraction.lipschitz_output_bound(cfg.controller.model)
        report = bounds.symbolic_loop_bounds(
            composed, cert1, cert2, storage, r_norm, lip, cfg.eps,
            cfg.mu1, cfg.mu2, m, lam=cfg.lam, d3=cfg.d3, v_first=v_first,
        )
    else:
        report = bounds.loop_bounds(
            composed, cert1, cert2, storage, r_norm,
            cfg.mu1, cfg.mu2, m, lam=cfg.lam, d3=cfg.d3, v_first=v_first,
        )
    _, _, mp_loop = bounds.loop_detectability_matrix(cert1, cert2)
    n1 = cfg.plant.model.n
    n2 = cfg.controller.model.n
    mb1 = cfg.plant.gain.beta_matrix if cfg.plant.gain is not None else np.zeros((n1, n1))
    mb2 = cfg.controller.gain.beta_matrix if cfg.controller.gain is not None else np.zeros((n2, n2))
    margin = bounds.margin_check(report.eta2, mp_loop, composed.w1, mb1, composed.w2, mb2)
    details = {
        "plant_stage": plant_idx,
        "controller_stage": ctrl_idx,
        "composed": composed,
        "cert_plant": (cert1, info1),
        "cert_controller": (cert2, info2),
    }
    return report, margin, composed, details


# ---------------------------------------------------------------------------
# commands (each returns a report dict and a list of failure strings)


def cmd_degrade(cfg: AnalysisConfig):
    report = {}
    failures = []
    spec = cfg.controller
    if spec.indices is not None and spec.gain is not None:
        idx = passivity.degrade_sampling(
            spec.indices.nu, spec.indices.rho, spec.gain.gamma, cfg.tau, cfg.lambdas.lambda1
        )
        report["sampling"] = {"nu": idx.nu, "rho": idx.rho, "w": idx.w}
    if cfg.mu1 is not None:
        stage = _sampled_stage_indices(spec, cfg.tau, cfg.lambdas)
        lam = cfg.lambdas
        idx = passivity.degrade_quantization(
            stage.nu, stage.rho, cfg.mu1, cfg.mu2, spec.model.m,
            lam.lambda2, lam.lambda3, lam.lambda4, lam.lambda5, w=stage.w,
        )
        report["quantization"] = {"nu": idx.nu, "rho": idx.rho, "delta": idx.delta}
    if not report:
        failures.append("nothing to degrade: need indices+gain and/or quantization")
    return report, failures


def cmd_compose(cfg: AnalysisConfig):
    symbolic = cfg.mode in ("symbolic", "disturbance-injected")
    plant_idx, ctrl_idx, composed = _compose(cfg, symbolic)
    report = {
        "plant_stage": {"nu": plant_idx.nu, "rho": plant_idx.rho, "w": plant_idx.w},
        "controller_stage": {
            "nu": ctrl_idx.nu,
            "rho": ctrl_idx.rho,
            "delta": ctrl_idx.delta,
            "w": ctrl_idx.w,
        },
        "loop": {
            "nu_hat": composed.nu,
            "rho_hat": composed.rho,
            "delta_hat": composed.delta,
            "rho_hat_positive": composed.rho > 0,
        },
    }
    return report, []


def _cert_report(cert: SdCertificate, info):
    out = {
        "window": cert.window,
        "theta": cert.theta,
        "p": [[float(v) for v in row] for row in cert.mp],
    }
    out.update(info)
    return out


def cmd_sd(cfg: AnalysisConfig):
    report = {}
    failures = []
    cert2, info2 = _sd_certificate(cfg.controller, cfg, cfg.seed + 1)
    report["controller"] = _cert_report(cert2, info2)
    if not info2["passed"]:
        failures.append("controller sd certificate failed")
    if cfg.plant is not None:
        cert1, info1 = _sd_certificate(cfg.plant, cfg, cfg.seed)
        report["plant"] = _cert_report(cert1, info1)
        if not info1["passed"]:
            failures.append("plant sd certificate failed")
        composed = detectability.compose_sd(cert1, cert2)
        report["loop"] = _cert_report(composed, {"source": "composed"})
    return report, failures


def cmd_bound(cfg: AnalysisConfig):
    failures = []
    if cfg.plant is None:
        # standalone system: global/ultimate levels for the controller alone
        idx = _controller_quantized_indices(cfg, symbolic=False)
        if idx.w != 0:
            failures.append("standalone bounds need constant-bias indices (w = 0)")
            return {}, failures
        cert, info = _sd_certificate(cfg.controller, cfg, cfg.seed)
        if cfg.storage_controller is None:
            raise ToolkitError("storage.controller required")
        storage = cfg.storage_controller / (cfg.tau if cfg.storage_tau_scaled else 1.0)
        u_norm = float(np.linalg.norm(cfg.r2)) if cfg.r2 is not None else 0.0
        p_x0 = float(cfg.x2_0 @ cert.mp @ cfg.x2_0) if cfg.x2_0 is not None else 0.0
        rep = bounds.single_system_bounds(
            idx, cert, storage, u_norm, lam=cfg.lam, c5=cfg.c5, p_x0=p_x0
        )
        report = {
            "mode": "single-system",
            "eta1": rep.eta1,
            "eta2": rep.eta2,
            "level_d1": rep.level_d1,
            "level_d2": rep.level_d2,
            "constants": {k: float(v) for k, v in rep.constants.items()},
            "certificate": info,
        }
        if not info["passed"]:
            failures.append("sd certificate failed")
        return report, failures

    rep, margin, composed, details = _compute_bounds(cfg)
    report = {
        "mode": cfg.mode or "sampled-quantized",
        "nu_hat": composed.nu,
        "rho_hat": composed.rho,
        "delta_hat": composed.delta,
        "eta1": rep.eta1,
        "eta2": rep.eta2,
        "level_d1": rep.level_d1,
        "level_d2": rep.level_d2,
        "constants": {k: float(v) for k, v in rep.constants.items()},
        "margin": {"value": margin.margin, "passed": margin.passed},
        "certificates": {
            "plant": details["cert_plant"][1],
            "controller": details["cert_controller"][1],
        },
    }
    for name in ("plant", "controller"):
        if not details[f"cert_{name}"][1]["passed"]:
            failures.append(f"{name} sd certificate failed")
    if not margin.passed:
        failures.append(f"bias margin check failed (min eigenvalue {margin.margin:.3e})")
    return report, failures


def cmd_abstract_check(cfg: AnalysisConfig):
    failures = []
    if not cfg.controller.is_lti:
        raise ToolkitError("incremental-stability bounds are derived for LTI controllers only")
    if cfg.eta is None or cfg.eps is None or cfg.mu1 is None:
        raise ToolkitError("abstract-check needs the symbolic and quantization sections")
    bound = abstraction.lti_delta_iss(cfg.controller.model.a, cfg.controller.model.b)
    verdict = abstraction.check_bisim_params(bound, cfg.eps, cfg.tau, cfg.mu1, cfg.eta)
    report = {
        "scale": bound.scale,
        "rate": bound.rate,
        "input_gain": bound.input_gain,
        "slack": verdict.slack,
        "passed": verdict.passed,
    }
    if not verdict.passed:
        failures.append(f"bisimulation parameter inequality fails (slack {verdict.slack:.3e})")
    return report, failures


def cmd_simulate(cfg: AnalysisConfig, out_dir):
    failures = []
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    loop = _loop_config(cfg)
    try:
        storage = _loop_storage(cfg)
    except ToolkitError:
        storage = None

    traj = sim.simulate(loop)
    csv_path = out_dir / "trajectory.csv"
    traj.to_csv(csv_path, storage=storage)
    report = {
        "mode": loop.mode,
        "horizon": loop.horizon,
        "csv": str(csv_path),
        "final_state_sup": float(np.max(np.abs(traj.loop_state(traj.horizon)))),
    }

    try:
        bound_report, margin, _, _ = _compute_bounds(cfg)
        audit = sim.ultimate_bound_audit(traj, bound_report, storage)
        report["audit"] = {
            "level_d1": bound_report.level_d1,
            "level_d2": bound_report.level_d2,
            "global_ok": audit.global_ok,
            "entry_index": audit.entry_index,
            "post_entry_ok": audit.post_entry_ok,
            "margin_passed": margin.passed,
        }
        if not audit.global_ok:
            failures.append("trajectory left the certified global level set")
        if not audit.post_entry_ok:
            failures.append("trajectory did not settle below the ultimate level")
    except ToolkitError as exc:
        report["audit"] = {"skipped": str(exc)}

    if cfg.eta_sweep and loop.mode == "symbolic":
        sweep = []
        for eta in cfg.eta_sweep:
            traj_eta = sim.simulate(replace(loop, eta=float(eta)))
            traj_eta.to_csv(out_dir / f"trajectory_eta_{eta:g}.csv", storage=storage)
            cut = (traj_eta.x1.shape[0] * 2) // 3
            sup1 = float(np.max(np.abs(traj_eta.x1[cut:])))
            sup2 = float(np.max(np.abs(traj_eta.x2s[cut:])))
            sweep.append(
                {"eta": float(eta), "sup_x1": sup1, "sup_x2s": sup2,
                 "sup_combined": max(sup1, sup2)}
            )
        report["eta_sweep"] = sweep
    return report, failures


def cmd_audit(cfg: AnalysisConfig, trajectory_path):
    """Dissipation audit of a recorded closed-loop CSV.

    Reconstructs the stacked reference from the recorded signals
    (``r1 = y2tilde + u1``, ``r2 = u2tilde - y1``) and checks the composed
    quasi-passivity inequality over all trajectory windows.
    """
    failures = []
    symbolic = cfg.mode in ("symbolic", "disturbance-injected")
    _, _, composed = _compose(cfg, symbolic)
    storage = _loop_storage(cfg)
    n1 = cfg.plant.model.n
    n2 = cfg.controller.model.n
    m = cfg.controller.model.m

    with open(trajectory_path) as fh:
        rows = list(csv.DictReader(fh))
    states = np.array(
        [
            [float(row[f"x1_{i+1}"]) for i in range(n1)]
            + [float(row[f"x2_{i+1}"]) for i in range(n2)]
            for row in rows
        ]
    )
    sig_rows = rows[:-1]
    get = lambda row, stem: [float(row[f"{stem}_{i+1}"]) for i in range(m)]
    u1 = np.array([get(r, "u1") for r in sig_rows])
    u2t = np.array([get(r, "u2tilde") for r in sig_rows])
    y1 = np.array([get(r, "y1") for r in sig_rows])
    y2t = np.array([get(r, "y2tilde") for r in sig_rows])
    refs = np.hstack([y2t + u1, u2t - y1])
    outs = np.hstack([y1, y2t])

    if composed.w1 > 0 or composed.w2 > 0:
        mb1 = cfg.plant.gain.beta_matrix if cfg.plant.gain is not None else np.zeros((n1, n1))
        mb2 = (
            cfg.controller.gain.beta_matrix
            if cfg.controller.gain is not None
            else np.zeros((n2, n2))
        )
        stacked = scipy.linalg.block_diag(composed.w1 * mb1, composed.w2 * mb2)
        bias = lambda x: float(x @ stacked @ x)
        audit_idx = passivity.IndexSet(
            nu=composed.nu, rho=composed.rho, delta=composed.delta, w=1.0
        )
    else:
        bias = None
        audit_idx = passivity.IndexSet(nu=composed.nu, rho=composed.rho, delta=composed.delta)

    violation = passivity.dissipation_audit(states, refs, outs, storage, audit_idx, bias=bias)
    passed = violation <= 1e-8
    if not passed:
        failures.append(f"dissipation inequality violated by {violation:.3e}")
    return {
        "trajectory": str(trajectory_path),
        "steps_audited": int(min(len(sig_rows), 500)),
        "max_violation": float(violation),
        "passed": passed,
    }, failures


# ---------------------------------------------------------------------------
# rendering and entry point


def _render_text(report, failures, out=sys.stdout):
    def emit(prefix, value):
        if isinstance(value, dict):
            for key, sub in value.items():
                emit(f"{prefix}{key}." if prefix else f"{key}.", sub)
        else:
            key = prefix.rstrip(".")
            if isinstance(value, float):
                out.write(f"{key} = {value:.6g}\n")
            elif isinstance(value, list):
                out.write(f"{key} = {json.dumps(value, default=_jsonable)}\n")
            else:
                out.write(f"{key} = {value}\n")

    emit("", report)
    for failure in failures:
        out.write(f"FAIL: {failure}\n")
    if not failures:
        out.write("all checks passed\n")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="passquant",
        description="Passivity analysis of sampled and quantized controller implementations",
    )
    parser.add_argument("command", choices=[
        "degrade", "compose", "sd", "bound", "abstract-check", "simulate", "audit",
    ])
    parser.add_argument("--config", required=True, help="path to the JSON configuration")
    parser.add_argument("--out", default=".", help="output directory for CSV artifacts")
    parser.add_argument("--seed", type=int, default=None, help="override the configured seed")
    parser.add_argument("--format", choices=["text", "json"], default="text")
    parser.add_argument("--trajectory", default=None, help="recorded CSV for the audit command")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.command == "degrade":
            report, failures = cmd_degrade(cfg)
        elif args.command == "compose":
            report, failures = cmd_compose(cfg)
        elif args.command == "sd":
            report, failures = cmd_sd(cfg)
        elif args.command == "bound":
            report, failures = cmd_bound(cfg)
        elif args.command == "abstract-check":
            report, failures = cmd_abstract_check(cfg)
        elif args.command == "simulate":
            report, failures = cmd_simulate(cfg, args.out)
        else:
            if args.trajectory is None:
                parser.error("audit requires --trajectory")
            report, failures = cmd_audit(cfg, args.trajectory)
    except ToolkitError as exc:
        report = {"error": str(exc)}
        failures = [str(exc)]

    report = {"command": args.command, **report, "failures": failures}
    if args.format == "json":
        json.dump(report, sys.stdout, indent=2, sort_keys=False, default=_jsonable)
        sys.stdout.write("\n")
    else:
        _render_text(
            {k: v for k, v in report.items() if k != "failures"}, failures
        )
    return 1 if failures else 0


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, bool):
        return value
    raise TypeError(f"not JSON serializable: {type(value)!r}")


if __name__ == "__main__":
    sys.exit(main())
