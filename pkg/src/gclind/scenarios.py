"""Scenario execution: one function per config kind, emitting output documents.

Each scenario returns the machine-readable artifacts as in-memory documents;
callers (the HTTP service, and through it the CLI) decide where the bytes go.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import config as cfg
from . import operators as op
from .errors import ValidationFailure
from .gibbs import chemical_potential
from .hierarchy import second_quantized_hamiltonian, fock_number_operator, run_protocol
from .lindblad import (
    check_equilibrium_condition,
    lindblad_rhs,
    propagate,
    steady_states,
)
from .reports import OutputDoc, config_hash, csv_document, json_document


@dataclass(frozen=True)
class ScenarioOutcome:
    scenario: str
    config_hash: str
    report: dict
    outputs: tuple[OutputDoc, ...]


def execute(config: cfg.ScenarioConfig) -> ScenarioOutcome:
    """Dispatch a parsed config to its scenario runner."""
    runners = {
        "evolve": _run_evolve,
        "steady": _run_steady,
        "check": _run_check,
        "mu-extract": _run_mu_extract,
        "sample": _run_sample,
    }
    chash = config_hash(config.model_dump(mode="json"))
    return runners[config.scenario](config, chash)


def _basename(config, default: str) -> str:
    return config.output.basename or default


def _trajectory_rows(traj):
    dim = traj.states[0].shape[0]
    header = ["time"]
    header += [f"pop_{i}" for i in range(dim)]
    for i in range(dim):
        for j in range(i + 1, dim):
            header += [f"coh_{i}_{j}_re", f"coh_{i}_{j}_im"]
    header += ["trace", "min_eig"]
    rows = []
    for t, rho in zip(traj.times, traj.states):
        row = [float(t)]
        row += [float(rho[i, i].real) for i in range(dim)]
        for i in range(dim):
            for j in range(i + 1, dim):
                row += [float(rho[i, j].real), float(rho[i, j].imag)]
        row.append(float(np.trace(rho).real))
        row.append(float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]))
        rows.append(row)
    return header, rows


def _run_evolve(config: cfg.EvolveConfig, chash: str) -> ScenarioOutcome:
    model, rho0 = cfg.build_model(config.model)
    num = config.numerics
    traj = propagate(
        model,
        rho0,
        num.t_span,
        num.dt,
        store_every=num.store_every,
        trace_tol=num.tolerances.trace_drift,
        state_tol=num.tolerances.state_check,
    )
    header, rows = _trajectory_rows(traj)
    base = _basename(config, "evolve")
    final = traj.final_state
    report = {
        "scenario": "evolve",
        "steps": len(traj.states) - 1,
        "dt": traj.dt,
        "final_time": traj.final_time,
        "final_populations": [float(final[i, i].real) for i in range(model.dim)],
        "final_trace": float(np.trace(final).real),
        "final_min_eigenvalue": float(np.linalg.eigvalsh(0.5 * (final + final.conj().T))[0]),
    }
    outputs = (
        OutputDoc(f"{base}_trajectory.csv", csv_document(header, rows, chash), "text/csv"),
        OutputDoc(f"{base}_report.json", json_document(report, chash), "application/json"),
    )
    return ScenarioOutcome("evolve", chash, report, outputs)


def _run_steady(config: cfg.SteadyConfig, chash: str) -> ScenarioOutcome:
    model, _ = cfg.build_model(config.model)
    tol = config.numerics.tolerances
    states = steady_states(
        model, null_cutoff=tol.steady_null_cutoff, residual_tol=tol.steady_residual
    )
    residuals = [op.max_norm(lindblad_rhs(model, s)) for s in states]
    base = _basename(config, "steady")
    report = {
        "scenario": "steady",
        "n_states": len(states),
        "residuals": residuals,
        "residual_tolerance": tol.steady_residual,
    }
    outputs = [
        OutputDoc(f"{base}_state_{k}.txt", op.dump_operator(s), "text/plain")
        for k, s in enumerate(states)
    ]
    outputs.append(OutputDoc(f"{base}_report.json", json_document(report, chash), "application/json"))
    return ScenarioOutcome("steady", chash, report, tuple(outputs))


def _reference_operator(config: cfg.CheckConfig) -> np.ndarray:
    """The positive reference the channel sum is applied to.

    From a grand-canonical section this is the non-normalized direct-sum
    Boltzmann operator of the lifted Hamiltonian and number operator.
    """
    if config.k_operator is not None:
        return cfg.build_operator(config.k_operator, "k_operator")
    spec = cfg.build_gc_spec(config.gc)
    h_full = second_quantized_hamiltonian(spec.sector_hamiltonians)
    n_full = fock_number_operator(spec.sector_dims)
    return op.hermitian_function(
        h_full - spec.mu * n_full, lambda w: np.exp(-spec.beta * w)
    )


def _run_check(config: cfg.CheckConfig, chash: str) -> ScenarioOutcome:
    channels = cfg.build_channels(config.channels)
    k_op = _reference_operator(config)
    f_op = cfg.build_operator(config.f_operator, "f_operator") if config.f_operator else None
    report_obj = check_equilibrium_condition(
        config.condition,
        channels,
        k_op,
        partition=config.partition,
        f_op=f_op,
        hbar=config.hbar,
        tol=config.numerics.tolerances.condition,
    )
    report = {"scenario": "check", **report_obj.to_dict()}
    base = _basename(config, "check")
    outputs = (OutputDoc(f"{base}_report.json", json_document(report, chash), "application/json"),)
    return ScenarioOutcome("check", chash, report, outputs)


def _run_mu_extract(config: cfg.MuExtractConfig, chash: str) -> ScenarioOutcome:
    model = cfg.build_reservoir(config.reservoir)
    try:
        mu = chemical_potential(model, config.n_star)
    except ValueError as exc:
        raise ValidationFailure(f"reservoir: {exc}") from exc
    report = {
        "scenario": "mu-extract",
        "mu": mu,
        "n_star": config.n_star,
        "total_particles": config.reservoir.total_particles,
    }
    base = _basename(config, "mu")
    outputs = (OutputDoc(f"{base}_report.json", json_document(report, chash), "application/json"),)
    return ScenarioOutcome("mu-extract", chash, report, outputs)


def _run_sample(config: cfg.SampleConfig, chash: str) -> ScenarioOutcome:
    hconfig = cfg.build_hierarchy_config(config)
    observables = cfg.build_observables(config, hconfig)
    result = run_protocol(hconfig, observables)

    chain_rows = [
        [s.index, s.time, s.n, s.accepted, s.weight] for s in result.chain.steps
    ]
    chain_csv = csv_document(["step", "time", "n", "accepted", "weight_n"], chain_rows, chash)
    est_rows = [
        [e.name, e.estimate, e.std_error, e.n_samples] for e in result.estimates
    ]
    est_csv = csv_document(["observable", "estimate", "std_error", "n_samples"], est_rows, chash)

    lo, hi = hconfig.window_bounds
    visited = result.chain.visited
    report = {
        "scenario": "sample",
        "n_steps": hconfig.n_steps,
        "seed": hconfig.rng_seed,
        "proposal_mode": hconfig.proposal_mode,
        "window": [lo, hi],
        "acceptance_rate": result.acceptance_rate,
        "boundary_events": result.boundary_events,
        "degenerate_steps": result.degenerate_steps,
        "visit_counts": {str(n): visited.get(n, 0) for n in hconfig.window},
        "estimates": [
            {"name": e.name, "estimate": e.estimate, "std_error": e.std_error}
            for e in result.estimates
        ],
    }
    base = _basename(config, "sample")
    outputs = (
        OutputDoc(f"{base}_chain.csv", chain_csv, "text/csv"),
        OutputDoc(f"{base}_estimates.csv", est_csv, "text/csv"),
        OutputDoc(f"{base}_report.json", json_document(report, chash), "application/json"),
    )
    return ScenarioOutcome("sample", chash, report, outputs)
