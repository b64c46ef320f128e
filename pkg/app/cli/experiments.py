"""Experiment registry: each entry turns a :class:`RunConfig` into a table or a JSON document."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Callable

from app.analysis.superdiff import superdiff_sweep
from app.cli.config import RunConfig, parse_target
from app.controllers.policies import policy_from_dict
from app.controllers.rollouts import steering_cost_expectation
from app.errors import ConfigError, ValidationError
from app.model.serializer import Serializer
from app.model.torus import random_measure
from app.simulate.experiments import (
    blowup_probe,
    fit_gap_exponent,
    steering_identity_check,
    value_gap_curve,
)
from app.simulate.montecarlo import SimConfig, estimate_value
from app.targets.operators import operator_from_dict
from app.targets.processes import DiffusionTranslateTarget
from app.targets.rates import rate_from_dict
from app.targets.sampling import make_rng
from app.transport.exact import exact_ot, wasserstein
from app.transport.sinkhorn import sinkhorn
from app.value.deterministic import (
    du_det_dt,
    hjb_residual_quadratic,
    omega_envelope,
    time_rescale_check,
    transport_cost,
    u_det,
)

logger = logging.getLogger(__name__)


@dataclass
class ExperimentResult:
    """What an experiment produced.

    Exactly one of ``columns`` (CSV) or ``document`` (JSON) is set.
    """

    summary: str
    columns: dict[str, list] | None = None
    document: dict | None = None
    path_costs: tuple | None = None

    def render(self, cfg: RunConfig) -> str:
        if self.columns is not None:
            return render_csv(self.columns, cfg)
        doc = dict(self.document)
        doc["config_sha256"] = cfg.sha256()
        doc["seed"] = cfg.seed
        return Serializer.dumps(doc)

    @property
    def suffix(self) -> str:
        return ".csv" if self.columns is not None else ".json"


@dataclass(frozen=True)
class Experiment:
    name: str
    output: str
    fields: tuple[str, ...]
    description: str
    run: Callable[[RunConfig, int | None], ExperimentResult] = field(repr=False)


def format_float(x) -> str:
    """Shortest decimal that reads back to the same double."""
    return repr(float(x))


def render_csv(columns: dict[str, list], cfg: RunConfig) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    writer.writerow(names)
    for row in zip(*(columns[n] for n in names)):
        writer.writerow([format_float(v) for v in row])
    buf.write(f"# config_sha256={cfg.sha256()} seed={cfg.seed}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def _wasserstein(cfg: RunConfig, threads):
    mu, nu = cfg.measure("mu"), cfg.measure("nu")
    k = cfg.number("k", 2.0)
    solver = cfg.parameters.get("solver", "exact")
    if solver == "exact":
        plan = exact_ot(mu, nu, k)
        distance = wasserstein(mu, nu, k)
    elif solver == "sinkhorn":
        plan = sinkhorn(mu, nu, k, cfg.number("epsilon", 1e-2), cfg.number("max_iters", 100_000, integer=True),
                        cfg.number("tol", 1e-9))
        distance = plan.total_cost ** (1.0 / k)
    else:
        raise ConfigError(f"unknown solver {solver!r}; expected 'exact' or 'sinkhorn'", "parameters.solver")
    doc = {
        "distance": distance,
        "cost": plan.total_cost,
        "plan": Serializer.plan_to_dict(plan, bool(cfg.parameters.get("include_coupling", False))),
    }
    return ExperimentResult(f"W_{k:g} = {distance!r} ({solver})", document=doc)


def _det_value(cfg: RunConfig, threads):
    grid = cfg.torus()
    mu, nu = cfg.measure("mu"), cfg.measure("nu")
    cost, horizon = cfg.cost(), cfg.horizon()
    t = cfg.number("t", 0.0)
    doc = {
        "t": t,
        "T": horizon.T,
        "transport_cost": transport_cost(mu, nu, cost.exponent),
        "u_det": u_det(t, mu, nu, cost, horizon),
        "du_dt": du_det_dt(t, mu, nu, cost, horizon),
        "omega": omega_envelope(t, grid, cost, horizon),
    }
    if "t_list" in cfg.parameters:
        doc["rescale_drift"] = time_rescale_check(mu, nu, cost, horizon, cfg.number_list("t_list"))
    return ExperimentResult(f"u_det({t!r}) = {doc['u_det']!r}", document=doc)


def _sim_config(cfg: RunConfig, t0: float | None = None) -> SimConfig:
    grid = cfg.torus()
    horizon = cfg.horizon()
    t0 = cfg.number("t0", 0.0) if t0 is None else t0
    rem = horizon.remaining(t0)
    dt = min(cfg.number("dt", 0.01), rem / 4)
    return SimConfig(
        mu=cfg.measure("mu"),
        target=parse_target(cfg.require("target"), grid),
        policy=policy_from_dict(cfg.require("policy"), "parameters.policy"),
        t0=t0,
        horizon=horizon,
        cost=cfg.cost(),
        n_paths=cfg.number("n_paths", 1000, integer=True),
        base_seed=cfg.seed,
        dt_coarse=dt,
        dt_min=min(cfg.number("dt_min", 1e-6 * horizon.T), dt),
        refine_ratio=cfg.number("refine_ratio", 0.5),
        keep_paths=bool(cfg.parameters.get("keep_paths", False)),
    )


def _simulate(cfg: RunConfig, threads):
    sim = _sim_config(cfg)
    report = estimate_value(sim, threads)
    doc = report.to_dict()
    doc["u_det_reference"] = u_det(sim.t0, sim.mu, sim.target.reference_measure(sim.horizon), sim.cost, sim.horizon)
    summary = f"mean cost {report.mean_cost!r} +/- {report.std_error!r} over {report.n_paths} paths"
    return ExperimentResult(summary, document=doc, path_costs=report.per_path_costs)


def _gap_curve(cfg: RunConfig, threads):
    t_list = cfg.number_list("t_list")
    template = _sim_config(cfg, t_list[0])
    rel_tol = cfg.optional_number("rel_tol")
    points = value_gap_curve(template, t_list, threads, rel_tol,
                             cfg.number("max_paths", 10 ** 6, integer=True))
    columns = {
        "t": [p.t for p in points],
        "T_minus_t": [p.T_minus_t for p in points],
        "mc_mean": [p.mean_cost for p in points],
        "mc_stderr": [p.std_error for p in points],
        "u_det": [p.u_det for p in points],
        "gap": [p.gap for p in points],
    }
    try:
        summary = f"{len(points)} points, fitted gap exponent {fit_gap_exponent(points):.4g}"
    except ValidationError:
        summary = f"{len(points)} points, gap exponent not fitted"
    return ExperimentResult(summary, columns=columns)


def _blowup_probe(cfg: RunConfig, threads):
    nu = cfg.measure("nu")
    mu = cfg.measure("mu", {"weights": list(nu.weights)})
    operator = operator_from_dict(cfg.require("operator"), "parameters.operator")
    epsilons = cfg.number_list("epsilons", [1e-2, 1e-3, 1e-4, 1e-5])
    points = blowup_probe(cfg.number("lambda"), nu, operator, mu, cfg.number("t", 0.0), cfg.horizon(), epsilons)
    columns = {
        "epsilon": [p.epsilon for p in points],
        "lower_bound": [p.lower_bound for p in points],
        "floor_bound": [p.floor_bound for p in points],
    }
    ratio = points[-1].lower_bound / points[0].lower_bound if points[0].lower_bound > 0 else float("inf")
    return ExperimentResult(f"{len(points)} cutoffs, bound grew by {ratio:.4g}", columns=columns)


def _steering_check(cfg: RunConfig, threads):
    sigma = rate_from_dict(cfg.require("sigma"), "parameters.sigma")
    horizon = cfg.horizon()
    t0 = cfg.number("t0", 0.0)
    check = steering_identity_check(
        sigma, t0, horizon,
        n_paths=cfg.number("n_paths", 10_000, integer=True),
        x0_offset=cfg.number("x0_offset", 0.0),
        dt=cfg.number("dt", 1e-3),
        dt_min=cfg.optional_number("dt_min"),
        refine_ratio=cfg.number("refine_ratio", 1.0),
        base_seed=cfg.seed,
    )
    doc = {"lhs": check.lhs, "rhs": check.rhs, "std_error": check.std_error, "z_score": check.z_score}
    if "theta" in cfg.parameters:
        target = DiffusionTranslateTarget(cfg.measure("nu0"), sigma)
        bound = steering_cost_expectation(cfg.measure("mu"), target, t0, horizon, cfg.cost(), cfg.number("theta"))
        doc["expectation"] = {"delta": bound.delta, "transport": bound.transport, "drift": bound.drift,
                              "diffusion": bound.diffusion, "total": bound.total}
    return ExperimentResult(f"lhs {check.lhs!r} rhs {check.rhs!r} z={check.z_score:.3g}", document=doc)


def _max_atoms(cfg: RunConfig) -> int | None:
    atoms = cfg.optional_number("max_atoms", integer=True)
    if atoms is not None and atoms < 1:
        raise ConfigError(f"expected at least one atom, got {atoms!r}", "parameters.max_atoms")
    return atoms


def _hjb_residual(cfg: RunConfig, threads):
    grid = cfg.torus()
    horizon = cfg.horizon()
    t = cfg.number("t", 0.0)
    if "mu" in cfg.parameters:
        pairs = [(cfg.measure("mu"), cfg.measure("nu"))]
    else:
        rng = make_rng(cfg.seed)
        atoms = _max_atoms(cfg)
        pairs = []
        for _ in range(cfg.number("n_pairs", 100, integer=True)):
            n_atoms = None if atoms is None else int(rng.integers(1, atoms + 1))
            pairs.append((random_measure(grid, rng, n_atoms), random_measure(grid, rng, n_atoms)))
    records = []
    skipped = 0
    worst = 0.0
    for mu, nu in pairs:
        r = hjb_residual_quadratic(t, mu, nu, horizon)
        records.append({"residual": r.residual, "time_derivative": r.time_derivative,
                        "hamiltonian": r.hamiltonian, "monge": r.monge})
        if r.monge:
            worst = max(worst, abs(r.residual))
        else:
            skipped += 1
    if skipped:
        logger.info("hjb-residual: %d of %d instances are not Monge and were skipped", skipped, len(pairs))
    doc = {"instances": len(pairs), "skipped_non_monge": skipped, "max_abs_residual": worst, "records": records}
    return ExperimentResult(f"max |residual| {worst:.3e} over {len(pairs) - skipped} Monge instances",
                            document=doc)


def _superdiff_test(cfg: RunConfig, threads):
    result = superdiff_sweep(cfg.torus(), cfg.number("n_instances", 1000, integer=True), make_rng(cfg.seed),
                             _max_atoms(cfg))
    doc = {"instances": result.instances, "violations": result.violations, "max_excess": result.max_excess,
           "jensen_violations": result.jensen_violations}
    return ExperimentResult(f"{result.violations} violations in {result.instances} instances", document=doc)


EXPERIMENTS: dict[str, Experiment] = {e.name: e for e in (
    Experiment("wasserstein", "json", ("grid", "mu", "nu", "[k]", "[solver]", "[epsilon]"),
               "W_k distance and optimal plan between two grid measures", _wasserstein),
    Experiment("det-value", "json", ("grid", "mu", "nu", "t", "T", "[cost]", "[t_list]"),
               "closed-form deterministic value, its time derivative and envelope", _det_value),
    Experiment("simulate", "json", ("grid", "mu", "target", "policy", "t0", "T", "[n_paths]", "[dt]"),
               "Monte Carlo cost of a policy against a random target", _simulate),
    Experiment("gap-curve", "csv", ("grid", "mu", "target", "policy", "t_list", "T", "[n_paths]", "[rel_tol]"),
               "policy cost minus deterministic value as t approaches T", _gap_curve),
    Experiment("blowup-probe", "csv", ("grid", "nu", "operator", "lambda", "t", "T", "[mu]", "[epsilons]"),
               "lower bound on the value with one possible late jump", _blowup_probe),
    Experiment("steering-check", "json", ("sigma", "t0", "T", "n_paths", "x0_offset", "[theta, grid, mu, nu0]"),
               "steering energy against its closed form", _steering_check),
    Experiment("hjb-residual", "json", ("grid", "t", "T", "mu+nu | n_pairs", "[max_atoms]"),
               "quadratic HJB residual on Monge pairs", _hjb_residual),
    Experiment("superdiff-test", "json", ("grid", "n_instances", "[max_atoms]"),
               "first-order upper bound of W_2^2 along random couplings", _superdiff_test),
)}


def get_experiment(name: str) -> Experiment:
    try:
        return EXPERIMENTS[name]
    except KeyError:
        raise ConfigError(f"unknown experiment {name!r}; expected one of {sorted(EXPERIMENTS)}",
                          "experiment") from None


def list_experiments() -> str:
    """One row per experiment: name, output format, config fields (``[x]`` optional), description."""
    rows = [("experiment", "output", "fields", "description")]
    rows += [(e.name, e.output, ", ".join(e.fields), e.description) for e in EXPERIMENTS.values()]
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = [f"{r[0]:<{widths[0]}}  {r[1]:<{widths[1]}}  {r[2]:<{widths[2]}}  {r[3]}" for r in rows]
    return "\n".join(lines) + "\n"
