"""Command-line experiment runner.

Each experiment writes its data tables and a ``manifest.json`` holding the
parameters, computed scalars and a list of checked assertions to ``--out``.

Exit codes: 0 all assertions pass, 2 configuration error, 3 an assertion
failed (the manifest is still written), 4 a solver did not converge.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io, tpm
from .channels import apply_channel, classify_channel, fully_thermalizing_jarzynski, make_fully_thermalizing
from .constructions import (
    Canonical,
    IidSpins,
    Microcanonical,
    block_weights,
    build_block_catalytic,
    build_toy_channel,
    canonical_setup,
    extraction_threshold,
    jarzynski_bound,
    min_entropy_audit,
    nmw_tail_curve,
    plan_blocks,
    random_catalytic_channel,
    symmetric_micro_setup,
    toy_closed_forms,
    top_catalyst_weight,
)
from .exceptions import ConvergenceError
from .multiagent import ProtocolConfig, analyze_joint, run_exact, run_monte_carlo, total_variation
from .qcore import ClassicalState, Spectrum, microcanonical_state, trace_distance, von_neumann_entropy

SCHEMA_VERSION = 1
EXPERIMENTS = ("toy", "micro-block", "canonical-block", "nmw-scaling", "multiagent",
               "bound-audit", "classify", "appg-invariance")

EXIT_OK, EXIT_CONFIG, EXIT_ASSERT, EXIT_CONVERGENCE = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    parameters: dict = field(default_factory=dict)
    output_dir: Path = Path("out")
    seed: int = 0

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        self.output_dir = Path(self.output_dir)

    def get(self, key, default=None, kind=float):
        value = self.parameters.get(key)
        if value is None:
            return default
        try:
            return kind(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"parameter {key}={value!r} is not a valid {kind.__name__}") from exc


class Recorder:
    """Collects results, assertions and output files of one experiment."""

    def __init__(self, cfg, fmt):
        self.cfg = cfg
        self.fmt = fmt
        self.results = {}
        self.assertions = []
        self.files = []

    def check(self, name, value, target, tol, kind="abs"):
        """``kind`` is ``abs`` (|value - target| <= tol), ``le`` (value <= target + tol) or ``ge``."""
        value, target = float(value), float(target)
        if kind == "abs":
            ok = abs(value - target) <= tol
        elif kind == "le":
            ok = value <= target + tol
        else:
            ok = value >= target - tol
        self.assertions.append({"name": name, "value": value, "target": target, "tol": tol,
                                "kind": kind, "passed": bool(ok)})
        return ok

    def table(self, name, header, rows):
        out = self.cfg.output_dir
        if self.fmt == "json":
            path = out / f"{name}.json"
            data = [dict(zip(header, (float(v) for v in row))) for row in rows]
            path.write_text(json.dumps(data, indent=1) + "\n")
        else:
            path = out / f"{name}.csv"
            io.write_csv(path, header, rows)
        self.files.append(path.name)

    def manifest(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.cfg.experiment,
            "parameters": {k: self.cfg.parameters[k] for k in sorted(self.cfg.parameters)},
            "seed": self.cfg.seed,
            "results": self.results,
            "assertions": self.assertions,
            "passed": all(a["passed"] for a in self.assertions),
            "files": self.files,
        }


def _load_spectrum(cfg):
    path = cfg.parameters.get("spectrum")
    return io.load_spectrum(path) if path else None


def run_toy(cfg, rec):
    beta = cfg.get("beta", 1.0)
    delta = cfg.get("delta", 30.0 / beta if beta > 0 else 1.0)
    ch = build_toy_channel(delta, beta)
    joint = tpm.joint_outcome_distribution(ch)
    dist = tpm.work_distribution(joint)
    forms = toy_closed_forms(delta, beta)
    je = tpm.exponential_work_average(ch, cross_check=True)
    rec.results.update({"beta_delta": beta * delta, "Z": forms["Z"], "jarzynski_avg": je,
                        "catalytic_residual": ch.catalytic_residual, "closed_forms": forms,
                        "work_atoms": dist.atoms()})
    if delta > 0:
        rec.check("p(0)", dist.prob(0.0), forms["p0"], 1e-10)
        rec.check("p(+delta)", dist.prob(delta), forms["p_plus"], 1e-10)
        rec.check("p(-delta)", dist.prob(-delta), forms["p_minus"], 1e-10)
    rec.check("jarzynski closed form", je, forms["jarzynski"], 1e-10)
    rec.check("jarzynski below 7/6", je, 7.0 / 6.0, 0.0, kind="le")
    rec.check("catalytic residual", ch.catalytic_residual, 0.0, 1e-12, kind="le")
    rec.table("work_distribution", ["w", "p"], dist.atoms())
    rec.table("joint_outcomes", ["E_i", "E_f", "p"], joint.by_energy())


def _micro_channel(cfg):
    g = cfg.get("g", 2, int)
    spectrum = _load_spectrum(cfg)
    if spectrum is None:
        spectrum, plan = symmetric_micro_setup(g)
    else:
        plan = plan_blocks(spectrum, cfg.get("e_target", float(np.median(spectrum.energies))), g,
                           symmetric=True)
    return spectrum, plan, build_block_catalytic(spectrum, plan, Microcanonical(cfg.get("beta", 1.0)))


def run_micro_block(cfg, rec):
    spectrum, plan, ch = _micro_channel(cfg)
    omega_i = ch.reference
    out = apply_channel(ch, omega_i)
    i_plus = microcanonical_state(spectrum, plan.window_Iplus)[0].probs
    target = 0.5 * i_plus
    target[plan.ground_index] += 0.5
    joint = tpm.joint_outcome_distribution(ch, omega_i)
    dist = tpm.work_distribution(joint)
    threshold = extraction_threshold(spectrum, plan)
    tail = tpm.work_tail(dist, threshold)
    audit = min_entropy_audit(ch)
    rec.results.update({"plan": plan.as_dict(), "dim_S": spectrum.dim, "threshold": threshold,
                        "tail": tail, "catalytic_residual": ch.catalytic_residual,
                        "min_entropy": audit, "work_atoms": dist.atoms()})
    rec.check("output is half I_plus half E_minus",
              trace_distance(out, ClassicalState.from_weights(target)), 0.0, 1e-12, kind="le")
    rec.check("tail p(w >= e - e_minus)", tail, 0.5, 0.0)
    rec.check("catalytic residual", ch.catalytic_residual, 0.0, 1e-12, kind="le")
    rec.check("min-entropy does not increase", audit["delta"], 0.0, 1e-12, kind="le")
    rec.table("work_distribution", ["w", "p"], dist.atoms())


def run_canonical_block(cfg, rec):
    beta = cfg.get("beta", 1.0)
    g = cfg.get("g", 64, int)
    spectrum = _load_spectrum(cfg)
    if spectrum is None:
        spectrum, plan = canonical_setup(g, beta)
    else:
        plan = plan_blocks(spectrum, cfg.get("e_target", float(np.median(spectrum.energies))), g)
    method = cfg.parameters.get("method", "power_iteration")
    ch = build_block_catalytic(spectrum, plan, Canonical(beta, cfg.get("delta"), method))
    r_i, r_m, r_p = block_weights(spectrum, plan, ch.gibbs())
    q = float(ch.sigma_C.probs[-1])
    dist = tpm.work_distribution(tpm.joint_outcome_distribution(ch))
    threshold = extraction_threshold(spectrum, plan)
    tail = tpm.work_tail(dist, threshold)
    rec.results.update({"plan": plan.as_dict(), "dim_S": spectrum.dim, "r_I": r_i, "r_minus": r_m,
                        "r_Iplus": r_p, "q_top": q, "threshold": threshold, "tail": tail,
                        "catalytic_residual": ch.catalytic_residual,
                        "jarzynski_avg": tpm.exponential_work_average(ch)})
    rec.check("r(I) >= 0.95", r_i, 0.95, 0.0, kind="ge")
    rec.check("q_top closed form", q, top_catalyst_weight(r_i, r_m, r_p), 1e-10)
    rec.check("q_top >= r(I)/2", q, 0.5 * r_i, 0.0, kind="ge")
    rec.check("tail >= 1/2 - 3(1 - r(I))", tail, 0.5 - 3.0 * (1.0 - r_i), 0.0, kind="ge")
    rec.check("catalytic residual", ch.catalytic_residual, 0.0, 1e-10, kind="le")
    rec.table("work_distribution", ["w", "p"], dist.atoms())


def _fit_slope(points):
    n = np.array([p[0] for p in points], dtype=float)
    lp = np.array([p[2] for p in points])
    return float(np.polyfit(n, lp, 1)[0])


def run_nmw_scaling(cfg, rec):
    gap = cfg.get("gap", 1.0)
    a = cfg.get("a", gap / 4.0)
    beta = cfg.get("beta", 1.0)
    lam = cfg.get("lam", 0.5)
    n_max = cfg.get("n_max", 512, int)
    n_list = [n for n in (2**k for k in range(3, 20)) if n <= n_max]
    model = IidSpins(n_list[0], gap)
    for family in ("fully_thermalizing", "gp_mix"):
        curve = nmw_tail_curve(model, family, a, n_list, beta=beta, lam=lam, seed=cfg.seed)
        slope = _fit_slope(curve)
        p = [c[1] for c in curve]
        rec.results[family] = {"slope": slope, "curve": [list(c) for c in curve]}
        diffs = np.diff([c[2] for c in curve])
        rec.check(f"{family}: log tail strictly decreasing", float(diffs.max()), 0.0, 0.0, kind="le")
        rec.check(f"{family}: fitted slope negative", slope, 0.0, 0.0, kind="le")
        rec.check(f"{family}: tail at largest N below smallest N", p[-1], p[0], 0.0, kind="le")
        rec.table(f"tail_{family}", ["N", "p", "log_p"], curve)


def run_multiagent(cfg, rec):
    g = cfg.get("g", 2, int)
    n = cfg.get("n_agents", 6, int)
    trials = cfg.get("trials", 10**5, int)
    spectrum, plan = symmetric_micro_setup(g)
    ch = build_block_catalytic(spectrum, plan, Microcanonical())
    exact = run_exact(ProtocolConfig(ch, n, plan.window_I))
    summary = analyze_joint(exact)
    mc = run_monte_carlo(ProtocolConfig(ch, n, plan.window_I, backend="monte_carlo",
                                        trials=trials, seed=cfg.seed))
    tv = total_variation(mc.frequencies, exact.records)
    residuals = summary["catalyst_marginal_residuals"]
    rec.results.update({
        "alternation_mass": summary["alternation_mass"],
        "lambda": summary["alternation_lambda"],
        "all_positive_mass": summary["all_positive_mass"],
        "marginal_spread": summary["marginal_spread"],
        "max_catalyst_residual": max(residuals),
        "monte_carlo_tv": tv,
    })
    rec.check("alternation mass", summary["alternation_mass"], 1.0, 1e-10)
    rec.check("lambda", summary["alternation_lambda"], 0.5, 1e-10)
    rec.check("all-positive mass", summary["all_positive_mass"], 0.0, 1e-12, kind="le")
    rec.check("per-agent marginals equal", summary["marginal_spread"], 0.0, 1e-10, kind="le")
    rec.check("catalyst marginal restored every round", max(residuals), 0.0, 1e-10, kind="le")
    rec.check("monte carlo total variation", tv, 0.0, 0.02, kind="le")
    rec.table("records_exact", [f"w_{k + 1}" for k in range(n)] + ["p"],
              [list(r.works) + [r.prob] for r in exact.records])
    rec.table("records_monte_carlo", [f"w_{k + 1}" for k in range(n)] + ["p"],
              [list(r.works) + [r.prob] for r in mc.frequencies])


def run_bound_audit(cfg, rec):
    count = cfg.get("n_channels", 1000, int)
    rng = np.random.default_rng(cfg.seed)
    worst_je = worst_tail = worst_work = worst_entropy = -math.inf
    violators = 0
    rows = []
    for k in range(count):
        ch = random_catalytic_channel(rng)
        bound = jarzynski_bound(ch)
        dist = tpm.work_distribution(tpm.joint_outcome_distribution(ch))
        je = tpm.exponential_work_average(ch, cross_check=True)
        omega = ch.gibbs()
        eps_grid = np.linspace(0.0, max(float(np.ptp(ch.spectrum.energies)), 0.5), 10)
        tail_gap = max(tpm.work_tail(dist, e) - bound.tail_bound(ch.beta, e) for e in eps_grid)
        entropy_drop = von_neumann_entropy(omega) - von_neumann_entropy(apply_channel(ch, omega))
        worst_je = max(worst_je, je - min(bound.bound_sigma, bound.bound_omega))
        worst_tail = max(worst_tail, tail_gap)
        worst_work = max(worst_work, tpm.average_work(dist))
        worst_entropy = max(worst_entropy, entropy_drop)
        violators += je > 1.0 + 1e-6
        rows.append([k, ch.dS, ch.dC, ch.beta, je, bound.bound_sigma, bound.bound_omega,
                     tpm.average_work(dist)])
    rec.results.update({"n_channels": count, "je_violators": int(violators),
                        "max_je_minus_bound": worst_je, "max_tail_minus_bound": worst_tail,
                        "max_average_work": worst_work, "max_entropy_drop": worst_entropy})
    rec.check("jarzynski average below bound", worst_je, 0.0, 1e-9, kind="le")
    rec.check("tail below bound", worst_tail, 0.0, 1e-9, kind="le")
    rec.check("average work non-positive", worst_work, 0.0, 1e-9, kind="le")
    rec.check("output entropy not below input", worst_entropy, 0.0, 1e-9, kind="le")
    rec.check("channels violating Jarzynski", violators, min(50, count), 0.0, kind="ge")
    rec.table("channels", ["k", "dS", "dC", "beta", "jarzynski_avg", "bound_sigma",
                           "bound_omega", "average_work"], rows)


def run_classify(cfg, rec):
    beta = cfg.get("beta", 1.0)
    channel_file = cfg.parameters.get("channel")
    if channel_file:
        ch = io.load_channel(channel_file)
        thermalizing = False
    else:
        spectrum = _load_spectrum(cfg) or Spectrum([0.0, 1.0])
        ch = make_fully_thermalizing(spectrum, beta)
        thermalizing = True
    report = classify_channel(ch)
    rec.results.update(report.as_dict())
    if thermalizing:
        target = fully_thermalizing_jarzynski(ch.spectrum, ch.beta)
        rec.results["d_over_d_eff"] = target
        rec.check("gibbs residual", report.gibbs_residual, 0.0, 1e-12, kind="le")
        rec.check("jarzynski average equals d/d_eff", report.jarzynski_avg, target, 1e-10)
    rec.table("report", ["unital_residual", "gibbs_residual", "catalytic_residual", "av_work",
                         "jarzynski_avg"],
              [[report.unital_residual, report.gibbs_residual, report.catalytic_residual,
                report.av_work, report.jarzynski_avg]])


def run_appg_invariance(cfg, rec):
    rng = np.random.default_rng(cfg.seed)
    n_hamiltonians = cfg.get("n_hamiltonians", 20, int)
    spectrum, plan = symmetric_micro_setup(cfg.get("g", 2, int))
    channels = {
        "toy": (build_toy_channel(cfg.get("delta", 1.0), cfg.get("beta", 1.0)), None),
        "micro-block": (build_block_catalytic(spectrum, plan, Microcanonical()),
                        microcanonical_state(spectrum, plan.window_I)[0]),
    }
    for name, (ch, initial) in channels.items():
        ref = tpm.work_distribution(tpm.joint_outcome_distribution(ch, initial))
        zero = tpm.joint_system_catalyst_work(ch, np.zeros(ch.dC), initial)
        worst = 0.0
        for _ in range(n_hamiltonians):
            h_c = rng.normal(size=ch.dC)
            bw = tpm.joint_system_catalyst_work(ch, h_c, initial)
            worst = max(worst, _atom_distance(bw.marginal_S, ref))
        rec.results[name] = {"max_marginal_deviation": worst,
                             "zero_hamiltonian_catalyst_work": zero.marginal_C.atoms()}
        rec.check(f"{name}: system work marginal invariant", worst, 0.0, 1e-12, kind="le")
        rec.check(f"{name}: catalyst work vanishes for H_C = 0",
                  float(np.abs(zero.marginal_C.w).max()), 0.0, 0.0, kind="le")
        rec.check(f"{name}: zero-H_C system marginal", _atom_distance(zero.marginal_S, ref), 0.0,
                  1e-12, kind="le")


def _atom_distance(a, b):
    if a.w.size != b.w.size or np.abs(a.w - b.w).max() > 1e-12:
        return math.inf
    return float(np.abs(a.p - b.p).max())


RUNNERS = {
    "toy": run_toy,
    "micro-block": run_micro_block,
    "canonical-block": run_canonical_block,
    "nmw-scaling": run_nmw_scaling,
    "multiagent": run_multiagent,
    "bound-audit": run_bound_audit,
    "classify": run_classify,
    "appg-invariance": run_appg_invariance,
}


def run_experiment(cfg, fmt="csv"):
    """Run one experiment; returns ``(exit_code, manifest)`` and writes the output directory."""
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    rec = Recorder(cfg, fmt)
    code = EXIT_OK
    try:
        RUNNERS[cfg.experiment](cfg, rec)
    except ConvergenceError as exc:
        rec.results["error"] = str(exc)
        code = EXIT_CONVERGENCE
    manifest = rec.manifest()
    if code == EXIT_OK and not manifest["passed"]:
        code = EXIT_ASSERT
    manifest["exit_code"] = code
    (cfg.output_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_jsonable) + "\n")
    return code, manifest


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def read_config(path):
    """Flat ``key = value`` file; ``#`` comments; must declare ``schema_version``."""
    params = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in text.split("=", 1))
        params[key.replace("-", "_")] = value
    version = params.pop("schema_version", None)
    if version is None or int(version) != SCHEMA_VERSION:
        raise ConfigError(f"{path}: schema_version must be {SCHEMA_VERSION}, got {version!r}")
    return params


def build_parser():
    parser = argparse.ArgumentParser(prog="catwork", description="Run a work-statistics experiment.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="flat key = value file with schema_version")
    parser.add_argument("--spectrum", help="energy file, one value per line")
    parser.add_argument("--channel", help="channel JSON file (classify)")
    parser.add_argument("--beta", type=float)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--g", type=int)
    parser.add_argument("--n-agents", type=int)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", default="out")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def config_from_args(args):
    params = read_config(args.config) if args.config else {}
    for key in ("spectrum", "channel", "beta", "delta", "g", "n_agents", "trials"):
        value = getattr(args, key)
        if value is not None:
            params[key] = value
    seed = args.seed if args.seed is not None else int(params.pop("seed", 0))
    params.pop("seed", None)
    return ExperimentConfig(args.experiment, params, Path(args.out), seed)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        code, manifest = run_experiment(cfg, args.format)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"catwork: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for a in manifest["assertions"]:
        print(f"{'PASS' if a['passed'] else 'FAIL'}  {a['name']}: {a['value']:.12g}")
    return code


if __name__ == "__main__":
    sys.exit(main())
