"""Command-line front end (``allocopt``)."""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from .errors import AllocError, InfeasibleError
from .exact_core import SystemParams, as_allocation, evaluate
from .memory_limited import MemoryProfile, solve_arbitrary_profile, solve_constant_profile
from .multi_object import TwoObjectSpec, allocate_two_objects, exhaustive_two_object, two_object_score
from .oracle import conjecture_report, grid_search_alloc, rows_csv
from .q_relaxation import curve_csv, disparity_scan, objective_curve, solve_p1, solve_p2

COMMANDS = ("solve", "eval", "scan", "curve", "two", "oracle-compare")
DEFAULT_SEED = 20130
DEFAULT_TRIALS = 10 ** 6
SIG_DIGITS = 12

EXIT_OK, EXIT_INTERNAL, EXIT_INFEASIBLE = 0, 1, 2


class InputError(AllocError):
    """Malformed command-line input (bad JSON, missing flag)."""


@dataclass
class RunConfig:
    command: str
    params: Optional[SystemParams] = None
    profile_path: Optional[str] = None
    output_path: Optional[str] = None
    seed: int = DEFAULT_SEED
    trials: int = DEFAULT_TRIALS
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")


# -- serialization --------------------------------------------------------------


def round_sig(obj: Any) -> Any:
    """Round every float to 12 significant digits; non-finite values become null."""
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, float):
        return float(f"{obj:.{SIG_DIGITS}g}") if math.isfinite(obj) else None
    if isinstance(obj, int):
        return obj
    if isinstance(obj, dict):
        return {k: round_sig(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v) for v in obj]
    if hasattr(obj, "item"):
        return round_sig(obj.item())
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(round_sig(obj), indent=2) + "\n"


def parse_json(text: str, source: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}: invalid JSON at line {exc.lineno}, column {exc.colno} "
                         f"(offset {exc.pos}): {exc.msg}") from exc


def load_json_arg(value: str, what: str) -> Any:
    """Inline JSON, or a path to a JSON file."""
    path = Path(value)
    if not value.lstrip().startswith(("[", "{")) and path.is_file():
        return parse_json(path.read_text(), str(path))
    return parse_json(value, what)


def load_profile(path: str) -> MemoryProfile:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"profile file not found: {path}")
    data = parse_json(p.read_text(), path)
    if isinstance(data, dict):
        data = data.get("caps", data.get("profile"))
    if not isinstance(data, list) or not all(isinstance(v, (int, float)) for v in data):
        raise InputError(f"{path}: profile must be a JSON array of numbers")
    return MemoryProfile.from_caps(data)


def _alloc_from(data: Any) -> list:
    if isinstance(data, dict):
        data = data.get("allocation")
    if not isinstance(data, list):
        raise InputError("allocation must be a JSON array or an object with an 'allocation' array")
    return data


# -- command bodies -------------------------------------------------------------


def _outcome_dict(out, params: SystemParams, caps=None) -> dict:
    d = {
        "case": out.case_label,
        "n_star": list(out.n_star) if isinstance(out.n_star, tuple) else out.n_star,
        "family": out.family,
        "allocation": list(out.allocation.amounts),
        "success_prob": out.success_prob,
        "success_method": out.success_method,
        "N": params.num_nodes,
        "p": params.access_prob,
        "T": params.budget,
    }
    if caps is not None:
        d["caps"] = list(caps)
    for extra in ("p0", "p0_method", "L0", "n_min"):
        if hasattr(out, extra):
            d[extra] = getattr(out, extra)
    if hasattr(out, "candidate_set_M"):
        d["candidate_set_M"] = list(out.candidate_set_M)
    d["notes"] = list(out.notes)
    return d


def _profile_for(cfg: RunConfig) -> Optional[MemoryProfile]:
    if cfg.profile_path:
        return load_profile(cfg.profile_path)
    M = cfg.options.get("memory")
    if M is not None:
        N = cfg.params.num_nodes if cfg.params is not None else cfg.options.get("nodes")
        if N is None:
            raise InputError("--memory needs --nodes")
        return MemoryProfile.constant(N, M)
    return None


def _need_params(cfg: RunConfig) -> SystemParams:
    if cfg.params is None:
        raise InputError(f"{cfg.command} needs --nodes, --access-prob and --budget")
    return cfg.params


def cmd_solve(cfg: RunConfig) -> str:
    params = _need_params(cfg)
    M = cfg.options.get("memory")
    if cfg.profile_path:
        profile = load_profile(cfg.profile_path)
        if profile.N != params.num_nodes:
            raise InputError(f"profile has {profile.N} caps, --nodes is {params.num_nodes}")
        out = solve_arbitrary_profile(params, profile)
        return dumps(_outcome_dict(out, params, profile.original_caps()))
    if M is not None:
        out = solve_constant_profile(params, M)
        return dumps(_outcome_dict(out, params, [M] * params.num_nodes))
    out = solve_p2(params)
    d = _outcome_dict(out, params)
    d["p1_n_star"] = solve_p1(params).n_star
    return dumps(d)


def cmd_eval(cfg: RunConfig) -> str:
    raw = cfg.options.get("alloc")
    if raw is None:
        raise InputError("eval needs --alloc")
    alloc = as_allocation(_alloc_from(load_json_arg(raw, "--alloc")))
    p = cfg.options.get("access_prob")
    if p is None:
        raise InputError("eval needs --access-prob")
    est = evaluate(alloc, p, cfg.options.get("method", "exact"), cfg.trials, cfg.seed)
    return dumps({
        "allocation": list(alloc.amounts),
        "p": p,
        "value": est.value,
        "method": est.method,
        "ci_halfwidth": est.ci_halfwidth,
        "trials": est.trials,
    })


def cmd_scan(cfg: RunConfig) -> str:
    N = cfg.options.get("nodes")
    if N is None:
        raise InputError("scan needs --nodes")
    rep = disparity_scan(N, cfg.options.get("p_step", 1e-3), cfg.options.get("t_step", 0.1),
                         p2=cfg.options.get("p2_mode", "argmax"))
    return dumps(rep.to_dict())


def cmd_curve(cfg: RunConfig) -> str:
    return curve_csv(objective_curve(_need_params(cfg)))


def _two_spec(cfg: RunConfig) -> TwoObjectSpec:
    o = cfg.options
    if o.get("spec"):
        d = load_json_arg(o["spec"], "--spec")
        if not isinstance(d, dict):
            raise InputError("--spec must be a JSON object")
        try:
            return TwoObjectSpec(d["t1"], d["t2"], d["p1"], d.get("access_prob", o.get("access_prob")))
        except KeyError as exc:
            raise InputError(f"--spec is missing {exc}") from exc
    if None in (o.get("t1"), o.get("t2"), o.get("p1"), o.get("access_prob")):
        raise InputError("two needs --t1, --t2, --p1 and --access-prob (or --spec)")
    return TwoObjectSpec(o["t1"], o["t2"], o["p1"], o["access_prob"])


def cmd_two(cfg: RunConfig) -> str:
    spec = _two_spec(cfg)
    profile = _profile_for(cfg)
    if profile is None:
        raise InputError("two needs --profile or --nodes with --memory")
    x1, x2 = allocate_two_objects(spec, profile)
    d = {
        "t1": spec.budget_1, "t2": spec.budget_2, "p1": spec.demand_prob_1, "p2": spec.demand_prob_2,
        "access_prob": spec.access_prob, "caps": list(profile.original_caps()),
        "allocation_1": list(x1.amounts), "allocation_2": list(x2.amounts),
        "score": two_object_score(x1, x2, spec),
    }
    g = cfg.options.get("granularity")
    if g is not None:
        d["report"] = exhaustive_two_object(spec, profile, g).to_dict()
    return dumps(d)


def cmd_oracle_compare(cfg: RunConfig) -> str:
    o = cfg.options
    g = o.get("granularity") or 10
    src = o.get("from")
    if src:
        d = load_json_arg(src, "--from")
        try:
            params = SystemParams(int(d["N"]), float(d["p"]), float(d["T"]))
        except (KeyError, TypeError) as exc:
            raise InputError("--from needs an object with N, p, T (and optionally caps)") from exc
        profile = MemoryProfile.from_caps(d["caps"]) if d.get("caps") else None
    else:
        params = _need_params(cfg)
        profile = _profile_for(cfg)
    if profile is not None:
        return dumps(conjecture_report(params, profile, g))
    res = grid_search_alloc(params, None, g, keep_rows=bool(o.get("rows")))
    out = {"N": params.num_nodes, "p": params.access_prob, "T": params.budget,
           "p1_n_star": solve_p1(params).n_star, "p1_score": solve_p1(params).success_prob}
    out.update(res.to_dict())
    if o.get("rows") and params.num_nodes <= 4:
        Path(o["rows"]).write_text(rows_csv(res))
    return dumps(out)


HANDLERS = {
    "solve": cmd_solve,
    "eval": cmd_eval,
    "scan": cmd_scan,
    "curve": cmd_curve,
    "two": cmd_two,
    "oracle-compare": cmd_oracle_compare,
}


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        text = HANDLERS[cfg.command](cfg)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=stderr)
        return EXIT_INFEASIBLE
    except AllocError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INFEASIBLE
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"internal error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_INTERNAL
    if cfg.output_path:
        Path(cfg.output_path).write_text(text)
    else:
        stdout.write(text)
    return EXIT_OK


# -- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="allocopt", description="Storage allocation solvers and oracles.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--nodes", type=int)
    ap.add_argument("--access-prob", type=float)
    ap.add_argument("--budget", type=float)
    ap.add_argument("--memory", type=float, help="constant per-node cap M")
    ap.add_argument("--profile", help="JSON file holding an array of per-node caps")
    ap.add_argument("--p-step", type=float, default=1e-3)
    ap.add_argument("--t-step", type=float, default=0.1)
    ap.add_argument("--p2-mode", choices=("argmax", "theorem"), default="argmax")
    ap.add_argument("--granularity", type=int)
    ap.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ap.add_argument("--out", help="write the artifact here instead of stdout")
    ap.add_argument("--method", choices=("exact", "mc", "closed"), default="exact")
    ap.add_argument("--alloc", help="allocation as inline JSON or a JSON file")
    ap.add_argument("--t1", type=float)
    ap.add_argument("--t2", type=float)
    ap.add_argument("--p1", type=float)
    ap.add_argument("--spec", help="two-object spec as inline JSON or a JSON file")
    ap.add_argument("--from", dest="from_", help="JSON artifact with N, p, T, caps (oracle-compare)")
    ap.add_argument("--rows", help="CSV path for all grid rows (oracle-compare, N <= 4)")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    params = None
    if ns.nodes is not None and ns.access_prob is not None and ns.budget is not None:
        params = SystemParams(ns.nodes, ns.access_prob, ns.budget)
    opts = {
        "nodes": ns.nodes, "access_prob": ns.access_prob, "memory": ns.memory,
        "p_step": ns.p_step, "t_step": ns.t_step, "p2_mode": ns.p2_mode,
        "granularity": ns.granularity, "method": ns.method, "alloc": ns.alloc,
        "t1": ns.t1, "t2": ns.t2, "p1": ns.p1, "spec": ns.spec, "from": ns.from_, "rows": ns.rows,
    }
    return RunConfig(command=ns.command, params=params, profile_path=ns.profile,
                     output_path=ns.out, seed=ns.seed, trials=ns.trials, options=opts)


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except AllocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
