"""Command line entry point: ``dpfp <subcommand> ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage or parameter error,
3 data or schema error, 4 infeasible privacy budget.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, theory
from .attacks import AttackConfig, apply_attack
from .crypto_rand import KEY_ENV_VAR, FingerprintBits, SecretKey, gen_fingerprint
from .errors import (
    AlignmentError,
    BudgetInfeasibleError,
    ConfigurationError,
    FingerprintError,
    ParameterError,
    SchemaError,
)
from .extractor import ExtractionResult, detect_traitor, extract_fingerprint, match_threshold_D
from .fingerprinter import insert_fingerprint, params_from_epsilon, postprocess_domain
from .storage import atomic_write, dumps_json, file_digest, load_schema, read_csv, write_csv, write_json
from .svt_sharing import (
    SvtConfig,
    advanced_composition,
    default_gamma,
    share_multi,
    sharing_epsilon,
    solve_budget,
)
from .utility_metrics import (
    Distributions,
    QuerySpec,
    changed_entry_fraction,
    empirical_distributions,
    fingerprint_density,
    query_accuracy,
    two_stage_baseline,
    variance_change,
)

log = logging.getLogger("dpfp")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE, EXIT_DATA, EXIT_BUDGET = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


# helpers ---------------------------------------------------------------------

def _load_key(args) -> tuple[SecretKey, str]:
    if getattr(args, "key_file", None):
        path = Path(args.key_file)
        if not path.exists():
            raise SchemaError(f"key file not found: {path}")
        return SecretKey.from_file(path), "file"
    if os.environ.get(KEY_ENV_VAR):
        return SecretKey.from_env(), "env"
    raise UsageError(f"no secret key: pass --key-file or set {KEY_ENV_VAR}")


def _load_table(path, schema_path):
    schema = load_schema(schema_path)
    return read_csv(path, schema), schema


def _sensitivity(args, schema, db) -> int:
    return schema.sensitivity_for(db, getattr(args, "delta", None)).delta


def _manifest(out_path, command, parameters, inputs, seeds=None, outputs=None):
    doc = {
        "tool": "dpfp",
        "version": __version__,
        "command": command,
        "parameters": parameters,
        "seeds": seeds or {},
        "inputs": {str(p): file_digest(p) for p in inputs},
    }
    if outputs:
        doc["outputs"] = {str(p): file_digest(p) for p in outputs}
    write_json(doc, f"{out_path}.manifest.json")


def _emit(doc, out):
    if out:
        write_json(doc, out)
    else:
        sys.stdout.write(dumps_json(doc))


def _fp_params(args, sensitivity):
    return params_from_epsilon(
        args.epsilon, sensitivity, args.length, args.p, args.selection
    )


def _param_dict(params) -> dict:
    return {
        "epsilon": params.epsilon, "sensitivity": params.sensitivity,
        "marked_bits": params.marked_bits, "flip_probability": params.flip_probability,
        "length": params.length, "selection": params.selection,
    }


# subcommands -----------------------------------------------------------------

def cmd_keygen(args):
    key = SecretKey.generate()
    atomic_write(args.out, key.material.hex() + "\n")
    os.chmod(args.out, 0o600)
    print(f"wrote a new key to {args.out}")


def cmd_fingerprint(args):
    db, schema = _load_table(args.db, args.schema)
    key, source = _load_key(args)
    params = _fp_params(args, _sensitivity(args, schema, db))
    sp_id = args.sp_id.encode("utf-8")
    raw, marks = insert_fingerprint(db, params, key, sp_id)
    released = postprocess_domain(raw)
    write_csv(released, schema, args.out)
    outputs = [args.out]
    if args.marks:
        write_json({"marks": marks.to_list(db.keys)}, args.marks)
        outputs.append(args.marks)
    if args.registry:
        path = Path(args.registry)
        reg = json.loads(path.read_text()) if path.exists() else {}
        reg[args.sp_id] = sp_id.hex()
        write_json(reg, path)
    _manifest(args.out, "fingerprint", {**_param_dict(params), "key_source": source},
              [args.db, args.schema], outputs=outputs)
    log.info("marked %d positions; %d entries changed after clamping",
             len(marks), int((released.codes != db.codes).sum()))


def cmd_extract(args):
    schema = load_schema(args.schema)
    original = read_csv(args.original, schema)
    leaked = read_csv(args.leak, schema)
    key, source = _load_key(args)
    params = _fp_params(args, _sensitivity(args, schema, original))
    result = extract_fingerprint(original, leaked, params, key)
    doc = {"parameters": _param_dict(params), **result.to_dict()}
    _emit(doc, args.out)
    if args.out:
        _manifest(args.out, "extract", {**_param_dict(params), "key_source": source},
                  [args.original, args.leak, args.schema])


def cmd_detect(args):
    try:
        doc = json.loads(Path(args.extraction).read_text())
        registry = json.loads(Path(args.registry).read_text())
    except FileNotFoundError as exc:
        raise SchemaError(f"file not found: {exc.filename}") from None
    extraction = ExtractionResult.from_dict(doc)
    key, _ = _load_key(args)
    candidates = {
        name: gen_fingerprint(key, bytes.fromhex(hex_id), extraction.length)
        for name, hex_id in registry.items()
    }
    if args.threshold is not None:
        threshold = args.threshold
    else:
        threshold = match_threshold_D(args.recipients or max(1, len(candidates)), extraction.length)
    verdict = detect_traitor(extraction, candidates, threshold)
    _emit(verdict.to_dict(), args.out)


def cmd_attack(args):
    db, schema = _load_table(args.db, args.schema)
    kind = {"flip": "random_flipping", "subset": "subset", "corr": "correlation"}[args.kind]
    if kind != "subset" and args.gamma is None and kind == "random_flipping":
        raise UsageError("--gamma is required for the flip attack")
    config = AttackConfig(
        kind,
        gamma_rnd=args.gamma if kind == "random_flipping" else 0.0,
        gamma_sub=args.gamma if kind == "subset" and args.gamma is not None else 1.0,
        tau=args.tau or 0.0,
        rng_seed=args.seed,
        flip_mode=args.flip_mode,
    )
    reference = None
    if kind == "correlation":
        if not args.ref_joint:
            raise ConfigurationError("the correlation attack needs --ref-joint")
        try:
            reference = Distributions.from_dict(json.loads(Path(args.ref_joint).read_text())).joints
        except FileNotFoundError:
            raise SchemaError(f"reference file not found: {args.ref_joint}") from None
    marked_bits = int(_sensitivity(args, schema, db)).bit_length()
    leaked = apply_attack(db, config, marked_bits, reference)
    write_csv(leaked, schema, args.out)
    inputs = [args.db, args.schema] + ([args.ref_joint] if args.ref_joint else [])
    _manifest(args.out, "attack",
              {"kind": kind, "gamma": args.gamma, "tau": args.tau, "flip_mode": args.flip_mode,
               "marked_bits": marked_bits},
              inputs, seeds={"attack": args.seed})


def cmd_distributions(args):
    db, _ = _load_table(args.db, args.schema)
    _emit(empirical_distributions(db).to_dict(db.attribute_names), args.out)


def _parse_params(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise UsageError(f"parameter {item!r} is not key=value")
        k, v = item.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def _need(params, *names):
    missing = [n for n in names if n not in params]
    if missing:
        raise UsageError(f"missing parameters: {', '.join(missing)}")
    return [params[n] for n in names]


def _bound_value(name, q):
    if name == "infcap":
        psi, eps = _need(q, "psi", "epsilon")
        return {"value": theory.infcap_bound(psi, eps)}
    if name == "error":
        delta, p = _need(q, "delta", "p")
        return {"interval": list(theory.expected_error_bound(delta, p))}
    if name == "density":
        delta, p, n, t = _need(q, "delta", "p", "N", "T")
        return {"interval": list(theory.density_bound(delta, p, n, t))}
    if name in ("joint", "marginal"):
        p, k, value, lo, hi = _need(q, "p", "K", name, "pr_min", "pr_max")
        return {"interval": list(theory.joint_bounds(p, k, value, lo, hi))}
    if name == "psub":
        p, length, k, t, n, g = _need(q, "p", "L", "K", "T", "N", "gamma_sub")
        return {"value": theory.p_rbst_sub(p, length, k, t, n, g)}
    if name == "prnd":
        p, g, n, k, t, length, d = _need(q, "p", "gamma_rnd", "N", "K", "T", "L", "D")
        mode = q.get("mode", "exact")
        if mode == "exact":
            return {"value": theory.p_rbst_rnd_exact(p, g, n, k, t, length, d,
                                                    tie_rule=q.get("tie_rule", "half_wins"))}
        est, se = theory.p_rbst_rnd_monte_carlo(p, g, n, k, t, length, d,
                                                trials=int(q.get("trials", 2000)),
                                                rng_seed=int(q.get("seed", 0)))
        return {"value": est, "std_error": se}
    if name == "gain":
        p, k, tau, cells, marginal = _need(q, "p", "K", "tau", "cells", "marginal")
        stats = [theory.JointStats(*c) for c in cells]
        return {"value": theory.confidence_gain(p, k, tau, stats, marginal, q.get("variant", "appendix"))}
    if name == "compose":
        eps, delta, c, dp = _need(q, "epsilon", "delta", "C", "delta_prime")
        return {"value": list(advanced_composition(eps, delta, c, dp))}
    if name == "privacy":
        eps, x, c, dp = _need(q, "epsilon", "comparison_budget", "C", "delta_prime")
        return {"value": [sharing_epsilon(eps, x, c, dp), 2 * dp]}
    if name == "budget":
        e0, dp, c, eps = _need(q, "epsilon0", "delta_prime", "C", "epsilon")
        split = solve_budget(e0, dp, c, eps)
        return {"value": split.total, "epsilon2": split.epsilon2, "epsilon3": split.epsilon3,
                "residual": split.residual}
    if name == "gamma":
        delta, p, n, k = _need(q, "delta", "p", "N", "K")
        return {"value": default_gamma(delta, p, n, k)}
    if name == "threshold":
        c, length = _need(q, "C", "L")
        return {"value": match_threshold_D(c, length)}
    if name == "p":
        eps, delta = _need(q, "epsilon", "delta")
        params = params_from_epsilon(eps, delta)
        return {"value": params.flip_probability, "K": params.marked_bits}
    raise UsageError(f"unknown bound {name!r}")


BOUND_NAMES = ("infcap", "error", "density", "joint", "marginal", "psub", "prnd", "gain",
               "compose", "privacy", "budget", "gamma", "threshold", "p")


def cmd_analyze(args):
    params = _parse_params(args.params)
    result = _bound_value(args.name, params)
    _emit({"name": args.name, "inputs": params, **result}, args.out)


def _ratio(text):
    try:
        a, b = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"ratio {text!r} is not of the form a:b") from None
    if a <= 0 or b <= 0:
        raise UsageError("ratio parts must be positive")
    return a, b


def cmd_share(args):
    db, schema = _load_table(args.db, args.schema)
    key, source = _load_key(args)
    split = solve_budget(args.epsilon0, args.delta_prime, args.recipients, args.epsilon)
    a, b = _ratio(args.ratio)
    eps2 = split.total * a / (a + b)
    config = SvtConfig(
        epsilon=args.epsilon, epsilon2=eps2, epsilon3=split.total - eps2,
        sensitivity=_sensitivity(args, schema, db), recipients=args.recipients,
        delta_prime=args.delta_prime, gamma=args.gamma, gamma_basis=args.gamma_basis,
        density_on=args.density_on, selection=args.selection, max_trials=args.max_trials,
        rng_seed=args.seed,
    )
    copies, ledger = share_multi(db, config, key)
    out = Path(args.out_dir)
    outputs = []
    for record, copy in zip(ledger.recipients, copies):
        path = out / f"sp-{record.recipient}.csv"
        write_csv(copy, schema, path)
        outputs.append(path)
    write_json(ledger.to_dict(include_noise=True), out / "ledger.json")
    write_json(ledger.to_dict(include_noise=False), out / "summary.json")
    write_json(ledger.registry(), out / "sps.json")
    outputs += [out / "ledger.json", out / "summary.json", out / "sps.json"]
    _manifest(out / "share", "share", {
        "epsilon": args.epsilon, "epsilon0": args.epsilon0, "delta_prime": args.delta_prime,
        "recipients": args.recipients, "epsilon2": config.epsilon2, "epsilon3": config.epsilon3,
        "gamma": config.threshold(db), "gamma_basis": args.gamma_basis,
        "density_on": args.density_on, "selection": args.selection, "key_source": source,
    }, [args.db, args.schema], seeds={"noise": args.seed}, outputs=outputs)
    print(f"released {ledger.shared} copies after {ledger.total_trials} trials; "
          f"epsilon0={ledger.epsilon0:.4f} delta0={ledger.delta0:g}")


def cmd_utility(args):
    schema = load_schema(args.schema)
    original = read_csv(args.original, schema)
    shared = read_csv(args.shared, schema)
    doc = {
        "variance_change": dict(zip(original.attribute_names, variance_change(original, shared).tolist())),
        "density": fingerprint_density(original, shared),
        "changed_fraction": changed_entry_fraction(original, shared),
    }
    if args.query:
        try:
            query = QuerySpec.from_dict(json.loads(Path(args.query).read_text()))
        except FileNotFoundError:
            raise SchemaError(f"query file not found: {args.query}") from None
        doc["query_accuracy"] = query_accuracy(original, shared, query)
    _emit(doc, args.out)


def cmd_baseline(args):
    db, schema = _load_table(args.db, args.schema)
    key, source = _load_key(args)
    shared = two_stage_baseline(
        db, args.epsilon, key, args.sp_id.encode("utf-8"), args.marking_fraction,
        _sensitivity(args, schema, db), args.seed, args.selection,
    )
    write_csv(shared, schema, args.out)
    _manifest(args.out, "baseline", {
        "epsilon": args.epsilon, "marking_fraction": args.marking_fraction,
        "selection": args.selection, "key_source": source,
    }, [args.db, args.schema], seeds={"randomized_response": args.seed})


def cmd_report(args):
    from . import experiments, plotting
    from .synthetic import nursery_full_factorial, random_database

    out = Path(args.out_dir)
    if args.records:
        db = random_database([3, 5, 4, 4, 3, 2, 3, 3], args.records, args.seed)
    else:
        db = nursery_full_factorial()
    eps_list = [float(e) for e in args.epsilons.split(",")]
    lines = []
    if args.experiment == "robustness":
        rows = [experiments.robustness_runs(db, e, args.gamma, args.runs, args.seed,
                                            selection=args.selection, flip_mode=args.flip_mode)
                for e in eps_list]
        lines.append("epsilon,p,changed_fraction,mean_matches,min_matches,max_matches")
        for r in rows:
            lines.append(f"{r.epsilon:g},{r.flip_probability:.6f},{r.changed_fraction:.6f},"
                         f"{r.mean_matches:.2f},{min(r.matches)},{max(r.matches)}")
        figure = plotting.robustness_figure(rows)
    elif args.experiment == "infcap":
        rows = experiments.infcap_runs(db, eps_list, args.runs, args.seed, args.selection)
        lines.append("epsilon,run,worst_gap,max_infcap,violations")
        for r in rows:
            lines.append(f"{r.epsilon:g},{r.run},{r.worst_gap:.6f},{r.max_infcap:.6f},{r.violations}")
        figure = plotting.infcap_figure(rows)
    elif args.experiment == "svt":
        ratios = ["9:1", "7:1", "5:1", "3:1", "1:1"]
        totals = [
            experiments.svt_trial_counts(db, _ratio(r), args.comparison_budget, eps_list[0],
                                         args.recipients, args.runs, args.seed,
                                         selection=args.selection, density_on=args.density_on,
                                         gamma_basis=args.gamma_basis)
            for r in ratios
        ]
        lines.append("ratio,mean_trials,min_trials,max_trials")
        for r, t in zip(ratios, totals):
            lines.append(f"{r},{np.mean(t):.2f},{min(t)},{max(t)}")
        figure = plotting.svt_figure(ratios, totals)
    else:
        rows = [experiments.utility_comparison(db, e, args.seed, selection=args.selection)
                for e in eps_list]
        names = db.attribute_names
        lines.append("epsilon,attribute,ours,baseline")
        for r in rows:
            for n, a, b in zip(names, r.ours_variance_change, r.baseline_variance_change):
                lines.append(f"{r.epsilon:g},{n},{a:.6f},{b:.6f}")
        figure = plotting.utility_figure(rows, names)
    csv_path = out / f"{args.experiment}.csv"
    png_path = out / f"{args.experiment}.png"
    atomic_write(csv_path, "\n".join(lines) + "\n")
    atomic_write(png_path, figure)
    _manifest(out / args.experiment, f"report {args.experiment}", {
        k: v for k, v in vars(args).items() if k not in ("func", "out_dir", "verbose")
    }, [], seeds={"report": args.seed}, outputs=[csv_path])
    print(f"wrote {csv_path} and {png_path}")


# parser ----------------------------------------------------------------------

def _positive_float(text):
    value = float(text)
    if not value > 0 or math.isinf(value):
        raise argparse.ArgumentTypeError(f"{text} is not a positive number")
    return value


def _probability(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return value


def _add_key(p):
    p.add_argument("--key-file", help=f"file holding the owner secret (or set {KEY_ENV_VAR})")


def _add_marking(p, epsilon_required=True):
    p.add_argument("--epsilon", type=_positive_float, required=epsilon_required,
                   help="entry-level privacy budget ε")
    p.add_argument("--delta", type=int, help="sensitivity Δ override (defaults to the schema)")
    p.add_argument("--p", type=float, help="flip probability p override (>= the ε minimum)")
    p.add_argument("--length", type=int, default=128, help="fingerprint length L")
    p.add_argument("--selection", choices=("floor", "exact"), default="floor",
                   help="position selection rule")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpfp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="write a fresh random secret key")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("fingerprint", help="mark one recipient copy")
    p.add_argument("--db", required=True)
    p.add_argument("--schema", required=True)
    _add_marking(p)
    _add_key(p)
    p.add_argument("--sp-id", required=True, help="recipient internal ID (text)")
    p.add_argument("--out", required=True)
    p.add_argument("--marks", help="write applied marks here (owner-only debug output)")
    p.add_argument("--registry", help="add the recipient to this registry JSON")
    p.set_defaults(func=cmd_fingerprint)

    p = sub.add_parser("extract", help="recover a fingerprint from a leaked copy")
    p.add_argument("--original", required=True)
    p.add_argument("--leak", required=True)
    p.add_argument("--schema", required=True)
    _add_marking(p)
    _add_key(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("detect", help="accuse a recipient from an extraction")
    p.add_argument("--extraction", required=True)
    p.add_argument("--registry", required=True, help="JSON mapping recipient name to hex internal ID")
    _add_key(p)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--recipients", type=int, help="number of recipients C (sets D)")
    group.add_argument("--threshold", type=int, help="match threshold D")
    p.add_argument("--out")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("attack", help="simulate an attack on a copy")
    p.add_argument("--kind", choices=("flip", "subset", "corr"), required=True)
    p.add_argument("--db", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--gamma", type=_probability, help="γ_rnd (flip) or γ_sub (subset)")
    p.add_argument("--tau", type=float, help="correlation threshold τ")
    p.add_argument("--flip-mode", choices=("flip", "resample"), default="flip")
    p.add_argument("--delta", type=int, help="sensitivity Δ override")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ref-joint", help="reference distributions JSON (see 'distributions')")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("distributions", help="empirical marginals and pairwise joints")
    p.add_argument("--db", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_distributions)

    p = sub.add_parser("analyze", help="evaluate closed-form quantities")
    asub = p.add_subparsers(dest="what", required=True)
    b = asub.add_parser("bound")
    b.add_argument("--name", choices=BOUND_NAMES, required=True)
    b.add_argument("--params", nargs="*", metavar="KEY=VALUE")
    b.add_argument("--out")
    b.set_defaults(func=cmd_analyze)

    p = sub.add_parser("share", help="release copies to C recipients with noisy-threshold ID search")
    p.add_argument("--db", required=True)
    p.add_argument("--schema", required=True)
    _add_key(p)
    p.add_argument("--recipients", type=int, required=True, help="number of recipients C")
    p.add_argument("--epsilon0", type=_positive_float, required=True, help="total budget ε₀")
    p.add_argument("--delta-prime", type=_probability, required=True, help="composition slack δ′")
    p.add_argument("--epsilon", type=_positive_float, required=True, help="insertion budget ε")
    p.add_argument("--gamma", type=float, help="density threshold Γ (default from p, N, K)")
    p.add_argument("--gamma-basis", choices=("K", "T"), default="K")
    p.add_argument("--density-on", choices=("raw", "released"), default="raw")
    p.add_argument("--selection", choices=("floor", "exact"), default="floor")
    p.add_argument("--ratio", default="1:1", help="ε₂:ε₃ split")
    p.add_argument("--delta", type=int, help="sensitivity Δ override")
    p.add_argument("--max-trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_share)

    p = sub.add_parser("utility", help="compare a shared copy with the original")
    p.add_argument("--original", required=True)
    p.add_argument("--shared", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--query", help="JSON query {attribute: value, ...}")
    p.add_argument("--out")
    p.set_defaults(func=cmd_utility)

    p = sub.add_parser("baseline", help="randomized response followed by fingerprinting")
    p.add_argument("--db", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--epsilon", type=_positive_float, required=True)
    p.add_argument("--delta", type=int)
    _add_key(p)
    p.add_argument("--sp-id", required=True)
    p.add_argument("--marking-fraction", type=float, help="λ; default matches our changed-entry rate")
    p.add_argument("--selection", choices=("floor", "exact"), default="exact")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("report", help="run a synthetic experiment and render CSV + PNG")
    p.add_argument("experiment", choices=("robustness", "infcap", "svt", "utility"))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--epsilons", default="1,2,3,4,5,6,7")
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--records", type=int, help="random table size (default: full nursery grid)")
    p.add_argument("--gamma", type=float, default=0.8, help="γ_rnd for robustness")
    p.add_argument("--flip-mode", choices=("flip", "resample"), default="flip")
    p.add_argument("--selection", choices=("floor", "exact"), default="floor")
    p.add_argument("--recipients", type=int, default=100)
    p.add_argument("--comparison-budget", type=float, default=0.002, help="ε₂+ε₃ for svt")
    p.add_argument("--density-on", choices=("raw", "released"), default="raw")
    p.add_argument("--gamma-basis", choices=("K", "T"), default="K")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_report)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"dpfp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetInfeasibleError as exc:
        print(f"dpfp: infeasible budget: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (SchemaError, AlignmentError, ConfigurationError) as exc:
        print(f"dpfp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ParameterError as exc:
        print(f"dpfp: invalid parameter: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FingerprintError as exc:
        print(f"dpfp: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
