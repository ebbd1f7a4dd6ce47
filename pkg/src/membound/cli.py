"""Command-line surface for the membership-testing toolkit.

One subcommand per capability: closed-form optimizers, frontier sweeps,
the filter lifecycle (build / query / bench), brute-force oracles, and
histogram KL estimation from score files.  Output is plain text with 6
significant digits, or full-precision JSON with ``--json``; frontier
sweeps emit the CSV schema from :mod:`membound.rate_distortion`.

Exit codes: 0 on success, 1 on domain errors (reported as a one-line
JSON object on stderr), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from functools import partial
from pathlib import Path
from typing import Optional, Sequence

from . import bruteforce
from . import filter as filter_mod
from . import measures
from . import rate_distortion as rd
from .errors import (
    DistributionError,
    DomainError,
    EnumerationTooLargeError,
    FieldError,
    FileFormatError,
    FormatError,
    InfeasibleError,
    MemboundError,
    TrivialRegimeError,
)

__all__ = ["main"]

_ERROR_SLUGS = (
    (TrivialRegimeError, "trivial-regime"),
    (InfeasibleError, "infeasible"),
    (EnumerationTooLargeError, "enumeration-too-large"),
    (FileFormatError, "file-format"),
    (DistributionError, "distribution"),
    (FieldError, "field"),
    (FormatError, "format"),
    (DomainError, "domain"),
    (MemboundError, "domain"),
    (OSError, "io"),
)


def _emit_error(exc: BaseException) -> None:
    slug = "error"
    for cls, name in _ERROR_SLUGS:
        if isinstance(exc, cls):
            slug = name
            break
    line = json.dumps({"error": slug, "message": str(exc)})
    print(line, file=sys.stderr)


def _fmt(x: float) -> str:
    return "%.6g" % x


def _atoms_text(dist: measures.DiscreteDistribution) -> str:
    return " ".join(f"({_fmt(loc)}, {_fmt(mass)})" for loc, mass in dist.atoms)


def _atoms_json(dist: measures.DiscreteDistribution) -> dict:
    return {"atoms": [[loc, mass] for loc, mass in dist.atoms]}


def _write(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _emit_doc(args, lines: list[str], doc: dict) -> None:
    if args.json:
        _write(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    else:
        _write("\n".join(lines) + "\n", args.out)


def _parse_p_values(text: str) -> list[float]:
    """A single decimal, or ``sweep:start,stop,points,{log|linear}``."""
    if text.startswith("sweep:"):
        parts = text[len("sweep:") :].split(",")
        if len(parts) != 4:
            raise DomainError(
                f"--p sweep must be sweep:start,stop,points,scale; got {text!r}"
            )
        try:
            start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise DomainError(f"malformed sweep bounds in {text!r}") from exc
        if points < 1:
            raise DomainError(f"sweep needs at least 1 point; got {points}")
        import numpy as np

        if parts[3] == "log":
            if not (start > 0 and stop > 0):
                raise DomainError("log sweeps need positive endpoints")
            values = np.geomspace(start, stop, points)
        elif parts[3] == "linear":
            values = np.linspace(start, stop, points)
        else:
            raise DomainError(f"sweep scale must be log or linear; got {parts[3]!r}")
        return [float(v) for v in values]
    try:
        return [float(text)]
    except ValueError as exc:
        raise DomainError(f"--p must be a decimal or a sweep; got {text!r}") from exc


def _metric_k(name: str) -> rd.ErrorMetric:
    return rd.ErrorMetric.fnr() if name == "fnr" else rd.ErrorMetric.logloss_key()


def _metric_n(name: str) -> rd.ErrorMetric:
    return rd.ErrorMetric.fpr() if name == "fpr" else rd.ErrorMetric.logloss_nonkey()


# ---------------------------------------------------------------------------
# subcommand handlers


def _run_optimal(args) -> int:
    if args.family == "binary":
        best = rd.optimal_binary(args.eps_k, args.eps_n)
        lines = [f"rate_bits_per_key: {_fmt(best.rate_bits_per_key)}"]
        doc = {"rate_bits_per_key": best.rate_bits_per_key}
    else:
        best = rd.optimal_logloss(args.eps_k, args.eps_n)
        lines = [
            f"x_star: {_fmt(best.x_star)}",
            f"q_star: {_fmt(best.q_star)}",
            f"rate_bits_per_key: {_fmt(best.rate_bits_per_key)}",
        ]
        doc = {
            "x_star": best.x_star,
            "q_star": best.q_star,
            "rate_bits_per_key": best.rate_bits_per_key,
        }
    lines.append(f"mu_K: {_atoms_text(best.mu_K)}")
    lines.append(f"mu_N: {_atoms_text(best.mu_N)}")
    doc["mu_K"] = _atoms_json(best.mu_K)
    doc["mu_N"] = _atoms_json(best.mu_N)
    _emit_doc(args, lines, doc)
    return 0


def _run_frontier(args) -> int:
    p_values = _parse_p_values(args.p)
    metric_K = _metric_k(args.metric_k)
    metric_N = _metric_n(args.metric_n)
    points = [
        rd.solve_rp(p, metric_K, metric_N, args.eps_k, args.eps_n) for p in p_values
    ]
    if args.json:
        doc = {
            "points": [
                {
                    "p": pt.p,
                    "eps_K": pt.eps_K,
                    "eps_N": pt.eps_N,
                    "rate_bits_per_key": pt.rate_bits_per_key,
                    "dual_K": pt.dual_K,
                    "dual_N": pt.dual_N,
                    "converged": pt.converged,
                    "mu_K": _atoms_json(pt.mu_K),
                    "mu_N": _atoms_json(pt.mu_N),
                }
                for pt in points
            ]
        }
        _write(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
        return 0
    csv_text = rd.frontier_to_csv(points)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
        sidecar = Path(args.out + ".dists.json")
        sidecar.write_text(rd.frontier_sidecar(points), encoding="utf-8")
    else:
        sys.stdout.write(csv_text)
    return 0


def _run_filter_build(args) -> int:
    keys = filter_mod.read_keys(args.keys)
    params = filter_mod.derive_params(len(keys), args.eps_k, args.eps_n, args.seed)
    state, report = filter_mod.build(params, keys)
    if state is None:
        raise DomainError(
            f"candidate budget exhausted after {report.candidates_tried} tries "
            f"(best satisfied {report.satisfied_keys} of {params.threshold} needed)"
        )
    Path(args.out).write_bytes(filter_mod.serialize(state))
    lines = [
        f"success: {'true' if report.success else 'false'}",
        f"n: {params.n}",
        f"q: {params.q}",
        f"m: {params.m}",
        f"satisfied_keys: {report.satisfied_keys}",
        f"candidates_tried: {report.candidates_tried}",
        f"bits_payload: {report.bits_payload}",
        f"bits_per_key: {_fmt(report.bits_payload / params.n)}",
        f"out: {args.out}",
    ]
    doc = {
        "success": report.success,
        "n": params.n,
        "q": params.q,
        "m": params.m,
        "satisfied_keys": report.satisfied_keys,
        "candidates_tried": report.candidates_tried,
        "bits_payload": report.bits_payload,
        "bits_per_key": report.bits_payload / params.n,
        "out": args.out,
    }
    out = args.out
    args.out = None  # the report goes to stdout; --out holds the filter blob
    _emit_doc(args, lines, doc)
    args.out = out
    return 0


def _run_filter_query(args) -> int:
    state = filter_mod.deserialize(Path(args.state).read_bytes())
    answer = filter_mod.query(state, args.elem.encode("utf-8"))
    _write(f"{answer}\n", args.out)
    return 0


def _run_filter_bench(args) -> int:
    state = filter_mod.deserialize(Path(args.state).read_bytes())
    keys = filter_mod.read_keys(args.keys)
    rates = filter_mod.measure_rates(
        partial(filter_mod.query_many, state),
        keys,
        filter_mod.random_bytes_sampler(args.seed, 8),
        args.trials,
    )
    target = 1.0 / state.params.q
    lines = [
        f"fnr_hat: {_fmt(rates.fnr_hat)}",
        f"fnr_ci99: [{_fmt(rates.fnr_ci[0])}, {_fmt(rates.fnr_ci[1])}]",
        f"fpr_hat: {_fmt(rates.fpr_hat)}",
        f"fpr_ci99: [{_fmt(rates.fpr_ci[0])}, {_fmt(rates.fpr_ci[1])}]",
        f"target_fpr: {_fmt(target)}",
        f"trials: {rates.trials}",
    ]
    doc = {
        "fnr_hat": rates.fnr_hat,
        "fnr_ci99": list(rates.fnr_ci),
        "fpr_hat": rates.fpr_hat,
        "fpr_ci99": list(rates.fpr_ci),
        "target_fpr": target,
        "trials": rates.trials,
    }
    _emit_doc(args, lines, doc)
    return 0


def _run_oracle_tiny(args) -> int:
    spec = bruteforce.TinyTesterSpec(args.u, args.n, args.bits)
    frontier = bruteforce.optimal_tiny_tester(spec)
    lines = []
    points = []
    for pt in frontier:
        lines.append(
            f"eps_K: {pt.eps_K} ({_fmt(float(pt.eps_K))})  "
            f"eps_N: {pt.eps_N} ({_fmt(float(pt.eps_N))})"
        )
        points.append(
            {
                "eps_K": [pt.eps_K.numerator, pt.eps_K.denominator],
                "eps_N": [pt.eps_N.numerator, pt.eps_N.denominator],
                "eps_K_float": float(pt.eps_K),
                "eps_N_float": float(pt.eps_N),
                "init": list(pt.init),
                "table": [list(row) for row in pt.table],
            }
        )
    _emit_doc(args, lines, {"points": points})
    return 0


def _run_oracle_fpr(args) -> int:
    state = filter_mod.deserialize(Path(args.state).read_bytes())
    fpr = bruteforce.exhaustive_fpr(state.y)
    target = 1.0 / state.params.q
    lines = [
        f"fpr_exact: {fpr}",
        f"fpr_float: {_fmt(float(fpr))}",
        f"target_fpr: {_fmt(target)}",
        f"matches_target: {'true' if float(fpr) == target else 'false'}",
    ]
    doc = {
        "fpr_exact": [fpr.numerator, fpr.denominator],
        "fpr_float": float(fpr),
        "target_fpr": target,
        "matches_target": float(fpr) == target,
    }
    _emit_doc(args, lines, doc)
    return 0


def _run_estimate_kl(args) -> int:
    facts = measures.read_scores(args.facts)
    nonfacts = measures.read_scores(args.nonfacts)
    hist_k = measures.estimate_from_samples(facts, args.bins)
    hist_n = measures.estimate_from_samples(nonfacts, args.bins)
    kl_bits = measures.kl_divergence(hist_k, hist_n)
    loss_k = rd.ErrorMetric.logloss_key()
    loss_n = rd.ErrorMetric.logloss_nonkey()
    eps_k_hat = sum(rd.metric_value(loss_k, s) for s in facts) / len(facts)
    eps_n_hat = sum(rd.metric_value(loss_n, s) for s in nonfacts) / len(nonfacts)
    best = rd.optimal_logloss(eps_k_hat, eps_n_hat)
    lines = [
        f"kl_bits: {_fmt(kl_bits)}",
        f"eps_k_hat_nats: {_fmt(eps_k_hat)}",
        f"eps_n_hat_nats: {_fmt(eps_n_hat)}",
        f"x_star: {_fmt(best.x_star)}",
        f"q_star: {_fmt(best.q_star)}",
        f"logloss_rate_bits_per_key: {_fmt(best.rate_bits_per_key)}",
    ]
    doc = {
        "kl_bits": kl_bits,
        "eps_k_hat_nats": eps_k_hat,
        "eps_n_hat_nats": eps_n_hat,
        "x_star": best.x_star,
        "q_star": best.q_star,
        "logloss_rate_bits_per_key": best.rate_bits_per_key,
    }
    _emit_doc(args, lines, doc)
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--json", action="store_true", help="full-precision JSON output")
    parser.add_argument("--out", help="write output to a file instead of stdout")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="membound",
        description="Memory-error frontiers and two-sided filters for membership testing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    optimal = sub.add_parser(
        "optimal", help="closed-form optimal score distributions"
    )
    optimal_sub = optimal.add_subparsers(dest="family", required=True)
    for family in ("binary", "logloss"):
        fam = optimal_sub.add_parser(family)
        fam.add_argument("--eps-k", type=float, required=True)
        fam.add_argument("--eps-n", type=float, required=True)
        _add_common(fam)
        fam.set_defaults(func=_run_optimal)

    frontier = sub.add_parser("frontier", help="memory-error frontier sweep (CSV)")
    frontier.add_argument(
        "--p", required=True, help="decimal or sweep:start,stop,points,{log|linear}"
    )
    frontier.add_argument("--metric-k", choices=("fnr", "logloss"), default="fnr")
    frontier.add_argument("--metric-n", choices=("fpr", "logloss"), default="fpr")
    frontier.add_argument("--eps-k", type=float, required=True)
    frontier.add_argument("--eps-n", type=float, required=True)
    _add_common(frontier)
    frontier.set_defaults(func=_run_frontier)

    filt = sub.add_parser("filter", help="two-sided filter lifecycle")
    filter_sub = filt.add_subparsers(dest="action", required=True)

    fbuild = filter_sub.add_parser("build")
    fbuild.add_argument("--keys", required=True, help="key file, one key per line")
    fbuild.add_argument("--eps-k", type=float, required=True)
    fbuild.add_argument("--eps-n", type=float, required=True)
    fbuild.add_argument("--seed", type=int, default=0)
    fbuild.add_argument("--json", action="store_true")
    fbuild.add_argument("--out", required=True, help="path for the serialized filter")
    fbuild.set_defaults(func=_run_filter_build)

    fquery = filter_sub.add_parser("query")
    fquery.add_argument("--state", required=True)
    fquery.add_argument("--elem", required=True)
    _add_common(fquery)
    fquery.set_defaults(func=_run_filter_query)

    fbench = filter_sub.add_parser("bench")
    fbench.add_argument("--state", required=True)
    fbench.add_argument("--keys", required=True)
    fbench.add_argument("--trials", type=int, default=100000)
    fbench.add_argument("--seed", type=int, default=0, help="non-key sampler seed")
    _add_common(fbench)
    fbench.set_defaults(func=_run_filter_bench)

    oracle = sub.add_parser("oracle", help="exhaustive small-instance oracles")
    oracle_sub = oracle.add_subparsers(dest="kind", required=True)

    otiny = oracle_sub.add_parser("tiny")
    otiny.add_argument("--u", type=int, required=True)
    otiny.add_argument("--n", type=int, required=True)
    otiny.add_argument("--bits", type=int, required=True)
    _add_common(otiny)
    otiny.set_defaults(func=_run_oracle_tiny)

    ofpr = oracle_sub.add_parser("fpr")
    ofpr.add_argument("--state", required=True)
    _add_common(ofpr)
    ofpr.set_defaults(func=_run_oracle_fpr)

    estimate = sub.add_parser(
        "estimate-kl", help="histogram KL and log-loss rate from score files"
    )
    estimate.add_argument("facts", help="score file for keys, one score per line")
    estimate.add_argument("nonfacts", help="score file for non-keys")
    estimate.add_argument("--bins", type=int, default=50)
    _add_common(estimate)
    estimate.set_defaults(func=_run_estimate_kl)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (MemboundError, OSError) as exc:
        _emit_error(exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
