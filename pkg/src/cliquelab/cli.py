"""Command-line experiment harness.

Every run prints one report (JSON by default, or a one-row CSV) containing the
experiment name, the resolved parameters, the estimates, their standard
errors, sample counts, the master seed, the elapsed time and the package
version.  Reports go to stdout and, when ``--output`` or ``CLIQUELAB_OUTPUT_DIR``
is given, to a file as well.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ArgumentError, CliqueLabError

OUTPUT_DIR_ENV = "CLIQUELAB_OUTPUT_DIR"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def render(report: dict, fmt: str) -> str:
    report = _jsonable(report)
    if fmt == "json":
        return json.dumps(report, indent=2) + "\n"
    row = _flatten(report)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
    writer.writeheader()
    writer.writerow(row)
    return buf.getvalue()


def _report(experiment, params, estimates, stderrs, samples, seed, **extra):
    return {"experiment": experiment, "params": params, "estimates": estimates, "stderrs": stderrs,
            "samples": samples, "seed": seed, **extra}


# ---------------------------------------------------------------- commands


def cmd_sample(a):
    from .graphs import NullModel, PlantedModel, write_graph
    from .streams import stream

    rng = stream(a.seed, "cli/sample")
    if a.k is None:
        model, cliques = NullModel(a.n), None
        batch = model.sample_batch(a.count, rng)
    else:
        model = PlantedModel(a.n, a.k)
        batch, X = model.sample_batch_with_cliques(a.count, rng)
        cliques = X.sum(axis=1).tolist()
    counts = batch.edge_counts()
    if a.graph_out:
        write_graph(a.graph_out, batch[0], binary=a.graph_out.endswith(".bin"))
    return _report("sample", {"n": a.n, "k": a.k, "count": a.count, "graph_out": a.graph_out},
                   {"mean_edge_count": float(counts.mean()), "edge_counts": counts.tolist(),
                    "clique_sizes": cliques},
                   {"mean_edge_count": float(counts.std(ddof=1) / math.sqrt(a.count)) if a.count > 1 else None},
                   a.count, a.seed)


def _named_test(name):
    from .distinguish import EDGE_COUNT_TEST, constant_test

    if name == "edge-count":
        return EDGE_COUNT_TEST
    if name == "constant":
        return constant_test(1.0)
    raise ArgumentError(f"unknown test {name!r}")


def cmd_adv(a):
    from .distinguish import adv_montecarlo
    from .graphs import NullModel, PlantedModel

    est = adv_montecarlo(_named_test(a.test), PlantedModel(a.n, a.k), NullModel(a.n), a.samples, a.seed,
                         workers=a.workers)
    return _report("adv", {"n": a.n, "k": a.k, "test": a.test}, {"advantage": est.estimate, "signed": est.signed},
                   {"advantage": est.stderr}, a.samples, a.seed)


def cmd_lowdeg(a):
    from .distinguish import claim_2_5_estimate, low_degree_advantage_closed_form
    from .fourier import OrbitBasis, enumerate_monomials
    from .graphs import PlantedModel

    cf = low_degree_advantage_closed_form(a.n, a.k, a.d, a.mode)
    estimates = {"closed_form": cf.value, "r2": cf.r2, "lower": cf.lower}
    stderrs = {}
    if a.samples:
        if a.seed is None:
            raise ArgumentError("--seed is required with --samples")
        basis = enumerate_monomials(a.n, a.d, a.mode, cap=a.basis_cap)
        target = OrbitBasis(basis) if a.symmetric else basis
        est = claim_2_5_estimate(target, PlantedModel(a.n, a.k), a.samples, a.seed, workers=a.workers)
        estimates["split_sample"] = est.estimate
        stderrs["split_sample"] = est.stderr
    return _report("lowdeg", {"n": a.n, "k": a.k, "d": a.d, "mode": a.mode, "symmetric": a.symmetric},
                   estimates, stderrs, a.samples or 0, a.seed, estimate=cf.value)


def cmd_edge_test(a):
    from .distinguish import (EDGE_COUNT_TEST, adv_montecarlo, edge_count_advantage_exact,
                              edge_count_advantage_predicted)
    from .graphs import NullModel, PlantedModel

    est = adv_montecarlo(EDGE_COUNT_TEST, PlantedModel(a.n, a.k), NullModel(a.n), a.samples, a.seed,
                         workers=a.workers)
    return _report("edge-test", {"n": a.n, "k": a.k},
                   {"advantage": est.estimate, "exact": edge_count_advantage_exact(a.n, a.k),
                    "predicted": edge_count_advantage_predicted(a.n, a.k)},
                   {"advantage": est.stderr}, a.samples, a.seed, estimate=est.estimate, stderr=est.stderr)


def cmd_noise_verify(a):
    from .fourier import Monomial
    from .graphs import sample_null
    from .noise import ChainParams, apply_T_montecarlo, eigenvalue
    from .distinguish import TestFunction
    from . import oracle
    from .graphs import num_slots
    from .streams import stream

    N = num_slots(a.n)
    counts = oracle._mask_vertex_counts(a.n) if a.n <= a.cap else None
    exact = {}
    for p in a.p:
        chain = ChainParams(p, permute=a.permute)
        if counts is None:
            break
        worst = 0.0
        for S in range(1 << N):
            table = oracle._hadamard(N)[S].copy()
            T = oracle.exact_apply_T_direct(table, a.n, chain, a.cap)
            if a.permute:
                T = oracle.exact_apply_T(table, a.n, p, symmetrize=True, cap=a.cap) - T
                worst = max(worst, float(np.max(np.abs(T))))
                continue
            coeffs = oracle.fourier_coefficients(T, a.n)
            target = np.zeros(1 << N)
            target[S] = p ** counts[S]
            worst = max(worst, float(np.max(np.abs(coeffs - target))))
        exact[str(p)] = worst
    estimates = {"exact_max_error": exact}
    stderrs = {}
    if a.samples:
        if a.seed is None:
            raise ArgumentError("--seed is required with --samples")
        G = sample_null(a.mc_n, stream(a.seed, "cli/noise-verify/graph"))
        S = Monomial.from_pairs([(0, 1), (1, 2)], a.mc_n)
        f = TestFunction(batch_fn=lambda b: b.signs(list(S.edges)).prod(axis=1).astype(np.float64), label="path")
        for p in a.p:
            est = apply_T_montecarlo(f, G, ChainParams(p), a.samples, a.seed, workers=a.workers)
            target = eigenvalue(S, p) * G.sign(0, 1) * G.sign(1, 2)
            estimates[f"mc_{p}"] = {"estimate": est.estimate, "expected": target}
            stderrs[f"mc_{p}"] = est.stderr
    return _report("noise-verify", {"n": a.n, "p": a.p, "permute": a.permute, "mc_n": a.mc_n}, estimates,
                   stderrs, a.samples or 0, a.seed)


def cmd_oracle(a):
    from .distinguish import low_degree_advantage_closed_form
    from .graphs import ModelParams
    from .oracle import exact_low_degree_optimum

    exact = exact_low_degree_optimum(ModelParams(a.n, a.k), a.d, a.mode, cap=a.cap)
    closed = low_degree_advantage_closed_form(a.n, a.k, a.d, a.mode).value
    return _report("oracle", {"n": a.n, "k": a.k, "d": a.d, "mode": a.mode, "cap": a.cap},
                   {"exact": exact, "closed_form": closed, "difference": exact - closed}, {}, 0, None,
                   estimate=exact)


def cmd_hardcore_build(a):
    from .graphs import PlantedModel
    from .hardcore import SGDConfig, build_hardcore

    config = SGDConfig(batch_size=a.batch_size, max_iters=a.max_iters, check_every=a.check_every,
                       validation_size=a.validation_size)
    sampler = build_hardcore(PlantedModel(a.n, a.k), a.d, a.delta, config, a.seed, c=a.c,
                             check_gate=not a.no_gate, symmetric=not a.full_basis)
    sol = sampler.solution
    path = sol.save(a.out) if a.out else None
    return _report("hardcore-build", {"n": a.n, "k": a.k, "d": a.d, "delta": a.delta, "out": a.out,
                                      **config.__dict__},
                   {"grad_norm": sol.grad_norm, "converged": sol.converged, "iterations": sol.iterations,
                    "orbit_coeffs": sol.orbit_coeffs if sol.orbit is not None else None},
                   {"grad_norm": sol.grad_norm_stderr}, a.validation_size, a.seed,
                   solution=str(path) if path else None)


def cmd_hardcore_eval(a):
    from .graphs import PlantedModel
    from .hardcore import DualSolution, HardcoreSampler, hardcore_report

    sol = DualSolution.load(a.solution)
    rep = hardcore_report(HardcoreSampler(sol, PlantedModel(sol.n, a.k)), a.samples, a.seed, a.validation_size)
    d = rep.to_dict()
    return _report("hardcore-eval", {"solution": a.solution, "k": a.k, "validation_size": a.validation_size},
                   {"advantage": rep.advantage, "acceptance_rate": rep.acceptance_rate, "grad_norm": rep.grad_norm,
                    "density_bound": rep.density_bound, "baseline": rep.baseline, "converged": rep.converged},
                   {"advantage": rep.advantage_stderr, "acceptance_rate": rep.acceptance_stderr,
                    "grad_norm": rep.grad_norm_stderr}, a.samples, a.seed, report=d)


def cmd_amplify(a):
    from .amplify import derive_params, evaluate_reduction
    from .distinguish import EDGE_COUNT_TEST
    from .fourier import enumerate_monomials
    from .graphs import PlantedModel
    from .noise import ChainParams

    params = derive_params(a.alpha, a.beta, a.d, a.n, delta_constant=a.delta_constant)
    keep = a.p if a.p is not None else params.p
    if a.threshold is None:
        log10_threshold = params.log10_delta_thm - math.log10(20.0)
        # the theorem's threshold is astronomically large at desk scale; past float range B is identically -1
        threshold = 10.0**log10_threshold if log10_threshold < 300 else math.inf
    else:
        threshold = a.threshold
        log10_threshold = math.log10(threshold) if threshold > 0 else -math.inf
    rep = evaluate_reduction(EDGE_COUNT_TEST, ChainParams(keep, permute=True), PlantedModel(a.n, a.k),
                             enumerate_monomials(a.n, a.d), a.samples, a.seed, threshold, a.z_count, a.y_count,
                             reduction=params, paired=a.paired)
    d = rep.to_dict()
    estimates = {"adv_A_star": d["adv_A_star"]["estimate"], "r_star": d["r_star"]["estimate"],
                 "adv_B": d["adv_B"]["estimate"], "adv_B_signed": d["adv_B"]["signed"]}
    stderrs = {"adv_A_star": d["adv_A_star"]["stderr"], "r_star": d["r_star"]["stderr"],
               "adv_B": d["adv_B"]["stderr"]}
    if rep.adv_B_paired:
        estimates["adv_B_paired"] = rep.adv_B_paired["signed"]
        stderrs["adv_B_paired"] = rep.adv_B_paired["stderr"]
    return _report("amplify", {"alpha": a.alpha, "beta": a.beta, "d": a.d, "n": a.n, "k": a.k, "p": keep,
                               "threshold": threshold if math.isfinite(threshold) else None,
                               "log10_threshold": log10_threshold if math.isfinite(log10_threshold) else None,
                               "z_count": a.z_count, "y_count": a.y_count,
                               "paired": a.paired},
                   estimates, stderrs, a.samples, a.seed, derived=params.to_dict())


def _parse_pairs(text):
    pairs = []
    for item in text.split(","):
        i, j = item.split("-")
        pairs.append((int(i), int(j)))
    return pairs


def _parse_ints(text):
    return [int(v) for v in text.split(",") if v.strip()] if text else []


def cmd_claim65(a):
    from .anticoncentration import SubspaceElement, claim_6_5_check
    from .fourier import Monomial

    A = Monomial.from_pairs(_parse_pairs(a.edges), a.n)
    r = np.array([float(v) for v in a.r.split(",")]) if a.r else np.ones(1 << A.num_vertices)
    w = SubspaceElement(A, _parse_ints(a.B), r, "W'", a.q, a.p)
    rep = claim_6_5_check(w, a.p, a.q, a.samples, a.seed, probes=a.probes, norm_samples=a.norm_samples)
    return _report("anticonc-claim65", {"n": a.n, "edges": a.edges, "B": a.B, "p": a.p, "q": a.q,
                                        "probes": a.probes},
                   {"factor": rep.factor, "factor_printed": rep.factor_printed, "bound": rep.bound,
                    "norm_ratio": rep.norm_ratio, "probes_within_4se": rep.probes_within_4se,
                    "mc_norm_ratio": rep.mc_norm_ratio},
                   {"mc_norm_ratio": rep.mc_norm_ratio_stderr}, a.samples, a.seed, report=rep.to_dict(),
                   passed=rep.passed)


def cmd_hyper(a):
    from .anticoncentration import hypercontract_suite

    rep = hypercontract_suite(a.mode, a.dims, a.d, a.trials, a.seed, bias=a.bias)
    return _report("anticonc-hyper", {"mode": a.mode, "dims": a.dims, "d": a.d, "bias": rep.bias},
                   {"passes": rep.passes, "eight_four_passes": rep.eight_four_passes,
                    "log_convex_passes": rep.log_convex_passes, "worst_ratio": rep.worst_ratio,
                    "constant": rep.constant}, {}, a.trials, a.seed, passed=rep.passed)


def cmd_lemma62(a):
    from .anticoncentration import lemma_6_2_experiment
    from .distinguish import EDGE_COUNT_TEST

    rep = lemma_6_2_experiment(EDGE_COUNT_TEST, a.n, a.k, a.p, a.d, a.samples, a.seed, y_count=a.y_count, b=a.b)
    return _report("anticonc-lemma62", {"n": a.n, "k": a.k, "p": a.p, "d": a.d, "y_count": a.y_count, "b": a.b},
                   {"norm_f": rep.norm_f, "norm_Tf": rep.norm_Tf, "survival_ratio": rep.survival_ratio,
                    "hypothesis_held": rep.hypothesis_held, "anticonc_prob": rep.anticonc_prob},
                   {"norm_f": rep.norm_f_stderr, "norm_Tf": rep.norm_Tf_stderr, "anticonc_prob": rep.anticonc_stderr},
                   a.samples, a.seed)


def cmd_selftest(a):
    from .checks import ALL_CHECKS

    results = []
    for c in a.criteria:
        kwargs = {"drop_convention": True} if c == 1 and a.drop_convention else {}
        results.append(ALL_CHECKS[c](**kwargs))
    for r in results:
        print(r.line(), file=sys.stderr)
    report = _report("selftest", {"criteria": a.criteria, "drop_convention": a.drop_convention},
                     {str(r.criterion): r.passed for r in results}, {}, 0, None,
                     details={str(r.criterion): r.detail for r in results}, passed=all(r.passed for r in results))
    return report


# ---------------------------------------------------------------- parser


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--output", help="also write the report to this file")
    common.add_argument("--workers", type=_positive_int, default=1)
    common.add_argument("--deterministic", action="store_true", help="report elapsed_ms as 0 for byte-stable output")

    parser = argparse.ArgumentParser(prog="cliquelab", description="Planted-clique experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, stochastic=True, parent=sub, **kw):
        p = parent.add_parser(name, parents=[common], **kw)
        if stochastic:
            p.add_argument("--seed", type=int, required=True)
        p.set_defaults(fn=fn, experiment=name)
        return p

    p = add("sample", cmd_sample, help="draw null or planted graphs")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=float)
    p.add_argument("--count", type=_positive_int, default=1)
    p.add_argument("--graph-out", help="write the first graph here (.bin for binary)")

    p = add("adv", cmd_adv, help="Monte-Carlo advantage of a named test")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--test", choices=("edge-count", "constant"), default="edge-count")
    p.add_argument("--samples", type=_positive_int, default=100_000)

    p = add("lowdeg", cmd_lowdeg, stochastic=False, help="low-degree advantage")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--mode", choices=("edges", "vertices"), default="edges")
    p.add_argument("--samples", type=int, default=0, help="add a split-sample estimate")
    p.add_argument("--seed", type=int)
    p.add_argument("--symmetric", action="store_true", help="estimate in orbit coordinates")
    p.add_argument("--basis-cap", type=int, default=2_000_000)

    p = add("edge-test", cmd_edge_test, help="edge-count test against its exact and predicted advantage")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--samples", type=_positive_int, default=1_000_000)

    p = add("noise-verify", cmd_noise_verify, stochastic=False, help="eigenvalue law of the noise operator")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--p", type=float, nargs="+", default=[0.3, 0.5, 0.9])
    p.add_argument("--permute", action="store_true")
    p.add_argument("--cap", type=int, default=5)
    p.add_argument("--samples", type=int, default=0)
    p.add_argument("--mc-n", type=int, default=50)
    p.add_argument("--seed", type=int)

    p = add("oracle", cmd_oracle, stochastic=False, help="exact low-degree optimum by enumeration")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--mode", choices=("edges", "vertices"), default="edges")
    p.add_argument("--cap", type=int, default=5)

    hc = sub.add_parser("hardcore", help="build or evaluate a hard-core distribution")
    hsub = hc.add_subparsers(dest="action", required=True)
    p = add("build", cmd_hardcore_build, parent=hsub)
    p.set_defaults(experiment="hardcore-build")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--out", help="polynomial file for the solution (sidecar written next to it)")
    p.add_argument("--batch-size", type=_positive_int, default=1024)
    p.add_argument("--max-iters", type=_positive_int, default=1_000_000)
    p.add_argument("--check-every", type=_positive_int, default=50_000)
    p.add_argument("--validation-size", type=_positive_int, default=10_000_000)
    p.add_argument("--c", type=float, help="mild-hardness constant (default sqrt(3)^d)")
    p.add_argument("--no-gate", action="store_true")
    p.add_argument("--full-basis", action="store_true", help="optimize every monomial instead of orbit sums")
    p = add("eval", cmd_hardcore_eval, parent=hsub)
    p.set_defaults(experiment="hardcore-eval")
    p.add_argument("--solution", required=True)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--samples", type=_positive_int, default=1_000_000)
    p.add_argument("--validation-size", type=_positive_int, default=10_000_000)

    p = add("amplify", cmd_amplify, help="black-box reduction with the edge-count test")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--p", type=float, help="keep probability (default n^(alpha-beta))")
    p.add_argument("--threshold", type=float, help="default: delta_thm / 20")
    p.add_argument("--delta-constant", type=float, default=400.0)
    p.add_argument("--z-count", type=_positive_int, default=100_000)
    p.add_argument("--y-count", type=_positive_int, default=256)
    p.add_argument("--samples", type=_positive_int, default=10_000)
    p.add_argument("--paired", action="store_true", help="also estimate Adv(B) on coupled pairs")

    ac = sub.add_parser("anticonc", help="anticoncentration experiments")
    asub = ac.add_subparsers(dest="action", required=True)
    p = add("claim65", cmd_claim65, parent=asub)
    p.set_defaults(experiment="anticonc-claim65")
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--edges", default="0-1", help="edges of A, e.g. 0-1,1-2")
    p.add_argument("--B", default="3", help="vertex set B, e.g. 3,4")
    p.add_argument("--r", help="comma-separated table of r (default all ones)")
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--q", type=float, default=0.2)
    p.add_argument("--samples", type=_positive_int, default=20_000)
    p.add_argument("--probes", type=_positive_int, default=20)
    p.add_argument("--norm-samples", type=int, default=0)
    p = add("hyper", cmd_hyper, parent=asub)
    p.set_defaults(experiment="anticonc-hyper")
    p.add_argument("--mode", choices=("bonami", "biased_symmetric"), default="bonami")
    p.add_argument("--dims", type=int, default=10)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--trials", type=_positive_int, default=100)
    p.add_argument("--bias", type=float)
    p = add("lemma62", cmd_lemma62, parent=asub)
    p.set_defaults(experiment="anticonc-lemma62")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--k", type=float, default=10)
    p.add_argument("--p", type=float, default=0.7)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--samples", type=_positive_int, default=5000)
    p.add_argument("--y-count", type=_positive_int, default=64)
    p.add_argument("--b", type=float, default=0.1)

    p = add("selftest", cmd_selftest, stochastic=False, help="fast subset of the acceptance checks")
    p.add_argument("--criteria", type=int, nargs="+", default=[1, 2, 4, 9], choices=range(1, 11), metavar="N")
    p.add_argument("--drop-convention", action="store_true", help=argparse.SUPPRESS)
    return parser


def _output_path(args):
    if args.output:
        return Path(args.output)
    root = os.environ.get(OUTPUT_DIR_ENV)
    if root:
        seed = getattr(args, "seed", None)
        stem = args.experiment if seed is None else f"{args.experiment}-{seed}"
        return Path(root) / f"{stem}.{args.format}"
    return None


def _emit_error(exc, code):
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "code": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        report = args.fn(args)
    except CliqueLabError as exc:
        return _emit_error(exc, exc.code)
    except (ValueError, OverflowError) as exc:
        return _emit_error(exc, ArgumentError.code)
    except MemoryError as exc:
        return _emit_error(exc, 4)
    report["elapsed_ms"] = 0 if args.deterministic else int(round((time.perf_counter() - start) * 1000))
    report["version"] = __version__
    text = render(report, args.format)
    sys.stdout.write(text)
    path = _output_path(args)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    if args.experiment == "selftest" or "passed" in report:
        return 0 if report.get("passed", True) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
