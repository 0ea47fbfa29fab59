"""Command-line front end: ``sparse-rp <command> ...``.

Exit codes: 0 success, 1 a verification check failed, 2 bad usage or input.
Each command writes ``<artifact>.manifest.json`` next to its output; feed
that file to ``sparse-rp replay`` to regenerate the output exactly.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

from . import __version__, kernels, oracle, theory
from ._csvio import atomic_write_text
from .classify import ExperimentConfig, SvmHyper, crossover_k, run_experiment
from .ensembles import EnsembleFamily, build_matrix, save_matrix
from .synth import SyntheticSpec, generate, load_dataset, save_dataset

Z_LIMIT = 3.0


class UsageError(Exception):
    pass


def int_list(text: str) -> list[int]:
    """Parse ``"1..20"``, ``"50,100,200"`` or a mix such as ``"1..5,10"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty list {text!r}")
    return out


def float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def name_list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


# -- manifests ----------------------------------------------------------------


def _write_manifest(artifact: Path, command: str, argv, params: dict, seed, outputs, started: float):
    manifest = {
        "command": command,
        "argv": list(argv),
        "params": params,
        "seed": seed,
        "version": __version__,
        "backend": kernels.BACKEND,
        "outputs": [str(p) for p in outputs],
        "duration_s": round(time.perf_counter() - started, 3),
    }
    path = artifact.with_name(artifact.name + ".manifest.json")
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _params(args) -> dict:
    skip = {"func", "out", "argv", "started"}
    return {k: v for k, v in vars(args).items() if k not in skip}


# -- commands -----------------------------------------------------------------


def cmd_gen_data(args) -> int:
    spec = SyntheticSpec(args.d, args.df, args.sigma_f, args.sigma_r, args.n, args.seed)
    ds = generate(spec)
    suffix = ".csv" if args.format == "dense_csv" else ".txt"
    path = Path(args.out) / f"data{suffix}"
    save_dataset(ds, path, args.format)
    _write_manifest(path, "gen-data", args.argv, _params(args), args.seed, [path], args.started)
    print(f"wrote {ds.n} samples x {ds.d} features to {path}")
    return 0


def cmd_build_matrix(args) -> int:
    fam = EnsembleFamily.parse(args.ensemble)
    spec = fam.resolve(args.k, args.d, args.seed)
    m = build_matrix(spec)
    path = Path(args.out) / ("matrix.csv" if args.format == "csv" else "matrix.txt")
    save_matrix(m, path, args.format)
    _write_manifest(path, "build-matrix", args.argv, _params(args), args.seed, [path], args.started)
    print(f"wrote {spec.kind.value} {m.k}x{m.d} ({m.nnz} nonzeros) to {path}")
    return 0


def _verify_lemma3(args):
    rows = []
    for s in args.s:
        closed = float(theory.expected_abs_dot_sparse(args.d, s, args.mu))
        norm = float(theory.normalized_abs_dot_sparse(s))
        res = oracle.mc_abs_dot(oracle.SparseRow(args.d, s), oracle.TwoPoint(args.mu), args.n,
                                seed=args.seed + s, workers=args.workers)
        rows.append(oracle.compare("lemma3", f"d={args.d};s={s};mu={args.mu};normalized={norm!r}", res, closed))
    return rows


def _verify_lemma5(args):
    res = oracle.mc_abs_dot(oracle.GaussianRow(args.d), oracle.TwoPoint(args.mu), args.n,
                            seed=args.seed, workers=args.workers)
    closed = theory.expected_abs_dot_gaussian(args.d, args.mu)
    return [oracle.compare("lemma5", f"d={args.d};mu={args.mu}", res, closed)]


def _verify_lemma4(args):
    rows = []
    for i, ratio in enumerate(args.ratios):
        sigma = args.mu / ratio
        res = oracle.mc_abs_dot(oracle.SparseRow(1, 1), oracle.Mixture(args.mu, sigma), args.n,
                                seed=args.seed + 1000 * i, workers=args.workers)
        rows.append(oracle.compare("truncnorm", f"mu={args.mu};sigma={sigma!r}", res,
                                   theory.expected_abs_truncnorm(args.mu, sigma)))
        model = theory.SignalModel(args.d, args.d, args.mu, sigma)
        for s in args.s:
            res = oracle.mc_abs_dot(oracle.SparseRow(args.d, s), oracle.Mixture(args.mu, sigma), args.n,
                                    seed=args.seed + 1000 * i + s, workers=args.workers)
            rows.append(oracle.compare("mixture", f"d={args.d};s={s};mu={args.mu};sigma={sigma!r}", res,
                                       theory.expected_abs_dot_mixture(args.d, s, model)))
        check = theory.lemma4_sufficient_condition(model)
        s1 = theory.expected_abs_dot_mixture(args.d, 1, model)
        dominated = all(s1 > theory.expected_abs_dot_mixture(args.d, s, model) for s in range(2, min(64, args.d) + 1))
        implication = (not check.holds) or dominated
        rows.append(oracle.exact_row("lemma4_implication",
                                     f"mu_over_sigma={ratio!r};holds={check.holds};lhs={check.lhs!r}",
                                     1.0 if implication else 0.0, 1.0))
    return rows


def _verify_eq7(args):
    rows = []
    ratios = []
    s_values = args.s if args.s else range(1, args.k + 1)
    for sp in s_values:
        try:
            w = theory.row_weight(args.d, args.k, sp)
            closed = theory.feature_hit_ratio(args.d, args.df, args.k, sp)
        except ValueError:
            continue
        hits = oracle.enumerate_feature_hits(args.d, args.df, w)
        ratios.append(closed)
        rows.append(oracle.exact_row("eq7_ratio", f"d={args.d};df={args.df};k={args.k};s_col={sp};w={w}",
                                     hits.ratio, closed))
    if not rows:
        raise UsageError("no column weight gives an integer row weight for this (d, k)")
    # once no support can hold exactly one feature the ratio stays at 0
    positive = [r for r in ratios if r > 0]
    decreasing = (all(a > b for a, b in zip(positive, positive[1:]))
                  and all(r == 0 for r in ratios[len(positive):]))
    rows.append(oracle.exact_row("eq7_decreasing", f"d={args.d};df={args.df};k={args.k}",
                                 1.0 if decreasing else 0.0, 1.0))
    return rows


def _one_sided(name, params, est, se, bound):
    if est <= bound:
        z = 0.0
    elif se == 0:
        z = math.inf
    else:
        z = (est - bound) / se
    return oracle.OracleRow(name, params, est, se, bound, z)


def _verify_jl(args):
    rows = []
    variances = []
    for e, name in enumerate(args.ensembles):
        spec = EnsembleFamily.parse(name).resolve(args.k, args.d, 0)
        res = oracle.mc_jl_distortion(spec, args.vectors, args.draws, args.eps, seed=args.seed + e)
        bound = theory.jl_lower_tail_bound(theory.JLBoundParams.for_ensemble(spec, args.eps))
        params = f"ensemble={name};k={args.k};d={args.d};eps={args.eps}"
        rows.append(_one_sided("jl_lower_tail", params, res.empirical_lower_tail, res.lower_tail_se, bound))
        exact = theory.norm_ratio_variance(spec)
        rows.append(oracle.OracleRow("jl_variance", params, res.empirical_var, res.var_se, exact,
                                     (res.empirical_var - exact) / res.var_se))
        variances.append(res.empirical_var)
    ordered = all(a <= b for a, b in zip(variances, variances[1:]))
    rows.append(oracle.exact_row("jl_variance_order", "order=" + ">".join(args.ensembles),
                                 1.0 if ordered else 0.0, 1.0))
    return rows


_VERIFIERS = {
    "lemma3": _verify_lemma3,
    "lemma4": _verify_lemma4,
    "lemma5": _verify_lemma5,
    "eq7": _verify_eq7,
    "jl": _verify_jl,
}


def cmd_verify(args) -> int:
    rows = _VERIFIERS[args.selector](args)
    path = Path(args.out) / f"verify_{args.selector}.csv"
    oracle.write_report(path, rows)
    _write_manifest(path, "verify", args.argv, _params(args), args.seed, [path], args.started)
    bad = [r for r in rows if not abs(r.z_score) <= Z_LIMIT]
    for r in rows:
        flag = "ok  " if abs(r.z_score) <= Z_LIMIT else "FAIL"
        print(f"{flag} {r.name:<20} {r.params:<50} est={r.estimate:.6g} closed={r.closed_form:.6g} z={r.z_score:.3g}")
    print(f"{len(rows) - len(bad)}/{len(rows)} checks passed; report in {path}")
    return 1 if bad else 0


def cmd_sweep(args) -> int:
    cfg = ExperimentConfig(
        ensembles=tuple(args.ensembles),
        k_values=tuple(args.k),
        votes=args.votes,
        runs=args.runs,
        split_fraction=args.split,
        seed=args.seed,
        scale=not args.no_scale,
        hyper=SvmHyper(C=args.C, solver=args.solver),
        workers=args.workers,
    )
    if args.data:
        try:
            source = load_dataset(args.data, args.data_format)
        except OSError as exc:
            raise UsageError(f"cannot read {args.data}: {exc}") from None
        d = source.d
    else:
        if args.df is None:
            raise UsageError("--df is required for synthetic data")
        source = SyntheticSpec(args.d, args.df, args.sigma_f, args.sigma_r, args.n, args.seed)
        d = args.d
    if max(cfg.k_values) > d:
        raise UsageError(f"k={max(cfg.k_values)} exceeds the data dimension {d}")
    table = run_experiment(cfg, source)
    path = Path(args.out) / "accuracy.csv"
    table.to_csv(path)
    _write_manifest(path, "sweep", args.argv, _params(args), args.seed, [path], args.started)
    for name, k, mean, se, runs in table.rows():
        print(f"{name:<6} k={k:<5} acc={mean:6.2f} se={se:.2f} runs={runs}")
    if "StM" in table.names and len(table.names) > 1:
        print(f"crossover k*: {crossover_k(table)}")
    return 0


def cmd_replay(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    argv = list(manifest["argv"])
    # drop the original output directory
    cleaned = []
    skip = False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--out":
            skip = True
            continue
        if tok.startswith("--out="):
            continue
        cleaned.append(tok)
    out = args.out if args.out is not None else str(Path(args.manifest).parent)
    if manifest.get("version") != __version__:
        print(f"warning: manifest written by version {manifest.get('version')}, running {__version__}",
              file=sys.stderr)
    return main(cleaned + ["--out", out])


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sparse-rp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=".")

    g = sub.add_parser("gen-data", help="draw a two-class synthetic dataset")
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--df", type=int, required=True)
    g.add_argument("--sigma-f", type=float, default=8.0)
    g.add_argument("--sigma-r", type=float, default=8.0)
    g.add_argument("--n", type=int, default=100, help="samples per class")
    g.add_argument("--format", choices=["dense_csv", "sparse_indexvalue"], default="dense_csv")
    common(g)
    g.set_defaults(func=cmd_gen_data)

    b = sub.add_parser("build-matrix", help="draw and export one projection matrix")
    b.add_argument("--ensemble", required=True, help="GM, SM, VSM, StM or KIND[:q=..|:s=..]")
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--d", type=int, required=True)
    b.add_argument("--format", choices=["triples", "csv"], default="triples")
    common(b)
    b.set_defaults(func=cmd_build_matrix)

    v = sub.add_parser("verify", help="compare closed forms with their oracles")
    v.add_argument("selector", choices=sorted(_VERIFIERS))
    v.add_argument("--d", type=int, default=None)
    v.add_argument("--df", type=int, default=None)
    v.add_argument("--k", type=int, default=None)
    v.add_argument("--s", type=int_list, default=None, help="row weights (lemmas) or column weights (eq7)")
    v.add_argument("--mu", type=float, default=1.0)
    v.add_argument("--ratios", type=float_list, default=[1.0, 3.0, 5.0, 10.0, 30.0], help="mu/sigma grid")
    v.add_argument("--n", type=int, default=None, help="Monte Carlo samples")
    v.add_argument("--eps", type=float, default=0.5)
    v.add_argument("--vectors", type=int, default=100)
    v.add_argument("--draws", type=int, default=2000)
    v.add_argument("--ensembles", type=name_list, default=["GM", "SM", "VSM", "StM"])
    v.add_argument("--workers", type=int, default=1)
    common(v)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="k-sweep classification experiment")
    s.add_argument("--data", default=None, help="dataset file instead of synthetic data")
    s.add_argument("--data-format", choices=["dense_csv", "sparse_indexvalue"], default=None)
    s.add_argument("--d", type=int, default=2000)
    s.add_argument("--df", type=int, default=None)
    s.add_argument("--sigma-f", type=float, default=8.0)
    s.add_argument("--sigma-r", type=float, default=12.0)
    s.add_argument("--n", type=int, default=100, help="samples per class")
    s.add_argument("--k", type=int_list, default=[50, 100, 200, 400, 600, 800, 1000, 1500, 2000])
    s.add_argument("--ensembles", type=name_list, default=["GM", "SM", "VSM", "StM"])
    s.add_argument("--votes", type=int, default=5)
    s.add_argument("--runs", type=int, default=500)
    s.add_argument("--split", type=float, default=0.5)
    s.add_argument("--C", type=float, default=1.0)
    s.add_argument("--solver", choices=["dcd", "pegasos"], default="dcd")
    s.add_argument("--no-scale", action="store_true", help="skip z-scoring of projected features")
    s.add_argument("--workers", type=int, default=1)
    common(s)
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("replay", help="rerun a command from its manifest")
    r.add_argument("manifest")
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_replay)
    return p


_VERIFY_DEFAULTS = {
    "lemma3": {"d": 1000, "s": list(range(1, 21)), "n": 100_000},
    "lemma4": {"d": 100, "s": [1, 2, 3, 5, 10], "n": 100_000},
    "lemma5": {"d": 400, "n": 1_000_000},
    "eq7": {"d": 12, "df": 4, "k": 4},
    "jl": {"d": 500, "k": 50},
}


def _finish_verify_args(args):
    for key, val in _VERIFY_DEFAULTS[args.selector].items():
        if getattr(args, key) is None:
            setattr(args, key, val)
    if args.n is not None and args.n < 1000 and args.selector in ("lemma3", "lemma4", "lemma5"):
        raise UsageError("--n must be at least 1000")
    if args.selector == "eq7" and (args.df is None or args.df < 2 or args.df > args.d):
        raise UsageError("eq7 needs 2 <= --df <= --d")
    if args.selector == "jl" and args.k > args.d:
        raise UsageError("--k exceeds --d")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    args.started = time.perf_counter()
    try:
        if args.command == "sweep" and (args.votes < 1 or args.votes % 2 == 0):
            raise UsageError("--votes must be a positive odd number")
        if args.command == "verify":
            _finish_verify_args(args)
        return args.func(args)
    except (UsageError, ValueError, FileNotFoundError) as exc:
        print(f"sparse-rp: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
