"""Command line: ``dssn {synth,train,certify,curve,verify,bench}``.

Exit codes: 0 success, 2 an invariant failed in ``verify``, 3 bad input.
"""
from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import oracle
from .curves import curve, envelope, format_curve, parse_radii, render_svg
from .data import DatasetError, load_dataset, save_dataset, synth_dataset
from .harness import (
    METHODS,
    audit_header,
    bench,
    dssn_scaling,
    format_certificates,
    read_certificates,
    report_json,
    run_certify,
)
from .models import ModelFileError, TableClassifier, read_model, train_linear, write_model
from .noise import (
    DEFAULT_GENERATOR,
    ConfigError,
    NoiseKind,
    NoiseModel,
    QuantizedPoint,
    SplitSpec,
    quantize_lambda,
    sigma_to_lambda,
)

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 2, 3
THREADS_ENV = "DSSN_THREADS"


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _resolve_lambda(args, q: int) -> tuple[float, Fraction, dict]:
    """Continuous lambda, its grid version, and the conversions for the audit header."""
    audit = {}
    if args.sigma is not None:
        lam = sigma_to_lambda(args.sigma)
        audit["sigma_requested"] = repr(args.sigma)
        audit["lambda_from_sigma"] = repr(lam)
    else:
        lam = args.lam
        audit["lambda_requested"] = repr(lam)
    lam_q = quantize_lambda(lam, q)
    audit["lambda_quantized"] = str(lam_q)
    audit["L"] = str(lam_q * 2 * q)
    return lam, lam_q, audit


def cmd_synth(args) -> int:
    ds = synth_dataset(args.seed, args.d, args.q, args.classes, args.n_per_class, args.separation)
    save_dataset(ds, args.out)
    print(f"wrote {len(ds)} points (d={ds.d}, q={ds.q}) to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_train(args) -> int:
    ds = load_dataset(args.data, args.q)
    lam, lam_q, audit = _resolve_lambda(args, args.q)
    L = int(lam_q * 2 * args.q)
    spec = SplitSpec.generate(args.q, L, ds.d, seed=args.offset_seed, generator_id=args.generator)
    kind = NoiseKind(args.noise)
    noise = NoiseModel(kind, spec, lam if kind is NoiseKind.UNIFORM_ADDITIVE else None)
    for k, v in audit.items():
        print(f"{k}={v}", file=sys.stderr)
    model = train_linear(ds, noise, epochs=args.epochs, lr=args.lr, batch_size=args.batch_size, seed=args.seed)
    model.metadata.update(audit)
    write_model(model, args.out)
    return EXIT_OK


def cmd_certify(args) -> int:
    model = read_model(args.model)
    spec = model.noise.spec
    ds = load_dataset(args.data, spec.q, num_classes=model.num_classes)
    lam = None
    extra = {}
    if args.sigma is not None or args.lam is not None:
        if args.method != "uniform-mc":
            raise ConfigError("--sigma/--lambda only apply to uniform-mc; splitting methods use the model's L")
        lam, _, extra = _resolve_lambda(args, spec.q)
    rows = run_certify(ds, model, args.method, n0=args.n0, n=args.n, alpha=args.alpha, seed=args.seed,
                       threads=args.threads, gap=args.gap, lam=lam)
    head = audit_header(model, args.method, gap=args.gap, **extra)
    if args.method != "dssn":
        head.update(n0=args.n0, n=args.n, alpha=repr(args.alpha), mc_seed=args.seed)
        if lam is not None:
            head["lambda"] = repr(lam)
    _write(args.out, format_certificates(rows, head, timing=args.timing))
    return EXIT_OK


def cmd_curve(args) -> int:
    radii = parse_radii(args.radii)
    curves = {}
    for path in args.certs:
        _, rows = read_certificates(Path(path).read_text())
        curves[Path(path).stem] = curve(rows, radii)
    if len(curves) == 1:
        _write(args.out, format_curve(next(iter(curves.values()))))
    else:
        for name, pts in curves.items():
            if args.out in (None, "-"):
                sys.stdout.write(f"# {name}\n" + format_curve(pts))
            else:
                out = Path(args.out)
                (out.parent / f"{out.stem}.{name}{out.suffix}").write_text(format_curve(pts))
    series = dict(curves)
    if args.envelope:
        env = envelope(list(curves.values()))
        Path(args.envelope).write_text(format_curve(env))
        series["envelope"] = env
    if args.svg:
        Path(args.svg).write_text(render_svg(series, title=args.title))
    return EXIT_OK


def cmd_verify(args) -> int:
    failures = []
    lines = [f"verify q={args.q} L={args.L} d={args.d} trials={args.trials} seed={args.seed}"]

    def record(name, ok, detail=""):
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else ""))
        if not ok:
            failures.append(name)

    spec = SplitSpec.generate(args.q, args.L, args.d, seed=args.seed, generator_id=args.generator)
    for joint in args.joint:
        sweep = oracle.random_table_sweep(args.q, args.L, args.d, args.trials, args.seed, joint=joint)
        worst_seed, worst = max(sweep, key=lambda t: t[1].max_violation_ratio)
        record(f"lipschitz[{joint}]", all(r.holds for _, r in sweep),
               f"max ratio {worst.max_violation_ratio} (table seed {worst_seed}, pair {worst.witness_pair})")
    bad = 0
    for t in range(args.trials):
        clf = TableClassifier.random(args.q, args.d, 3, args.seed * 100_003 + t)
        bad += len(oracle.verify_prediction_stability(clf, spec).violations)
    record("prediction-stability", bad == 0, f"{bad} violations")
    ok, pairs = oracle.check_union_bound(spec)
    record("union-bound", ok, f"{pairs} pairs")
    pts = oracle.grid_points(args.q, args.d)
    flips_ok = all(
        oracle.check_flip_probability(QuantizedPoint(tuple(a), args.q), QuantizedPoint(tuple(b), args.q), spec).exact
        for a in pts for b in pts
    )
    record("flip-probability", flips_ok)
    record("transform-agreement", oracle.check_transform_agreement(args.q, Fraction(args.L, 2 * args.q)))
    if args.L == args.q:
        record("marginal-pushforward", oracle.check_marginal_pushforward(args.q))
    if args.L >= args.q:
        zspec = SplitSpec.zero_offsets(args.q, args.L, args.d)
        clf = TableClassifier.random(args.q, args.d, 3, args.seed)
        rep = oracle.check_degenerate_equal_splits(zspec, clf)
        record("degenerate-splits", rep.degenerate_bases == rep.expected and rep.expressivity_holds,
               f"{rep.degenerate_bases}/{args.L} degenerate")
    prop = oracle.proposition1_counterexample()
    record("correlated-additive-counterexample", prop.lipschitz_bound_violated,
           f"p(x)={prop.p_x} p(x')={prop.p_x_prime} l1={prop.l1} ratio={prop.ratio}")
    print("\n".join(lines))
    return EXIT_VIOLATION if failures else EXIT_OK


def cmd_bench(args) -> int:
    model = read_model(args.model)
    ds = load_dataset(args.data, model.noise.spec.q, num_classes=model.num_classes)
    if args.limit:
        ds = ds.subset(slice(0, args.limit))
    report = bench(model, ds, methods=args.methods, n0=args.n0, n=args.n, repetitions=args.repetitions)
    if args.scaling:
        report["dssn_scaling"] = dssn_scaling(model, ds, Ls=args.scaling)
    _write(args.out, report_json(report))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors: exit 3, keeping 2 for failed invariants."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _add_lambda(p, required: bool):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--sigma", type=float, help="noise level as sigma = lambda / sqrt(3)")
    g.add_argument("--lambda", dest="lam", type=float, help="noise half-width lambda")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dssn", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a seeded synthetic dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--n-per-class", type=int, default=100)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a linear softmax model under smoothing noise")
    p.add_argument("--data", required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--noise", choices=[k.value for k in NoiseKind], default="dssn")
    _add_lambda(p, required=True)
    p.add_argument("--generator", default=DEFAULT_GENERATOR)
    p.add_argument("--offset-seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("certify", help="certify every point of a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=METHODS, default="dssn")
    p.add_argument("--n0", type=int, default=64)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--alpha", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")
    p.add_argument("--gap", choices=["multiclass", "one-vs-all"], default="multiclass")
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--timing", action="store_true", help="add a wall_time column (output no longer byte-stable)")
    _add_lambda(p, required=False)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("curve", help="certified accuracy against radius")
    p.add_argument("certs", nargs="+")
    p.add_argument("--radii", default="0:2:0.125", help='"0,0.5,1" or "start:stop:step"')
    p.add_argument("--out", default="-")
    p.add_argument("--envelope", help="also write the pointwise max over all inputs")
    p.add_argument("--svg")
    p.add_argument("--title", default="certified accuracy")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("verify", help="brute-force the Lipschitz guarantees on a small grid")
    p.add_argument("--q", type=int, default=4)
    p.add_argument("--L", type=int, default=5)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--generator", default=DEFAULT_GENERATOR)
    p.add_argument("--joint", nargs="+", choices=oracle.JOINTS, default=list(oracle.JOINTS))
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="per-image time, exact versus Monte Carlo")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--methods", nargs="+", choices=METHODS, default=["dssn", "uniform-mc"])
    p.add_argument("--n0", type=int, default=64)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--limit", type=int, default=0, help="only the first N points")
    p.add_argument("--scaling", type=int, nargs="*", help="also time the exact path at these L")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, ModelFileError, ConfigError, oracle.BudgetExceeded,
            FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
