"""Batch command-line front end.

Subcommands wire ingestion, GAN training, synopsis construction, querying
and evaluation into reproducible runs: every output embeds the run
configuration (seed included), and no subcommand mutates its inputs.

Exit codes: 0 success, 1 usage error, 2 data error. The environment
variable SYNOPTIC_SEED overrides the default seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import io as io_mod
from .encoding import EncodingError, TableEncoder
from .gan import GanSynthesizer, GenerationError, TrainingError
from .model import SchemaError, Table
from .quality import MetricError, quality_report
from .query import (
    QueryBindError,
    QueryParseError,
    UnsupportedQueryError,
    compare_results,
    execute_approx,
    execute_exact,
    parse_query,
    result_to_csv,
    result_to_dict,
)
from .synopses import (
    SynopsisError,
    build_histogram,
    build_sketch,
    build_wavelet,
    reservoir_sample,
)

_DATA_ERRORS = (
    io_mod.CsvFormatError,
    io_mod.EnvelopeError,
    SchemaError,
    EncodingError,
    QueryParseError,
    QueryBindError,
    UnsupportedQueryError,
    MetricError,
    SynopsisError,
    TrainingError,
    GenerationError,
    FileNotFoundError,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _default_seed() -> int:
    env = os.environ.get("SYNOPTIC_SEED")
    try:
        return int(env) if env else 0
    except ValueError:
        return 0


def _dims(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.split(",") if p)


def build_parser() -> _Parser:
    parser = _Parser(prog="synoptic", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="train a generative synopsis model")
    fit.add_argument("--data", required=True)
    fit.add_argument("--schema", default=None)
    fit.add_argument("--out", required=True)
    fit.add_argument("--log", default=None, help="training log CSV path")
    fit.add_argument("--loss", choices=["vanilla", "wgan_gp"], default="wgan_gp")
    fit.add_argument("--conditional", action=argparse.BooleanOptionalAction,
                     default=True)
    fit.add_argument("--kl", action="store_true", help="enable KL marginal penalty")
    fit.add_argument("--info-loss", action="store_true")
    fit.add_argument("--mean-slack", type=float, default=0.0)
    fit.add_argument("--sd-slack", type=float, default=0.0)
    fit.add_argument("--classifier", action="store_true")
    fit.add_argument("--gp-weight", type=float, default=10.0)
    fit.add_argument("--noise-dim", type=int, default=64)
    fit.add_argument("--batch-size", type=int, default=128)
    fit.add_argument("--epochs", type=int, default=300)
    fit.add_argument("--critic-steps", type=int, default=5)
    fit.add_argument("--label-smoothing", action="store_true")
    fit.add_argument("--cond-pmf", choices=["log", "raw"], default="log")
    fit.add_argument("--g-dims", type=_dims, default=(256, 256))
    fit.add_argument("--d-dims", type=_dims, default=(256, 256))
    fit.add_argument("--lr", type=float, default=2e-4)
    fit.add_argument("--beta1", type=float, default=0.5)
    fit.add_argument("--beta2", type=float, default=0.9)
    fit.add_argument("--mode-span", type=float, default=4.0)
    fit.add_argument("--category-noise", type=float, default=0.2)
    fit.add_argument("--max-modes", type=int, default=10)
    fit.add_argument("--seed", type=int, default=None)
    fit.set_defaults(func=cmd_fit)

    gen = sub.add_parser("generate", help="sample rows from a trained model")
    gen.add_argument("--model", required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--condition", default=None, metavar="COL=CAT")
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_generate)

    build = sub.add_parser("build", help="construct a classic synopsis")
    build.add_argument("--data", required=True)
    build.add_argument("--schema", default=None)
    build.add_argument("--method", required=True,
                       choices=["sample", "histogram", "wavelet", "sketch"])
    build.add_argument("--k", type=int, default=1000, help="sample size")
    build.add_argument("--buckets", type=int, default=64)
    build.add_argument("--keep", type=int, default=16,
                       help="wavelet coefficients kept per column")
    build.add_argument("--width", type=int, default=256, help="sketch width")
    build.add_argument("--depth", type=int, default=4, help="sketch depth")
    build.add_argument("--column", default=None, help="sketched column")
    build.add_argument("--seed", type=int, default=None)
    build.add_argument("--out", required=True)
    build.add_argument("--csv-out", default=None,
                       help="also export sample rows as plain CSV")
    build.set_defaults(func=cmd_build)

    ev = sub.add_parser("eval", help="score generated data against real data")
    ev.add_argument("--real", required=True)
    ev.add_argument("--gen", required=True)
    ev.add_argument("--schema", default=None)
    ev.add_argument("--pairs", type=int, default=50)
    ev.add_argument("--seed", type=int, default=None)
    ev.add_argument("--out", required=True)
    ev.add_argument("--csv", default=None, help="also write the flat CSV report")
    ev.set_defaults(func=cmd_eval)

    q = sub.add_parser("query", help="run an aggregate query")
    q.add_argument("text", help="query text")
    q.add_argument("--exact", action="store_true")
    q.add_argument("--data", default=None)
    q.add_argument("--schema", default=None)
    q.add_argument("--synopsis", default=None)
    q.add_argument("--format", choices=["json", "csv"], default="json")
    q.add_argument("--out", default="-")
    q.set_defaults(func=cmd_query)

    cmp_ = sub.add_parser("compare", help="exact vs approximate error report")
    cmp_.add_argument("text", help="query text")
    cmp_.add_argument("--data", required=True)
    cmp_.add_argument("--schema", default=None)
    cmp_.add_argument("--synopsis", required=True)
    cmp_.add_argument("--out", default="-")
    cmp_.set_defaults(func=cmd_compare)

    return parser


def _run_config(args) -> dict:
    skip = {"func"}
    doc = {}
    for k, v in vars(args).items():
        if k in skip:
            continue
        doc[k] = list(v) if isinstance(v, tuple) else v
    return doc


def _seed_of(args) -> int:
    return _default_seed() if args.seed is None else args.seed


def _load_table(path, schema_path) -> Table:
    config = io_mod.load_schema_config(schema_path) if schema_path else None
    return io_mod.read_csv(path, config)


def _emit_text(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _emit_json(doc: dict, out: str) -> None:
    _emit_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", out)


def _save_with_run(obj, path: str, run: dict) -> None:
    payload = obj.to_payload()
    payload["run"] = run
    if path == "-":
        doc = {"format_version": io_mod.FORMAT_VERSION,
               "kind": obj.envelope_kind, "payload": payload}
        sys.stdout.write(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    else:
        io_mod.save_envelope(obj.envelope_kind, payload, path)


# ---------------------------------------------------------------------------
# subcommands


def cmd_fit(args) -> int:
    seed = _seed_of(args)
    run = {**_run_config(args), "seed": seed}
    table = _load_table(args.data, args.schema)
    synth = GanSynthesizer(
        loss=args.loss,
        conditional=args.conditional,
        kl_penalty=args.kl,
        info_loss=args.info_loss,
        mean_slack=args.mean_slack,
        sd_slack=args.sd_slack,
        classifier_loss=args.classifier,
        gp_weight=args.gp_weight,
        noise_dim=args.noise_dim,
        batch_size=args.batch_size,
        epochs=args.epochs,
        critic_steps=args.critic_steps,
        label_smoothing=args.label_smoothing,
        cond_pmf=args.cond_pmf,
        generator_dims=args.g_dims,
        discriminator_dims=args.d_dims,
        learning_rate=args.lr,
        beta1=args.beta1,
        beta2=args.beta2,
        mode_span=args.mode_span,
        category_noise=args.category_noise,
        max_modes=args.max_modes,
        seed=seed,
    )
    synth.fit(table)
    _save_with_run(synth, args.out, run)
    if args.log:
        _emit_text("# run: " + json.dumps(run, sort_keys=True) + "\n"
                   + synth.training_log_csv(), args.log)
    return 0


def cmd_generate(args) -> int:
    seed = _seed_of(args)
    run = {**_run_config(args), "seed": seed}
    model = io_mod.load(args.model)
    if not isinstance(model, GanSynthesizer):
        raise io_mod.EnvelopeError(f"{args.model} is not a model file")
    condition = None
    if args.condition:
        if "=" not in args.condition:
            raise _UsageError("--condition expects COL=CATEGORY")
        col, _, cat = args.condition.partition("=")
        condition = (col, cat)
    table = model.sample(args.n, condition=condition, seed=seed)
    comment = "run: " + json.dumps(run, sort_keys=True)
    if args.out == "-":
        import io as _io

        buf = _io.StringIO()
        _write_csv_to(table, buf, comment)
        sys.stdout.write(buf.getvalue())
    else:
        io_mod.write_csv(table, args.out, header_comment=comment)
    return 0


def _write_csv_to(table, buf, comment) -> None:
    import csv as _csv

    buf.write("# " + comment + "\n")
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(table.schema.names)
    for row in table.rows():
        writer.writerow(["" if v is None else
                         (repr(v) if isinstance(v, float) else str(v))
                         for v in row])


def cmd_build(args) -> int:
    seed = _seed_of(args)
    run = {**_run_config(args), "seed": seed}
    table = _load_table(args.data, args.schema)
    if args.method == "sample":
        syn = reservoir_sample(table, args.k, seed)
    elif args.method == "histogram":
        syn = build_histogram(table, args.buckets)
    elif args.method == "wavelet":
        syn = build_wavelet(table, args.keep)
    else:
        if not args.column:
            raise _UsageError("sketch needs --column")
        syn = build_sketch(table, args.column, args.width, args.depth, seed)
    _save_with_run(syn, args.out, run)
    if args.csv_out:
        if args.method != "sample":
            raise _UsageError("--csv-out applies to sample synopses only")
        io_mod.write_csv(syn.table, args.csv_out,
                         header_comment="run: " + json.dumps(run, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    seed = _seed_of(args)
    run = {**_run_config(args), "seed": seed}
    real = _load_table(args.real, args.schema)
    gen = _load_table(args.gen, args.schema)
    report = quality_report(real, gen, pair_budget=args.pairs, seed=seed)
    payload = report.to_payload()
    payload["run"] = run
    if args.out == "-":
        sys.stdout.write(json.dumps(
            {"format_version": io_mod.FORMAT_VERSION, "kind": report.envelope_kind,
             "payload": payload},
            indent=1, sort_keys=True) + "\n")
    else:
        io_mod.save_envelope(report.envelope_kind, payload, args.out)
    if args.csv:
        _emit_text("# run: " + json.dumps(run, sort_keys=True) + "\n"
                   + report.to_csv(), args.csv)
    return 0


def cmd_query(args) -> int:
    if args.exact == bool(args.synopsis):
        raise _UsageError("pass exactly one of --exact or --synopsis")
    ast = parse_query(args.text)
    run = _run_config(args)
    if args.exact:
        if not args.data:
            raise _UsageError("--exact needs --data")
        table = _load_table(args.data, args.schema)
        result = execute_exact(table, ast)
    else:
        synopsis = io_mod.load(args.synopsis)
        result = execute_approx(synopsis, ast)
    if args.format == "csv":
        _emit_text("# run: " + json.dumps(run, sort_keys=True) + "\n"
                   + result_to_csv(result), args.out)
    else:
        doc = result_to_dict(result)
        doc["run"] = run
        _emit_json(doc, args.out)
    return 0


def cmd_compare(args) -> int:
    ast = parse_query(args.text)
    run = _run_config(args)
    table = _load_table(args.data, args.schema)
    synopsis = io_mod.load(args.synopsis)
    exact = execute_exact(table, ast)
    approx = execute_approx(synopsis, ast)
    report = compare_results(exact, approx)
    doc = report.to_dict()
    doc["approx"] = result_to_dict(approx)
    doc["exact"] = result_to_dict(exact)
    doc["run"] = run
    _emit_json(doc, args.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        if isinstance(exc, _DATA_ERRORS):
            print(f"data error: {exc}", file=sys.stderr)
            return 2
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
