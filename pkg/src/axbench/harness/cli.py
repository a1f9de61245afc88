"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime error. All randomness is
governed by --seed (default: the AXBENCH_SEED environment variable, else 0).
"""

from __future__ import annotations

import argparse
import os
import sys

from .. import intervene as intervene_mod
from .. import oracle as oracle_mod
from .. import soundness, synthdata, zoo
from ..core import ContractError
from . import protocol, reports, tiles


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        raise UsageError(message)


def _default_seed() -> int:
    return int(os.environ.get("AXBENCH_SEED", "0"))


def _build_parser() -> _Parser:
    parser = _Parser(prog="axbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic dataset container")
    g.add_argument("--scm", required=True,
                   choices=["unconfounded", "confounded-no-support",
                            "confounded-full", "shapes"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=_default_seed())
    g.add_argument("--sigma", type=float, default=0.05)
    g.add_argument("--outlier-p", type=float, default=0.01)
    g.add_argument("--out", required=True)
    g.add_argument("--csv", help="also export the parent table as CSV")

    i = sub.add_parser("intervene", help="simulated intervention by resampling")
    i.add_argument("--dataset", required=True)
    i.add_argument("--targets", required=True, help="comma-separated parent names")
    i.add_argument("--bins", type=int, default=5)
    i.add_argument("--n-out", type=int, default=None)
    i.add_argument("--seed", type=int, default=_default_seed())
    i.add_argument("--out", help="path for the resampled container")
    i.add_argument("--support-json", help="write per-target support reports here")

    t = sub.add_parser("train-oracle", help="train a pseudo-oracle for one parent")
    t.add_argument("--dataset", required=True)
    t.add_argument("--parent", required=True)
    t.add_argument("--epochs", type=int, default=12)
    t.add_argument("--learning-rate", type=float, default=0.5)
    t.add_argument("--l2", type=float, default=1e-5)
    t.add_argument("--seed", type=int, default=_default_seed())
    t.add_argument("--out", required=True)

    e = sub.add_parser("evaluate", help="run the soundness suite for one model")
    e.add_argument("--model", required=True,
                   help="zoo id (identity, ground-truth, no-abduction, "
                        "entangled:<l>, blend:<a>) or external:stdio:<cmd> / "
                        "external:tcp:<host>:<port>")
    e.add_argument("--dataset", required=True)
    e.add_argument("--oracle", action="append", default=[],
                   metavar="PARENT=PATH", help="repeatable")
    e.add_argument("--m", type=int, default=10)
    e.add_argument("--n-samples", type=int, default=1000)
    e.add_argument("--seeds", default="0,1,2,3,4")
    e.add_argument("--targets", help="comma-separated parent names (default: oracles)")
    e.add_argument("--seed", type=int, default=_default_seed(),
                   help="seed for zoo models that draw styles")
    e.add_argument("--timeout", type=float, default=60.0)
    e.add_argument("--workers", type=int, default=1,
                   help="worker threads over observations (never changes results)")
    e.add_argument("--no-commutativity", action="store_true")
    e.add_argument("--out", help="report JSON path")
    e.add_argument("--csv", help="per-sample CSV path")
    e.add_argument("--markdown", help="markdown grid path")
    e.add_argument("--tiles", help="prefix for PNG mosaics of raw tiles")

    r = sub.add_parser("report", help="render a stored report JSON as markdown")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--markdown", required=True)

    s = sub.add_parser("serve-zoo", help="serve a zoo model over the wire protocol")
    s.add_argument("model")
    s.add_argument("--dataset", required=True)
    s.add_argument("--seed", type=int, default=_default_seed())
    s.add_argument("--transport", default="stdio",
                   help="stdio or tcp:<port>")
    return parser


def _cmd_generate(args) -> int:
    if args.scm == "shapes":
        ds = synthdata.sample_shapes_dataset(args.n, args.seed)
    else:
        kind = {
            "unconfounded": synthdata.Unconfounded(),
            "confounded-no-support": synthdata.ConfoundedNoSupport(args.sigma),
            "confounded-full": synthdata.ConfoundedFullSupport(args.sigma, args.outlier_p),
        }[args.scm]
        ds = synthdata.sample_dataset(kind, args.n, args.seed)
    synthdata.save_cfds(ds, args.out)
    if args.csv:
        synthdata.export_parents_csv(ds, args.csv)
    print(f"wrote {args.out} ({len(ds)} samples, scm={ds.provenance.scm})")
    return 0


def _cmd_intervene(args) -> int:
    ds = synthdata.load_cfds(args.dataset)
    targets = [ds.space.index_of(name.strip()) for name in args.targets.split(",")]
    binnings = [intervene_mod.bin_parent(ds, k, args.bins) for k in range(len(ds.space))]
    if args.support_json:
        import json
        docs = {ds.space.names()[t]:
                intervene_mod.support_report(ds, t, binnings).to_json()
                for t in targets}
        with open(args.support_json, "w", encoding="utf-8") as f:
            json.dump({k: json.loads(v) for k, v in docs.items()}, f,
                      sort_keys=True, indent=1)
    if args.out:
        out = intervene_mod.resample_intervention(ds, targets, binnings,
                                                  args.n_out, args.seed)
        synthdata.save_cfds(out, args.out)
        print(f"wrote {args.out} ({len(out)} samples)")
    return 0


def _cmd_train_oracle(args) -> int:
    ds = synthdata.load_cfds(args.dataset)
    k = ds.space.index_of(args.parent)
    if ds.space.parents[k].kind == "discrete":
        oracle = oracle_mod.train_classifier(ds, k, epochs=args.epochs,
                                             learning_rate=args.learning_rate,
                                             l2=args.l2, seed=args.seed)
    else:
        oracle = oracle_mod.train_regressor(ds, k, l2=args.l2)
    oracle_mod.save_oracle(oracle, args.out)
    quality = oracle_mod.oracle_quality(oracle, ds)
    print(f"wrote {args.out} (training-set quality: {quality.value:.2f})")
    return 0


def _resolve_model(args, ds):
    if args.model.startswith("external:"):
        model = protocol.proxy_external(args.model[len("external:"):],
                                        expected_shape=ds.shape,
                                        expected_space=ds.space,
                                        timeout=args.timeout)
        return model, model.shutdown
    return zoo.from_identifier(args.model, ds, args.seed), None


def _cmd_evaluate(args) -> int:
    ds = synthdata.load_cfds(args.dataset)
    oracles = {}
    for spec_item in args.oracle:
        name, _, path = spec_item.partition("=")
        if not path:
            raise UsageError(f"--oracle needs PARENT=PATH, got {spec_item!r}")
        oracles[ds.space.index_of(name)] = oracle_mod.load_oracle(path)
    if not oracles:
        raise UsageError("evaluate needs at least one --oracle PARENT=PATH")
    if args.targets:
        targets = tuple(ds.space.index_of(n.strip()) for n in args.targets.split(","))
    else:
        targets = tuple(sorted(oracles))
    seeds = tuple(int(s) for s in args.seeds.split(","))
    config = soundness.EvalConfig(m=args.m, targets=targets,
                                  n_samples=args.n_samples, seeds=seeds,
                                  commutativity=not args.no_commutativity,
                                  workers=args.workers)
    model, closer = _resolve_model(args, ds)
    try:
        report = soundness.evaluate_suite(model, ds, oracles, config)
        if args.tiles:
            tiles.export_mosaics(model, ds, args.tiles, seed=seeds[0])
    finally:
        if closer is not None:
            closer()
    reports.emit_report(report, json_path=args.out, csv_path=args.csv,
                        markdown_path=args.markdown)
    if not any([args.out, args.csv, args.markdown]):
        sys.stdout.write(reports.report_markdown(report))
    else:
        print(f"evaluated {report.model} on {args.n_samples} samples x {len(seeds)} seeds")
    return 0


def _cmd_report(args) -> int:
    import json
    with open(args.input, "r", encoding="utf-8") as f:
        doc = json.load(f)
    with open(args.markdown, "w", encoding="utf-8") as f:
        f.write(reports.report_markdown(doc))
    print(f"wrote {args.markdown}")
    return 0


def _cmd_serve_zoo(args) -> int:
    ds = synthdata.load_cfds(args.dataset)
    model = zoo.from_identifier(args.model, ds, args.seed)
    if args.transport == "stdio":
        protocol.serve_model(model, sys.stdin.buffer, sys.stdout.buffer)
        return 0
    if args.transport.startswith("tcp:"):
        import socket
        port = int(args.transport.split(":", 1)[1])
        server = socket.create_server(("127.0.0.1", port))
        print(f"serving {args.model} on tcp:127.0.0.1:{port}", file=sys.stderr)
        conn, _ = server.accept()
        with conn, conn.makefile("rb") as rf, conn.makefile("wb") as wf:
            protocol.serve_model(model, rf, wf)
        server.close()
        return 0
    raise UsageError(f"unknown transport {args.transport!r}")


_COMMANDS = {
    "generate": _cmd_generate,
    "intervene": _cmd_intervene,
    "train-oracle": _cmd_train_oracle,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
    "serve-zoo": _cmd_serve_zoo,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ContractError, intervene_mod.SupportError, oracle_mod.OracleError,
            OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
