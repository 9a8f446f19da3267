"""Command-line entry point: ``mlgcn {ingest,train,eval,gradcheck,certify,sweep}``.

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure. On
failure a JSON error record is printed to stderr (and written to
``<out>/error.json`` when an output directory is known).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import shutil
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, load_config, parse_menu
from .dataset import load_dataset, write_manifest
from .errors import MLGCNError, UsageError
from .graph import build_stack, read_graph, write_graph
from .model import Sample
from .multilap import cpd_check
from .pooling import POOLING_MODES
from .skeleton import CsvLayout, read_skeleton_csv, sequence_to_graph
from .train import evaluate, gradcheck, train

logger = logging.getLogger("mlgcn")

SWEEP_MODES = POOLING_MODES


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    for flag, key in (("seed", "seed"), ("epochs", "epochs"), ("lr", "learning_rate"),
                      ("batch_size", "batch_size")):
        val = getattr(args, flag, None)
        if val is not None:
            overrides[key] = val
    pooling = getattr(args, "pooling", None)
    if pooling is not None and pooling != "sweep":
        overrides["pooling"] = pooling
    if overrides:
        cfg = cfg.with_train(**overrides)
    if getattr(args, "out", None):
        cfg = replace(cfg, output=args.out)
    if getattr(args, "manifest", None):
        cfg.data = {**{k: v for k, v in cfg.data.items() if k != "synthetic"}, "manifest": args.manifest}
    return cfg


# -- ingest --------------------------------------------------------------------

def cmd_ingest(args) -> int:
    src = Path(args.input)
    out = Path(args.out)
    layout_dict = json.loads(Path(args.layout).read_text(encoding="utf-8")) if args.layout else {}
    for key in ("joints_per_person", "persons", "dims", "delimiter"):
        val = getattr(args, key, None)
        if val is not None:
            layout_dict[key] = val
    layout = CsvLayout.from_dict(layout_dict)
    class_component = layout_dict.get("class_component", args.class_component)
    files = sorted(p for p in src.glob(args.pattern) if p.is_file())
    if not files:
        raise UsageError(f"no input files matching {args.pattern!r} under {src}")
    graph_dir = out / "graphs"
    created: list[Path] = []
    made_out = not out.exists()
    made_graph_dir = not graph_dir.exists()
    graph_dir.mkdir(parents=True, exist_ok=True)
    rows, vocab = [], set()
    try:
        for f in files:
            rel = f.relative_to(src)
            seq = read_skeleton_csv(f, layout)
            graph = sequence_to_graph(seq, args.neighbors, args.chunks, num_labels=layout.joints_per_person)
            name = "__".join(rel.with_suffix("").parts) + ".graph"
            target = graph_dir / name
            write_graph(graph, target)
            created.append(target)
            vocab.update(graph.node_labels)
            cls = rel.parts[class_component] if class_component is not None else ""
            rows.append({"graph_file": f"graphs/{name}", "class": cls, "n_nodes": graph.n,
                         "n_frames": len(seq.frames), "source": rel.as_posix()})
        write_manifest(out / "manifest.csv", rows)
        created.append(out / "manifest.csv")
        _write_json(out / "vocabulary.json", {"joint_labels": sorted(vocab),
                                              "num_labels": layout.joints_per_person,
                                              "sequences": len(rows)})
    except BaseException:
        for p in created:
            p.unlink(missing_ok=True)
        if made_graph_dir:
            shutil.rmtree(graph_dir, ignore_errors=True)
        if made_out:
            shutil.rmtree(out, ignore_errors=True)
        raise
    print(f"ingested {len(rows)} sequences into {out}")
    return 0


# -- train / sweep -------------------------------------------------------------

def _train_one(cfg: RunConfig, out: Path, dataset) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json(), encoding="utf-8")
    result = train(dataset, cfg.train, cfg.menu, out / "metrics.jsonl")
    # the output path is left out so that reruns elsewhere give identical bytes
    stored = {k: v for k, v in cfg.to_dict().items() if k != "output"}
    save_checkpoint(out / "checkpoint.npz", result.state, dataset.class_names, stored)
    return result.history[-1] if result.history else {}


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    if getattr(args, "pooling", None) == "sweep":
        return _sweep(cfg)
    dataset = load_dataset(cfg.data)
    last = _train_one(cfg, Path(cfg.output), dataset)
    print(json.dumps(last))
    return 0


def _sweep(cfg: RunConfig) -> int:
    dataset = load_dataset(cfg.data)
    out = Path(cfg.output)
    rows = []
    for mode in SWEEP_MODES:
        last = _train_one(cfg.with_train(pooling=mode), out / mode, dataset)
        rows.append([mode, _fmt(last.get("train_acc")), _fmt(last.get("test_acc"))])
    _write_csv(out / "sweep_summary.csv", ["pooling", "train_acc", "test_acc"], rows)
    print(f"sweep over {len(rows)} pooling modes written to {out}")
    return 0


def cmd_sweep(args) -> int:
    return _sweep(_resolve_config(args))


# -- eval ----------------------------------------------------------------------

def cmd_eval(args) -> int:
    state, meta = load_checkpoint(args.checkpoint)
    if args.config:
        cfg = load_config(args.config)
    elif meta.get("config"):
        cfg = RunConfig.from_dict(meta["config"])
    else:
        cfg = RunConfig()
    data = dict(cfg.data)
    if args.manifest:
        data = {k: v for k, v in data.items() if k != "synthetic"}
        data["manifest"] = args.manifest
    dataset = load_dataset(data, meta.get("class_names"))
    if dataset.num_classes != state.arch.num_classes:
        raise UsageError(f"dataset has {dataset.num_classes} classes, checkpoint tensor fc/W "
                         f"expects {state.arch.num_classes}")
    pairs = dataset.subset(args.split)
    samples = [Sample.prepare(g, state.arch, c) for g, c in pairs]
    report = evaluate(samples, state)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = dataset.class_names
    per_class = report.per_class()
    summary = {
        "split": args.split,
        "graphs": len(samples),
        "accuracy": report.accuracy,
        "mean_class_accuracy": report.mean_class_accuracy,
        "loss": report.loss,
        "per_class": {names[c]: per_class[c] for c in range(len(names))},
    }
    _write_json(out / "eval_report.json", summary)
    _write_csv(out / "per_class.csv", ["class", "support", "accuracy"],
               [[names[c], int(report.confusion[c].sum()), _fmt(per_class[c])] for c in range(len(names))])
    _write_csv(out / "confusion.csv", ["true\\pred"] + names,
               [[names[c]] + [int(x) for x in report.confusion[c]] for c in range(len(names))])
    print(json.dumps({k: summary[k] for k in ("graphs", "accuracy", "mean_class_accuracy")}))
    return 0


# -- gradcheck / certify ---------------------------------------------------------

def cmd_gradcheck(args) -> int:
    cfg = _resolve_config(args)
    report = gradcheck(cfg.train, cfg.menu, seed=cfg.train.seed, n=args.nodes, h=args.step,
                       tolerance=args.tolerance)
    rows = [[k, _fmt(v), "pass" if v <= report.tolerance else "FAIL"] for k, v in report.errors.items()]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "gradcheck.csv", ["group", "max_rel_error", "status"], rows)
    for r in rows:
        print(f"{r[0]:24s} {float(r[1]):.3e} {r[2]}")
    return 0 if report.passed else 3


def cmd_certify(args) -> int:
    if args.menu:
        raw = json.loads(Path(args.menu).read_text(encoding="utf-8"))
        menu = parse_menu(raw["menu"] if isinstance(raw, dict) else raw)
    elif args.config:
        menu = list(load_config(args.config).menu)
    else:
        menu = list(RunConfig().menu)
    if not menu:
        raise UsageError("laplacian menu is empty")
    if not args.graphs:
        raise UsageError("no graph files given")
    rows = []
    ok = {s.key: True for s in menu}
    for gpath in args.graphs:
        graph = read_graph(gpath)
        stack = build_stack(graph, menu)
        for spec, L in zip(menu, stack.laplacians):
            rep = cpd_check(L.values, args.tol, f"{gpath}:{spec.key}")
            ok[spec.key] &= rep.is_cpd
            rows.append([str(gpath), spec.family, spec.kind, spec.power, _fmt(spec.scale_multiplier),
                         "true" if rep.is_cpd else "false", _fmt(rep.min_centered_eigenvalue)])
    header = ["graph", "family", "kind", "power", "scale_multiplier", "is_cpd", "min_centered_eigenvalue"]
    summary = [[s.family, s.kind, s.power, _fmt(s.scale_multiplier), "true" if ok[s.key] else "false"]
               for s in menu]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "cpd_report.csv", header, rows)
        _write_csv(out / "cpd_summary.csv", ["family", "kind", "power", "scale_multiplier", "all_cpd"], summary)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["family", "kind", "power", "scale_multiplier", "all_cpd"])
    w.writerows(summary)
    return 0


# -- wiring --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override train.seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mlgcn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="skeleton CSV files -> graph files + manifest")
    p.add_argument("input", help="directory of skeleton sequence files")
    p.add_argument("--layout", help="JSON file declaring the CSV column layout")
    p.add_argument("--pattern", default="**/*.txt", help="glob for sequence files (default: %(default)s)")
    p.add_argument("--joints-per-person", dest="joints_per_person", type=int)
    p.add_argument("--persons", type=int)
    p.add_argument("--dims", type=int)
    p.add_argument("--delimiter")
    p.add_argument("--class-component", dest="class_component", type=int,
                   help="index of the relative path component naming the class")
    p.add_argument("--chunks", type=int, default=4)
    p.add_argument("--neighbors", type=int, default=3)
    p.set_defaults(func=cmd_ingest)

    for name, func, helptext in (("train", cmd_train, "train a model"),
                                 ("sweep", cmd_sweep, "train once per pooling mode")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--epochs", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--manifest", help="train on graphs listed in this manifest")
        if name == "train":
            p.add_argument("--pooling", choices=list(POOLING_MODES) + ["sweep"])
        p.set_defaults(func=func)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--manifest")
    p.add_argument("--split", choices=("train", "test", "all"), default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient check")
    p.add_argument("--nodes", type=int, default=5)
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("certify", parents=[common], help="conditional positive definiteness of menu laplacians")
    p.add_argument("graphs", nargs="*")
    p.add_argument("--menu", help="JSON file with a menu list")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_certify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if args.command == "eval" and not args.out:
        args.out = str(Path(args.checkpoint).parent / "eval")
    try:
        return args.func(args)
    except MLGCNError as exc:
        return _fail(args, exc, exc.exit_code)
    except FileNotFoundError as exc:
        return _fail(args, exc, 2)
    except (json.JSONDecodeError, OSError) as exc:
        return _fail(args, exc, 2)


def _fail(args, exc: BaseException, code: int) -> int:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code, "command": args.command}
    print(json.dumps(record), file=sys.stderr)
    out = getattr(args, "out", None)
    if out and args.command != "ingest":
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            _write_json(Path(out) / "error.json", record)
        except OSError:
            pass
    return code


if __name__ == "__main__":
    sys.exit(main())
