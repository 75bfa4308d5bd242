"""Command-line entry point: ``weldid <command> [--config FILE] ...``.

Every command reads and writes plain files in the run directory (``--out``)
and records input/output digests in ``manifest.json`` there.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig
from .detect import cluster_detections, match_events
from .evaluation import (
    CellResult,
    EvalReport,
    cross_validate,
    evaluate_holdout,
    make_estimator,
)
from .exceptions import ConfigError, DataError, WeldIdError
from .feature_select import FeatureSubset, best_first_select
from .ingest import ODOMETER, POSITIVE, NEGATIVE, read_arff, read_csv, write_arff, write_csv
from .mlp import MLPWeldClassifier, MlpModel
from .preprocess import (
    Dataset,
    build_balanced_sets,
    filter_out_of_range,
    format_tally,
    independent_test_set,
    label_records,
    parse_tally,
    trim_stationary_head,
)
from .svm import PukSVC, SvmModel
from .synth import generate_run

COMMANDS = ("simulate", "clean", "prepare", "select", "train", "evaluate", "detect",
            "report", "reproduce")


class MissingArtifact(ConfigError):
    def __init__(self, path, hint):
        self.path = path
        super().__init__(f"missing input file {path} ({hint})")


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Workspace:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = cfg.out
        self.raw_csv = self.out / "raw.csv"
        self.sim_tally = self.out / "tally.txt"
        self.clean_csv = self.out / "clean.csv"
        self.cleaning_log = self.out / "cleaning_log.txt"
        self.splits = self.out / "splits.txt"
        self.test_arff = self.out / "levels" / f"test_{cfg.prepare_params['test_size']}.arff"
        self.results_csv = self.out / "eval" / "results.csv"
        self.tables = self.out / "eval" / "tables.txt"
        self.weld_report = self.out / "detect" / "weld_report.csv"
        self.detect_summary = self.out / "detect" / "summary.txt"
        self.report = self.out / "report.txt"
        self.manifest = self.out / "manifest.json"

    def level_arff(self, name, selected=False):
        suffix = "_selected" if selected else ""
        return self.out / "levels" / f"level_{name}{suffix}.arff"

    def selection(self, name):
        return self.out / "select" / f"level_{name}.txt"

    def model(self, classifier, features, level):
        return self.out / "models" / f"{classifier}_{features}_{level}.model"

    def roc(self, cell: CellResult):
        return self.out / "eval" / "roc" / \
            f"{cell.level}_{cell.classifier}_{cell.features}_{cell.mode}.txt"

    @property
    def tally_path(self) -> Path:
        return self.cfg.input_tally or self.sim_tally

    @property
    def input_csv(self) -> Path:
        return self.cfg.input_csv or self.raw_csv

    def require(self, path: Path, hint: str) -> Path:
        if not path.is_file():
            raise MissingArtifact(path, hint)
        return path

    def write(self, path: Path, text: str):
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)

    def rel(self, path: Path) -> str:
        try:
            return str(path.relative_to(self.out))
        except ValueError:
            return str(path)

    def record(self, command, inputs, outputs):
        manifest = {}
        if self.manifest.is_file():
            manifest = json.loads(self.manifest.read_text())
        manifest.setdefault("config", {})
        manifest["config"] = self.cfg.sections
        manifest.setdefault("commands", {})[command] = {
            "seed": self.cfg.seed,
            "inputs": {self.rel(p): _digest(p) for p in inputs},
            "outputs": {self.rel(p): _digest(p) for p in outputs},
        }
        self.write(self.manifest, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# -- small file formats --------------------------------------------------------

def _read_kv(path: Path) -> dict:
    out = {}
    for line in path.read_text().splitlines():
        if "=" in line and not line.lstrip().startswith("#"):
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out


def _read_splits(ws: Workspace) -> dict:
    kv = _read_kv(ws.require(ws.splits, "run `weldid prepare` first"))
    levels = [k.split(".")[1] for k in kv if k.startswith("level.") and k.endswith(".span")]
    span = lambda s: tuple(float(v) for v in s.split(","))
    return {"levels": levels,
            "spans": {n: span(kv[f"level.{n}.span"]) for n in levels},
            "test": span(kv["test.span"]),
            "heldout_start": float(kv["heldout.start"])}


def _load_tally(ws):
    return parse_tally(ws.require(ws.tally_path, "run `weldid simulate` or set [input] tally")
                       .read_text())


def _load_level(ws, name) -> Dataset:
    path = ws.require(ws.level_arff(name), "run `weldid prepare` first")
    return Dataset.from_table(read_arff(path), level=name)


def _load_selection(ws, name) -> FeatureSubset:
    path = ws.require(ws.selection(name), "run `weldid select` first")
    return FeatureSubset.from_text(path.read_text())


def _features_for(ws, data: Dataset, features: str):
    if features == "selected":
        return _load_selection(ws, data.level).features
    return data.feature_names


def _load_model(ws, classifier, features, level):
    path = ws.require(ws.model(classifier, features, level), "run `weldid train` first")
    text = path.read_text()
    feats = tuple(_read_kv(path)["features"].split(","))
    if classifier == "svm":
        return PukSVC.from_model(SvmModel.from_text(text)), feats, path
    return MLPWeldClassifier.from_model(MlpModel.from_text(text)), feats, path


def _selected_levels(ws, args):
    if args.level is not None:
        return [str(args.level)]
    return ws.cfg.eval_params["levels"]


def _cells(ws, args):
    ep = ws.cfg.eval_params
    classifiers = [args.classifier] if args.classifier else ep["classifiers"]
    features = [args.features] if args.features else ep["features"]
    return [(lv, c, f) for lv in _selected_levels(ws, args)
            for c in classifiers for f in features]


# -- commands ------------------------------------------------------------------

def cmd_simulate(ws: Workspace, args):
    run = generate_run(ws.cfg.synth)
    ws.write(ws.raw_csv, write_csv(run.table))
    ws.write(ws.sim_tally, format_tally(run.tally))
    ws.record("simulate", [], [ws.raw_csv, ws.sim_tally])
    print(f"simulated {len(run.table)} records, {len(run.tally)} welds -> {ws.raw_csv}")


def cmd_clean(ws: Workspace, args):
    src = ws.require(ws.input_csv, "run `weldid simulate` or set [input] csv")
    table = read_csv(src)
    kept, log1 = filter_out_of_range(table)
    kept, log2 = trim_stationary_head(kept, **ws.cfg.clean_params)
    log = log1.then(log2)
    ws.write(ws.clean_csv, write_csv(kept))
    ws.write(ws.cleaning_log, log.to_text())
    ws.record("clean", [src], [ws.clean_csv, ws.cleaning_log])
    print(f"retained {log.retained} of {log.input_rows} records "
          f"({sum(log.out_of_range.values())} out of range, "
          f"{log.stationary_head} stationary)")


def cmd_prepare(ws: Workspace, args):
    p = ws.cfg.prepare_params
    table = read_csv(ws.require(ws.clean_csv, "run `weldid clean` first"))
    tally = _load_tally(ws)
    labeled = label_records(table, tally, p["half_window_m"])
    levels = build_balanced_sets(labeled, tally, p["n_levels"], ws.cfg.seed, p["sizes"])
    test = independent_test_set(labeled, tally, p["test_size"], ws.cfg.seed,
                                levels.spans())
    outputs = []
    lines = []
    for lv in levels:
        path = ws.level_arff(lv.name)
        ws.write(path, write_arff(lv.table, f"level_{lv.name}"))
        outputs.append(path)
        lines.append(f"level.{lv.name}.span = {lv.span[0]!r},{lv.span[1]!r}")
        lines.append(f"level.{lv.name}.welds = {lv.n_welds}")
    ws.write(ws.test_arff, write_arff(test.table, f"test_{len(test.table)}"))
    lines.append(f"test.span = {test.span[0]!r},{test.span[1]!r}")
    lines.append(f"test.welds = {test.n_welds}")
    lines.append(f"heldout.start = {max(s[1] for s in levels.spans())!r}")
    ws.write(ws.splits, "\n".join(lines) + "\n")
    outputs += [ws.test_arff, ws.splits]
    ws.record("prepare", [ws.clean_csv, ws.tally_path], outputs)
    sizes = ", ".join(f"{lv.name}:{len(lv.table)}" for lv in levels)
    print(f"levels {sizes}; test set {len(test.table)} records")


def cmd_select(ws: Workspace, args):
    names = [str(args.level)] if args.level is not None else _read_splits(ws)["levels"]
    inputs, outputs = [], []
    for name in names:
        data = _load_level(ws, name)
        subset = best_first_select(data, **ws.cfg.cfs_params)
        ws.write(ws.selection(name), subset.to_text())
        table = read_arff(ws.level_arff(name))
        keep = [c for c in table.columns if c in subset.features]
        idx = [table.columns.index(c) for c in keep]
        sel_table = type(table)(tuple(keep), table.values[:, idx], table.labels)
        ws.write(ws.level_arff(name, True), write_arff(sel_table, f"level_{name}_selected"))
        inputs.append(ws.level_arff(name))
        outputs += [ws.selection(name), ws.level_arff(name, True)]
        print(f"level {name}: {{{', '.join(subset.features)}}} merit={subset.merit:.4f}")
    ws.record("select", inputs, outputs)


def cmd_train(ws: Workspace, args):
    cells = _cells(ws, args)
    d = ws.cfg.detect_params
    if args.level is None and args.classifier is None and args.features is None:
        cell = (d["level"], d["classifier"], d["features"])
        if cell not in cells:
            cells.append(cell)
    params = ws.cfg.estimator_params
    inputs, outputs = [], []
    for level, clf, feats in cells:
        data = _load_level(ws, level)
        names = _features_for(ws, data, feats)
        train = data.select(names)
        est = make_estimator(clf, params[clf], ws.cfg.seed).fit(train.X, train.y)
        path = ws.model(clf, feats, level)
        ws.write(path, est.model_.to_text() + f"features = {','.join(names)}\n")
        inputs.append(ws.level_arff(level))
        if feats == "selected":
            inputs.append(ws.selection(level))
        outputs.append(path)
        print(f"trained {path.name} on {len(train)} records, features {', '.join(names)}")
    ws.record("train", sorted(set(inputs)), outputs)


def cmd_evaluate(ws: Workspace, args):
    cells = _cells(ws, args)
    # every model must exist before any work starts
    for level, clf, feats in cells:
        ws.require(ws.model(clf, feats, level), "run `weldid train` first")
    test_table = read_arff(ws.require(ws.test_arff, "run `weldid prepare` first"))
    test = Dataset.from_table(test_table, level="test")
    params = ws.cfg.estimator_params
    k = ws.cfg.eval_params["k"]
    report = EvalReport(k=k, test_size=len(test))
    inputs, outputs = [ws.test_arff], []
    for level, clf, feats in cells:
        data = _load_level(ws, level)
        model, names, mpath = _load_model(ws, clf, feats, level)
        train = data.select(names)
        est = make_estimator(clf, params[clf], ws.cfg.seed)
        cm, pred = cross_validate(train, est, k, ws.cfg.seed)
        report.cells.append(CellResult(level, clf, feats, "cv", tuple(names), cm,
                                       pred.roc(), ws.cfg.seed, params[clf]))
        hold = evaluate_holdout(model, test.select(names))
        report.cells.append(CellResult(level, clf, feats, "independent", tuple(names),
                                       hold.confusion, hold.roc(), ws.cfg.seed,
                                       params[clf]))
        inputs += [ws.level_arff(level), mpath]
    for cell in report.cells:
        ws.write(ws.roc(cell), cell.roc.to_text())
        outputs.append(ws.roc(cell))
    ws.write(ws.results_csv, report.to_csv())
    ws.write(ws.tables, report.to_text())
    outputs += [ws.results_csv, ws.tables]
    ws.record("evaluate", sorted(set(inputs)), outputs)
    print(report.to_text(), end="")


def cmd_detect(ws: Workspace, args):
    d = ws.cfg.detect_params
    level = str(args.level) if args.level is not None else d["level"]
    clf = args.classifier or d["classifier"]
    feats = args.features or d["features"]
    model, names, mpath = _load_model(ws, clf, feats, level)
    splits = _read_splits(ws)
    table = read_csv(ws.require(ws.clean_csv, "run `weldid clean` first"))
    tally = _load_tally(ws)
    od = table.column(ODOMETER)
    mask = od >= splits["heldout_start"]
    if not mask.any():
        raise DataError("no records after the training spans")
    X = np.column_stack([table.column(n) for n in names])[mask]
    labels = np.asarray(model.predict(X)).astype(bool)
    scores = model.decision_function(X)
    preds = [(o, POSITIVE if lab else NEGATIVE, s)
             for o, lab, s in zip(od[mask].tolist(), labels, scores.tolist())]
    events = cluster_detections(preds, d["max_gap_m"], d["min_records"])
    report = match_events(events, tally.within(splits["heldout_start"], od[mask][-1]),
                          d["tol_m"])
    ws.write(ws.weld_report, report.to_csv())
    summary = (f"model = {mpath.name}\n"
               f"span_m = {splits['heldout_start']!r},{float(od[mask][-1])!r}\n"
               + report.summary())
    ws.write(ws.detect_summary, summary)
    ws.record("detect", [mpath, ws.clean_csv, ws.tally_path, ws.splits],
              [ws.weld_report, ws.detect_summary])
    print(summary, end="")


def cmd_report(ws: Workspace, args):
    parts = ["Weld recognition run report", "=" * 27, ""]
    inputs = []
    if ws.cleaning_log.is_file():
        parts += ["Cleaning", "--------", ws.cleaning_log.read_text()]
        inputs.append(ws.cleaning_log)
    sel = sorted((ws.out / "select").glob("level_*.txt")) if (ws.out / "select").is_dir() \
        else []
    if sel:
        parts += ["Selected attributes", "-------------------"]
        for path in sel:
            subset = FeatureSubset.from_text(path.read_text())
            name = path.stem.removeprefix("level_")
            parts.append(f"level {name}: {', '.join(subset.features)} "
                         f"(merit {subset.merit:.4f})")
            inputs.append(path)
        parts.append("")
    tables = ws.require(ws.tables, "run `weldid evaluate` first")
    parts += ["Evaluation", "----------", tables.read_text()]
    inputs.append(tables)
    if ws.detect_summary.is_file():
        parts += ["Weld localization", "-----------------", ws.detect_summary.read_text()]
        inputs.append(ws.detect_summary)
    ws.write(ws.report, "\n".join(parts))
    ws.record("report", inputs, [ws.report])
    print(f"report written to {ws.report}")


def cmd_reproduce(ws: Workspace, args):
    for step in (cmd_simulate, cmd_clean, cmd_prepare, cmd_select, cmd_train,
                 cmd_evaluate, cmd_detect, cmd_report):
        step(ws, args)


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file (defaults are built in)")
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--out", help="run directory, overrides [run] out")
    common.add_argument("--level", help="level name (record count), e.g. 1838")
    common.add_argument("--classifier", choices=("mlp", "svm"))
    common.add_argument("--features", choices=("all", "selected"))
    parser = argparse.ArgumentParser(prog="weldid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, args.seed, args.out)
        HANDLERS[args.command](Workspace(cfg), args)
    except ConfigError as exc:
        print(f"weldid: config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"weldid: data error: {exc}", file=sys.stderr)
        return 1
    except WeldIdError as exc:
        print(f"weldid: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
