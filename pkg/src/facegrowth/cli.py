"""``facegrowth`` command line.

Every subcommand accepts ``--seed``, ``--config`` (a flat JSON object) and
``--out`` (output directory). Settings resolve as built-in defaults, then the
config file, then explicit flags. Failures print one JSON line to stderr and
exit nonzero: 2 for usage and configuration problems, 1 for everything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import io as fio
from .augment import METHODS, AugmentationPlan, LabeledSet, augment
from .evaluation import (
    NOISE_LEVELS,
    REFERENCE,
    CVConfig,
    ExperimentConfig,
    expert_fixture,
    factor_sweep,
    forward_selection,
    mfc_baseline,
    rater_agreement,
    run_experiment,
)
from .features import AGE_COLUMN, FAMILIES, TAGS, GrowthClass, build_feature_matrix, default_specs, load_specs, standardize_fit
from .geometry import LandmarkRegistry
from .models import parse_model
from .svg import line_chart_svg, scatter_svg
from .synth import CohortConfig, generate_cohort


class ConfigError(ValueError):
    pass


class UsageError(ValueError):
    pass


_CLASS_NAMES = {int(c): c.label for c in GrowthClass}

_PLAN_KEYS = ("k_neighbors", "m_neighbors", "enn_k", "clusters", "noise_sigma", "out_step",
              "kmeans_threshold", "kmeans_max_iter", "svm_epochs")
_PLAN_DEFAULTS = {k: getattr(AugmentationPlan(), k) for k in _PLAN_KEYS}
_CV_DEFAULTS = {"folds": 5, "repeats": 20}

_SYNTH_SKIP = ("seed", "age_mean", "age_sd", "age_bounds")
DEFAULTS = {
    "synth": {
        **{f.name: getattr(CohortConfig(), f.name) for f in fields(CohortConfig) if f.name not in _SYNTH_SKIP},
        "age_mean": [9.06, 12.07, 17.41],
        "age_sd": [0.45, 0.39, 1.71],
    },
    "features": {
        "landmarks": None, "families": list(FAMILIES), "tags": list(TAGS), "registry": None, "specs": None,
        "size_mode": "sum", "sd_mode": "population", "require_target": True,
    },
    "evaluate": {
        "features": None, "model": "LR", "columns": ["ceph:SN-MP(12-9)"], "method": "none", "factor": 1.0,
        "standardize": False, "include_age": True, **_CV_DEFAULTS, **_PLAN_DEFAULTS,
    },
    "select": {
        "features": None, "models": ["LR", "NN(5)", "DT"], "candidates": None, "candidate_tags": ["12-9"],
        "families": list(FAMILIES), "top_n": 10, "max_stages": None, "alpha": 0.05, "standardize": False,
        "include_age": True, "method": "none", "factor": 1.0, **_CV_DEFAULTS, **_PLAN_DEFAULTS,
    },
    "augment": {
        "features": None, "columns": ["ceph:SN-MP(12-9)", "trans:Y Antegonial Notch(12-9)"], "method": "smote",
        "factor": 5.0, "standardize": True, **_PLAN_DEFAULTS,
    },
    "sweep": {
        "features": None, "model": "LR", "columns": ["ceph:SN-MP(12-9)"],
        "methods": ["smote", "borderline", "adasyn"], "factors": [1, 5, 10, 20, 30],
        "noise_levels": list(NOISE_LEVELS), "standardize": True, "include_age": True,
        **_CV_DEFAULTS, **_PLAN_DEFAULTS,
    },
    "agreement": {"pred_a": None, "pred_b": None, "truth": None, "fixture": False},
}

# keys that take a file path and may be given as flags
_PATH_FLAGS = {"landmarks", "features", "registry", "specs", "pred_a", "pred_b", "truth"}


def _resolve(command: str, args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS[command])
    seed = 0
    if args.config is not None:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(doc) - set(settings) - {"seed"})
        if unknown:
            raise ConfigError(f"unknown config key(s) for {command}: {', '.join(unknown)}; "
                              f"allowed: {', '.join(sorted(settings))}, seed")
        for k, v in doc.items():
            if isinstance(v, dict):
                raise ConfigError(f"config key {k!r} must be a scalar or list (config is flat)")
        seed = doc.pop("seed", seed)
        settings.update(doc)
    for k in settings:
        v = getattr(args, k, None)
        if v is not None:
            settings[k] = v
    if args.seed is not None:
        seed = args.seed
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    settings["seed"] = seed
    return settings


def _require(settings, *keys):
    for k in keys:
        if settings.get(k) in (None, ""):
            raise UsageError(f"--{k.replace('_', '-')} is required")


def _plan(settings, seed) -> AugmentationPlan:
    return AugmentationPlan(settings["method"], settings["factor"], seed=seed,
                            **{k: settings[k] for k in _PLAN_KEYS})


def _cv(settings) -> CVConfig:
    return CVConfig(int(settings["folds"]), int(settings["repeats"]), settings["seed"])


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_matrix(path):
    fm = fio.parse_feature_csv(path)
    if fm.labels is None:
        raise UsageError(f"{path} has no class column; rebuild features with require_target")
    return fm


def _check_columns(fm, cols):
    missing = [c for c in cols if c not in fm.columns]
    if missing:
        raise UsageError(f"unknown feature column(s): {', '.join(missing)}")


# -- subcommands ------------------------------------------------------------------

def cmd_synth(args, s):
    keys = {f.name for f in fields(CohortConfig)} - set(_SYNTH_SKIP)
    kw = {k: s[k] for k in keys}
    kw["mixture"] = tuple(kw["mixture"])
    kw["magnifications"] = tuple(kw["magnifications"])
    for k in ("age_mean", "age_sd"):
        if len(s[k]) != 3:
            raise ConfigError(f"{k} needs three values (9, 12, 18 years)")
        kw[k] = dict(zip((9, 12, 18), map(float, s[k])))
    cfg = CohortConfig(seed=s["seed"], **kw)
    cohort = generate_cohort(cfg)
    out = _outdir(args)
    fio.write_landmark_csv(cohort.records, out / "landmarks.csv")
    fio.write_truth_csv(cohort.truth, out / "truth.csv")
    counts = np.bincount([t.label for t in cohort.truth], minlength=3)
    fio.write_json({"command": "synth", "config": cfg.to_dict(), "seed": s["seed"],
                    "n_records": len(cohort.records),
                    "class_counts": {_CLASS_NAMES[i]: int(c) for i, c in enumerate(counts)}},
                   out / "synth.json")
    return f"wrote {len(cohort.records)} records for {cfg.n_subjects} subjects to {out}"


def cmd_features(args, s):
    _require(s, "landmarks")
    registry = LandmarkRegistry.from_file(s["registry"]) if s["registry"] else LandmarkRegistry.default()
    specs = load_specs(s["specs"]) if s["specs"] else default_specs(registry, s["families"], s["tags"])
    cohort = fio.parse_landmark_csv(s["landmarks"])
    fm = build_feature_matrix(cohort, specs, registry, require_target=bool(s["require_target"]),
                              size_mode=s["size_mode"], sd_mode=s["sd_mode"])
    out = _outdir(args)
    fio.write_feature_csv(fm, out / "features.csv")
    report = fm.report.to_dict() if fm.report is not None else {}
    report.update({"command": "features", "settings": s, "thresholds": fm.thresholds,
                   "class_counts": None if fm.labels is None else
                   {_CLASS_NAMES[i]: int(c) for i, c in enumerate(np.bincount(fm.labels, minlength=3))}})
    fio.write_json(report, out / "build_report.json")
    return f"wrote {fm.shape[0]}x{fm.shape[1]} feature matrix to {out / 'features.csv'}"


def cmd_evaluate(args, s):
    _require(s, "features")
    fm = _load_matrix(s["features"])
    _check_columns(fm, s["columns"])
    cfg = ExperimentConfig(parse_model(s["model"]), tuple(s["columns"]), _plan(s, s["seed"]),
                           bool(s["standardize"]), bool(s["include_age"]), _cv(s))
    res = run_experiment(cfg, fm)
    doc = res.to_dict()
    doc.update({"command": "evaluate", "settings": s, "mfc": mfc_baseline(fm.labels)})
    out = _outdir(args)
    fio.write_json(doc, out / "report.json")
    return f"{cfg.classifier.name} on {', '.join(cfg.features)}: {res.mean:.4f} +/- {res.sd:.4f} over {len(res)} runs"


def _candidates(fm, s):
    if s["candidates"] is not None:
        _check_columns(fm, s["candidates"])
        return list(s["candidates"])
    tags = tuple(f"({t})" for t in s["candidate_tags"])
    fams = tuple(f"{f}:" for f in s["families"])
    return [c for c in fm.columns if c != AGE_COLUMN and c.endswith(tags) and c.startswith(fams)]


def cmd_select(args, s):
    _require(s, "features")
    fm = _load_matrix(s["features"])
    cands = _candidates(fm, s)
    res = forward_selection(fm, cands, s["models"], _cv(s), plan=_plan(s, s["seed"]),
                            standardize=bool(s["standardize"]), include_age=bool(s["include_age"]),
                            alpha=float(s["alpha"]), max_stages=s["max_stages"])
    out = _outdir(args)
    rows = res.table_rows(int(s["top_n"]))
    fio.write_select_csv(rows, out / "select.csv")
    fio.write_json({"command": "select", "settings": {**s, "candidates": cands},
                    "selected": list(res.selected), "stop_reason": res.stop_reason,
                    "best": {"model": res.best.model, "features": list(res.best.features),
                             "mean": res.best.mean, "sd": res.best.sd},
                    "stages": [{"stage": st.index, "fixed": list(st.fixed), "advanced": st.advanced,
                                "p_vs_previous": st.p_vs_previous} for st in res.stages],
                    "mfc": mfc_baseline(fm.labels), "reference": REFERENCE},
                   out / "select.json")
    return f"selected {', '.join(res.selected)} with {res.best.model}: {res.best.mean:.4f} ({res.stop_reason})"


def cmd_augment(args, s):
    _require(s, "features")
    fm = _load_matrix(s["features"])
    cols = list(s["columns"])
    if len(cols) < 2:
        raise UsageError("augment needs at least two columns to plot")
    _check_columns(fm, cols)
    X = fm.select(cols).values
    if s["standardize"]:
        X = standardize_fit(X).apply(X)
    data = augment(LabeledSet(X, fm.labels), _plan(s, s["seed"]))
    out = _outdir(args)
    fio.write_augmented_csv(data, cols, out / "augmented.csv")
    svg = scatter_svg(data.points[:, :2], data.labels, data.synthetic, class_names=_CLASS_NAMES,
                      title=f"{s['method']} x{s['factor']:g}", xlabel=cols[0], ylabel=cols[1])
    (out / "augmented.svg").write_text(svg, encoding="utf-8")
    meta = {k: v for k, v in data.meta.items() if k != "removed_rows"}
    fio.write_json({"command": "augment", "settings": s, "n_original": int((~data.synthetic).sum()),
                    "n_synthetic": int(data.synthetic.sum()), "meta": meta}, out / "augment.json")
    return f"wrote {len(data)} rows ({int(data.synthetic.sum())} synthetic) to {out / 'augmented.csv'}"


def cmd_sweep(args, s):
    _require(s, "features")
    fm = _load_matrix(s["features"])
    _check_columns(fm, s["columns"])
    unknown = [m for m in s["methods"] if m not in METHODS or m == "none"]
    if unknown:
        raise UsageError(f"unknown sweep method(s): {', '.join(unknown)}")
    base = ExperimentConfig(parse_model(s["model"]), tuple(s["columns"]),
                            _plan({**s, "method": "none", "factor": 1.0}, s["seed"]),
                            bool(s["standardize"]), bool(s["include_age"]), _cv(s))
    res = factor_sweep(base, fm, s["methods"], [float(f) for f in s["factors"]], s["noise_levels"])
    out = _outdir(args)
    rows = res.table_rows()
    fio.write_sweep_csv(rows, out / "sweep.csv")
    series: dict = {}
    for r in rows:
        xs, ys = series.setdefault(r["method"], ([], []))
        xs.append(r["factor"])
        ys.append(r["mean"])
    svg = line_chart_svg(series, baseline=res.baseline.mean, title=f"{base.classifier.name} accuracy vs factor",
                         xlabel="augmentation factor", ylabel="mean accuracy")
    (out / "sweep.svg").write_text(svg, encoding="utf-8")
    fio.write_json({"command": "sweep", "settings": s, "baseline": {"mean": res.baseline.mean, "sd": res.baseline.sd},
                    "rows": [{**d, "p_vs_baseline": r.p_vs_baseline} for d, r in zip(rows, res.rows)],
                    "reference": REFERENCE}, out / "sweep.json")
    return f"wrote {len(rows)} sweep rows to {out / 'sweep.csv'}"


def cmd_agreement(args, s):
    out = _outdir(args)
    if s["fixture"]:
        a, b, t = expert_fixture(seed=s["seed"])
        ids = [f"E{i + 1:04d}" for i in range(t.size)]
        paths = {k: out / f"{k}.csv" for k in ("pred_a", "pred_b")}
        fio.write_predictions_csv(ids, a, paths["pred_a"])
        fio.write_predictions_csv(ids, b, paths["pred_b"])
        fio.write_predictions_csv(ids, t, out / "truth.csv")
        s = {**s, "pred_a": str(paths["pred_a"]), "pred_b": str(paths["pred_b"]), "truth": str(out / "truth.csv")}
    _require(s, "pred_a", "pred_b", "truth")
    pa, pb, tr = (fio.parse_predictions_csv(s[k]) for k in ("pred_a", "pred_b", "truth"))
    if not (set(pa) == set(pb) == set(tr)):
        raise UsageError("prediction and truth files cover different subjects")
    ids = list(tr)
    agr = rater_agreement([pa[i] for i in ids], [pb[i] for i in ids], [tr[i] for i in ids])
    fio.write_json({"command": "agreement", "settings": s, "n": len(ids), "accuracy_a": agr.accuracy_a,
                    "accuracy_b": agr.accuracy_b, "consistency": agr.consistency,
                    "reference": {"expert_accuracy": list(REFERENCE["expert_accuracy"]),
                                  "expert_consistency": REFERENCE["expert_consistency"]}},
                   out / "agreement.json")
    return f"accuracy {agr.accuracy_a:.4f} / {agr.accuracy_b:.4f}, consistency {agr.consistency:.4f}"


COMMANDS = {
    "synth": (cmd_synth, "generate a synthetic cohort and its truth table"),
    "features": (cmd_features, "landmark CSV to feature-matrix CSV and build report"),
    "evaluate": (cmd_evaluate, "cross-validate one configuration"),
    "select": (cmd_select, "staged forward feature selection"),
    "augment": (cmd_augment, "dump an augmented set and a scatter plot"),
    "sweep": (cmd_sweep, "accuracy against augmentation factor"),
    "agreement": (cmd_agreement, "accuracy and consistency of two raters"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _json_list(text):
    try:
        v = json.loads(text)
    except json.JSONDecodeError:
        v = [p.strip() for p in text.split(",") if p.strip()]
    return v if isinstance(v, list) else [v]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="facegrowth", description="Facial growth-direction prediction toolkit.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name, (_, helptext) in COMMANDS.items():
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
        sp.add_argument("--config", default=None, help="flat JSON settings file")
        sp.add_argument("--out", default=".", help="output directory")
        for key in DEFAULTS[name]:
            if key in _PATH_FLAGS:
                sp.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None)
        if name == "synth":
            sp.add_argument("--n-subjects", dest="n_subjects", type=int, default=None)
            sp.add_argument("--signal-strength", dest="signal_strength", type=float, default=None)
        if name in ("evaluate", "sweep"):
            sp.add_argument("--model", default=None, help='menu notation, e.g. "LR" or "MLP(50, 10)"')
        if name in ("evaluate", "sweep", "augment"):
            sp.add_argument("--columns", type=_json_list, default=None, help="feature columns (JSON list or comma list)")
        if name in ("evaluate", "augment"):
            sp.add_argument("--method", default=None, choices=METHODS)
            sp.add_argument("--factor", type=float, default=None)
        if name in ("evaluate", "select", "sweep"):
            sp.add_argument("--folds", type=int, default=None)
            sp.add_argument("--repeats", type=int, default=None)
        if name == "select":
            sp.add_argument("--max-stages", dest="max_stages", type=int, default=None)
            sp.add_argument("--models", type=_json_list, default=None)
        if name == "sweep":
            sp.add_argument("--methods", type=_json_list, default=None)
            sp.add_argument("--factors", type=_json_list, default=None)
        if name == "agreement":
            sp.add_argument("--fixture", action="store_const", const=True, default=None,
                            help="write and score the 181-case two-rater fixture")
    return p


def _fail(exc: BaseException, code: int) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc).replace("\n", " ")}
    for attr in ("line", "column", "repeat", "fold"):
        if getattr(exc, attr, None) is not None:
            doc[attr] = getattr(exc, attr)
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        settings = _resolve(args.command, args)
        func = COMMANDS[args.command][0]
        message = func(args, settings)
    except (UsageError, ConfigError) as exc:
        return _fail(exc, 2)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:
        return _fail(exc, 1)
    print(message)
    return 0


if __name__ == "__main__":
    sys.exit(main())
