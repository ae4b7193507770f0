"""Command-line front end.

    claimclass ingest   --config run.yaml
    claimclass explore  --config run.yaml [--geojson departements.geojson]
    claimclass train    --config run.yaml --model knn|logreg
    claimclass evaluate --config run.yaml --model knn|logreg [--model-file PATH]
    claimclass sweep    --config run.yaml --param k|C --values 1:30
    claimclass plot     --input sweep_k.csv --output sweep_k.svg

Exit codes: 0 success, 1 computation error, 2 usage or configuration error.
Artifacts carry no timestamps, so reruns with the same inputs produce the
same bytes.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import evaluation, ingest, knn, logreg
from .config import ConfigError, RunConfig, load_config
from .explore import stats as xstats
from .explore import svg
from .pipeline import impute, prepare

log = logging.getLogger("claimclass")

MERGED = "merged.csv"
MODEL_FILES = {"knn": "model_knn.npz", "logreg": "model_logreg.json"}


class UsageError(Exception):
    pass


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def _json_default(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if v is evaluation.UNDEFINED:
        return None
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _manifest(cfg: RunConfig, command: str, inputs: dict, outputs: list):
    data = {
        "command": command,
        "config": cfg.to_dict(),
        "inputs": {name: {"path": str(p), "sha256": sha256(p)} for name, p in inputs.items()},
        "outputs": sorted(str(Path(o).relative_to(cfg.output_dir)) for o in outputs),
    }
    _write_json(cfg.output_dir / f"manifest_{command}.json", data)


def _require_file(path, what):
    if not path:
        raise UsageError(f"no {what} given")
    if not Path(path).is_file():
        raise UsageError(f"{what} not found: {path}")
    return Path(path)


def _load_merged(cfg: RunConfig):
    path = cfg.output_dir / MERGED
    if not path.is_file():
        raise UsageError(f"{path} not found; run 'claimclass ingest' first")
    return ingest.read_merged_csv(path), sha256(path)


def _prepared(cfg: RunConfig, dataset):
    p = cfg.preprocess
    data = impute(dataset, cfg.ingest.impute, cfg.ingest.impute_external)
    return prepare(
        data,
        p.categorical,
        p.numeric,
        p.scaling,
        p.fit_on_train,
        float(p.test_fraction),
        int(p.seed),
        p.subsample,
    )


def _metric(order) -> knn.DistanceMetric:
    if str(order).lower() == "chebyshev":
        return knn.DistanceMetric.chebyshev()
    return knn.DistanceMetric("minkowski", float(order))


def _lam(opts) -> float:
    return float(opts.lam) if opts.C is None else 1.0 / float(opts.C)


def _fit_config(opts) -> logreg.FitConfig:
    return logreg.FitConfig(max_iterations=int(opts.max_iterations), tolerance=float(opts.tolerance))


# --- commands ---------------------------------------------------------------


def cmd_ingest(cfg: RunConfig, args) -> int:
    policy = _require_file(cfg.paths.policy_csv, "policy CSV")
    claims = _require_file(cfg.paths.claim_csv, "claim CSV")
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)

    sep = cfg.ingest.id_separator
    policies = ingest.parse_policy_csv(policy, separator=sep)
    claim_rows = ingest.parse_claim_csv(claims)
    dataset = ingest.merge(policies, ingest.aggregate_claims(claim_rows, separator=sep))

    merged_path = out / MERGED
    ingest.write_merged_csv(dataset, merged_path)
    summary = {
        "policies": len(dataset),
        "claim_rows": len(claim_rows),
        "total_claims": int(dataset["claim_nb"].sum()),
        "total_claim_amount": round(float(np.round(dataset["claim_amount"].sum(), 2)), 2),
        "missing_vh_age": dataset.loc[dataset["vh_age"].isna(), "id_policy"].tolist(),
        "label_balance": ingest.label_balance(dataset),
        "claim_frequency": {str(k): v for k, v in ingest.claim_frequency_histogram(dataset).items()},
    }
    summary_path = out / "ingest_summary.json"
    _write_json(summary_path, summary)
    _manifest(cfg, "ingest", {"policy_csv": policy, "claim_csv": claims}, [merged_path, summary_path])

    bal = summary["label_balance"]
    print(f"policies           {summary['policies']:,}")
    print(f"claims             {summary['total_claims']:,} totalling {summary['total_claim_amount']:,.2f}")
    print(f"without claims     {bal['without_claims']:,} ({100 * bal['share_without_claims']:.1f}%)")
    print(f"with claims        {bal['with_claims']:,} ({100 * bal['share_with_claims']:.1f}%)")
    print("claim frequency    " + "  ".join(f"{k}: {v:,}" for k, v in summary["claim_frequency"].items()))
    return 0


def cmd_explore(cfg: RunConfig, args) -> int:
    dataset, digest = _load_merged(cfg)
    out = cfg.output_dir / "explore"
    out.mkdir(parents=True, exist_ok=True)
    opts = cfg.exploration
    outputs = []

    for feature in opts.features:
        binning = opts.bins.get(feature)
        rows = xstats.claim_proportion_by_level(dataset, feature, binning, opts.count, opts.interval)
        csv_path = out / f"proportion_{feature}.csv"
        with csv_path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["level", "policy_count", "claim_count", "proportion", "ci_low", "ci_high"])
            for r in rows:
                writer.writerow([r.level, r.policy_count, r.claim_count, repr(r.proportion), repr(r.ci_low), repr(r.ci_high)])
        svg_path = out / f"proportion_{feature}.svg"
        svg.save(svg.render_bar_with_ci(rows, f"Policies and claim proportion per {feature}", feature), svg_path)
        outputs += [csv_path, svg_path]

    present = dataset.copy()
    present = present.loc[present["vh_age"].notna()]
    corr = xstats.pearson_correlation_matrix(present[opts.heatmap_columns].astype(float))
    heat_path = out / "heatmap.svg"
    svg.save(svg.render_heatmap(corr), heat_path)
    corr_path = out / "correlation.csv"
    np.savetxt(corr_path, corr.values, delimiter=",", header=",".join(corr.names), comments="", fmt="%.17g")
    outputs += [heat_path, corr_path]

    aggregates = xstats.aggregate_by_department(dataset)
    dep_path = out / "departments.csv"
    xstats.departments_frame(aggregates).to_csv(dep_path, index=False, lineterminator="\n")
    table_path = out / "department_stats.csv"
    xstats.department_table(aggregates).to_csv(table_path, index=False, float_format="%.2f", lineterminator="\n")
    outputs += [dep_path, table_path]

    inputs = {"merged": cfg.output_dir / MERGED}
    if cfg.paths.geojson:
        geo = _require_file(cfg.paths.geojson, "GeoJSON file")
        inputs["geojson"] = geo
        titles = {
            "claim_count": "Total number of claims per department",
            "claim_amount": "Total amount of claims per department",
            "policy_count": "Total number of policies per department",
        }
        for field, title in titles.items():
            path = out / f"choropleth_{field}.svg"
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                doc = svg.render_choropleth(geo, aggregates, field, opts.code_property, title)
            for w in caught:
                log.warning("%s", w.message)
            svg.save(doc, path)
            outputs.append(path)
    else:
        log.warning("no GeoJSON path configured; skipping choropleths")

    _manifest(cfg, "explore", inputs, outputs)
    print(xstats.department_table(aggregates).to_string(index=False, float_format=lambda v: f"{v:,.2f}"))
    print(f"wrote {len(outputs)} files to {out}")
    return 0


def _train_extra(cfg, digest):
    p = cfg.preprocess
    return {
        "dataset_sha256": digest,
        "impute": cfg.ingest.impute,
        "impute_external": cfg.ingest.impute_external,
        "test_fraction": float(p.test_fraction),
        "seed": int(p.seed),
        "subsample": p.subsample,
        "fit_on_train": bool(p.fit_on_train),
    }


def cmd_train(cfg: RunConfig, args) -> int:
    dataset, digest = _load_merged(cfg)
    prep = _prepared(cfg, dataset)
    out = cfg.output_dir
    kind = args.model
    path = Path(args.model_file) if args.model_file else out / MODEL_FILES[kind]
    extra = _train_extra(cfg, digest)
    pos = cfg.evaluation.positive_class

    if kind == "knn":
        o = cfg.model.knn
        model = knn.fit(prep.train.values, prep.train.labels, int(o.k), _metric(o.order), o.weighting, prep.schema, prep.scaling)
        knn.save_model(model, path, extra)
    else:
        o = cfg.model.logreg
        model = logreg.fit(prep.train.values, prep.train.labels, o.penalty, _lam(o), _fit_config(o), float(o.mix), prep.schema, prep.scaling)
        logreg.save_model(model, path, extra)
        log.info("logreg stopped after %d iterations (converged=%s)", model.iterations, model.converged)

    rep = evaluation.evaluate(
        model, prep.train.values, prep.train.labels, pos, threads=cfg.threads, threshold=cfg.model.logreg.threshold
    )
    metrics_path = out / f"train_metrics_{kind}.json"
    _write_json(metrics_path, {"split": "train", "rows": len(prep.train), **rep.to_dict()})
    _manifest(cfg, f"train_{kind}", {"merged": out / MERGED}, [path, metrics_path])
    print(f"saved {path}")
    print(rep.format_table())
    return 0


def _load_any_model(path):
    path = Path(path)
    if path.suffix == ".npz":
        return knn.load_model(path)
    return logreg.load_model(path)


def cmd_evaluate(cfg: RunConfig, args) -> int:
    path = Path(args.model_file) if args.model_file else cfg.output_dir / MODEL_FILES[args.model]
    _require_file(path, "model file")
    model, extra = _load_any_model(path)
    dataset, digest = _load_merged(cfg)
    if extra.get("dataset_sha256") != digest:
        raise ValueError(f"{path} was trained on a different ingest artifact (dataset hash mismatch)")
    data = impute(dataset, extra["impute"], extra["impute_external"])
    prep = prepare(
        data,
        test_fraction=extra["test_fraction"],
        seed=extra["seed"],
        schema=model.schema,
        scaling_params=model.scaling,
    )
    rep = evaluation.evaluate(
        model,
        prep.test.values,
        prep.test.labels,
        cfg.evaluation.positive_class,
        threads=cfg.threads,
        threshold=cfg.model.logreg.threshold,
    )
    kind = "knn" if isinstance(model, knn.KnnModel) else "logreg"
    report_path = cfg.output_dir / f"metrics_{kind}.json"
    report_path.write_text(rep.to_json() + "\n", encoding="utf-8")
    _manifest(cfg, f"evaluate_{kind}", {"merged": cfg.output_dir / MERGED, "model": path}, [report_path])
    print(rep.format_table())
    return 0


def parse_values(spec: str, integer: bool):
    """``a:b`` (inclusive integer range), ``log:lo:hi:n`` (log grid) or ``v1,v2,...``."""
    spec = spec.strip()
    try:
        if spec.startswith("log:"):
            lo, hi, n = spec[4:].split(":")
            values = [float(v) for v in np.logspace(float(lo), float(hi), int(n))]
        elif ":" in spec:
            lo, hi = spec.split(":")
            values = list(range(int(lo), int(hi) + 1))
        else:
            values = [float(v) for v in spec.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse values {spec!r}") from None
    if not values:
        raise UsageError("no sweep values given")
    if integer:
        if any(float(v) != int(v) for v in values):
            raise UsageError("k values must be integers")
        values = [int(v) for v in values]
    return values


def cmd_sweep(cfg: RunConfig, args) -> int:
    dataset, _ = _load_merged(cfg)
    prep = _prepared(cfg, dataset)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    train = (prep.train.values, prep.train.labels)
    test = (prep.test.values, prep.test.labels)
    outputs = []

    if args.param == "k":
        values = parse_values(args.values, integer=True)
        o = cfg.model.knn
        rows = knn.accuracy_vs_k_sweep(train, test, values, _metric(o.order), o.weighting, cfg.threads)
        csv_path, svg_path = out / "sweep_k.csv", out / "sweep_k.svg"
        evaluation.write_sweep_csv(rows, csv_path, "k")
        ks = [r.k for r in rows]
        doc = svg.render_line(
            {"train": (ks, [r.train_accuracy for r in rows]), "test": (ks, [r.test_accuracy for r in rows])},
            "Training and test accuracy for different values of k",
            "k",
            "accuracy",
        )
        svg.save(doc, svg_path)
        outputs += [csv_path, svg_path]
        for r in rows:
            print(f"k={r.k:<4} train={r.train_accuracy:.4f} test={r.test_accuracy:.4f}")
    else:
        values = sorted(parse_values(args.values, integer=False))
        o = cfg.model.logreg
        penalty = args.penalty or o.penalty
        fit_cfg = _fit_config(o)
        points = logreg.regularization_path(train[0], train[1], penalty, values, fit_cfg, float(o.mix))
        path_csv, path_svg = out / "path_C.csv", out / "path_C.svg"
        logreg.write_path_csv(points, prep.schema.names, path_csv)
        series = {name: (values, [float(p.weights[j]) for p in points]) for j, name in enumerate(prep.schema.names)}
        svg.save(svg.render_line(series, f"Coefficients for different values of C ({penalty})", "C", "coefficient", log_x=True), path_svg)
        rows = []
        for p in points:
            m = logreg.LogregModel(p.weights, p.intercept, penalty, 1.0 / p.C)
            rows.append(
                (
                    p.C,
                    float(np.mean(logreg.predict(train[0], m, o.threshold) == train[1])),
                    float(np.mean(logreg.predict(test[0], m, o.threshold) == test[1])),
                )
            )
        acc_csv, acc_svg = out / "sweep_C.csv", out / "sweep_C.svg"
        evaluation.write_sweep_csv(rows, acc_csv, "C")
        svg.save(
            svg.render_line(
                {"train": (values, [r[1] for r in rows]), "test": (values, [r[2] for r in rows])},
                "Training and test accuracy for different values of C",
                "C",
                "accuracy",
                log_x=True,
            ),
            acc_svg,
        )
        outputs += [path_csv, path_svg, acc_csv, acc_svg]
        for C, tr, te in rows:
            print(f"C={C:<10.4g} train={tr:.4f} test={te:.4f}")

    _manifest(cfg, f"sweep_{args.param}", {"merged": out / MERGED}, outputs)
    return 0


def cmd_plot(cfg: RunConfig, args) -> int:
    """Line plot of a sweep or path CSV: first column on x, the rest as series."""
    src = _require_file(args.input, "input CSV")
    with src.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{src} has no data rows")
    header, body = rows[0], rows[1:]
    columns = args.columns or header[1:]
    missing = [c for c in columns if c not in header]
    if missing:
        raise UsageError(f"columns not in {src}: {missing}")
    xs = [float(r[0]) for r in body]
    series = {c: (xs, [float(r[header.index(c)]) for r in body]) for c in columns}
    doc = svg.render_line(series, args.title or src.stem, header[0], args.ylabel, log_x=args.log_x)
    out = Path(args.output) if args.output else src.with_suffix(".svg")
    svg.save(doc, out)
    print(f"wrote {out}")
    return 0


# --- argument parsing -----------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--out", help="output directory (overrides paths.output_dir)")
    common.add_argument("--seed", type=int, help="split seed (overrides preprocess.seed)")
    common.add_argument("--threads", type=int, help="worker threads for KNN queries")
    common.add_argument("--subsample", type=int, help="cap the number of training rows")
    common.add_argument("--positive-class", choices=["claims", "no-claims"])
    common.add_argument("--fit-on-train", action="store_true", default=None, help="fit the scaler on training rows only")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="claimclass", description="Claim / no-claim policy classification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse, aggregate and merge the input tables")
    p.add_argument("--policy", help="policy CSV (overrides paths.policy_csv)")
    p.add_argument("--claims", help="claim CSV (overrides paths.claim_csv)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("explore", parents=[common], help="claim proportions, heatmap, department maps")
    p.add_argument("--geojson", help="department GeoJSON (overrides paths.geojson)")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("train", parents=[common], help="fit a classifier on the training split")
    p.add_argument("--model", choices=["knn", "logreg"], required=True)
    p.add_argument("--model-file", help="where to write the model")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="score a saved model on the test split")
    p.add_argument("--model", choices=["knn", "logreg"], default="knn")
    p.add_argument("--model-file", help="model to load (default: the one train wrote)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", parents=[common], help="accuracy over k, or coefficient paths over C")
    p.add_argument("--param", choices=["k", "C"], required=True)
    p.add_argument("--values", required=True, help="a:b, log:lo:hi:n, or a comma list")
    p.add_argument("--penalty", choices=list(logreg.PENALTIES), help="penalty for C sweeps")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", parents=[common], help="render a sweep/path CSV as an SVG line chart")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--columns", nargs="+")
    p.add_argument("--title")
    p.add_argument("--ylabel", default="")
    p.add_argument("--log-x", action="store_true")
    p.set_defaults(func=cmd_plot)
    return parser


def _apply_overrides(cfg: RunConfig, args):
    if args.out:
        cfg.paths.output_dir = args.out
    if args.seed is not None:
        cfg.preprocess.seed = args.seed
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg.threads = args.threads
    if args.subsample is not None:
        if args.subsample < 1:
            raise ConfigError("--subsample must be positive")
        cfg.preprocess.subsample = args.subsample
    if args.positive_class:
        cfg.evaluation.positive_class = args.positive_class
    if args.fit_on_train:
        cfg.preprocess.fit_on_train = True
    if getattr(args, "policy", None):
        cfg.paths.policy_csv = args.policy
    if getattr(args, "claims", None):
        cfg.paths.claim_csv = args.claims
    if getattr(args, "geojson", None):
        cfg.paths.geojson = args.geojson


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config)
        _apply_overrides(cfg, args)
        return args.func(cfg, args)
    except (ConfigError, UsageError) as exc:
        print(f"claimclass {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"claimclass {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
