"""Subcommand front-end: synth, fit, calibrate, score, eval, ablate.

Every run resolves its parameters as CLI flags > --config JSON > defaults,
then writes a manifest next to its outputs with the resolved config, input
and output digests, and per-stage timings. All randomness sits behind --seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import errors as err
from .io import load_config, load_embeddings, save_embeddings, save_labels
from .metrics import accuracy, aupr, auroc, evaluate
from .pipeline import (
    OodModel,
    PipelineConfig,
    calibrate_threshold,
    classify,
    fit,
    knn_raw_baseline,
    load_model,
    save_model,
    score,
)
from .synth import MixtureSpec, OodSpec, generate

EXIT_CODES: list[tuple[type[Exception], int]] = [
    (err.BadMagicError, 3),
    (err.TruncatedFileError, 3),
    (err.NonFiniteValueError, 3),
    (err.EmptyMatrixError, 3),
    (err.EmptyVectorError, 3),
    (err.DimMismatchError, 4),
    (err.LengthMismatchError, 4),
    (err.ZeroNormError, 4),
    (err.TooFewSamplesError, 5),
    (err.DegenerateDataError, 5),
    (err.KTooLargeError, 5),
    (err.TooFewNodesError, 5),
    (err.EmptyGraphError, 6),
    (err.AllNodesIsolatedError, 6),
    (err.UnassignedNodeError, 6),
    (err.EmptyHoldoutError, 7),
    (err.EmptyInputError, 7),
    (err.NonFiniteScoreError, 7),
]


def _exit_code_for(exc: Exception) -> int:
    for klass, code in EXIT_CODES:
        if isinstance(exc, klass):
            return code
    return 1


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class _Manifest:
    def __init__(self, command: str, resolved: dict):
        self.doc = {
            "tool": "oodgraph",
            "version": __version__,
            "command": command,
            "resolved_config": resolved,
            "inputs": {},
            "outputs": {},
            "timings_s": {},
        }
        self._t0 = time.perf_counter()
        self._last = self._t0

    def add_input(self, path: str | Path) -> None:
        self.doc["inputs"][str(path)] = _sha256(Path(path))

    def add_output(self, path: str | Path) -> None:
        self.doc["outputs"][str(path)] = _sha256(Path(path))

    def mark(self, stage: str) -> None:
        now = time.perf_counter()
        self.doc["timings_s"][stage] = round(now - self._last, 6)
        self._last = now

    def write(self, path: str | Path) -> None:
        self.doc["timings_s"]["total"] = round(time.perf_counter() - self._t0, 6)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.doc, fh, indent=2)
            fh.write("\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _percentile(text: str) -> float:
    value = float(text)
    if not 0.0 < value <= 100.0:
        raise argparse.ArgumentTypeError(f"percentile must be in (0, 100], got {text}")
    return value


def _parse_values(text: str) -> list[float]:
    """Sweep values: '5,7,11' or an inclusive integer range '5..15'."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return [float(v) for v in range(int(lo), int(hi) + 1)]
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """flags > config file > defaults; returns the resolved parameter dict."""
    file_cfg = load_config(args.config) if getattr(args, "config", None) else {}
    resolved = {}
    for key, default in defaults.items():
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            resolved[key] = cli_value
        elif key in file_cfg:
            resolved[key] = file_cfg[key]
        else:
            resolved[key] = default
    return resolved


def _pipeline_config(resolved: dict) -> PipelineConfig:
    pca_dim = resolved.get("pca_dim")
    return PipelineConfig(
        k=int(resolved["k"]),
        pca_variance=None if pca_dim else float(resolved["pca_var"]),
        pca_components=int(pca_dim) if pca_dim else None,
        pca_max_components=int(resolved["pca_max_dim"]),
        ridge_scale=float(resolved["ridge"]),
        seed=int(resolved["seed"]),
        clusterer=str(resolved["clusterer"]),
        kmeans_clusters=(int(resolved["k_clusters"]) if resolved.get("k_clusters") else None),
        resolution=float(resolved["resolution"]),
        knn_mode=str(resolved["knn_mode"]),
    )


_FIT_DEFAULTS = {
    "k": 7,
    "pca_var": 0.95,
    "pca_dim": None,
    "pca_max_dim": 128,
    "ridge": 1e-3,
    "seed": 0,
    "clusterer": "louvain",
    "k_clusters": None,
    "resolution": 1.0,
    "knn_mode": "union",
}


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=_positive_int, help="neighbors per node (default 7)")
    p.add_argument("--pca-var", dest="pca_var", type=float,
                   help="PCA variance fraction target (default 0.95)")
    p.add_argument("--pca-dim", dest="pca_dim", type=_positive_int,
                   help="fixed PCA dimension (overrides --pca-var)")
    p.add_argument("--pca-max-dim", dest="pca_max_dim", type=_positive_int,
                   help="cap on PCA dimension under --pca-var (default 128)")
    p.add_argument("--ridge", type=float, help="covariance ridge scale (default 1e-3)")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    p.add_argument("--clusterer", choices=["louvain", "kmeans"],
                   help="node clusterer (default louvain)")
    p.add_argument("--k-clusters", dest="k_clusters", type=_positive_int,
                   help="cluster count for kmeans; defaults to the count "
                        "Louvain finds on the same graph")
    p.add_argument("--resolution", type=float, help="modularity resolution (default 1.0)")
    p.add_argument("--knn-mode", dest="knn_mode", choices=["union", "mutual"],
                   help="edge symmetrization rule (default union)")


def cmd_synth(args: argparse.Namespace) -> int:
    defaults = {
        "clusters": 10, "dim": 32, "per_cluster": 200, "center_scale": 2.0,
        "within_std": 1.0, "seed": 0, "ood_mode": "shifted",
        "ood_magnitude": 8.0, "ood_count": 1000,
    }
    resolved = _resolve(args, defaults)
    manifest = _Manifest("synth", resolved)
    spec = MixtureSpec(
        cluster_count=int(resolved["clusters"]),
        dim=int(resolved["dim"]),
        samples_per_cluster=int(resolved["per_cluster"]),
        center_scale=float(resolved["center_scale"]),
        within_std=float(resolved["within_std"]),
        seed=int(resolved["seed"]),
        ood=OodSpec(
            mode=str(resolved["ood_mode"]),
            magnitude=float(resolved["ood_magnitude"]),
            count=int(resolved["ood_count"]),
        ),
    )
    X_id, X_ood, labels = generate(spec)
    manifest.mark("generate")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "id": out / "id.oode",
        "ood": out / "ood.oode",
        "labels": out / "labels.oodl",
    }
    save_embeddings(X_id, paths["id"])
    save_embeddings(X_ood, paths["ood"])
    save_labels(labels, paths["labels"])
    for p in paths.values():
        manifest.add_output(p)
    manifest.mark("write")
    manifest.write(out / "manifest.json")
    print(f"wrote {paths['id']} ({X_id.shape[0]}x{X_id.shape[1]}), "
          f"{paths['ood']} ({X_ood.shape[0]}x{X_ood.shape[1]}), {paths['labels']}")
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    resolved = _resolve(args, _FIT_DEFAULTS)
    manifest = _Manifest("fit", resolved)
    manifest.add_input(args.id)
    X = load_embeddings(args.id)
    manifest.mark("load")

    config = _pipeline_config(resolved)
    model = fit(X, config)
    manifest.mark("fit")

    save_model(model, args.out)
    manifest.add_output(args.out)
    if args.labels_out:
        labels = np.asarray(model.fit_metadata["train_labels"], dtype=np.int64)
        count = model.fit_metadata["cluster_count"]
        # Isolated rows carry the one-past-last sentinel id `cluster_count`.
        save_labels(np.where(labels >= 0, labels, count), args.labels_out)
        manifest.add_output(args.labels_out)
    if args.edges:
        # Re-export the graph for inspection; cheap relative to the fit.
        from .knn import build_knn_graph
        from .linalg import pca_transform
        from .pipeline import ZERO_ROW_EPS

        T = pca_transform(model.pca, X)
        norms = np.linalg.norm(np.asarray(T, dtype=np.float64), axis=1)
        graph = build_knn_graph(T[norms >= ZERO_ROW_EPS], config.k, mode=config.knn_mode)
        graph.save_edge_list(args.edges)
        manifest.add_output(args.edges)
    manifest.mark("write")
    manifest.write(Path(str(args.out) + ".manifest.json"))

    meta = model.fit_metadata
    print(f"cluster_count={meta['cluster_count']} edge_count={meta['edge_count']} "
          f"modularity={meta['modularity']} isolated_count={meta['isolated_count']}")
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    resolved = _resolve(args, {"percentile": 95.0})
    percentile = _percentile(str(resolved["percentile"]))
    manifest = _Manifest("calibrate", resolved)
    manifest.add_input(args.model)
    manifest.add_input(args.holdout)
    model = load_model(args.model)
    holdout = load_embeddings(args.holdout)
    manifest.mark("load")

    model = calibrate_threshold(model, holdout, percentile)
    manifest.mark("calibrate")
    save_model(model, args.out)
    manifest.add_output(args.out)
    manifest.mark("write")
    manifest.write(Path(str(args.out) + ".manifest.json"))
    print(f"threshold={model.threshold!r} (percentile {percentile} "
          f"of {holdout.shape[0]} holdout scores)")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    manifest = _Manifest("score", {})
    manifest.add_input(args.model)
    manifest.add_input(args.infile)
    model = load_model(args.model)
    X = load_embeddings(args.infile)
    manifest.mark("load")

    report = score(model, X)
    manifest.mark("score")
    report.to_csv(args.out)
    manifest.add_output(args.out)
    manifest.mark("write")
    manifest.write(Path(str(args.out) + ".manifest.json"))

    if report.is_ood is not None:
        flagged = int(np.count_nonzero(report.is_ood))
        print(f"scored {X.shape[0]} rows, {flagged} flagged OOD "
              f"(threshold {model.threshold!r})")
    else:
        print(f"scored {X.shape[0]} rows (model uncalibrated, no flags)")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    manifest = _Manifest("eval", {})
    for p in (args.model, args.id, args.ood):
        manifest.add_input(p)
    model = load_model(args.model)
    X_id = load_embeddings(args.id)
    X_ood = load_embeddings(args.ood)
    manifest.mark("load")

    rep_id = score(model, X_id)
    rep_ood = score(model, X_ood)
    manifest.mark("score")

    predicted = truth = None
    if model.threshold is not None:
        predicted = np.concatenate([rep_id.is_ood, rep_ood.is_ood])
        truth = np.concatenate(
            [np.zeros(X_id.shape[0], dtype=np.int64), np.ones(X_ood.shape[0], dtype=np.int64)]
        )
    report = evaluate(
        rep_id.scores, rep_ood.scores,
        predicted=predicted, truth=truth, threshold=model.threshold,
    )
    report.to_json(args.out)
    manifest.add_output(args.out)
    manifest.mark("write")
    manifest.write(Path(str(args.out) + ".manifest.json"))
    print(f"auroc={report.auroc:.6f} aupr={report.aupr:.6f} "
          f"accuracy={report.accuracy_at_threshold}")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    resolved = _resolve(args, {**_FIT_DEFAULTS, "percentile": 95.0})
    manifest = _Manifest(f"ablate:{args.sweep}", resolved)
    manifest.add_input(args.id)
    manifest.add_input(args.ood)
    X_id = load_embeddings(args.id)
    X_ood = load_embeddings(args.ood)
    holdout = X_id
    if args.holdout:
        manifest.add_input(args.holdout)
        holdout = load_embeddings(args.holdout)
    manifest.mark("load")

    base = _pipeline_config(resolved)
    values = _parse_values(args.values) if args.values else None
    rows: list[dict] = []

    if args.sweep == "k":
        for k in values or [5, 7, 11]:
            config = replace(base, k=int(k))
            model = fit(X_id, config)
            rows.append({
                "k": int(k),
                "cluster_count": model.fit_metadata["cluster_count"],
                "edge_count": model.fit_metadata["edge_count"],
                "modularity": model.fit_metadata["modularity"],
                "auroc": auroc(score(model, X_id).scores, score(model, X_ood).scores),
                "aupr": aupr(score(model, X_id).scores, score(model, X_ood).scores),
            })
        spread = max(r["auroc"] for r in rows) - min(r["auroc"] for r in rows)
        print(f"k sweep: auroc spread = {spread:.6f}")
    elif args.sweep == "threshold":
        model = fit(X_id, base)
        truth = np.concatenate(
            [np.zeros(X_id.shape[0], dtype=np.int64), np.ones(X_ood.shape[0], dtype=np.int64)]
        )
        for pct in values or [80, 85, 90, 95, 99]:
            calibrated = calibrate_threshold(model, holdout, float(pct))
            predicted = np.concatenate([
                score(calibrated, X_id).is_ood,
                score(calibrated, X_ood).is_ood,
            ])
            rows.append({
                "percentile": float(pct),
                "threshold": calibrated.threshold,
                "accuracy": accuracy(predicted, truth),
            })
        best = max(rows, key=lambda r: r["accuracy"])
        print(f"threshold sweep: best accuracy {best['accuracy']:.4f} "
              f"at percentile {best['percentile']}")
    elif args.sweep == "clusterer":
        louvain_model = fit(X_id, replace(base, clusterer="louvain"))
        count = louvain_model.fit_metadata["cluster_count"]
        kmeans_model = fit(
            X_id, replace(base, clusterer="kmeans", kmeans_clusters=count)
        )
        for name, model in (("louvain", louvain_model), ("kmeans", kmeans_model)):
            rows.append({
                "clusterer": name,
                "cluster_count": model.fit_metadata["cluster_count"],
                "auroc": auroc(score(model, X_id).scores, score(model, X_ood).scores),
                "aupr": aupr(score(model, X_id).scores, score(model, X_ood).scores),
            })
        gap = abs(rows[0]["auroc"] - rows[1]["auroc"])
        print(f"clusterer swap: auroc gap = {gap:.6f}")
    elif args.sweep == "raw-knn":
        model = fit(X_id, base)
        pipeline_auroc = auroc(score(model, holdout).scores, score(model, X_ood).scores)
        for k in values or list(range(5, 16)):
            scores_id = knn_raw_baseline(X_id, holdout, int(k))
            scores_ood = knn_raw_baseline(X_id, X_ood, int(k))
            rows.append({
                "method": "raw-knn",
                "k": int(k),
                "auroc": auroc(scores_id, scores_ood),
            })
        rows.append({"method": "pipeline", "k": base.k, "auroc": pipeline_auroc})
        best = max(r["auroc"] for r in rows if r["method"] == "raw-knn")
        print(f"raw-knn sweep: best baseline auroc {best:.4f} "
              f"vs pipeline {pipeline_auroc:.4f}")
    manifest.mark("sweep")

    header = list(rows[0].keys())
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(row[h]) for h in header) + "\n")
    manifest.add_output(args.out)
    manifest.mark("write")
    manifest.write(Path(str(args.out) + ".manifest.json"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oodgraph",
        description="Graph-based out-of-distribution detection over embeddings",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic mixture benchmark")
    p.add_argument("--config", help="JSON config; flags override its values")
    p.add_argument("--clusters", type=_positive_int)
    p.add_argument("--dim", type=_positive_int)
    p.add_argument("--per-cluster", dest="per_cluster", type=_positive_int)
    p.add_argument("--center-scale", dest="center_scale", type=float)
    p.add_argument("--within-std", dest="within_std", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--ood-mode", dest="ood_mode", choices=["shifted", "inflated", "uniform"])
    p.add_argument("--ood-magnitude", dest="ood_magnitude", type=float)
    p.add_argument("--ood-count", dest="ood_count", type=_positive_int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit the detection model on in-distribution data")
    p.add_argument("--config", help="JSON config; flags override its values")
    p.add_argument("--id", required=True, help="in-distribution embeddings (OODE/CSV)")
    _add_fit_flags(p)
    p.add_argument("--edges", help="also export the KNN graph as an edge list")
    p.add_argument("--labels-out", dest="labels_out",
                   help="also export per-row cluster ids as OODL (isolated "
                        "rows get the sentinel id cluster_count)")
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("calibrate", help="set the OOD threshold from holdout scores")
    p.add_argument("--config", help="JSON config; flags override its values")
    p.add_argument("--model", required=True)
    p.add_argument("--holdout", required=True, help="in-distribution holdout (OODE/CSV)")
    p.add_argument("--percentile", type=_percentile)
    p.add_argument("--out", required=True, help="calibrated model JSON path")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("score", help="score queries against a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True, help="query embeddings")
    p.add_argument("--out", required=True, help="CSV report path")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="AUROC/AUPR/accuracy of a model on ID vs OOD files")
    p.add_argument("--model", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--ood", required=True)
    p.add_argument("--out", required=True, help="JSON report path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run a sweep and write its table as CSV")
    p.add_argument("--config", help="JSON config; flags override its values")
    p.add_argument("--sweep", required=True, choices=["k", "threshold", "clusterer", "raw-knn"])
    p.add_argument("--values", help="comma list '5,7,11' or range '5..15'")
    p.add_argument("--id", required=True)
    p.add_argument("--ood", required=True)
    p.add_argument("--holdout", help="ID holdout for calibration/baseline queries")
    _add_fit_flags(p)
    p.add_argument("--percentile", type=_percentile)
    p.add_argument("--out", required=True, help="CSV table path")
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except err.OodGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code_for(exc)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
