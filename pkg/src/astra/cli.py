"""Command-line interface for the pipeline and its analysis subcommands."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .analysis import (
    SHUFFLE_MODES,
    knn_sensitivity,
    leave_one_axis_out,
    neighbor_entropy,
    raw_vs_codebook_ablation,
    shuffle_controls,
)
from .cluster.validation import bootstrap_stability, gap_statistic, weight_sensitivity
from .corpus import load_corpus
from .embed import embed_corpus, load_token_embeddings
from .export import (
    PipelineConfig,
    PipelineError,
    PipelineRunner,
    recluster_callable,
    stage_seed,
)
from .topics import fit_nmf, label_topics

log = logging.getLogger(__name__)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="pipeline config JSON file")
    parser.add_argument("--out", required=True, help="run directory")
    parser.add_argument("--seed", type=int, default=None, help="override root seed")
    parser.add_argument(
        "--features",
        choices=("tfidf", "counts", "both"),
        default=None,
        help="override feature family selection",
    )


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig.from_file(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "features", None) is not None:
        overrides["features"] = args.features
    if getattr(args, "corpus", None):
        overrides["corpus_path"] = args.corpus
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def _runner(args: argparse.Namespace) -> PipelineRunner:
    return PipelineRunner(_load_config(args), args.out)


def cmd_run(args: argparse.Namespace) -> int:
    runner = _runner(args)
    run = runner.run_upto("bundle")
    selected = run.selected
    print(f"selected: {selected.algorithm} {selected.params} (k={selected.k_effective})")
    if run.selected_scores:
        print(
            "composite {composite:.4f}  silhouette {silhouette:.4f}  "
            "CH {calinski_harabasz:.3f}  DB {davies_bouldin:.4f}".format(**run.selected_scores)
        )
    print(f"bundle: {run.bundle_path}")
    return 0


def cmd_corpus(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    print(f"{len(corpus)} institutions")
    for name, count in sorted(corpus.type_histogram().items(), key=lambda kv: (-kv[1], kv[0])):
        print(f"  {name:<14}{count}")
    return 0


def cmd_codebook(args: argparse.Namespace) -> int:
    runner = _runner(args)
    if args.action == "build":
        run = runner.run_upto("codebook")
        codebook = run.codebook
        print(f"codebook: k={codebook.k}, pca dims={codebook.pca.dims}, "
              f"retained variance {codebook.retained_variance:.3f}")
        print(f"written to {runner.out_dir / 'codebook.json'}")
    else:
        run = runner.run_upto("features")
        features = run.features
        print(f"features: {features.matrix.shape[0]} x {features.matrix.shape[1]} "
              f"({features.features}), density {features.density:.4f}")
        print(f"written to {runner.out_dir / 'features.json'}")
    return 0


def cmd_project(args: argparse.Namespace) -> int:
    runner = _runner(args)
    if args.dims == 2:
        runner.run_upto("features")
        projection = runner.project_stage(2)
    else:
        projection = runner.run_upto("project4d").projection4d
    print(f"projection: {projection.coordinates.shape}, "
          f"final loss {projection.loss_trace[-1]:.4f}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    runner = _runner(args)
    runner.run_upto("sweep")
    sweep = runner.ensure_sweep()
    print(sweep.report_text())
    return 0


def cmd_gap(args: argparse.Namespace) -> int:
    runner = _runner(args)
    run = runner.run_upto("project4d")
    points = run.projection4d.coordinates
    k_values = range(args.k_min, min(args.k_max, points.shape[0]) + 1)
    curve = gap_statistic(
        points,
        k_values=k_values,
        n_refs=args.refs,
        seed=stage_seed(runner.config.seed, "gap"),
    )
    print(f"gap statistic k* = {curve.k_star}")
    for k, g, s in zip(curve.k_values, curve.gap, curve.s_k):
        marker = " <-- k*" if k == curve.k_star else ""
        print(f"  k={k:<3} gap={g:+.4f}  s={s:.4f}{marker}")
    return 0


def cmd_bootstrap(args: argparse.Namespace) -> int:
    runner = _runner(args)
    run = runner.run_upto("sweep")
    points = run.projection4d.coordinates
    recluster = recluster_callable(
        run.selected, stage_seed(runner.config.seed, "kmeans")
    )
    report = bootstrap_stability(
        points,
        run.selected,
        recluster,
        n_boot=args.n_boot,
        seed=stage_seed(runner.config.seed, "bootstrap"),
    )
    print(
        f"bootstrap stability over {report.n_completed} replicates "
        f"({report.n_skipped} skipped):"
    )
    print(f"  ARI {report.ari_mean:.3f} +/- {report.ari_std:.3f}")
    print(f"  NMI {report.nmi_mean:.3f} +/- {report.nmi_std:.3f}")
    return 0


def cmd_sensitivity(args: argparse.Namespace) -> int:
    runner = _runner(args)
    runner.run_upto("sweep")
    sweep = runner.ensure_sweep()
    report = weight_sensitivity(
        sweep.ranked,
        n_samples=args.samples,
        seed=stage_seed(runner.config.seed, "sensitivity"),
    )
    print(f"win rates over {report.n_samples} weight samples "
          f"(bounds {report.bounds[0]}..{report.bounds[1]}):")
    for (algorithm, k), rate in sorted(
        report.win_rates.items(), key=lambda kv: -kv[1]
    ):
        if rate > 0:
            print(f"  {algorithm:<24} k={k:<3} {100 * rate:.1f}%")
    return 0


def cmd_topics(args: argparse.Namespace) -> int:
    runner = _runner(args)
    config = runner.config
    if args.k == "auto" and args.subset is None:
        run = runner.run_upto("topics")
        model = run.topic_model
        descriptors = run.topic_descriptors
    elif args.subset is None:
        # ad-hoc topic count: explore on top of the cached run without
        # touching its artifacts
        run = runner.run_upto("features")
        model = fit_nmf(
            run.features.matrix, int(args.k), seed=stage_seed(config.seed, "topics")
        )
        descriptors = label_topics(model, run.features, run.codebook)
    else:
        run = runner.run_upto("sweep")
        features = run.features
        mask = run.selected.labels == args.subset
        if mask.sum() < 2:
            raise PipelineError(f"cluster {args.subset} has fewer than 2 members")
        sub = features.matrix[mask]
        k = 3 if args.k == "auto" else int(args.k)
        k = min(k, min(sub.shape))
        model = fit_nmf(sub, k, seed=stage_seed(config.seed, "topics"))
        sub_features = dataclasses.replace(
            features,
            matrix=sub,
            institution_ids=tuple(
                i for i, m in zip(features.institution_ids, mask) if m
            ),
        )
        descriptors = label_topics(model, sub_features, run.codebook)
    print(f"{model.k_topics} topics, reconstruction error {model.reconstruction_error:.4f}")
    for t, topic in enumerate(descriptors):
        parts = [
            f"axis{d.axis}/cw{d.codeword} ({', '.join(d.tokens[:2])})" for d in topic[:3]
        ]
        print(f"  topic {t}: " + "; ".join(parts))
    return 0


def cmd_boundary(args: argparse.Namespace) -> int:
    runner = _runner(args)
    run = runner.run_upto("boundary")
    report = run.boundary
    if args.k_nn is not None:
        report = neighbor_entropy(run.features, run.selected.labels, args.k_nn)
    flagged = report.boundary_ids()
    print(f"K_nn={report.k_nn}: {len(flagged)} boundary institutions")
    for r in sorted(report.rows, key=lambda r: -r.entropy)[:15]:
        mark = " *" if r.boundary else ""
        print(f"  {r.institution_id:<28} H={r.entropy:.3f} |C|={r.distinct_clusters}{mark}")
    if args.sensitivity:
        sens = knn_sensitivity(run.features, run.selected.labels)
        print("K_nn sensitivity (pairwise Jaccard):")
        for (a, b), j in sorted(sens.jaccard.items()):
            print(f"  K={a:<3} vs K={b:<3} {j:.3f}")
        print(f"stable boundary ids: {', '.join(sens.stable_ids) or '(none)'}")
        _write_report(
            runner.out_dir / "knn_sensitivity.json",
            {
                "k_values": list(sens.k_values),
                "boundary_sets": {str(k): sorted(v) for k, v in sens.boundary_sets.items()},
                "jaccard": {f"{a}-{b}": j for (a, b), j in sorted(sens.jaccard.items())},
                "stable_ids": list(sens.stable_ids),
            },
        )
    return 0


def _write_report(path, payload) -> None:
    import json

    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"report written to {path}")


def cmd_ablate(args: argparse.Namespace) -> int:
    runner = _runner(args)
    run = runner.run_upto("sweep")
    config = runner.config
    selected = run.selected
    linkage = selected.params.get("linkage", "average")
    k = selected.params.get("k", selected.k_effective)

    if args.shuffle is not None:
        result = shuffle_controls(
            run.corpus,
            run.codebook,
            mode=args.shuffle,
            k=k,
            n_reps=args.reps,
            seed=stage_seed(config.seed, "shuffle"),
            features=config.features,
            linkage=linkage,
        )
        print(
            f"shuffle {result.removed}: silhouette {result.silhouette:.4f} "
            f"(baseline delta {result.delta_silhouette:+.4f}, "
            f"t={result.t_statistic:.2f}, p={result.p_value:.3g})"
        )
        _write_report(
            runner.out_dir / f"ablation_shuffle_{args.shuffle}.json",
            {
                "mode": result.removed,
                "mean_silhouette": result.silhouette,
                "delta_silhouette": result.delta_silhouette,
                "t_statistic": result.t_statistic,
                "p_value": result.p_value,
                "replicates": list(result.replicate_silhouettes),
            },
        )
        return 0

    if args.raw:
        table = load_token_embeddings(config.embeddings_path)
        axis_embeddings = embed_corpus(run.corpus, table)
        comparison = raw_vs_codebook_ablation(
            run.features.matrix,
            axis_embeddings.concatenated(),
            config.manifold_config(4),
            k_values=tuple(range(config.sweep_k_min, config.sweep_k_max + 1)),
        )
        for name, path in (
            ("codebook", comparison.codebook_path),
            ("raw", comparison.raw_path),
        ):
            print(
                f"{name:<9} {path.algorithm} k={path.k}: sil {path.silhouette:.3f}  "
                f"CH {path.calinski_harabasz:.3f}  DB {path.davies_bouldin:.3f}"
            )
        _write_report(
            runner.out_dir / "ablation_raw_vs_codebook.json",
            {
                side: {
                    "algorithm": metrics.algorithm,
                    "k": metrics.k,
                    "silhouette": metrics.silhouette,
                    "calinski_harabasz": metrics.calinski_harabasz,
                    "davies_bouldin": metrics.davies_bouldin,
                }
                for side, metrics in (
                    ("codebook", comparison.codebook_path),
                    ("raw", comparison.raw_path),
                )
            },
        )
        return 0

    study = leave_one_axis_out(
        run.corpus,
        run.codebook,
        config.manifold_config(4),
        linkage=linkage,
        k=k,
        features=config.features,
    )
    print(
        f"baseline (feature space): sil {study.baseline_silhouette:.4f}  "
        f"CH {study.baseline_calinski_harabasz:.3f}"
    )
    for r in study.results:
        print(
            f"  -{r.removed:<26} sil {r.silhouette:.4f} (d{r.delta_silhouette:+.4f})  "
            f"CH {r.calinski_harabasz:.3f} (d{r.delta_calinski_harabasz:+.3f})"
        )
    _write_report(
        runner.out_dir / "ablation_axes.json",
        {
            "baseline": {
                "silhouette": study.baseline_silhouette,
                "calinski_harabasz": study.baseline_calinski_harabasz,
            },
            "removed": [
                {
                    "axis": r.removed,
                    "silhouette": r.silhouette,
                    "calinski_harabasz": r.calinski_harabasz,
                    "delta_silhouette": r.delta_silhouette,
                    "delta_calinski_harabasz": r.delta_calinski_harabasz,
                }
                for r in study.results
            ],
        },
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="astra", description="institution mapping pipeline"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the full pipeline and export the bundle")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("corpus", help="validate a corpus file")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("codebook", help="build the codebook or apply it to features")
    p.add_argument("action", choices=("build", "apply"))
    _add_common(p)
    p.set_defaults(func=cmd_codebook)

    p = sub.add_parser("project", help="compute a UMAP projection")
    _add_common(p)
    p.add_argument("--dims", type=int, choices=(2, 4), default=4)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("sweep", help="run the clustering sweep")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gap", help="gap statistic over the 4-D projection")
    _add_common(p)
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=15)
    p.add_argument("--refs", type=int, default=20)
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("bootstrap", help="bootstrap stability of the selected solution")
    _add_common(p)
    p.add_argument("--n-boot", type=int, default=100)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("sensitivity", help="composite-weight sensitivity")
    _add_common(p)
    p.add_argument("--samples", type=int, default=500)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("topics", help="NMF topics (optionally within one cluster)")
    _add_common(p)
    p.add_argument("--k", default="auto", help="'auto' or an integer topic count")
    p.add_argument("--subset", type=int, default=None, help="restrict to one cluster label")
    p.set_defaults(func=cmd_topics)

    p = sub.add_parser("boundary", help="neighbor-cluster entropy boundaries")
    _add_common(p)
    p.add_argument("--k-nn", type=int, default=None)
    p.add_argument("--sensitivity", action="store_true", help="also vary K_nn")
    p.set_defaults(func=cmd_boundary)

    p = sub.add_parser("ablate", help="axis ablation, shuffle controls, raw comparison")
    _add_common(p)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--axis", action="store_true", help="leave-one-axis-out (default)")
    group.add_argument("--shuffle", choices=SHUFFLE_MODES, default=None)
    group.add_argument("--raw", action="store_true", help="raw-vs-codebook comparison")
    p.add_argument("--reps", type=int, default=100)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (PipelineError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
