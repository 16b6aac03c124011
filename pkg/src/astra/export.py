"""End-to-end pipeline orchestration and the explorer bundle export.

The pipeline runs corpus -> embeddings -> codebook -> features ->
4-D projection -> sweep/selection -> topics -> boundary -> 2-D projection
-> bundle. Every stage persists its artifact in the run directory and is
skipped on rerun when the artifact exists and the config hash matches, so
an interrupted run resumes from the last completed stage.

All randomness flows from one root seed; per-stage seeds are fixed offsets
from it (see ``stage_seed``). Reruns with the same config produce a
byte-identical bundle.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .analysis import BoundaryReport, neighbor_entropy, similarity_topk
from .cluster.algorithms import ClusterSolution, agglomerative, cluster_density, kmeans
from .cluster.scoring import SweepConfig, SweepResult, run_sweep
from .codebook import Codebook, CodebookConfig, FeatureMatrix, build_codebook, quantize_corpus
from .corpus import AxisId, Corpus, load_corpus
from .embed import (
    ENV_EMBED_URL,
    AxisEmbeddings,
    TokenEmbeddingTable,
    embed_corpus,
    fetch_remote_embeddings,
    load_token_embeddings,
)
from .manifold import ManifoldConfig, Projection, umap_project
from .topics import TopicModel, fit_nmf, label_topics, select_topic_count

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
BUNDLE_FILENAME = "astra_bundle.json"

# Offsets applied to the root seed, one per randomized stage.
_SEED_OFFSETS = {
    "codebook": 0,
    "project4d": 1,
    "project2d": 2,
    "kmeans": 3,
    "gap": 4,
    "topics": 5,
    "bootstrap": 6,
    "sensitivity": 7,
    "shuffle": 8,
}

STAGE_ORDER = (
    "corpus",
    "embed",
    "codebook",
    "features",
    "project4d",
    "sweep",
    "topics",
    "boundary",
    "project2d",
    "bundle",
)


class PipelineError(RuntimeError):
    """Raised when a pipeline stage cannot run or an input is missing."""


@dataclass(frozen=True)
class PipelineConfig:
    corpus_path: str
    embeddings_path: str | None = None
    embed_url: str | None = None
    features: str = "tfidf"
    seed: int = 0
    codebook_k: int = 7
    variance_target: float = 0.953
    max_pca_dims: int = 64
    codebook_linkage: str = "ward"
    n_neighbors: int = 10
    min_dist: float = 0.0
    spread: float = 1.0
    n_epochs: int = 500
    negative_sample_rate: int = 5
    learning_rate: float = 1.0
    sweep_k_min: int = 2
    sweep_k_max: int = 20
    topics_k: int | None = None
    topics_k_min: int = 3
    topics_k_max: int = 20
    k_links: int = 5
    boundary_k_nn: int = 10

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise PipelineError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def codebook_config(self) -> CodebookConfig:
        return CodebookConfig(
            variance_target=self.variance_target,
            max_pca_dims=self.max_pca_dims,
            codebook_k=self.codebook_k,
            linkage=self.codebook_linkage,
            rng_seed=stage_seed(self.seed, "codebook"),
        )

    def manifold_config(self, out_dims: int) -> ManifoldConfig:
        stage = "project4d" if out_dims == 4 else "project2d"
        return ManifoldConfig(
            n_neighbors=self.n_neighbors,
            min_dist=self.min_dist,
            spread=self.spread,
            out_dims=out_dims,
            metric="cosine",
            n_epochs=self.n_epochs,
            negative_sample_rate=self.negative_sample_rate,
            learning_rate=self.learning_rate,
            rng_seed=stage_seed(self.seed, stage),
        )

    def sweep_config(self) -> SweepConfig:
        return SweepConfig(
            k_values=tuple(range(self.sweep_k_min, self.sweep_k_max + 1)),
            kmeans_seed=stage_seed(self.seed, "kmeans"),
        )


def stage_seed(root_seed: int, stage: str) -> int:
    return root_seed + _SEED_OFFSETS[stage]


def _write_json(path: Path, payload: Any) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text + "\n", encoding="utf-8")
    os.replace(tmp, path)


def _read_json(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Serialization of stage outputs
# ---------------------------------------------------------------------------


def _features_to_doc(features: FeatureMatrix) -> dict[str, Any]:
    return {
        "matrix": features.matrix.tolist(),
        "institution_ids": list(features.institution_ids),
        "columns": [list(c) for c in features.columns],
        "density": features.density,
        "features": features.features,
    }


def _features_from_doc(doc: dict[str, Any]) -> FeatureMatrix:
    return FeatureMatrix(
        matrix=np.array(doc["matrix"], dtype=float),
        institution_ids=tuple(doc["institution_ids"]),
        columns=tuple((c[0], int(c[1]), int(c[2])) for c in doc["columns"]),
        density=float(doc["density"]),
        features=str(doc["features"]),
    )


def _projection_to_doc(projection: Projection) -> dict[str, Any]:
    cfg = asdict(projection.config)
    return {
        "coordinates": projection.coordinates.tolist(),
        "loss_trace": projection.loss_trace.tolist(),
        "config": cfg,
    }


def _projection_from_doc(doc: dict[str, Any]) -> Projection:
    return Projection(
        coordinates=np.array(doc["coordinates"], dtype=float),
        config=ManifoldConfig(**doc["config"]),
        loss_trace=np.array(doc["loss_trace"], dtype=float),
    )


def _solution_to_doc(solution: ClusterSolution) -> dict[str, Any]:
    return {
        "algorithm": solution.algorithm,
        "params": solution.params,
        "labels": solution.labels.tolist(),
        "k_effective": solution.k_effective,
        "cluster_sizes": list(solution.cluster_sizes),
        "noise_fraction": solution.noise_fraction,
        "degenerate": solution.degenerate,
    }


def _solution_from_doc(doc: dict[str, Any]) -> ClusterSolution:
    return ClusterSolution(
        algorithm=doc["algorithm"],
        params=doc["params"],
        labels=np.array(doc["labels"], dtype=int),
        k_effective=int(doc["k_effective"]),
        cluster_sizes=tuple(int(s) for s in doc["cluster_sizes"]),
        noise_fraction=float(doc["noise_fraction"]),
        degenerate=bool(doc["degenerate"]),
    )


def _topics_to_doc(model: TopicModel, descriptors: list[list[Any]]) -> dict[str, Any]:
    return {
        "k_topics": model.k_topics,
        "W": model.W.tolist(),
        "H": model.H.tolist(),
        "reconstruction_error": model.reconstruction_error,
        "error_trace": model.error_trace.tolist(),
        "top_terms": [list(t) for t in model.top_terms],
        "zero_rows": list(model.zero_rows),
        "descriptors": [
            [
                {
                    "axis": d.axis,
                    "codeword": d.codeword,
                    "family": d.family,
                    "weight": d.weight,
                    "tokens": list(d.tokens),
                }
                for d in topic
            ]
            for topic in descriptors
        ],
    }


# ---------------------------------------------------------------------------
# Pipeline state
# ---------------------------------------------------------------------------


@dataclass
class PipelineRun:
    config: PipelineConfig
    out_dir: Path
    corpus: Corpus | None = None
    table: TokenEmbeddingTable | None = None
    axis_embeddings: AxisEmbeddings | None = None
    codebook: Codebook | None = None
    features: FeatureMatrix | None = None
    projection4d: Projection | None = None
    sweep: SweepResult | None = None
    selected: ClusterSolution | None = None
    selected_scores: dict[str, float] | None = None
    topic_model: TopicModel | None = None
    topic_descriptors: list | None = None
    boundary: BoundaryReport | None = None
    projection2d: Projection | None = None
    bundle_path: Path | None = None

    def require(self, name: str) -> Any:
        value = getattr(self, name)
        if value is None:
            raise PipelineError(f"missing stage: {name}")
        return value


def recluster_callable(
    solution: ClusterSolution, kmeans_seed: int
) -> Callable[[np.ndarray], np.ndarray]:
    """A function re-running the selected algorithm/params on new points."""
    algorithm = solution.algorithm
    params = solution.params
    if algorithm.startswith("agglomerative"):
        return lambda pts: agglomerative(pts, params["linkage"], params["k"]).labels
    if algorithm == "kmeans":
        return lambda pts: kmeans(pts, params["k"], seed=kmeans_seed).labels
    if algorithm in ("dbscan", "optics"):
        return lambda pts: cluster_density(pts, algorithm, params).labels
    raise PipelineError(f"unknown algorithm {algorithm!r}")


# ---------------------------------------------------------------------------
# Stage runner
# ---------------------------------------------------------------------------


class PipelineRunner:
    """Executes pipeline stages with artifact caching in a run directory."""

    def __init__(self, config: PipelineConfig, out_dir: str | Path):
        self.config = config
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.run = PipelineRun(config=config, out_dir=self.out_dir)
        self._manifest_path = self.out_dir / "manifest.json"
        self._check_manifest()

    def _check_manifest(self) -> None:
        current = {"config_hash": self.config.config_hash()}
        if self._manifest_path.exists():
            previous = _read_json(self._manifest_path)
            if previous.get("config_hash") != current["config_hash"]:
                log.info("config changed; invalidating cached stages in %s", self.out_dir)
                for stage in STAGE_ORDER:
                    artifact = self._artifact(stage)
                    if artifact.exists():
                        artifact.unlink()
        _write_json(self._manifest_path, current)

    def _artifact(self, stage: str) -> Path:
        names = {
            "corpus": "corpus.json",
            "embed": "embed_coverage.json",
            "codebook": "codebook.json",
            "features": "features.json",
            "project4d": "projection4d.json",
            "sweep": "sweep.json",
            "topics": "topics.json",
            "boundary": "boundary.json",
            "project2d": "projection2d.json",
            "bundle": BUNDLE_FILENAME,
        }
        return self.out_dir / names[stage]

    def _cached(self, stage: str) -> bool:
        if self._artifact(stage).exists():
            log.info("cache hit: stage %s (%s)", stage, self._artifact(stage).name)
            return True
        return False

    def run_upto(self, last_stage: str = "bundle") -> PipelineRun:
        if last_stage not in STAGE_ORDER:
            raise PipelineError(f"unknown stage {last_stage!r}")
        limit = STAGE_ORDER.index(last_stage)
        for stage in STAGE_ORDER[: limit + 1]:
            getattr(self, f"_stage_{stage}")()
        return self.run

    # -- stages ------------------------------------------------------------

    def _stage_corpus(self) -> None:
        artifact = self._artifact("corpus")
        if self._cached("corpus"):
            self.run.corpus = load_corpus(artifact)
            return
        corpus = load_corpus(self.config.corpus_path)
        corpus.save(artifact)
        self.run.corpus = corpus

    def _stage_embed(self) -> None:
        corpus = self.run.require("corpus")
        if self._artifact("embed").exists() and self._artifact("codebook").exists():
            # the codebook is cached, so the raw table is not needed downstream
            log.info("cache hit: stage embed (%s)", self._artifact("embed").name)
            return
        vocabulary = sorted(corpus.vocabulary())
        endpoint = self.config.embed_url or os.environ.get(ENV_EMBED_URL)
        cache = self.out_dir / "embeddings_cache.vec"
        if self.config.embeddings_path:
            table = load_token_embeddings(self.config.embeddings_path)
        elif endpoint:
            table = fetch_remote_embeddings(endpoint, vocabulary, cache_path=cache)
        else:
            raise PipelineError(
                "no embedding source: set embeddings_path or embed_url "
                f"(or the {ENV_EMBED_URL} environment variable)"
            )
        covered, missing = table.coverage(vocabulary)
        if missing:
            log.warning("%d corpus tokens missing from embeddings", len(missing))
        _write_json(
            self._artifact("embed"),
            {
                "dim": table.dim,
                "vocabulary_size": len(vocabulary),
                "covered": len(covered),
                "missing": sorted(missing),
            },
        )
        self.run.table = table
        self.run.axis_embeddings = embed_corpus(corpus, table)

    def _stage_codebook(self) -> None:
        artifact = self._artifact("codebook")
        if self._cached("codebook"):
            self.run.codebook = Codebook.load(artifact)
            return
        corpus = self.run.require("corpus")
        table = self.run.require("table")
        covered, _ = table.coverage(corpus.vocabulary())
        codebook = build_codebook(table, covered, self.config.codebook_config())
        codebook.save(artifact)
        self.run.codebook = codebook

    def _stage_features(self) -> None:
        artifact = self._artifact("features")
        if self._cached("features"):
            self.run.features = _features_from_doc(_read_json(artifact))
            return
        features = quantize_corpus(
            self.run.require("corpus"),
            self.run.require("codebook"),
            features=self.config.features,
        )
        _write_json(artifact, _features_to_doc(features))
        self.run.features = features

    def _project(self, stage: str, dims: int) -> Projection:
        artifact = self._artifact(stage)
        if self._cached(stage):
            return _projection_from_doc(_read_json(artifact))
        features = self.run.require("features")
        projection = umap_project(features.matrix, self.config.manifold_config(dims))
        _write_json(artifact, _projection_to_doc(projection))
        return projection

    def _stage_project4d(self) -> None:
        self.run.projection4d = self._project("project4d", 4)

    def _stage_project2d(self) -> None:
        self.run.projection2d = self._project("project2d", 2)

    def project_stage(self, dims: int) -> Projection:
        """Run (or load) one projection stage on demand."""
        if dims == 4:
            self._stage_project4d()
            return self.run.projection4d
        self._stage_project2d()
        return self.run.projection2d

    def _stage_sweep(self) -> None:
        artifact = self._artifact("sweep")
        if self._cached("sweep"):
            doc = _read_json(artifact)
            self.run.selected = _solution_from_doc(doc["selected"])
            self.run.selected_scores = doc["selected_scores"]
            return
        projection = self.run.require("projection4d")
        sweep = run_sweep(projection.coordinates, self.config.sweep_config())
        selected = sweep.best.solution
        best = sweep.best.scores
        selected_scores = {
            "composite": best.composite,
            "silhouette": best.silhouette,
            "calinski_harabasz": best.calinski_harabasz,
            "davies_bouldin": best.davies_bouldin,
        }
        doc = {
            "ranked": sweep.report_rows(),
            "excluded": [
                {"algorithm": sol.algorithm, "params": sol.params, "reason": reason}
                for sol, reason in sweep.excluded
            ],
            "best_per_algorithm": {
                algorithm: {
                    "params": cand.solution.params,
                    "k": cand.solution.k_effective,
                    "composite": cand.scores.composite,
                    "silhouette": cand.scores.silhouette,
                    "calinski_harabasz": cand.scores.calinski_harabasz,
                    "davies_bouldin": cand.scores.davies_bouldin,
                    "noise_pct": 100.0 * cand.solution.noise_fraction,
                }
                for algorithm, cand in sweep.best_per_algorithm().items()
            },
            "selected": _solution_to_doc(selected),
            "selected_scores": selected_scores,
        }
        _write_json(artifact, doc)
        (self.out_dir / "sweep.txt").write_text(sweep.report_text() + "\n", encoding="utf-8")
        self.run.sweep = sweep
        self.run.selected = selected
        self.run.selected_scores = selected_scores

    def ensure_sweep(self) -> SweepResult:
        """Live sweep result (recomputed from the cached projection if needed)."""
        if self.run.sweep is None:
            projection = self.run.projection4d or self._project("project4d", 4)
            self.run.projection4d = projection
            self.run.sweep = run_sweep(projection.coordinates, self.config.sweep_config())
        return self.run.sweep

    def _stage_topics(self) -> None:
        artifact = self._artifact("topics")
        features = self.run.require("features")
        codebook = self.run.require("codebook")
        seed = stage_seed(self.config.seed, "topics")
        if self._cached("topics"):
            doc = _read_json(artifact)
            k = int(doc["k_topics"])
            model = fit_nmf(features.matrix, k, seed=seed)
            self.run.topic_model = model
            self.run.topic_descriptors = label_topics(model, features, codebook)
            return
        if self.config.topics_k is not None:
            k = self.config.topics_k
        else:
            limit = min(features.matrix.shape)
            k_values = [
                k
                for k in range(self.config.topics_k_min, self.config.topics_k_max + 1)
                if k <= limit
            ]
            k, diagnostics = select_topic_count(features.matrix, k_values, seed=seed)
            _write_json(
                self.out_dir / "topic_selection.json",
                {
                    "k_star": k,
                    "fallback_used": diagnostics.fallback_used,
                    "k_values": list(diagnostics.k_values),
                    "reconstruction_error": diagnostics.reconstruction_error.tolist(),
                    "diversity": diagnostics.diversity.tolist(),
                    "mean_intertopic_cosine": diagnostics.mean_intertopic_cosine.tolist(),
                },
            )
        model = fit_nmf(features.matrix, k, seed=seed)
        descriptors = label_topics(model, features, codebook)
        _write_json(artifact, _topics_to_doc(model, descriptors))
        self.run.topic_model = model
        self.run.topic_descriptors = descriptors

    def _stage_boundary(self) -> None:
        artifact = self._artifact("boundary")
        features = self.run.require("features")
        selected = self.run.require("selected")
        k_nn = min(self.config.boundary_k_nn, features.matrix.shape[0] - 1)
        report = neighbor_entropy(features, selected.labels, k_nn)
        if not self._cached("boundary"):
            _write_json(
                artifact,
                {
                    "k_nn": report.k_nn,
                    "rows": [
                        {
                            "id": r.institution_id,
                            "entropy": r.entropy,
                            "distribution": {str(k): v for k, v in r.distribution.items()},
                            "distinct_clusters": r.distinct_clusters,
                            "boundary": r.boundary,
                        }
                        for r in report.rows
                    ],
                },
            )
        self.run.boundary = report

    def _stage_bundle(self) -> None:
        artifact = self._artifact("bundle")
        bundle = export_bundle(self.run)
        payload = json.dumps(bundle, sort_keys=True, indent=2, ensure_ascii=False)
        tmp = artifact.with_suffix(".tmp")
        tmp.write_text(payload + "\n", encoding="utf-8")
        os.replace(tmp, artifact)
        self.run.bundle_path = artifact
        log.info("bundle written to %s", artifact)


def export_bundle(run: PipelineRun) -> dict[str, Any]:
    """Assemble the explorer bundle from completed pipeline stages.

    Raises :class:`PipelineError` naming the first missing stage output.
    """
    corpus: Corpus = run.require("corpus")
    features: FeatureMatrix = run.require("features")
    selected: ClusterSolution = run.require("selected")
    topic_model: TopicModel = run.require("topic_model")
    descriptors = run.require("topic_descriptors")
    boundary: BoundaryReport = run.require("boundary")
    projection2d: Projection = run.require("projection2d")
    config = run.config

    links = similarity_topk(features, k_links=config.k_links)
    weights = topic_model.topic_weights()
    boundary_by_id = {r.institution_id: r for r in boundary.rows}

    institutions = []
    for idx, inst in enumerate(corpus):
        brow = boundary_by_id[inst.id]
        institutions.append(
            {
                "id": inst.id,
                "name": inst.name,
                "primary_type": inst.primary_type,
                "secondary_type": inst.secondary_type,
                "country": inst.country,
                "founding_year": inst.founding_year,
                "axis_texts": {axis.key: inst.axis_texts[axis] for axis in AxisId},
                "coords2d": [float(c) for c in projection2d.coordinates[idx]],
                "cluster": int(selected.labels[idx]),
                "palette_index": int(selected.labels[idx]) % 12
                if selected.labels[idx] >= 0
                else -1,
                "topic_weights": [float(w) for w in weights[idx]],
                "top_similar": [[other, score] for other, score in links[idx]],
                "boundary": {"entropy": brow.entropy, "flag": brow.boundary},
            }
        )

    topics_doc = [
        {
            "topic": t,
            "descriptors": [
                {
                    "axis": d.axis,
                    "axis_key": AxisId(d.axis).key,
                    "codeword": d.codeword,
                    "weight": d.weight,
                    "tokens": list(d.tokens),
                }
                for d in topic
            ],
        }
        for t, topic in enumerate(descriptors)
    ]

    return {
        "schema_version": SCHEMA_VERSION,
        "institutions": institutions,
        "topics": topics_doc,
        "cluster_count": selected.k_effective,
        "run_metadata": {
            "config_hash": config.config_hash(),
            "seed": config.seed,
            "selected_algorithm": selected.algorithm,
            "selected_params": selected.params,
            "k_effective": selected.k_effective,
            "metrics": run.selected_scores,
            "feature_density": features.density,
            "boundary_k_nn": boundary.k_nn,
        },
    }


def run_pipeline(config: PipelineConfig, out_dir: str | Path) -> PipelineRun:
    """Execute the full pipeline into ``out_dir`` and return its state."""
    runner = PipelineRunner(config, out_dir)
    return runner.run_upto("bundle")
