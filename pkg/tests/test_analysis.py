import numpy as np
import pytest

from astra.analysis import (
    knn_sensitivity,
    leave_one_axis_out,
    neighbor_entropy,
    normalized_entropy,
    raw_vs_codebook_ablation,
    shuffle_controls,
    shuffle_token_lists,
    similarity_topk,
    )
from astra.cluster import AVERAGE
from astra.codebook import CodebookConfig, FeatureMatrix, build_codebook, quantize_corpus
from astra.corpus import AxisId, Corpus, InstitutionProfile
from astra.manifold import ManifoldConfig
from synth import make_planted_corpus, make_token_world


def feature_matrix_from(rows, ids=None):
    rows = np.asarray(rows, dtype=float)
    rows = rows / np.linalg.norm(rows, axis=1, keepdims=True)
    n, m = rows.shape
    ids = ids or tuple(f"inst{i}" for i in range(n))
    columns = tuple(("tfidf", a, c) for a in range(1) for c in range(m))
    return FeatureMatrix(
        matrix=rows, institution_ids=tuple(ids), columns=columns, density=1.0, features="tfidf"
    )


@pytest.fixture(scope="module")
def planted():
    table, concepts = make_token_world(seed=0)
    corpus, labels = make_planted_corpus(concepts, n_groups=3, per_group=8, seed=0)
    covered, _ = table.coverage(corpus.vocabulary())
    codebook = build_codebook(table, covered, CodebookConfig(codebook_k=7))
    features = quantize_corpus(corpus, codebook, features="tfidf")
    return corpus, codebook, features, labels


class TestSimilarityTopK:
    def test_orthogonal_rows_zero_similarity_index_ties(self):
        fm = feature_matrix_from(np.eye(4))
        links = similarity_topk(fm, k_links=3)
        assert [s for _, s in links[0]] == [0.0, 0.0, 0.0]
        assert [other for other, _ in links[0]] == ["inst1", "inst2", "inst3"]

    def test_duplicate_rows_rank_first_with_similarity_one(self):
        fm = feature_matrix_from([[1, 0], [1, 0], [0, 1]])
        links = similarity_topk(fm, k_links=2)
        assert links[0][0] == ("inst1", pytest.approx(1.0))

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(0)
        fm = feature_matrix_from(rng.random((20, 6)) + 0.01)
        links = similarity_topk(fm, k_links=5)
        X = fm.matrix
        for i in range(20):
            sims = sorted(
                ((float(X[i] @ X[j]), -j) for j in range(20) if j != i), reverse=True
            )
            expected = [(f"inst{-nj}", s) for s, nj in sims[:5]]
            got = links[i]
            for (eid, esim), (gid, gsim) in zip(expected, got):
                assert eid == gid
                assert gsim == pytest.approx(esim)

    def test_k_links_capped_at_n_minus_one(self):
        fm = feature_matrix_from(np.eye(3))
        links = similarity_topk(fm, k_links=5)
        assert all(len(row) == 2 for row in links)


class TestNeighborEntropy:
    def test_single_cluster_entropy_zero(self):
        assert normalized_entropy([1.0]) == 0.0

    def test_five_five_split_is_one(self):
        assert normalized_entropy([0.5, 0.5]) == pytest.approx(1.0)

    def test_eight_one_one_hand_value(self):
        # -(0.8 ln 0.8 + 0.1 ln 0.1 + 0.1 ln 0.1) / ln 3
        assert normalized_entropy([0.8, 0.1, 0.1]) == pytest.approx(0.58167, abs=1e-4)

    def test_bounds_on_random_histograms(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            k = int(rng.integers(1, 6))
            counts = rng.multinomial(10, np.ones(k) / k)
            p = counts[counts > 0] / 10
            h = normalized_entropy(list(p))
            assert 0.0 <= h <= 1.0

    def test_log_base_invariance(self):
        p = [0.5, 0.3, 0.2]
        h_nat = normalized_entropy(p)
        h2 = -sum(q * np.log2(q) for q in p) / np.log2(3)
        assert h_nat == pytest.approx(h2)

    def test_label_relabeling_invariance(self, planted):
        _, _, features, labels = planted
        report_a = neighbor_entropy(features, labels, k_nn=5)
        relabeled = np.array([(2 - l) for l in labels])
        report_b = neighbor_entropy(features, relabeled, k_nn=5)
        for ra, rb in zip(report_a.rows, report_b.rows):
            assert ra.entropy == pytest.approx(rb.entropy)

    def test_neighbors_all_one_cluster(self):
        rows = np.vstack([np.tile([1.0, 0.0], (6, 1)), np.tile([0.0, 1.0], (6, 1))])
        fm = feature_matrix_from(rows + np.random.default_rng(0).normal(0, 0.01, rows.shape))
        labels = np.repeat([0, 1], 6)
        report = neighbor_entropy(fm, labels, k_nn=5)
        assert report.rows[0].entropy == 0.0
        assert not report.rows[0].boundary

    def test_k_nn_too_large(self, planted):
        _, _, features, labels = planted
        with pytest.raises(ValueError):
            neighbor_entropy(features, labels, k_nn=len(labels))


class TestKnnSensitivity:
    def test_identical_sets_jaccard_one(self):
        rows = np.vstack(
            [np.tile([1.0, 0.0, 0.0], (8, 1)), np.tile([0.0, 1.0, 0.0], (8, 1))]
        )
        rng = np.random.default_rng(1)
        fm = feature_matrix_from(rows + rng.normal(0, 0.01, rows.shape))
        labels = np.repeat([0, 1], 8)
        sens = knn_sensitivity(fm, labels, k_set=(3, 5))
        # no boundaries at all -> empty sets -> Jaccard 1 by convention
        assert sens.jaccard[(3, 5)] == 1.0

    def test_planted_jaccard_range_and_stables(self, planted):
        _, _, features, labels = planted
        sens = knn_sensitivity(features, labels, k_set=(3, 5, 7, 10))
        assert sens.k_values == (3, 5, 7, 10)
        for value in sens.jaccard.values():
            assert 0.0 <= value <= 1.0
        for inst_id in sens.stable_ids:
            hits = sum(inst_id in s for s in sens.boundary_sets.values())
            assert hits >= 2

    def test_oversized_k_skipped(self, planted):
        _, _, features, labels = planted
        sens = knn_sensitivity(features, labels, k_set=(3, 500))
        assert sens.k_values == (3,)


def duplicated_axis_corpus():
    """Axis 0 and axis 1 carry identical texts for every institution."""
    table, concepts = make_token_world(seed=3)
    corpus, labels = make_planted_corpus(concepts, n_groups=2, per_group=6, seed=3)
    modified = []
    for inst in corpus:
        texts = list(inst.axis_texts)
        texts[1] = texts[0]
        modified.append(
            InstitutionProfile(
                id=inst.id,
                name=inst.name,
                primary_type=inst.primary_type,
                country=inst.country,
                founding_year=inst.founding_year,
                axis_texts=tuple(texts),
            )
        )
    return table, Corpus(tuple(modified)), labels


@pytest.fixture(scope="module")
def study(planted):
    corpus, codebook, _, labels = planted
    config = ManifoldConfig(
        n_neighbors=5, min_dist=0.0, out_dims=4, metric="cosine",
        n_epochs=150, rng_seed=0,
    )
    return leave_one_axis_out(corpus, codebook, config, linkage=AVERAGE, k=3)


class TestLeaveOneAxisOut:
    def test_baseline_and_eight_results(self, study):
        assert len(study.results) == 8
        assert study.baseline_silhouette > 0.3

    def test_deltas_follow_sign_convention(self, study):
        for r in study.results:
            assert r.delta_silhouette == pytest.approx(
                study.baseline_silhouette - r.silhouette
            )

    def test_duplicated_axis_symmetry(self):
        table, corpus, _ = duplicated_axis_corpus()
        covered, _ = table.coverage(corpus.vocabulary())
        codebook = build_codebook(table, covered, CodebookConfig(codebook_k=5))
        config = ManifoldConfig(
            n_neighbors=4, min_dist=0.0, out_dims=3, metric="cosine",
            n_epochs=100, rng_seed=1,
        )
        study = leave_one_axis_out(corpus, codebook, config, linkage=AVERAGE, k=2)
        by_axis = {r.removed: r for r in study.results}
        a = by_axis[AxisId.CURATORIAL_PHILOSOPHY.key]
        b = by_axis[AxisId.TERRITORIAL_RELATION.key]
        assert a.silhouette == pytest.approx(b.silhouette, abs=1e-12)
        assert a.calinski_harabasz == pytest.approx(b.calinski_harabasz, abs=1e-9)


class TestShuffles:
    def test_within_description_permutation_is_noop(self, planted):
        corpus, codebook, features, _ = planted
        rng = np.random.default_rng(0)
        lists = {
            inst.id: tuple(
                [tokens[i] for i in rng.permutation(len(tokens))] for tokens in inst.tokens()
            )
            for inst in corpus
        }
        again = quantize_corpus(corpus, codebook, features="tfidf", token_lists=lists)
        assert np.allclose(features.matrix, again.matrix)

    def test_unknown_mode_rejected(self, planted):
        corpus, *_ = planted
        with pytest.raises(ValueError, match="unknown shuffle mode"):
            shuffle_token_lists(corpus, "bogus", np.random.default_rng(0))

    def test_shuffles_preserve_token_multisets_per_axis(self, planted):
        corpus, *_ = planted
        rng = np.random.default_rng(5)
        for mode in ("inter_institution", "token"):
            shuffled = shuffle_token_lists(corpus, mode, rng)
            for axis in AxisId:
                original = sorted(
                    t for inst in corpus for t in inst.tokens()[axis]
                )
                moved = sorted(
                    t for inst_id in shuffled for t in shuffled[inst_id][axis]
                )
                assert original == moved

    @pytest.mark.parametrize("mode", ["axis", "inter_institution", "token"])
    def test_all_modes_reduce_silhouette(self, planted, mode):
        corpus, codebook, features, labels = planted
        result = shuffle_controls(
            corpus, codebook, mode=mode, k=3, n_reps=30, seed=0
        )
        assert result.delta_silhouette > 0
        assert result.p_value < 0.01
        assert len(result.replicate_silhouettes) == 30


class TestRawVsCodebook:
    def test_identical_inputs_identical_metrics(self, planted):
        _, _, features, _ = planted
        config = ManifoldConfig(
            n_neighbors=5, out_dims=3, metric="cosine", n_epochs=100, rng_seed=2
        )
        cmp = raw_vs_codebook_ablation(
            features.matrix, features.matrix, config, k_values=range(2, 6)
        )
        assert cmp.codebook_path == cmp.raw_path

    def test_codebook_beats_raw_on_codeword_aligned_corpus(self, planted):
        corpus, codebook, features, labels = planted
        table, _ = make_token_world(seed=0)
        from astra.embed import embed_corpus

        axis_embeddings = embed_corpus(corpus, table)
        config = ManifoldConfig(
            n_neighbors=5, out_dims=3, metric="cosine", n_epochs=150, rng_seed=2
        )
        cmp = raw_vs_codebook_ablation(
            features.matrix, axis_embeddings.concatenated(), config, k_values=range(2, 8)
        )
        assert cmp.codebook_path.silhouette >= cmp.raw_path.silhouette - 0.05
