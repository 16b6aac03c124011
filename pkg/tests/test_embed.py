import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from astra.embed import (
    EmbeddingError,
    PoolingError,
    TokenEmbeddingTable,
    fetch_remote_embeddings,
    load_token_embeddings,
    pool_tokens,
    save_token_embeddings,
)


def write_vec(path, dim, rows):
    lines = [f"astra-vec 1 {dim}"]
    lines += [f"{token} " + " ".join(repr(float(v)) for v in vec) for token, vec in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


class TestLoad:
    def test_basic_fixture(self, tmp_path):
        path = write_vec(
            tmp_path / "v.vec",
            4,
            [("alpha", [1, 0, 0, 0]), ("beta", [0, 1, 0, 0]), ("gamma", [0, 0, 1, 0])],
        )
        table = load_token_embeddings(path)
        assert table.dim == 4
        assert len(table) == 3
        assert np.array_equal(table["beta"], [0, 1, 0, 0])

    def test_dimension_mismatch_reports_line(self, tmp_path):
        path = tmp_path / "v.vec"
        path.write_text("astra-vec 1 4\nalpha 1.0 0.0 0.0 0.0\nbeta 1.0 0.0 0.0 0.0 0.0\n")
        with pytest.raises(EmbeddingError, match=":3:"):
            load_token_embeddings(path)

    def test_unparseable_row_reports_line(self, tmp_path):
        path = tmp_path / "v.vec"
        path.write_text("astra-vec 1 2\nalpha 1.0 junk\n")
        with pytest.raises(EmbeddingError, match=":2:"):
            load_token_embeddings(path)

    def test_missing_corpus_token_is_reported_not_fatal(self, tmp_path):
        path = write_vec(tmp_path / "v.vec", 2, [("alpha", [1, 0])])
        table = load_token_embeddings(path)
        covered, missing = table.coverage({"alpha", "beta"})
        assert covered == {"alpha"}
        assert missing == {"beta"}

    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        table = TokenEmbeddingTable.from_dict(
            {f"token{i}": rng.standard_normal(6) for i in range(20)}
        )
        path = tmp_path / "v.vec"
        save_token_embeddings(table, path)
        again = load_token_embeddings(path)
        for token in table.tokens():
            assert np.array_equal(table[token], again[token])


class TestPooling:
    def test_two_orthogonal_vectors(self):
        table = TokenEmbeddingTable.from_dict({"aaa": np.array([1.0, 0.0]), "bbb": np.array([0.0, 1.0])})
        vec, skipped = pool_tokens(["aaa", "bbb"], table)
        assert skipped == 0
        assert np.allclose(vec, [1 / np.sqrt(2), 1 / np.sqrt(2)])

    def test_single_token_normalized(self):
        table = TokenEmbeddingTable.from_dict({"aaa": np.array([3.0, 4.0])})
        vec, _ = pool_tokens(["aaa"], table)
        assert np.allclose(vec, [0.6, 0.8])

    def test_duplicates_mean_of_identical(self):
        table = TokenEmbeddingTable.from_dict({"aaa": np.array([1.0, 0.0])})
        vec, _ = pool_tokens(["aaa", "aaa"], table)
        assert np.allclose(vec, [1.0, 0.0])

    def test_duplicates_weight_the_mean(self):
        table = TokenEmbeddingTable.from_dict(
            {"aaa": np.array([1.0, 0.0]), "bbb": np.array([0.0, 1.0])}
        )
        vec, _ = pool_tokens(["aaa", "aaa", "bbb"], table)
        expected = np.array([2 / 3, 1 / 3])
        assert np.allclose(vec, expected / np.linalg.norm(expected))

    def test_oov_skipped_and_counted(self):
        table = TokenEmbeddingTable.from_dict({"aaa": np.array([1.0, 0.0])})
        vec, skipped = pool_tokens(["aaa", "zzz"], table)
        assert skipped == 1
        assert np.allclose(vec, [1.0, 0.0])

    def test_all_oov_raises(self):
        table = TokenEmbeddingTable.from_dict({"aaa": np.array([1.0, 0.0])})
        with pytest.raises(PoolingError):
            pool_tokens(["zzz"], table)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_unit_norm_property(self, seed):
        rng = np.random.default_rng(seed)
        n_tokens = int(rng.integers(1, 12))
        table = TokenEmbeddingTable.from_dict(
            {f"token{i}": rng.normal(size=5) + 0.01 for i in range(n_tokens)}
        )
        tokens = [f"token{int(rng.integers(n_tokens))}" for _ in range(6)]
        vec, _ = pool_tokens(tokens, table)
        assert abs(np.linalg.norm(vec) - 1.0) < 1e-6

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        table = TokenEmbeddingTable.from_dict(
            {f"token{i}": rng.normal(size=4) for i in range(6)}
        )
        tokens = [f"token{i}" for i in (0, 3, 2, 5, 1)]
        v1, _ = pool_tokens(tokens, table)
        v2, _ = pool_tokens(list(reversed(tokens)), table)
        assert np.allclose(v1, v2)


class _Provider(BaseHTTPRequestHandler):
    calls = 0
    fail_forever = False

    def do_POST(self):
        type(self).calls += 1
        if type(self).fail_forever:
            self.send_error(503)
            return
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        vectors = [[float(len(t)), 1.0, 0.5] for t in payload["tokens"]]
        body = json.dumps({"vectors": vectors}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def provider():
    _Provider.calls = 0
    _Provider.fail_forever = False
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Provider)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/embed", _Provider
    server.shutdown()


class TestRemoteFetch:
    def test_happy_path_writes_cache(self, tmp_path, provider):
        url, handler = provider
        cache = tmp_path / "cache.vec"
        tokens = [f"token{i}" for i in range(10)]
        table = fetch_remote_embeddings(url, tokens, cache_path=cache, batch_size=4)
        assert len(table) == 10
        assert cache.exists()
        assert handler.calls == 3  # ceil(10 / 4)

    def test_warm_cache_makes_zero_calls(self, tmp_path, provider):
        url, handler = provider
        cache = tmp_path / "cache.vec"
        tokens = [f"token{i}" for i in range(6)]
        fetch_remote_embeddings(url, tokens, cache_path=cache)
        calls_after_first = handler.calls
        again = fetch_remote_embeddings(url, tokens, cache_path=cache)
        assert handler.calls == calls_after_first
        assert len(again) == 6

    def test_endpoint_down_no_partial_cache(self, tmp_path, provider):
        url, handler = provider
        handler.fail_forever = True
        cache = tmp_path / "cache.vec"
        with pytest.raises(EmbeddingError, match="failed after"):
            fetch_remote_embeddings(
                url, ["aaa", "bbb"], cache_path=cache, max_retries=2, backoff=0.01
            )
        assert not cache.exists()

    def test_cache_round_trip_bitwise(self, tmp_path):
        sent: list[dict] = []

        def transport(url, payload, timeout):
            sent.append(payload)
            rng = np.random.default_rng(len(payload["tokens"]))
            return {"vectors": [list(rng.standard_normal(4)) for _ in payload["tokens"]]}

        cache = tmp_path / "cache.vec"
        table = fetch_remote_embeddings(
            "http://unused", ["aaa", "bbb", "ccc"], cache_path=cache, transport=transport
        )
        reloaded = load_token_embeddings(cache)
        for token in table.tokens():
            assert np.array_equal(table[token], reloaded[token])

    def test_wrong_dimension_rejected(self, tmp_path):
        def transport(url, payload, timeout):
            return {"vectors": [[1.0], [1.0, 2.0]]}

        with pytest.raises(EmbeddingError):
            fetch_remote_embeddings(
                "http://unused", ["aaa", "bbb"], cache_path=tmp_path / "c.vec", transport=transport
            )
