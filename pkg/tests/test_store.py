"""Embedding store: normalization, cosine, ITXE format, remote fetching."""

from __future__ import annotations

import io
import json
import struct
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from intertext.corpus import VerseRef
from intertext.errors import (
    DuplicateKeyError,
    InvalidVectorError,
    MissingEmbeddingError,
    ProtocolError,
    RemoteError,
    StoreFormatError,
)
from intertext.store import (
    EmbeddingStore,
    cosine,
    fetch_remote,
    load_store,
    normalize,
    save_store,
)


def vr(token: str) -> VerseRef:
    return VerseRef.from_token(token)


finite_vectors = arrays(
    np.float64,
    st.integers(2, 16),
    elements=st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False),
).filter(lambda v: float(np.linalg.norm(v)) > 1e-6)


class TestNormalize:
    def test_three_four_five(self):
        assert np.allclose(normalize([3.0, 4.0]), [0.6, 0.8])

    def test_zero_norm(self):
        with pytest.raises(InvalidVectorError):
            normalize([0.0, 0.0])

    def test_already_unit(self):
        assert normalize([1.0, 0.0, 0.0]).tolist() == [1.0, 0.0, 0.0]

    def test_non_finite(self):
        with pytest.raises(InvalidVectorError):
            normalize([1.0, float("nan")])
        with pytest.raises(InvalidVectorError):
            normalize([1.0, float("inf")])

    def test_empty(self):
        with pytest.raises(InvalidVectorError):
            normalize([])

    @given(finite_vectors)
    @settings(max_examples=60, deadline=None)
    def test_unit_norm_within_1e6(self, v):
        assert abs(float(np.linalg.norm(normalize(v))) - 1.0) < 1e-6


class TestCosine:
    def test_self_similarity(self):
        assert cosine([1.0, 0.0], [1.0, 0.0]) == 1.0

    def test_orthogonal(self):
        assert cosine([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_hand_oracle_345(self):
        # dot([3,4],[4,3]) = 24, norms 5 and 5 -> 24/25
        assert cosine(normalize([3.0, 4.0]), normalize([4.0, 3.0])) == pytest.approx(0.96, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidVectorError):
            cosine([1.0, 0.0], [1.0, 0.0, 0.0])

    @given(finite_vectors.flatmap(
        lambda u: st.tuples(
            st.just(u),
            arrays(np.float64, st.just(u.shape[0]),
                   elements=st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False))
            .filter(lambda v: float(np.linalg.norm(v)) > 1e-6),
        )
    ))
    @settings(max_examples=60, deadline=None)
    def test_symmetry_exact(self, uv):
        u, v = normalize(uv[0]), normalize(uv[1])
        assert cosine(u, v) == cosine(v, u)

    def test_clamped(self):
        v = normalize(np.ones(7))
        assert cosine(v, v) <= 1.0
        assert cosine(v, -v) >= -1.0


def small_store(dim=3) -> EmbeddingStore:
    store = EmbeddingStore(dim=dim)
    store.insert("c", vr("GEN.1.1"), [3.0] + [4.0] * (dim - 1))
    store.insert("c", vr("GEN.1.2"), [1.0] + [0.0] * (dim - 1))
    return store


class TestStoreBasics:
    def test_duplicate_insert(self):
        store = small_store()
        with pytest.raises(DuplicateKeyError):
            store.insert("c", vr("GEN.1.1"), [1.0, 2.0, 3.0])

    def test_dim_enforced(self):
        store = small_store()
        with pytest.raises(InvalidVectorError):
            store.insert("c", vr("GEN.9.9"), [1.0, 2.0])

    def test_missing_vector_error_names_key(self):
        store = small_store()
        with pytest.raises(MissingEmbeddingError, match=r"GEN\.9\.9"):
            store.vector("c", vr("GEN.9.9"))
        assert store.get("c", vr("GEN.9.9")) is None

    def test_self_cosine_within_1e6(self):
        store = small_store()
        for key_ref in ("GEN.1.1", "GEN.1.2"):
            v = store.vector("c", vr(key_ref))
            assert abs(cosine(v, v) - 1.0) < 1e-6

    def test_refs_for(self):
        store = small_store()
        store.insert("other", vr("MAT.1.1"), [1.0, 1.0, 1.0])
        assert store.refs_for("c") == [vr("GEN.1.1"), vr("GEN.1.2")]


def store_bytes(store: EmbeddingStore) -> bytes:
    sink = io.BytesIO()
    save_store(store, sink)
    return sink.getvalue()


class TestItxeFormat:
    def test_round_trip_bit_exact(self):
        store = small_store()
        data = store_bytes(store)
        loaded = load_store(io.BytesIO(data))
        assert loaded == store
        assert store_bytes(loaded) == data

    def test_insertion_order_does_not_change_bytes(self):
        a = EmbeddingStore(dim=2)
        a.insert("c", vr("GEN.1.1"), [1.0, 0.0])
        a.insert("c", vr("GEN.1.2"), [0.0, 1.0])
        b = EmbeddingStore(dim=2)
        b.insert("c", vr("GEN.1.2"), [0.0, 1.0])
        b.insert("c", vr("GEN.1.1"), [1.0, 0.0])
        assert store_bytes(a) == store_bytes(b)

    def test_bad_magic(self):
        data = b"XXXX" + store_bytes(small_store())[4:]
        with pytest.raises(StoreFormatError, match="magic"):
            load_store(io.BytesIO(data))

    def test_version_mismatch(self):
        data = bytearray(store_bytes(small_store()))
        data[4] = 2
        with pytest.raises(StoreFormatError, match="version"):
            load_store(io.BytesIO(bytes(data)))

    def test_truncated_record_count(self):
        # header claims 3 records but only 2 are present
        store = small_store()
        data = bytearray(store_bytes(store))
        struct.pack_into("<Q", data, 12, 3)
        with pytest.raises(StoreFormatError, match="truncated"):
            load_store(io.BytesIO(bytes(data)))

    def test_trailing_bytes_detected(self):
        data = store_bytes(small_store()) + b"\x00"
        with pytest.raises(StoreFormatError, match="trailing"):
            load_store(io.BytesIO(data))

    def test_unsorted_records_detected(self):
        store = small_store()
        data = store_bytes(store)
        header, records = data[:20], data[20:]
        # both records have equal length; swapping breaks the sort order
        rec_len = len(records) // 2
        swapped = records[rec_len:] + records[:rec_len]
        with pytest.raises(StoreFormatError, match="sorted"):
            load_store(io.BytesIO(header + swapped))

    def test_norm_violation_detected(self):
        dim = 3
        key = b"c|GEN.1.1"
        record = struct.pack("<H", len(key)) + key + struct.pack("<3f", 2.0, 0.0, 0.0)
        data = struct.pack("<4sIIQ", b"ITXE", 1, dim, 1) + record
        with pytest.raises(StoreFormatError, match="norm"):
            load_store(io.BytesIO(data))

    def test_invalid_key_detected(self):
        dim = 1
        key = b"nodelimiter"
        record = struct.pack("<H", len(key)) + key + struct.pack("<f", 1.0)
        data = struct.pack("<4sIIQ", b"ITXE", 1, dim, 1) + record
        with pytest.raises(StoreFormatError, match="key"):
            load_store(io.BytesIO(data))

    @given(st.integers(1, 12), st.integers(1, 20), st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_random_round_trip(self, dim, count, seed):
        rng = np.random.default_rng(seed)
        store = EmbeddingStore(dim=dim)
        for i in range(count):
            vec = rng.standard_normal(dim)
            while float(np.linalg.norm(vec)) < 1e-9:
                vec = rng.standard_normal(dim)
            store.insert("c", vr(f"GEN.{1 + i // 50}.{1 + i % 50}"), vec)
        assert load_store(io.BytesIO(store_bytes(store))) == store


class _EmbedHandler(BaseHTTPRequestHandler):
    dim = 5
    fail_first = 0
    short_response = False
    ragged = False
    calls: list[dict] = []

    def do_POST(self):
        cls = type(self)
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        cls.calls.append(
            {"texts": body["texts"], "auth": self.headers.get("Authorization")}
        )
        if cls.fail_first > 0:
            cls.fail_first -= 1
            self.send_response(503)
            self.end_headers()
            return
        texts = body["texts"]
        n = len(texts) - 1 if cls.short_response else len(texts)
        dims = [cls.dim] * n
        if cls.ragged and n > 1:
            dims[-1] = cls.dim + 1
        embeddings = [
            [float(hash((t, i)) % 97 + 1) for i in range(d)]
            for t, d in zip(texts, dims)
        ]
        payload = json.dumps({"embeddings": embeddings}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def embed_server():
    _EmbedHandler.calls = []
    _EmbedHandler.fail_first = 0
    _EmbedHandler.short_response = False
    _EmbedHandler.ragged = False
    server = ThreadingHTTPServer(("127.0.0.1", 0), _EmbedHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/embed"
    server.shutdown()


class TestFetchRemote:
    def test_batching_and_order(self, embed_server):
        vectors = fetch_remote(["alpha", "beta", "gamma"], embed_server, batch_size=2)
        assert len(vectors) == 3
        assert [len(c["texts"]) for c in _EmbedHandler.calls] == [2, 1]
        # order preserved: vector i matches a direct single-text fetch of text i
        solo = fetch_remote(["beta"], embed_server, batch_size=1)[0]
        assert np.array_equal(vectors[1], solo)
        assert all(abs(float(np.linalg.norm(v)) - 1.0) < 1e-6 for v in vectors)

    def test_count_mismatch_is_protocol_error(self, embed_server):
        _EmbedHandler.short_response = True
        with pytest.raises(ProtocolError, match="got"):
            fetch_remote(["a", "b", "c"], embed_server, batch_size=3)

    def test_dimension_drift_is_protocol_error(self, embed_server):
        _EmbedHandler.ragged = True
        with pytest.raises(ProtocolError, match="dimension"):
            fetch_remote(["a", "b"], embed_server, batch_size=2)

    def test_retry_then_success(self, embed_server):
        _EmbedHandler.fail_first = 2
        vectors = fetch_remote(["a"], embed_server, batch_size=1, retries=3, backoff=0.0)
        assert len(vectors) == 1
        assert len(_EmbedHandler.calls) == 3

    def test_unreachable_after_retries(self):
        with pytest.raises(RemoteError, match="failed after 3 attempts"):
            fetch_remote(
                ["a"], "http://127.0.0.1:9/none", batch_size=1, retries=2, backoff=0.0,
                timeout=0.5,
            )

    def test_bearer_token_from_env(self, embed_server, monkeypatch):
        monkeypatch.setenv("INTERTEXT_EMBED_TOKEN", "sesame")
        fetch_remote(["a"], embed_server, batch_size=1)
        assert _EmbedHandler.calls[-1]["auth"] == "Bearer sesame"
