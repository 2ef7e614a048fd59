import socket
import threading

import numpy as np
import pytest
import requests

from pffl.errors import BudgetExhausted, ProtocolError, RemoteUnavailable, ShapeMismatch
from pffl.oracle import ConvOracle, LinearOracle, RemoteOracle, make_builtin, open_oracle, serve
from pffl.oracle.remote import MAX_BODY, parse_bind
from pffl.tensor_io import encode_tensor


def _reference_logits(net, x):
    """Scalar loops in float64; independent of the vectorized forward pass."""
    def conv_relu(inp, w):
        cin, h, wd = inp.shape
        out = np.zeros((w.shape[0], h, wd))
        for o in range(w.shape[0]):
            for i in range(h):
                for j in range(wd):
                    acc = 0.0
                    for c in range(cin):
                        for dy in range(3):
                            for dx in range(3):
                                y, z = i + dy - 1, j + dx - 1
                                if 0 <= y < h and 0 <= z < wd:
                                    acc += float(w[o, c, dy, dx]) * float(inp[c, y, z])
                    out[o, i, j] = max(acc, 0.0)
        return out

    def pool(inp):
        c, h, wd = inp.shape
        return inp.reshape(c, h // 2, 2, wd // 2, 2).mean(axis=(2, 4))

    f = pool(conv_relu(np.asarray(x, np.float32).astype(np.float64), net.w1))
    f = pool(conv_relu(f, net.w2))
    return np.array([sum(float(a) * float(b) for a, b in zip(net.w3[k].ravel(), f.ravel()))
                     for k in range(net.num_classes)])


def test_linear_oracle_sign():
    o = LinearOracle(np.array([[[1.0, -1.0]]]), b=0.1)
    assert o.classify(np.array([[[0.0, 0.0]]])) == 1
    assert o.classify(np.array([[[0.0, 0.2]]])) == 0
    assert o.query_count() == 2
    with pytest.raises(ValueError):
        LinearOracle(np.zeros((1, 2, 2)))


def test_conv_matches_scalar_reference():
    net = ConvOracle((3, 8, 8), seed=3, num_classes=5)
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.normal(0, 1, (3, 8, 8))
        ref = _reference_logits(net, x)
        assert np.allclose(net.logits(x), ref, atol=1e-4)
        top2 = np.sort(ref)[-2:]
        if top2[1] - top2[0] > 1e-3:
            assert net.classify(x) == int(np.argmax(ref))


def test_conv_deterministic_and_seeded():
    x = np.random.default_rng(1).normal(0, 1, (3, 16, 16))
    a, b = ConvOracle((3, 16, 16), seed=7), ConvOracle((3, 16, 16), seed=7)
    assert a.logits(x).tobytes() == b.logits(x).tobytes()
    assert a.fork().logits(x).tobytes() == a.logits(x).tobytes()
    assert not np.array_equal(ConvOracle((3, 16, 16), seed=8).logits(x), a.logits(x))
    with pytest.raises(ValueError):
        ConvOracle((3, 10, 10))


def test_conv_labels_cover_several_classes():
    net = ConvOracle((3, 16, 16), seed=0)
    rng = np.random.default_rng(2)
    labels = {net.classify(rng.normal(0, 1, (3, 16, 16))) for _ in range(60)}
    assert len(labels) >= 3


def test_budget_and_shape():
    o = make_builtin("linear", (1, 4, 4), seed=0, budget=3)
    x = np.zeros((1, 4, 4))
    for _ in range(3):
        o.classify(x)
    with pytest.raises(BudgetExhausted):
        o.classify(x)
    assert o.query_count() == 3
    with pytest.raises(ShapeMismatch):
        make_builtin("linear", (1, 4, 4)).classify(np.zeros((1, 4, 5)))
    fresh = o.fork(budget=5)
    assert fresh.query_count() == 0 and fresh.classify(x) == o.peek(x)
    assert o.query_count() == 3


def test_shape_mismatch_does_not_count():
    o = make_builtin("conv", (3, 8, 8))
    with pytest.raises(ShapeMismatch):
        o.classify(np.zeros((3, 4, 4)))
    assert o.query_count() == 0


def test_concurrent_ledger_never_overruns():
    o = make_builtin("conv", (3, 8, 8), budget=500)
    x = np.zeros((3, 8, 8))
    refused = []

    def worker():
        for _ in range(100):
            try:
                o.classify(x)
            except BudgetExhausted:
                refused.append(1)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert o.query_count() == 500
    assert len(refused) == 300


def test_open_oracle_spec():
    o = open_oracle("conv:seed=4,classes=3", (3, 8, 8), budget=9)
    assert isinstance(o, ConvOracle) and o.seed == 4 and o.num_classes == 3
    assert o.ledger.budget == 9
    assert isinstance(open_oracle("http://127.0.0.1:1", (3, 8, 8)), RemoteOracle)
    assert parse_bind("0.0.0.0:81") == ("0.0.0.0", 81)
    assert parse_bind(":81") == ("127.0.0.1", 81)


@pytest.fixture
def served():
    oracle = make_builtin("conv", (3, 16, 16), seed=0)
    server = serve(oracle)
    yield oracle, server
    server.stop()


def test_served_matches_in_process(served):
    oracle, server = served
    client = RemoteOracle(server.url, (3, 16, 16))
    local = oracle.fork()
    rng = np.random.default_rng(9)
    for _ in range(100):
        x = rng.normal(0, 1, (3, 16, 16))
        assert client.classify(x) == local.classify(x)
    assert client.query_count() == 100
    assert oracle.query_count() == 100


def test_served_concurrent_clients(served):
    _, server = served
    client = RemoteOracle(server.url, (3, 16, 16), budget=40)
    x = np.zeros((3, 16, 16))
    out = []

    def worker():
        for _ in range(10):
            out.append(client.classify(x))

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(out) == 40 and len(set(out)) == 1
    assert client.query_count() == 40


def test_server_rejects_bad_requests(served):
    oracle, server = served
    url = server.url + "/classify"
    assert requests.post(url, data=b"garbage").status_code == 400
    wrong = encode_tensor(np.zeros((3, 8, 8), np.float32))
    assert requests.post(url, data=wrong).status_code == 400
    assert requests.post(server.url + "/other", data=b"").status_code == 404
    big = requests.post(url, data=b"", headers={"Content-Length": str(MAX_BODY + 1)})
    assert big.status_code == 413
    assert oracle.query_count() == 0
    client = RemoteOracle(server.url, (3, 8, 8))
    client.input_shape = None
    with pytest.raises(ProtocolError):
        client.classify(np.zeros((3, 8, 8)))
    assert client.query_count() == 0


def test_server_budget_answers_429():
    server = serve(make_builtin("linear", (1, 4, 4), budget=1))
    try:
        url = server.url + "/classify"
        body = encode_tensor(np.zeros((1, 4, 4), np.float32))
        assert requests.post(url, data=body).status_code == 200
        assert requests.post(url, data=body).status_code == 429
    finally:
        server.stop()


def test_unreachable_server():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    client = RemoteOracle(f"http://127.0.0.1:{port}", (1, 4, 4), retries=2, backoff=0.001)
    with pytest.raises(RemoteUnavailable):
        client.classify(np.zeros((1, 4, 4)))
    assert client.query_count() == 0
    with pytest.raises(NotImplementedError):
        client.peek(np.zeros((1, 4, 4)))
