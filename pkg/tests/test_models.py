import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from adp.core import Interval, SampledCurve, UtilitySpec, grid
from adp.errors import ConfigError, DimensionMismatch, GenerationFailure, IndexOutOfRange, ScorerFailure
from adp.models import (
    RandomNonMonotoneModel,
    SyntheticSinModel,
    constant_contrast,
    flip_attribute_contrast,
    function_model,
    http_model,
    linear_model,
    load_model,
    make_random_nonmonotone_model,
    quadratic_model,
    subprocess_model,
    taylor_contrast,
)
from adp.utilities import property_utility

CHILD = r'''
import sys
mode = sys.argv[1] if len(sys.argv) > 1 else "sum"
batch = []
for line in sys.stdin:
    line = line.strip()
    if line:
        batch.append([float(x) for x in line.split(",")])
        continue
    if mode == "short":
        batch = batch[:-1]
    for row in batch:
        sys.stdout.write(repr(sum(row) + 0.5 * row[0] * row[0]) + "\n")
    sys.stdout.flush()
    batch = []
    if mode == "die":
        sys.stderr.write("boom\n")
        sys.exit(3)
'''


def test_sin_model_values():
    m = SyntheticSinModel(dim=2)
    assert m([0.0, 0.0]) == 1.0
    m = SyntheticSinModel([0.5, -1.0])
    x = np.array([0.3, -0.2, 1.0, 2.0])
    assert m(x) == pytest.approx(np.sin(0.6) + np.cos(-0.6) + 0.5 - 2.0, abs=1e-15)
    with pytest.raises(DimensionMismatch):
        SyntheticSinModel(dim=1)


def test_linear_and_counter():
    m = linear_model([2.0, 3.0])
    assert m([1.0, 1.0]) == 5.0
    before = m.eval_count
    m.evaluate_batch(np.zeros((7, 2)))
    assert m.eval_count - before == 7
    with pytest.raises(DimensionMismatch):
        m.evaluate_batch(np.zeros((2, 3)))


def test_quadratic_model():
    m = quadratic_model([1.0, 0.0], [[1.0, 0.5], [0.5, 2.0]], intercept=1.0)
    assert m([1.0, 2.0]) == pytest.approx(1.0 + 1.0 + 1.0 + 2.0 + 8.0)


def test_wrong_length_output_is_scorer_failure():
    m = function_model(lambda X: np.zeros(X.shape[0] + 1), 2)
    with pytest.raises(ScorerFailure):
        m.evaluate_batch(np.zeros((3, 2)))


@pytest.mark.parametrize("m", [linear_model([1.0, -2.0, 0.5]),
                               quadratic_model([1.0, 0.0, 0.0], [1.0, 2.0, 3.0]),
                               SyntheticSinModel.random(3, 4)])
def test_builtin_determinism(m, rng):
    X = rng.normal(size=(50, 3))
    first = m.evaluate_batch(X)
    for _ in range(100):
        assert np.array_equal(m.evaluate_batch(X), first)


def test_constant_contrast():
    m = linear_model([1.0])
    g = constant_contrast(m, [0.3])
    np.testing.assert_array_equal(g.evaluate_batch(np.array([[5.0], [-2.0]])), [0.3, 0.3])
    sin = SyntheticSinModel(dim=2)
    assert constant_contrast(sin, [0.0, 0.0])([4.0, 1.0]) == 1.0


def test_taylor_exact_on_linear(rng):
    m = linear_model([2.0, 3.0])
    x0 = np.array([0.4, -1.2])
    g = taylor_contrast(m, x0, h=0.37)
    np.testing.assert_allclose(g.gradient, [2.0, 3.0], atol=1e-12)
    X = rng.normal(size=(100, 2)) * 5
    assert np.max(np.abs(g.evaluate_batch(X) - m.evaluate_batch(X))) < 1e-8
    assert g(x0) == pytest.approx(m(x0), abs=1e-15)


def test_taylor_quadratic_gradient():
    m = function_model(lambda X: X[:, 0] ** 2, 1)
    before = m.eval_count
    g = taylor_contrast(m, [1.0], h=1e-4)
    assert m.eval_count - before == 3
    assert abs(g.gradient[0] - 2.0) < 1e-7


def test_taylor_rejects_bad_step():
    with pytest.raises(ValueError):
        taylor_contrast(linear_model([1.0]), [0.0], h=0.0)


def test_flip_contrast(rng):
    m = function_model(lambda X: X[:, 0] * 10 + X[:, 1], 2)
    g = flip_attribute_contrast(m, 0)
    assert g([1.0, 0.5]) == pytest.approx(0.5)
    gg = flip_attribute_contrast(g, 0)
    B = rng.integers(0, 2, size=(100, 2)).astype(float)
    np.testing.assert_array_equal(gg.evaluate_batch(B), m.evaluate_batch(B))
    X = rng.normal(size=(100, 2))
    np.testing.assert_allclose(gg.evaluate_batch(X), m.evaluate_batch(X), atol=1e-13)
    with pytest.raises(IndexOutOfRange):
        flip_attribute_contrast(m, 2)


def test_planted_model_cubic_example():
    # p(u) = u^3 - u along e_0, tiny linear tail elsewhere
    m = RandomNonMonotoneModel(0, 3, [0], [1.0], [1.0, 0.0, -1.0, 0.0], 0.01, 1.0)
    iv = Interval(-1.0, 1.0)
    ts = grid(iv, 51)
    X0 = np.zeros((ts.shape[0], 3))
    X0[:, 0] = ts
    X1 = np.zeros((ts.shape[0], 3))
    X1[:, 1] = ts
    u0 = property_utility(SampledCurve(ts, m.evaluate_batch(X0), iv), "isotonic")[0]
    u1 = property_utility(SampledCurve(ts, m.evaluate_batch(X1), iv), "isotonic")[0]
    assert u0 > 1e-3
    assert u1 < 1e-20


def test_generator_deterministic_and_valid():
    a = make_random_nonmonotone_model(17, 10, 2)
    b = make_random_nonmonotone_model(17, 10, 2)
    assert a.planted_support == b.planted_support
    np.testing.assert_array_equal(a.poly, b.poly)
    np.testing.assert_array_equal(a.planted_weights, b.planted_weights)
    assert len(a.planted_support) == 2
    assert abs(np.linalg.norm(a.planted_weights) - 1.0) < 1e-12
    assert np.min(np.abs(a.planted_weights)) >= 0.2
    assert (len(a.poly) - 1) % 2 == 1  # odd degree


def test_generator_planted_beats_dead_axes():
    spec = UtilitySpec.monotonic()
    from adp.curves import PlotProblem
    from adp.core import Direction
    from adp.optimizer import score_directions

    for seed in range(5):
        m = make_random_nonmonotone_model(seed, 8, 3)
        x0, box, dens = m.plot_bounds()
        P = PlotProblem(m, x0, box=box, density=dens, k=50)
        dead = [j for j in range(8) if j not in m.planted_support]
        u = score_directions(P, [m.planted_direction] + [Direction.axis(j, 8) for j in dead], spec)
        assert np.all(u[0] > 10 * u[1:])


def test_generator_failure():
    with pytest.raises(GenerationFailure):
        make_random_nonmonotone_model(0, 10, 3, max_attempts=1, min_weight=0.99)
    with pytest.raises(ValueError):
        make_random_nonmonotone_model(0, 2, 3)


# ---------------------------------------------------------------------------
# external scorers
# ---------------------------------------------------------------------------

@pytest.fixture
def child_script(tmp_path):
    path = tmp_path / "child.py"
    path.write_text(CHILD)
    return path


def _expected(X):
    return X.sum(axis=1) + 0.5 * X[:, 0] ** 2


def test_subprocess_scorer_roundtrip(child_script, rng):
    m = subprocess_model(f"{sys.executable} {child_script}", 3)
    try:
        X = rng.normal(size=(40, 3)) * 1e3
        np.testing.assert_array_equal(m.evaluate_batch(X), _expected(X))
        np.testing.assert_array_equal(m.evaluate_batch(X[:2]), _expected(X[:2]))
        assert m.eval_count == 42
        assert m.concurrency == "serialized"
    finally:
        m.close()


def test_subprocess_scorer_short_reply(child_script):
    m = subprocess_model(f"{sys.executable} {child_script} short", 2, timeout=2.0)
    try:
        with pytest.raises(ScorerFailure):
            m.evaluate_batch(np.ones((3, 2)))
    finally:
        m.close()


def test_subprocess_scorer_child_dies(child_script):
    m = subprocess_model(f"{sys.executable} {child_script} die", 2)
    try:
        m.evaluate_batch(np.ones((2, 2)))
        with pytest.raises(ScorerFailure):
            m.evaluate_batch(np.ones((2, 2)))
    finally:
        m.close()


def test_serialized_handle_under_threads(child_script, rng):
    m = subprocess_model(f"{sys.executable} {child_script}", 2)
    batches = [rng.normal(size=(25, 2)) for _ in range(8)]
    results = [None] * 8

    def work(i):
        results[i] = m.evaluate_batch(batches[i])

    try:
        threads = [threading.Thread(target=work, args=(i,)) for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        for X, out in zip(batches, results):
            np.testing.assert_array_equal(out, _expected(X))
        assert m.eval_count == 200
    finally:
        m.close()


class _Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        X = np.asarray(body["instances"], dtype=np.float64)
        if self.path != "/score":
            self.send_response(404)
            self.end_headers()
            return
        scores = _expected(X).tolist()
        if X.shape[0] == 3:
            scores = scores[:2]  # length mismatch on purpose
        payload = json.dumps({"scores": scores}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def http_server():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    server.server_close()


def test_http_scorer(http_server, rng):
    m = http_model(http_server, 2)
    X = rng.normal(size=(10, 2))
    np.testing.assert_array_equal(m.evaluate_batch(X), _expected(X))
    with pytest.raises(ScorerFailure):
        m.evaluate_batch(np.ones((3, 2)))
    bad = http_model(http_server + "/nowhere/else", 2)
    with pytest.raises(ScorerFailure):
        bad.evaluate_batch(X)


def test_http_scorer_unreachable():
    m = http_model("http://127.0.0.1:9", 2)
    with pytest.raises(ScorerFailure):
        m.evaluate_batch(np.ones((1, 2)))


def test_load_model(tmp_path, child_script):
    params = tmp_path / "lin.json"
    params.write_text(json.dumps({"coef": [2.0, 3.0], "intercept": 1.0}))
    assert load_model(f"builtin:linear:{params}", 2)([1.0, 1.0]) == 6.0
    sinp = tmp_path / "sin.json"
    sinp.write_text(json.dumps({"beta": [1.0]}))
    assert load_model(f"builtin:sin:{sinp}", 3)([0.0, 0.0, 2.0]) == 3.0
    assert load_model("builtin:sin", 4).beta.tolist() == [0.0, 0.0]
    m = load_model(f"cmd:{sys.executable} {child_script}", 2)
    try:
        assert m([1.0, 2.0]) == 3.5
    finally:
        m.close()
    with pytest.raises(ConfigError):
        load_model("ftp:thing", 2)
    with pytest.raises(ConfigError):
        load_model("builtin:forest", 2)
    with pytest.raises(DimensionMismatch):
        load_model(f"builtin:linear:{params}", 3)
