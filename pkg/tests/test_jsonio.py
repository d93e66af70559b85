import io
import json
import math
import unittest

import numpy as np
import pytest

import rainskit
from rainskit import jsonio, channels, linalg, rains, sdp
from rainskit.rainskit import InputDecodeError, InvalidChannelError, InvalidStateError

class Test_Reading(unittest.TestCase):

    def test_reads_state_with_cut(self):
        state, cut = jsonio.read_state("tests/documents/phi2.json")
        self.assertEqual(state.dims.factors, (2, 2))
        self.assertEqual(cut, (1,))
        np.testing.assert_allclose(state.matrix, linalg.max_entangled_state(2))

    def test_state_without_cut(self):
        state, cut = rainskit.read_state("tests/documents/product.json")
        self.assertIsNone(cut)
        self.assertEqual(state.matrix[0, 0], 1)

    def test_reads_channels(self):
        self.assertTrue(channels.same_channel(jsonio.read_channel("tests/documents/identity.json"), channels.make_identity(2)))
        with open("tests/documents/depolarizing.json") as fp:
            n = rainskit.read_channel(fp)
        self.assertTrue(channels.same_channel(n, channels.make_depolarizing(2, 1.0)))
        erasure = jsonio.read_channel("tests/documents/erasure.json")
        self.assertTrue(channels.same_channel(erasure, channels.make_erasure(2, 1.0)))

    def test_truncated_json_reports_position(self):
        with self.assertRaisesRegex(InputDecodeError, r"line \d+ column \d+"):
            jsonio.read_state("tests/documents/truncated.json")

    def test_invalid_channel(self):
        self.assertRaises(InvalidChannelError, jsonio.read_channel, "tests/documents/not_a_channel.json")

    def test_schema_errors(self):
        with self.assertRaisesRegex(InputDecodeError, "missing key 'dim_out'"):
            jsonio.read_channel(io.StringIO('{"kind": "kraus", "dim_in": 2, "data": []}'))
        with self.assertRaisesRegex(InputDecodeError, "unknown kind"):
            jsonio.read_channel(io.StringIO('{"kind": "stinespring", "dim_in": 2, "dim_out": 2, "data": []}'))
        with self.assertRaisesRegex(InputDecodeError, "wrong type"):
            jsonio.read_state(io.StringIO('{"dims": 4, "matrix": []}'))
        with self.assertRaisesRegex(InputDecodeError, r"\[re, im\]"):
            jsonio.read_state(io.StringIO('{"dims": [1], "matrix": [[1]]}'))
        with self.assertRaisesRegex(InputDecodeError, "JSON object"):
            jsonio.read_state(io.StringIO('[1, 2]'))

    def test_state_must_be_normalized(self):
        with self.assertRaises(InvalidStateError):
            jsonio.read_state(io.StringIO('{"dims": [1], "matrix": [[[2, 0]]]}'))

def test_channel_document_reads_back():
    n = channels.random_channel(2, 3, 2, seed=1)
    for kind in ("kraus", "choi"):
        doc = json.loads(json.dumps(jsonio.channel_to_json(n, kind)))
        assert doc["kind"] == kind
        assert channels.same_channel(jsonio.channel_from_json(doc), n)

def test_write_state_to_stream_and_path(tmp_path):
    state = channels.random_state((2, 3), 2)
    stream = io.StringIO()
    rainskit.write(state, stream)
    stream.seek(0)
    again, cut = rainskit.read_state(stream)
    np.testing.assert_allclose(again.matrix, state.matrix, atol=1e-15)
    assert again.dims == state.dims

    rainskit.write(channels.make_identity(2), tmp_path / "identity.json")
    assert channels.same_channel(rainskit.read_channel(tmp_path / "identity.json"), channels.make_identity(2))

    with pytest.raises(TypeError):
        rainskit.write(state, 42)

class Test_Reports(unittest.TestCase):

    def test_encodes_non_finite_reals(self):
        self.assertEqual(jsonio.encode([math.inf, -math.inf, 1.5]), ["inf", "-inf", 1.5])
        self.assertEqual(jsonio.encode(float("nan")), "nan")

    def test_encodes_numpy_values(self):
        self.assertEqual(jsonio.encode({"a": np.float64(0.5), "b": np.int64(3), "c": np.bool_(True)}),
                         {"a": 0.5, "b": 3, "c": True})
        self.assertEqual(jsonio.encode(np.array([[1.0, 2.0]])), [[1.0, 2.0]])
        self.assertEqual(jsonio.encode(np.eye(1, dtype=complex)), [[[1.0, 0.0]]])

    def test_measure_summary(self):
        result = rains.w_state(jsonio.read_state("tests/documents/phi2.json")[0])
        doc = json.loads(jsonio.dumps(result))
        self.assertEqual(doc["name"], "W")
        self.assertAlmostEqual(doc["log2_value"], 1.0, delta=1e-6)
        lower, upper = doc["certificate"]["certificate_interval"]
        self.assertLessEqual(lower, upper)

    def test_dataclass_reports_include_properties(self):
        from rainskit import amortization
        doc = jsonio.encode(amortization.strong_converse_bound(1, 2, 0.0, 1.0))
        self.assertEqual(doc, {"bound_holds": True, "qubit_rate": 1.0, "fidelity_ceiling": 1.0})
        report = amortization.SandwichReport(1.0, [0.25, 0.5])
        self.assertEqual(jsonio.encode(report)["lower"], 0.5)

    def test_dumps_is_deterministic(self):
        doc = {"b": [1.0, 2.0], "a": {"z": 1, "y": None}}
        self.assertEqual(jsonio.dumps(doc), jsonio.dumps(dict(reversed(list(doc.items())))))

    def test_rejects_unknown_objects(self):
        self.assertRaises(TypeError, jsonio.encode, object())

def test_sweep_csv():
    rows = [
        {"family": "erasure", "param": 0.0, "r_max": 1.0, "e_max": 1.0, "q_theta": 1.0, "converse_fidelity_ceiling": 1.0},
        {"family": "erasure", "param": 0.5, "r_max": 1 / 3, "e_max": None, "q_theta": 0.5, "converse_fidelity_ceiling": 2 ** -6.67},
    ]
    stream = io.StringIO()
    jsonio.write_sweep_csv(rows, stream)
    lines = stream.getvalue().splitlines()
    assert lines[0] == "# rainskit-sweep v1"
    assert lines[1] == "family,param,r_max,e_max,q_theta,converse_fidelity_ceiling"
    assert lines[3].split(",")[2] == "0.333333333333"
    assert lines[3].split(",")[3] == ""
    stream.seek(0)
    back = jsonio.read_sweep_csv(stream)
    assert back[1]["e_max"] is None
    assert back[1]["r_max"] == pytest.approx(1 / 3, rel=1e-11)

    with pytest.raises(InputDecodeError, match="not a sweep file"):
        jsonio.read_sweep_csv(io.StringIO("family,param\n"))

@pytest.mark.parametrize("name", ["problem.json", "problem.json.lz4"])
def test_problem_dumps(tmp_path, name):
    program, _ = rains.w_program(jsonio.read_state("tests/documents/phi2.json")[0])
    problem = program.build()
    jsonio.dump_problem(problem, tmp_path / name)
    loaded = jsonio.load_problem(tmp_path / name)
    assert loaded.blocks == problem.blocks
    np.testing.assert_allclose(loaded.b, problem.b)
    assert sdp.solve(loaded).primal_obj == pytest.approx(2.0, abs=1e-6)

def test_corrupt_lz4_dump(tmp_path):
    path = tmp_path / "broken.json.lz4"
    path.write_bytes(b"\x10\x00\x00\x00garbage")
    with pytest.raises(InputDecodeError, match="corrupt"):
        jsonio.load_problem(path)
