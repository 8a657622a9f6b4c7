"""Out-of-process evaluator protocol: happy path and failure modes."""

import sys
import textwrap

import numpy as np
import pytest

from meroloc.contour import moments
from meroloc.errors import EvaluationError, InvalidInputError
from meroloc.external import external_function
from meroloc.functions import make_rational
from meroloc.geometry import rect_from_corners

from conftest import EXAMPLE1_SPEC

ECHO_CHILD = textwrap.dedent("""
    import json, sys
    for line in sys.stdin:
        req = json.loads(line)
        print(json.dumps({"id": req["id"], "f": req["z"]}), flush=True)
""")

# Example 1's rational function, implemented independently in the child
RATIONAL_CHILD = textwrap.dedent("""
    import json, sys
    def f(z):
        num = (z - (0.8 + 0.9j)) * (z - (0.7 - 0.8j)) * (z + (0.6 + 0.7j))
        den = (z + (0.5 - 0.6j)) ** 2
        return num / den
    for line in sys.stdin:
        req = json.loads(line)
        z = complex(req["z"][0], req["z"][1])
        v = f(z)
        print(json.dumps({"id": req["id"], "f": [v.real, v.imag]}), flush=True)
""")

GARBAGE_CHILD = 'import sys; sys.stdin.readline(); print("!!not json!!", flush=True); sys.stdin.read()'

WRONG_ID_CHILD = textwrap.dedent("""
    import json, sys
    for line in sys.stdin:
        req = json.loads(line)
        print(json.dumps({"id": req["id"] + 7, "f": req["z"]}), flush=True)
""")

ERROR_CHILD = textwrap.dedent("""
    import json, sys
    for line in sys.stdin:
        req = json.loads(line)
        print(json.dumps({"id": req["id"], "error": "cannot evaluate"}), flush=True)
""")

SILENT_CHILD = "import sys\nfor line in sys.stdin:\n    pass"


def _cmd(code):
    return [sys.executable, "-c", code]


def test_echo_child_round_trip():
    handle = external_function(_cmd(ECHO_CHILD), name="echo")
    try:
        assert handle(3 + 4j) == 3 + 4j
        out = handle(np.array([1 + 2j, -0.5j]))
        np.testing.assert_array_equal(out, np.array([1 + 2j, -0.5j]))
        assert handle.evaluation_count == 3
    finally:
        handle.close()


def test_rational_child_matches_in_process_moments():
    rect = rect_from_corners(-1 - 1j, 1 + 1j, eps0=0.1)
    local = make_rational(EXAMPLE1_SPEC)
    mv_local = moments(local, rect, 4, 1e-6)
    remote = external_function(_cmd(RATIONAL_CHILD), name="ex1-child")
    try:
        mv_remote = moments(remote, rect, 4, 1e-6)
    finally:
        remote.close()
    assert mv_local.winding == mv_remote.winding == 1
    np.testing.assert_allclose(mv_remote.values, mv_local.values, atol=1e-12)


def test_garbage_child_raises_not_hangs():
    handle = external_function(_cmd(GARBAGE_CHILD), timeout=10.0)
    try:
        with pytest.raises(EvaluationError):
            handle(1.0 + 1.0j)
    finally:
        handle.close()


def test_id_mismatch_detected():
    handle = external_function(_cmd(WRONG_ID_CHILD), timeout=10.0)
    try:
        with pytest.raises(EvaluationError, match="id mismatch"):
            handle(1.0)
    finally:
        handle.close()


def test_child_reported_error_propagates():
    handle = external_function(_cmd(ERROR_CHILD), timeout=10.0)
    try:
        with pytest.raises(EvaluationError, match="cannot evaluate"):
            handle(1.0)
    finally:
        handle.close()


def test_timeout_detected():
    handle = external_function(_cmd(SILENT_CHILD), timeout=0.5)
    try:
        with pytest.raises(EvaluationError, match="timed out"):
            handle(1.0)
    finally:
        handle.close()


def test_dead_child_detected():
    handle = external_function([sys.executable, "-c", "pass"], timeout=5.0)
    try:
        with pytest.raises(EvaluationError):
            handle(1.0)
    finally:
        handle.close()


def test_bad_command_rejected():
    with pytest.raises(InvalidInputError):
        external_function([])
    with pytest.raises(EvaluationError):
        handle = external_function(["/nonexistent/evaluator-binary"])
        handle(1.0)


def test_request_precision_full_double():
    # the value 1/3 must round-trip through the 17-significant-digit wire format
    handle = external_function(_cmd(ECHO_CHILD))
    try:
        z = complex(1.0 / 3.0, -2.0 / 7.0)
        assert handle(z) == z
    finally:
        handle.close()
