"""Client for out-of-process function evaluators.

Protocol: newline-delimited JSON over the child's stdin/stdout, UTF-8.

    request:  {"id": <int>, "z": [<re>, <im>]}
    response: {"id": <int>, "f": [<re>, <im>]}   or
              {"id": <int>, "error": "<message>"}

Requests carry monotonically increasing ids and exactly one request is in
flight per child.  Numbers are written with 17 significant digits.  Any
protocol violation (child exit, malformed line, id mismatch, timeout)
raises ``EvaluationError``, which aborts the enclosing search.
"""

import itertools
import json
import queue
import subprocess
import threading

import numpy as np

from .errors import EvaluationError, InvalidInputError
from .functions import SYMMETRY_NONE, FunctionHandle

DEFAULT_TIMEOUT = 30.0

_EOF = object()


class _Child:
    """One evaluator process plus a reader thread feeding a queue."""

    def __init__(self, command, timeout):
        self.command = list(command)
        self.timeout = timeout
        self._ids = itertools.count(1)
        try:
            self.proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise EvaluationError(f"cannot launch {self.command!r}: {exc}") from exc
        self._lines = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        try:
            for line in self.proc.stdout:
                self._lines.put(line)
        finally:
            self._lines.put(_EOF)

    def evaluate(self, z: complex) -> complex:
        req_id = next(self._ids)
        request = '{"id": %d, "z": [%s, %s]}\n' % (
            req_id, format(z.real, ".17g"), format(z.imag, ".17g"))
        try:
            self.proc.stdin.write(request)
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise EvaluationError(
                f"evaluator {self.command!r} is gone: {exc}") from exc
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self.close()
            raise EvaluationError(
                f"evaluator {self.command!r} timed out after {self.timeout} s "
                f"on z = {z!r}") from None
        if line is _EOF:
            raise EvaluationError(
                f"evaluator {self.command!r} exited (code "
                f"{self.proc.poll()}) before answering id {req_id}")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            self.close()
            raise EvaluationError(
                f"malformed evaluator response {line!r}: {exc}") from exc
        if not isinstance(reply, dict) or reply.get("id") != req_id:
            self.close()
            raise EvaluationError(
                f"evaluator response id mismatch: expected {req_id}, "
                f"got {reply!r}")
        if "error" in reply:
            raise EvaluationError(
                f"evaluator reported failure at z = {z!r}: {reply['error']}")
        value = reply.get("f")
        if (not isinstance(value, (list, tuple)) or len(value) != 2
                or not all(isinstance(v, (int, float)) for v in value)):
            self.close()
            raise EvaluationError(f"evaluator response lacks a value pair: {reply!r}")
        return complex(value[0], value[1])

    def close(self):
        proc = getattr(self, "proc", None)
        if proc is None or proc.poll() is not None:
            return
        try:
            proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()


class ExternalFunction(FunctionHandle):
    """Handle backed by child processes, one per worker thread.

    Protocol exchanges are serialized per child; concurrent region workers
    each get their own child on first use from their thread.
    """

    def __init__(self, command, name="external", timeout=DEFAULT_TIMEOUT,
                 symmetry=SYMMETRY_NONE):
        if not command or not all(isinstance(c, str) for c in command):
            raise InvalidInputError("command must be a nonempty list of strings")
        self._command = list(command)
        self._timeout = float(timeout)
        self._local = threading.local()
        self._children = []
        self._children_lock = threading.Lock()
        super().__init__(name, self._evaluate_array, symmetry=symmetry)

    def _child(self) -> _Child:
        child = getattr(self._local, "child", None)
        if child is None or child.proc.poll() is not None:
            child = _Child(self._command, self._timeout)
            self._local.child = child
            with self._children_lock:
                self._children.append(child)
        return child

    def _evaluate_array(self, z):
        child = self._child()
        out = np.empty(z.shape, dtype=complex)
        for i, point in enumerate(z):
            out[i] = child.evaluate(complex(point))
        return out

    def close(self):
        with self._children_lock:
            children, self._children = self._children, []
        for child in children:
            child.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def external_function(command, name="external", timeout=DEFAULT_TIMEOUT,
                      symmetry=SYMMETRY_NONE) -> FunctionHandle:
    """Handle whose evaluations round-trip through a child process."""
    return ExternalFunction(command, name=name, timeout=timeout, symmetry=symmetry)
