"""Auxiliary-construction proposal policies.

Built-in policies enumerate applicable constructions over the current
problem extension; an external policy speaks a newline-delimited wire
protocol over a subprocess's standard streams or a TCP socket.
"""

from __future__ import annotations

import math
import queue
import shlex
import socket
import subprocess
import threading
from dataclasses import dataclass, field

from .actions import CATALOG, ConstructionStep, StepError, canonical_inputs, \
    validate_step
from .problem import DslSyntaxError, ParseError, _split_step, parse_steps


class PolicyUnavailable(RuntimeError):
    """The external policy process died, timed out, or broke protocol."""


@dataclass(frozen=True)
class Proposal:
    step: ConstructionStep
    logprob: float  # <= 0, need not be normalized


@dataclass(frozen=True)
class PolicyContext:
    # canonical construction text of the base problem; the goal fact is
    # deliberately absent so proposals cannot condition on it
    problem: str
    aux_so_far: tuple[ConstructionStep, ...] = ()
    k: int = 16

    def steps(self) -> tuple[ConstructionStep, ...]:
        return parse_steps(self.problem) + tuple(self.aux_so_far)


def score_path(proposals: list[Proposal]) -> float:
    """Cumulative negative log likelihood of a proposal sequence."""
    return sum(-p.logprob for p in proposals)


# ---------------------------------------------------------------------------
# enumeration shared by the built-ins


def _fresh_names(taken: set[str], n: int) -> tuple[str, ...]:
    out = []
    i = 1
    while len(out) < n:
        name = f"X{i}"
        if name not in taken:
            out.append(name)
            taken = taken | {name}
        i += 1
    return tuple(out)


def default_proposal_actions() -> tuple[str, ...]:
    """Deterministic single-output constructions: the useful auxiliaries."""
    return tuple(
        sorted(
            name for name, sig in CATALOG.items()
            if sig.n_in >= 2 and sig.n_out == 1 and sig.random_draws == 0
            and not sig.composite
        )
    )


def enumerate_applications(
    steps: tuple[ConstructionStep, ...], actions: tuple[str, ...]
) -> list[ConstructionStep]:
    """Every applicable (action, argument-tuple) instance, lexicographic,
    deduplicated under input symmetry and against existing constructions."""
    points = []
    for s in steps:
        points.extend(s.outputs)
    taken = set(points)
    existing = {
        (s.action, canonical_inputs(s, points.index)) for s in steps
    }
    out = []
    for action in sorted(set(actions)):
        sig = CATALOG[action]
        seen: set[tuple] = set()

        def tuples(prefix: tuple[str, ...]):
            if len(prefix) == sig.n_in:
                yield prefix
                return
            for p in sorted(points):
                if p not in prefix:
                    yield from tuples(prefix + (p,))

        for ins in tuples(()):
            step = ConstructionStep(action, ins, _fresh_names(taken, sig.n_out))
            key = canonical_inputs(step, points.index)
            if key in seen or (action, key) in existing:
                continue
            seen.add(key)
            out.append(step._replace(inputs=key))
    return out


class ExhaustivePolicy:
    """Uniform logprob over the full enumeration; lexicographic truncation."""

    def __init__(self, actions: tuple[str, ...] | None = None):
        self.actions = actions or default_proposal_actions()

    def propose(self, ctx: PolicyContext) -> list[Proposal]:
        apps = enumerate_applications(ctx.steps(), self.actions)
        if not apps:
            return []
        lp = -math.log(len(apps))
        apps.sort(key=lambda s: (s.action, s.inputs))
        return [Proposal(s, lp) for s in apps[: ctx.k]]


DEFAULT_HEURISTIC_WEIGHTS = {
    "midpoint": 8.0,
    "foot": 8.0,
    "circumcenter": 8.0,
    "line_line_inter": 4.0,
    "reflect": 2.0,
    "incenter": 1.0,
    "rotate_half": 1.0,
}


class HeuristicPolicy:
    """Fixed preference weights per action; logprob = ln(w / Z) over the
    enumerated applicable set."""

    def __init__(self, weights: dict[str, float] | None = None):
        self.weights = dict(DEFAULT_HEURISTIC_WEIGHTS if weights is None
                            else weights)
        if not any(w > 0 for w in self.weights.values()):
            raise ValueError("at least one positive action weight required")

    def propose(self, ctx: PolicyContext) -> list[Proposal]:
        actions = tuple(
            a for a, w in self.weights.items() if w > 0 and a in CATALOG
        )
        apps = enumerate_applications(ctx.steps(), actions)
        if not apps:
            return []
        z = sum(self.weights[s.action] for s in apps)
        apps.sort(key=lambda s: (-self.weights[s.action], s.action, s.inputs))
        return [
            Proposal(s, math.log(self.weights[s.action] / z))
            for s in apps[: ctx.k]
        ]


# ---------------------------------------------------------------------------
# external policy


class _LineChannel:
    """Serial line-oriented transport with a background reader, so reads
    honor a timeout on both pipes and sockets."""

    def __init__(self, write_line, readable, close):
        self._write_line = write_line
        self._close = close
        self._queue: queue.Queue[str | None] = queue.Queue()

        def pump():
            try:
                for line in readable:
                    self._queue.put(line.rstrip("\n"))
            except Exception:
                pass
            self._queue.put(None)

        self._reader = threading.Thread(target=pump, daemon=True)
        self._reader.start()

    def send(self, line: str) -> None:
        try:
            self._write_line(line + "\n")
        except Exception as e:
            raise PolicyUnavailable(f"write failed: {e}") from e

    def recv(self, timeout: float) -> str:
        try:
            line = self._queue.get(timeout=timeout)
        except queue.Empty:
            raise PolicyUnavailable(f"no response within {timeout}s") from None
        if line is None:
            raise PolicyUnavailable("connection closed")
        return line

    def close(self) -> None:
        try:
            self._close()
        except Exception:
            pass


def _open_exec(command: str) -> _LineChannel:
    try:
        proc = subprocess.Popen(
            shlex.split(command), stdin=subprocess.PIPE,
            stdout=subprocess.PIPE, text=True, bufsize=1,
        )
    except OSError as e:
        raise PolicyUnavailable(f"cannot start {command!r}: {e}") from e

    def write(line):
        proc.stdin.write(line)
        proc.stdin.flush()

    def close():
        proc.stdin.close()
        proc.terminate()

    return _LineChannel(write, proc.stdout, close)


def _open_tcp(host: str, port: int) -> _LineChannel:
    try:
        sock = socket.create_connection((host, port), timeout=10)
    except OSError as e:
        raise PolicyUnavailable(f"cannot connect to {host}:{port}: {e}") from e
    fh = sock.makefile("rw", encoding="utf-8", newline="\n")

    def write(line):
        fh.write(line)
        fh.flush()

    return _LineChannel(write, fh, sock.close)


@dataclass
class ExternalPolicy:
    """Client for the line protocol:

    request:  PROPOSE <id> <k> / PROBLEM <text> / AUX <step>* / END <id>
    response: OK <id> <n> / P <logprob> <step> x n / END <id>
              or ERR <id> <message>
    """

    spec: str
    timeout: float = 30.0
    _channel: _LineChannel | None = field(default=None, repr=False)
    _next_id: int = field(default=0, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def _connect(self) -> _LineChannel:
        if self._channel is None:
            if self.spec.startswith("exec:"):
                self._channel = _open_exec(self.spec[len("exec:"):])
            elif self.spec.startswith("tcp:"):
                host, _, port = self.spec[len("tcp:"):].rpartition(":")
                if not host or not port.isdigit():
                    raise PolicyUnavailable(f"bad policy spec {self.spec!r}")
                self._channel = _open_tcp(host, int(port))
            else:
                raise PolicyUnavailable(f"bad policy spec {self.spec!r}")
        return self._channel

    def close(self) -> None:
        if self._channel is not None:
            self._channel.close()
            self._channel = None

    def propose(self, ctx: PolicyContext) -> list[Proposal]:
        with self._lock:
            ch = self._connect()
            self._next_id += 1
            rid = self._next_id
            ch.send(f"PROPOSE {rid} {ctx.k}")
            ch.send(f"PROBLEM {ctx.problem}")
            for step in ctx.aux_so_far:
                ch.send(f"AUX {step}")
            ch.send(f"END {rid}")
            head = ch.recv(self.timeout)
            parts = head.split(maxsplit=2)
            if parts[:1] == ["ERR"]:
                raise PolicyUnavailable(
                    f"policy error: {parts[2] if len(parts) > 2 else head}"
                )
            if len(parts) != 3 or parts[0] != "OK" or parts[1] != str(rid) \
                    or not parts[2].isdigit():
                raise PolicyUnavailable(f"malformed line {head!r}")
            n = int(parts[2])
            lines = [ch.recv(self.timeout) for _ in range(n)]
            tail = ch.recv(self.timeout)
            if tail != f"END {rid}":
                raise PolicyUnavailable(f"malformed line {tail!r}")
        return self._decode(ctx, lines)[: ctx.k]

    def _decode(self, ctx: PolicyContext,
                lines: list[str]) -> list[Proposal]:
        steps = ctx.steps()
        points = []
        for s in steps:
            points.extend(s.outputs)
        existing = {
            (s.action, canonical_inputs(s, points.index)) for s in steps
        }
        defined = set(points)
        out = []
        for line in lines:
            tokens = line.split()
            if len(tokens) < 3 or tokens[0] != "P":
                raise PolicyUnavailable(f"malformed line {line!r}")
            try:
                lp = float(tokens[1])
                step = _split_step(tokens[2:], 0)
                validate_step(step, defined)
            except (ValueError, StepError, ParseError, DslSyntaxError):
                raise PolicyUnavailable(f"malformed line {line!r}") from None
            if lp > 0 or not math.isfinite(lp):
                raise PolicyUnavailable(f"malformed line {line!r}")
            if (step.action, canonical_inputs(step, points.index)) in existing:
                continue  # duplicate of an existing construction
            out.append(Proposal(step, lp))
        return out


def make_policy(spec: str | None, **kwargs):
    """Policy factory for the CLI spellings: none | exhaustive | heuristic |
    exec:CMD | tcp:HOST:PORT."""
    if spec in (None, "none"):
        return None
    if spec == "exhaustive":
        return ExhaustivePolicy(actions=kwargs.get("actions"))
    if spec == "heuristic":
        return HeuristicPolicy(weights=kwargs.get("weights"))
    if spec.startswith(("exec:", "tcp:")):
        return ExternalPolicy(spec, timeout=kwargs.get("timeout", 30.0))
    raise ValueError(f"unknown policy {spec!r}")
