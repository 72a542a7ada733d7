"""The construction action catalog.

Each action consumes previously defined points and produces fresh ones.
The catalog is fixed at build time: primitives realizable directly with
ruler and compass, plus three composite actions that expand to primitive
sequences (see `problem.expand_composites`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

from .facts import Fact, make_fact


class ConstructionStep(NamedTuple):
    action: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]

    def __str__(self) -> str:
        head = f"{self.action} {' '.join(self.outputs)}" if self.outputs else self.action
        if self.inputs:
            return f"{head} : {' '.join(self.inputs)}"
        return head


@dataclass(frozen=True)
class ActionSignature:
    name: str
    n_in: int
    n_out: int
    # each fresh-point draw the instantiator makes for this action
    random_draws: int
    # symmetry over input positions: callable yielding equivalent input orders
    input_orbit: Callable[[tuple[str, ...]], list[tuple[str, ...]]]
    # seed facts as (predicate, arg index spec); negative indices refer to
    # outputs: -1 is outputs[0]
    seeds: tuple[tuple[str, tuple[int, ...]], ...]
    # named non-degeneracy side conditions over inputs, checked numerically
    non_degeneracy: tuple[tuple[str, tuple[int, ...]], ...] = ()
    composite: bool = False


def _identity(ins):
    return [ins]


def _swap2(i, j):
    def orb(ins):
        alt = list(ins)
        alt[i], alt[j] = alt[j], alt[i]
        return [ins, tuple(alt)]

    return orb


def _perm3_at(i, j, k):
    def orb(ins):
        import itertools

        out = []
        for p in itertools.permutations((ins[i], ins[j], ins[k])):
            alt = list(ins)
            alt[i], alt[j], alt[k] = p
            out.append(tuple(alt))
        return out

    return orb


def _pair4(ins):
    # two point pairs (line/line): swap within each, swap the pairs
    a, b, c, d = ins
    out = []
    for x, y in ((a, b), (b, a)):
        for u, v in ((c, d), (d, c)):
            out.append((x, y, u, v))
            out.append((u, v, x, y))
    return out


def _block_swap_circles(ins):
    # two circles given as (center, through) blocks, optional trailing args
    o1, t1, o2, t2 = ins[:4]
    rest = ins[4:]
    return [ins, (o2, t2, o1, t1) + rest]


def _line_then_rest(ins):
    # first two inputs form a line and may swap
    a, b = ins[:2]
    rest = ins[2:]
    return [ins, (b, a) + rest]


O0 = -1  # first output
O1 = -2  # second output

CATALOG: dict[str, ActionSignature] = {}


def _reg(sig: ActionSignature) -> None:
    CATALOG[sig.name] = sig


_reg(ActionSignature("free", 0, 1, 1, _identity, ()))
_reg(
    ActionSignature(
        "on_line", 2, 1, 1, _swap2(0, 1),
        seeds=(("coll", (O0, 0, 1)),),
        non_degeneracy=(("neq", (0, 1)),),
    )
)
_reg(
    ActionSignature(
        "on_circle", 2, 1, 1, _identity,
        seeds=(("cong", (0, O0, 0, 1)),),
        non_degeneracy=(("neq", (0, 1)),),
    )
)
_reg(
    ActionSignature(
        "line_line_inter", 4, 1, 0, _pair4,
        seeds=(("coll", (O0, 0, 1)), ("coll", (O0, 2, 3))),
        non_degeneracy=(("neq", (0, 1)), ("neq", (2, 3)), ("npara", (0, 1, 2, 3))),
    )
)
_reg(
    ActionSignature(
        # line A B, circle (center O, through T), hint H
        "line_circle_inter", 5, 1, 0, _line_then_rest,
        seeds=(("coll", (O0, 0, 1)), ("cong", (2, O0, 2, 3))),
        non_degeneracy=(("neq", (0, 1)), ("neq", (2, 3))),
    )
)
_reg(
    ActionSignature(
        "line_circle_inter_other", 5, 1, 0, _line_then_rest,
        seeds=(("coll", (O0, 0, 1)), ("cong", (2, O0, 2, 3))),
        non_degeneracy=(("neq", (0, 1)), ("neq", (2, 3))),
    )
)
_reg(
    ActionSignature(
        # circles (O1,T1), (O2,T2), hint H
        "circle_circle_inter", 5, 1, 0, _block_swap_circles,
        seeds=(("cong", (0, O0, 0, 1)), ("cong", (2, O0, 2, 3))),
        non_degeneracy=(("neq", (0, 1)), ("neq", (2, 3)), ("neq", (0, 2))),
    )
)
_reg(
    ActionSignature(
        "circle_circle_inter_other", 5, 1, 0, _block_swap_circles,
        seeds=(("cong", (0, O0, 0, 1)), ("cong", (2, O0, 2, 3))),
        non_degeneracy=(("neq", (0, 1)), ("neq", (2, 3)), ("neq", (0, 2))),
    )
)
_reg(
    ActionSignature(
        "midpoint", 2, 1, 0, _swap2(0, 1),
        seeds=(
            ("midp", (O0, 0, 1)),
            ("coll", (0, O0, 1)),
            ("cong", (O0, 0, O0, 1)),
        ),
        non_degeneracy=(("neq", (0, 1)),),
    )
)
_reg(
    ActionSignature(
        # foot of the perpendicular from P onto line AB
        "foot", 3, 1, 0, _swap2(1, 2),
        seeds=(("coll", (O0, 1, 2)), ("perp", (0, O0, 1, 2))),
        non_degeneracy=(("neq", (1, 2)), ("ncoll", (0, 1, 2))),
    )
)
_reg(
    ActionSignature(
        # a second point on the line through P parallel to AB
        "parallel_through", 3, 1, 1, _swap2(1, 2),
        seeds=(("para", (0, O0, 1, 2)),),
        non_degeneracy=(("neq", (1, 2)),),
    )
)
_reg(
    ActionSignature(
        "perp_through", 3, 1, 1, _swap2(1, 2),
        seeds=(("perp", (0, O0, 1, 2)),),
        non_degeneracy=(("neq", (1, 2)),),
    )
)
_reg(
    ActionSignature(
        # a point on the internal bisector of angle A-B-C (vertex B)
        "angle_bisector_point", 3, 1, 0, _swap2(0, 2),
        seeds=(("eqangle", (1, 0, 1, O0, 1, O0, 1, 2)),),
        non_degeneracy=(("ncoll", (0, 1, 2)),),
    )
)
_reg(
    ActionSignature(
        "circumcenter", 3, 1, 0, _perm3_at(0, 1, 2),
        seeds=(
            ("cong", (O0, 0, O0, 1)),
            ("cong", (O0, 1, O0, 2)),
            ("circle", (O0, 0, 1, 2)),
        ),
        non_degeneracy=(("ncoll", (0, 1, 2)),),
    )
)
_reg(
    ActionSignature(
        "incenter", 3, 1, 0, _perm3_at(0, 1, 2),
        seeds=(
            ("eqangle", (0, 1, 0, O0, 0, O0, 0, 2)),
            ("eqangle", (1, 2, 1, O0, 1, O0, 1, 0)),
            ("eqangle", (2, 0, 2, O0, 2, O0, 2, 1)),
        ),
        non_degeneracy=(("ncoll", (0, 1, 2)),),
    )
)
_reg(
    ActionSignature(
        # reflection of P across line AB
        "reflect", 3, 1, 0, _swap2(1, 2),
        seeds=(
            ("cong", (1, 0, 1, O0)),
            ("cong", (2, 0, 2, O0)),
            ("perp", (0, O0, 1, 2)),
        ),
        non_degeneracy=(("neq", (1, 2)), ("ncoll", (0, 1, 2))),
    )
)
_reg(
    ActionSignature(
        # the point Q with M the midpoint of P and Q
        "rotate_half", 2, 1, 0, _identity,
        seeds=(
            ("midp", (1, 0, O0)),
            ("coll", (0, 1, O0)),
            ("cong", (1, 0, 1, O0)),
        ),
        non_degeneracy=(("neq", (0, 1)),),
    )
)
_reg(
    ActionSignature(
        # isogonal conjugate of P with respect to triangle ABC
        "isogonal_conjugate", 4, 1, 0, _perm3_at(1, 2, 3),
        seeds=(
            ("eqangle", (1, 2, 1, 0, 1, O0, 1, 3)),
            ("eqangle", (2, 3, 2, 0, 2, O0, 2, 1)),
            ("eqangle", (3, 1, 3, 0, 3, O0, 3, 2)),
        ),
        non_degeneracy=(
            ("ncoll", (1, 2, 3)),
            ("ncoll", (0, 1, 2)),
            ("ncoll", (0, 2, 3)),
            ("ncoll", (0, 1, 3)),
        ),
        composite=True,
    )
)
_reg(
    ActionSignature(
        # external similitude center of circles (O1,T1), (O2,T2)
        "exsim_center", 4, 1, 0, _block_swap_circles,
        seeds=(
            ("coll", (O0, 0, 2)),
            ("eqratio", (O0, 0, O0, 2, 0, 1, 2, 3)),
        ),
        non_degeneracy=(("neq", (0, 2)), ("neq", (0, 1)), ("neq", (2, 3))),
        composite=True,
    )
)
_reg(
    ActionSignature(
        "insim_center", 4, 1, 0, _block_swap_circles,
        seeds=(
            ("coll", (O0, 0, 2)),
            ("eqratio", (O0, 0, O0, 2, 0, 1, 2, 3)),
        ),
        non_degeneracy=(("neq", (0, 2)), ("neq", (0, 1)), ("neq", (2, 3))),
        composite=True,
    )
)

COMPOSITES = tuple(s.name for s in CATALOG.values() if s.composite)


class StepError(ValueError):
    pass


class UnknownAction(StepError):
    pass


class ArityMismatch(StepError):
    pass


def signature(action: str) -> ActionSignature:
    try:
        return CATALOG[action]
    except KeyError:
        raise UnknownAction(action) from None


def validate_step(step: ConstructionStep, defined: set[str]) -> None:
    """Arity and reference checks against the already defined point set."""
    sig = signature(step.action)
    if len(step.inputs) != sig.n_in:
        raise ArityMismatch(
            f"{step.action} takes {sig.n_in} inputs, got {len(step.inputs)}"
        )
    if len(step.outputs) != sig.n_out:
        raise ArityMismatch(
            f"{step.action} produces {sig.n_out} outputs, got {len(step.outputs)}"
        )
    for name in step.inputs:
        if name not in defined:
            raise StepError(f"undefined point {name!r}")
    for name in step.outputs:
        if name in defined:
            raise StepError(f"redefined point {name!r}")


def _resolve(spec: tuple[int, ...], step: ConstructionStep) -> tuple[str, ...]:
    out = []
    for i in spec:
        out.append(step.outputs[-1 - i] if i < 0 else step.inputs[i])
    return tuple(out)


def step_seed_facts(step: ConstructionStep) -> list[Fact]:
    """The defining facts an action contributes to the deduction database."""
    sig = signature(step.action)
    return [make_fact(pred, _resolve(spec, step)) for pred, spec in sig.seeds]


def step_conditions(step: ConstructionStep) -> list[tuple[str, tuple[str, ...]]]:
    """Named numeric side conditions (over input points) for the step."""
    sig = signature(step.action)
    return [(kind, _resolve(spec, step)) for kind, spec in sig.non_degeneracy]


def canonical_inputs(step: ConstructionStep, key) -> tuple[str, ...]:
    """Input order minimizing `key` pointwise over the action's symmetry."""
    sig = signature(step.action)
    return min(
        sig.input_orbit(step.inputs), key=lambda t: tuple(key(p) for p in t)
    )
