"""Grounding, state transitions and plan validation.

States are closed-world frozensets of ground atoms.  Conditional effects
are evaluated against the state *before* the action; deletes are applied
before adds, so an atom both deleted and added by one action ends up true.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

from .pddl import (
    ActionSchema,
    Atom,
    Condition,
    DomainDef,
    Literal,
    Plan,
    ProblemDef,
    TypedVar,
)

State = frozenset  # frozenset[Atom]


class GroundingError(ValueError):
    pass


class PreconditionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Branch:
    """One instance of a (quantified) conditional effect."""

    when_pos: frozenset[Atom]
    when_neg: frozenset[Atom]
    adds: frozenset[Atom]
    dels: frozenset[Atom]


@dataclass(frozen=True)
class GroundAction:
    name: str
    args: tuple[str, ...]
    pre_pos: frozenset[Atom]
    pre_neg: frozenset[Atom]
    adds: frozenset[Atom]
    dels: frozenset[Atom]
    conditional: tuple[Branch, ...] = ()

    @property
    def precondition(self) -> Condition:
        return Condition(tuple(Literal(a) for a in sorted(self.pre_pos))
                         + tuple(Literal(a, False) for a in sorted(self.pre_neg)))

    def __str__(self) -> str:
        return "(" + " ".join((self.name,) + self.args) + ")"


def applicable(state: frozenset, action: GroundAction) -> bool:
    return action.pre_pos <= state and not (action.pre_neg & state)


def missing_preconditions(state: frozenset, action: GroundAction) -> list[Literal]:
    out = [Literal(a) for a in sorted(action.pre_pos - state)]
    out += [Literal(a, False) for a in sorted(action.pre_neg & state)]
    return out


def apply(state: frozenset, action: GroundAction) -> frozenset:
    if not applicable(state, action):
        raise PreconditionError(f"{action} is not applicable")
    return _apply_unchecked(state, action)


def _apply_unchecked(state: frozenset, action: GroundAction) -> frozenset:
    dels, adds = action.dels, action.adds
    if action.conditional:
        dels, adds = set(dels), set(adds)
        for br in action.conditional:
            if br.when_pos <= state and not (br.when_neg & state):
                dels |= br.dels
                adds |= br.adds
    return (state - dels) | adds


def holds(state: frozenset, goal: Condition) -> bool:
    for lit in goal.literals:
        if lit.atom.predicate == "=":
            truth = lit.atom.args[0] == lit.atom.args[1]
        else:
            truth = lit.atom in state
        if truth != lit.positive:
            return False
    return True


def unsatisfied(state: frozenset, goal: Condition) -> int:
    return sum(1 for lit in goal.literals if (lit.atom in state) != lit.positive)


class Task:
    """A domain/problem pair prepared for grounding.

    Static facts (atoms over predicates no action changes) are fixed for the
    whole problem, so grounding may evaluate literals over them once and drop
    them from the resulting actions.
    """

    def __init__(self, domain: DomainDef, problem: ProblemDef):
        if problem.domain != domain.name:
            raise GroundingError(f"problem is for domain {problem.domain!r}, not {domain.name!r}")
        self.domain = domain
        self.problem = problem
        self.object_types = {o.name: o.type for o in problem.objects}
        self.static_predicates = domain.static_predicates()
        self.static_facts = frozenset(a for a in problem.init if a.predicate in self.static_predicates)
        self._by_type: dict[str, tuple[str, ...]] = {}
        self._static_index: dict[tuple[str, int, str], set[tuple[str, ...]]] = {}
        for a in self.static_facts:
            for i, arg in enumerate(a.args):
                self._static_index.setdefault((a.predicate, i, arg), set()).add(a.args)

    @property
    def init(self) -> frozenset:
        return frozenset(self.problem.init)

    @property
    def goal(self) -> Condition:
        return self.problem.goal

    def objects_of(self, type_name: str) -> tuple[str, ...]:
        if type_name not in self._by_type:
            self._by_type[type_name] = tuple(
                o.name for o in self.problem.objects if self.domain.is_subtype(o.type, type_name))
        return self._by_type[type_name]

    # -- literal evaluation over statics -------------------------------------

    def _is_static(self, lit: Literal) -> bool:
        return lit.atom.predicate in self.static_predicates or lit.atom.predicate == "="

    def _static_truth(self, atom: Atom) -> bool:
        if atom.predicate == "=":
            return atom.args[0] == atom.args[1]
        return atom in self.static_facts

    def _candidates(self, var: str, type_name: str, literals, binding) -> Iterable[str]:
        """Objects for ``var``, narrowed through a positive static literal whose
        other arguments are already bound."""
        universe = self.objects_of(type_name)
        for lit in literals:
            if not lit.positive or lit.atom.predicate not in self.static_predicates:
                continue
            args = lit.atom.args
            if var not in args:
                continue
            others = [(i, binding.get(a, a)) for i, a in enumerate(args) if a != var]
            if any(v.startswith("?") for _, v in others):
                continue
            if others:
                i0, v0 = others[0]
                rows = self._static_index.get((lit.atom.predicate, i0, v0), set())
            else:
                rows = {a.args for a in self.static_facts if a.predicate == lit.atom.predicate}
            vals = set()
            for row in rows:
                if all(row[i] == v for i, v in others):
                    picked = {row[i] for i, a in enumerate(args) if a == var}
                    if len(picked) == 1:
                        vals |= picked
            return [o for o in universe if o in vals]
        return universe

    def _bindings(self, variables: tuple[TypedVar, ...], literals, base: dict[str, str]):
        """Enumerate bindings of ``variables`` satisfying every static literal."""
        literals = tuple(lit.substitute(base) for lit in literals)
        statics = [lit for lit in literals if self._is_static(lit)]
        # each static literal is checked once, at the depth binding its last variable
        depth = {v.name: i for i, v in enumerate(variables)}
        check_at: list[list[Literal]] = [[] for _ in variables]
        for lit in statics:
            levels = [depth[a] for a in lit.atom.args if a.startswith("?") and a in depth]
            if len(levels) < sum(a.startswith("?") for a in lit.atom.args):
                continue  # mentions a variable bound elsewhere
            if not levels:
                if self._static_truth(lit.atom) != lit.positive:
                    return
                continue
            check_at[max(levels)].append(lit)

        def rec(i: int, binding: dict[str, str]):
            if i == len(variables):
                yield dict(binding)
                return
            var = variables[i]
            for obj in self._candidates(var.name, var.type, statics, binding):
                binding[var.name] = obj
                if all(self._static_truth(lit.atom.substitute(binding)) == lit.positive for lit in check_at[i]):
                    yield from rec(i + 1, binding)
                del binding[var.name]

        yield from rec(0, {})

    # -- grounding -------------------------------------------------------------

    def check_binding(self, schema: ActionSchema, args: tuple[str, ...]) -> dict[str, str]:
        if len(args) != schema.arity:
            raise GroundingError(
                f"{schema.name} takes {schema.arity} arguments, got {len(args)}")
        binding = {}
        for p, obj in zip(schema.params, args):
            have = self.object_types.get(obj)
            if have is None:
                raise GroundingError(f"unknown object {obj!r}")
            if not self.domain.is_subtype(have, p.type):
                raise GroundingError(f"type mismatch: {obj!r} is {have}, {schema.name} expects {p.type} for {p.name}")
            binding[p.name] = obj
        return binding

    def ground(self, schema: ActionSchema, args: Iterable[str], prune_static: bool = False) -> GroundAction:
        """Ground ``schema`` at ``args``.  Quantified conditional effects expand
        over all type-compatible objects; instances whose static condition is
        false in this problem are dropped."""
        args = tuple(args)
        binding = self.check_binding(schema, args)
        pre_pos, pre_neg = set(), set()
        for lit in schema.precondition.literals:
            atom = lit.atom.substitute(binding)
            if prune_static and self._is_static(lit):
                continue
            if atom.predicate == "=":
                if (atom.args[0] == atom.args[1]) != lit.positive:
                    # "=" atoms never occur in states, so this makes the action inapplicable
                    pre_pos.add(atom)
                continue
            (pre_pos if lit.positive else pre_neg).add(atom)
        adds, dels = set(), set()
        for lit in schema.effect.literals:
            (adds if lit.positive else dels).add(lit.atom.substitute(binding))
        branches = []
        for ce in schema.effect.conditionals:
            for qb in self._bindings(ce.variables, ce.when.literals, binding):
                full = {**binding, **qb}
                wpos, wneg = set(), set()
                for lit in ce.when.literals:
                    if self._is_static(lit):
                        continue
                    (wpos if lit.positive else wneg).add(lit.atom.substitute(full))
                badd = frozenset(l.atom.substitute(full) for l in ce.then if l.positive)
                bdel = frozenset(l.atom.substitute(full) for l in ce.then if not l.positive)
                if not wpos and not wneg:
                    adds |= badd
                    dels |= bdel
                else:
                    branches.append(Branch(frozenset(wpos), frozenset(wneg), badd, bdel))
        return GroundAction(schema.name, args, frozenset(pre_pos), frozenset(pre_neg),
                            frozenset(adds), frozenset(dels), tuple(branches))

    def ground_all(self) -> tuple[GroundAction, ...]:
        """Every ground action whose static precondition holds, with static
        literals removed, in lexicographic (name, args) order."""
        return _ground_all_cached(self.domain, self.problem.objects, self.static_facts)

    def _ground_all(self) -> tuple[GroundAction, ...]:
        out = []
        for schema in self.domain.actions:
            for b in self._bindings(schema.params, schema.precondition.literals, {}):
                args = tuple(b[p.name] for p in schema.params)
                out.append(self.ground(schema, args, prune_static=True))
        out.sort(key=lambda g: (g.name, g.args))
        return tuple(out)

    def dynamic_goal(self) -> Condition | None:
        """The goal without its static literals, or None if one of those is false."""
        kept = []
        for lit in self.problem.goal.literals:
            if self._is_static(lit):
                if self._static_truth(lit.atom) != lit.positive:
                    return None
            else:
                kept.append(lit)
        return Condition(tuple(kept))

    def fluent(self, state: frozenset) -> frozenset:
        return frozenset(a for a in state if a.predicate not in self.static_predicates)


@lru_cache(maxsize=64)
def _ground_all_cached(domain: DomainDef, objects, static_facts) -> tuple[GroundAction, ...]:
    task = Task(domain, ProblemDef("grounding", domain.name, objects, static_facts, Condition()))
    return task._ground_all()


def ground(domain: DomainDef, problem: ProblemDef, schema: ActionSchema, binding: Iterable[str]) -> GroundAction:
    return Task(domain, problem).ground(schema, binding)


# --------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    verdict: str  # "valid" | "invalid" | "unsolved-goal"
    failing_step: int | None = None
    failing_atoms: list[str] = field(default_factory=list)
    reason: str = ""
    final_state: frozenset = frozenset()
    steps_checked: int = 0

    @property
    def valid(self) -> bool:
        return self.verdict == "valid"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "failing_step": self.failing_step,
            "failing_atoms": list(self.failing_atoms),
            "reason": self.reason,
            "steps_checked": self.steps_checked,
            "final_state": sorted(str(a) for a in self.final_state),
        }


def validate_plan(domain: DomainDef, problem: ProblemDef, plan: Plan | Iterable) -> ValidationReport:
    """Simulate ``plan`` from the initial state.  Valid iff every step is
    applicable in its predecessor state and the goal holds at the end; the
    first failing step is reported otherwise."""
    task = Task(domain, problem)
    state = task.init
    steps = plan.actions if isinstance(plan, Plan) else list(plan)
    for i, (name, args) in enumerate(steps):
        schema = domain.action(name)
        if schema is None:
            return ValidationReport("invalid", i, [], f"unknown action {name!r}", state, i)
        try:
            ga = task.ground(schema, args)
        except GroundingError as exc:
            return ValidationReport("invalid", i, [], str(exc), state, i)
        if not applicable(state, ga):
            missing = [str(l) for l in missing_preconditions(state, ga)]
            return ValidationReport("invalid", i, missing, f"precondition of step {i} {ga} violated", state, i)
        state = _apply_unchecked(state, ga)
    if not holds(state, problem.goal):
        missing = [str(l) for l in problem.goal.literals if (l.atom in state) != l.positive]
        return ValidationReport("unsolved-goal", None, missing, "goal not reached", state, len(steps))
    return ValidationReport("valid", None, [], "", state, len(steps))
