"""Parsing and printing for a small PDDL 2.1 subset.

Supported: typed STRIPS with negative literals, equality, and
(universally quantified) conditional effects.  Domains, problems and
IPC-style plan files all parse into immutable values; the printers emit a
canonical form that parses back to an equal value.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Iterable, NamedTuple, Union

SUPPORTED_REQUIREMENTS = (
    ":strips",
    ":typing",
    ":equality",
    ":negative-preconditions",
    ":conditional-effects",
    ":universal-preconditions",
)

_SYMBOL_RE = re.compile(r"^[a-z][a-z0-9_\-]*$")


class PDDLError(ValueError):
    """A PDDL input could not be accepted.  Carries a 1-based source location."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(f"{message} (line {line}, column {col})")


class UnsupportedFeatureError(PDDLError):
    pass


# --------------------------------------------------------------------------
# s-expressions with source positions


class Sym(str):
    line: int
    col: int

    def __new__(cls, text: str, line: int = 0, col: int = 0):
        obj = super().__new__(cls, text)
        obj.line = line
        obj.col = col
        return obj


class SList(list):
    def __init__(self, items=(), line: int = 0, col: int = 0):
        super().__init__(items)
        self.line = line
        self.col = col


SExpr = Union[Sym, SList]

_TOKEN_RE = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


def tokenize(text: str) -> list[Sym]:
    tokens = []
    line, line_start = 1, 0
    for m in _TOKEN_RE.finditer(text):
        chunk = m.group()
        if not chunk[0].isspace() and chunk[0] != ";":
            tokens.append(Sym(chunk.lower(), line, m.start() - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + chunk.rindex("\n") + 1
    return tokens


def parse_sexprs(text: str) -> list[SExpr]:
    """Parse every top-level s-expression in ``text``."""
    stack: list[SList] = [SList()]
    for tok in tokenize(text):
        if tok == "(":
            stack.append(SList(line=tok.line, col=tok.col))
        elif tok == ")":
            if len(stack) == 1:
                raise PDDLError("unbalanced ')'", tok.line, tok.col)
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) > 1:
        raise PDDLError("unclosed '('", stack[-1].line, stack[-1].col)
    return list(stack[0])


def _loc(node) -> tuple[int, int]:
    return getattr(node, "line", 0), getattr(node, "col", 0)


# --------------------------------------------------------------------------
# abstract syntax


class TypedVar(NamedTuple):
    """A typed name: ``?x - joint`` in parameter lists, ``joint1 - joint`` in object lists."""

    name: str
    type: str = "object"


class Atom(NamedTuple):
    predicate: str
    args: tuple[str, ...] = ()

    def is_ground(self) -> bool:
        return not any(a.startswith("?") for a in self.args)

    def substitute(self, binding: dict[str, str]) -> "Atom":
        return Atom(self.predicate, tuple(binding.get(a, a) for a in self.args))

    def __str__(self) -> str:
        return "(" + " ".join((self.predicate,) + self.args) + ")"


class Literal(NamedTuple):
    atom: Atom
    positive: bool = True

    def substitute(self, binding: dict[str, str]) -> "Literal":
        return Literal(self.atom.substitute(binding), self.positive)

    def __str__(self) -> str:
        return str(self.atom) if self.positive else f"(not {self.atom})"


@dataclass(frozen=True)
class Condition:
    """A conjunction of literals.  The empty conjunction is trivially true."""

    literals: tuple[Literal, ...] = ()

    @property
    def positive(self) -> tuple[Atom, ...]:
        return tuple(lit.atom for lit in self.literals if lit.positive)

    @property
    def negative(self) -> tuple[Atom, ...]:
        return tuple(lit.atom for lit in self.literals if not lit.positive)

    def __len__(self) -> int:
        return len(self.literals)

    def __iter__(self):
        return iter(self.literals)


@dataclass(frozen=True)
class ConditionalEffect:
    variables: tuple[TypedVar, ...]
    when: Condition
    then: tuple[Literal, ...]


EffectEntry = Union[Literal, ConditionalEffect]


@dataclass(frozen=True)
class Effect:
    entries: tuple[EffectEntry, ...] = ()

    @property
    def literals(self) -> tuple[Literal, ...]:
        return tuple(e for e in self.entries if isinstance(e, Literal))

    @property
    def conditionals(self) -> tuple[ConditionalEffect, ...]:
        return tuple(e for e in self.entries if isinstance(e, ConditionalEffect))

    def touched_predicates(self) -> set[str]:
        preds = {lit.atom.predicate for lit in self.literals}
        for ce in self.conditionals:
            preds.update(lit.atom.predicate for lit in ce.then)
        return preds


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple[TypedVar, ...]
    precondition: Condition
    effect: Effect

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    params: tuple[TypedVar, ...]

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class DomainDef:
    name: str
    requirements: tuple[str, ...]
    types: tuple[TypedVar, ...]  # (type name, parent type)
    predicates: tuple[PredicateDecl, ...]
    actions: tuple[ActionSchema, ...]

    def action(self, name: str) -> ActionSchema | None:
        for a in self.actions:
            if a.name == name:
                return a
        return None

    def predicate(self, name: str) -> PredicateDecl | None:
        for p in self.predicates:
            if p.name == name:
                return p
        return None

    def type_names(self) -> set[str]:
        return {"object"} | {t.name for t in self.types}

    def supertypes(self, type_name: str) -> list[str]:
        """``type_name`` followed by its ancestors up to ``object``."""
        parents = {t.name: t.type for t in self.types}
        chain = [type_name]
        while chain[-1] != "object" and chain[-1] in parents and parents[chain[-1]] not in chain:
            chain.append(parents[chain[-1]])
        if chain[-1] != "object":
            chain.append("object")
        return chain

    def is_subtype(self, sub: str, sup: str) -> bool:
        return sup in self.supertypes(sub)

    def static_predicates(self) -> frozenset[str]:
        """Predicates that no action effect ever changes."""
        touched: set[str] = set()
        for a in self.actions:
            touched |= a.effect.touched_predicates()
        return frozenset(p.name for p in self.predicates if p.name not in touched)


@dataclass(frozen=True)
class ProblemDef:
    name: str
    domain: str
    objects: tuple[TypedVar, ...]
    init: frozenset[Atom]
    goal: Condition

    def object_type(self, name: str) -> str | None:
        for o in self.objects:
            if o.name == name:
                return o.type
        return None

    def objects_of(self, domain: DomainDef, type_name: str) -> list[str]:
        return [o.name for o in self.objects if domain.is_subtype(o.type, type_name)]


@dataclass(frozen=True)
class PlanStep:
    time: Decimal
    name: str
    args: tuple[str, ...] = ()

    @property
    def action(self) -> str:
        return "(" + " ".join((self.name,) + self.args) + ")"

    def __str__(self) -> str:
        return f"{self.time:.5f}: {self.action}"


PLAN_T0 = Decimal("0.00100")
PLAN_STRIDE = Decimal("0.00200")


@dataclass(frozen=True)
class Plan:
    steps: tuple[PlanStep, ...] = ()
    # Set when the source text carried a trailing END sentinel.
    ended: bool = field(default=False, compare=False)

    def __post_init__(self):
        for prev, cur in zip(self.steps, self.steps[1:]):
            if cur.time <= prev.time:
                raise ValueError("plan timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    @property
    def actions(self) -> list[tuple[str, tuple[str, ...]]]:
        return [(s.name, s.args) for s in self.steps]

    @classmethod
    def from_actions(cls, actions: Iterable[tuple[str, Iterable[str]]]) -> "Plan":
        """Build a plan with canonical timestamps 0.001, 0.003, 0.005, ..."""
        return cls(tuple(
            PlanStep(PLAN_T0 + PLAN_STRIDE * k, name, tuple(args))
            for k, (name, args) in enumerate(actions)
        ))

    def retimed(self) -> "Plan":
        return Plan.from_actions(self.actions)


# --------------------------------------------------------------------------
# shared parsing helpers


def _symbol(node, what: str) -> str:
    if not isinstance(node, Sym):
        raise PDDLError(f"expected {what}, got a list", *_loc(node))
    if not _SYMBOL_RE.match(node.lstrip("?")) and node != "=":
        raise PDDLError(f"malformed {what} {str(node)!r}", *_loc(node))
    return str(node)


def _expect_list(node, what: str) -> SList:
    if not isinstance(node, SList):
        raise PDDLError(f"expected {what}", *_loc(node))
    return node


def _typed_list(items, variables: bool, where) -> list[tuple[TypedVar, Sym]]:
    """Parse ``a b - t1 c - t2 d`` into typed names (untyped ones default to object)."""
    out: list[tuple[TypedVar, Sym]] = []
    pending: list[Sym] = []
    i = 0
    while i < len(items):
        tok = items[i]
        if tok == "-":
            if i + 1 >= len(items):
                raise PDDLError("dangling '-' in typed list", *_loc(tok))
            tname = items[i + 1]
            if isinstance(tname, SList):
                if tname and tname[0] == "either":
                    raise UnsupportedFeatureError("unsupported feature 'either' types", *_loc(tname))
                raise PDDLError("expected a type name", *_loc(tname))
            tname = _symbol(tname, "type name")
            out.extend((TypedVar(str(p), tname), p) for p in pending)
            pending = []
            i += 2
            continue
        name = _symbol(tok, "variable" if variables else "name")
        if variables != name.startswith("?"):
            raise PDDLError(f"unexpected name {name!r} in typed list", *_loc(tok))
        pending.append(tok)
        i += 1
    out.extend((TypedVar(str(p), "object"), p) for p in pending)
    seen = set()
    for tv, tok in out:
        if tv.name in seen:
            raise PDDLError(f"duplicate name {tv.name!r}", *_loc(tok))
        seen.add(tv.name)
    return out


_UNSUPPORTED_CONDITION_HEADS = {"or", "imply", "exists", "forall", "preference"}
_NUMERIC_HEADS = {"increase", "decrease", "assign", "scale-up", "scale-down", "<", ">", "<=", ">="}


class _Scope:
    """Checks atoms against the predicate table and the variables in scope."""

    def __init__(self, domain_preds: dict[str, PredicateDecl], variables: dict[str, str],
                 objects: dict[str, str] | None = None, is_subtype=None):
        self.preds = domain_preds
        self.variables = variables
        self.objects = objects
        self.is_subtype = is_subtype

    def extended(self, more: dict[str, str]) -> "_Scope":
        return _Scope(self.preds, {**self.variables, **more}, self.objects, self.is_subtype)

    def atom(self, node: SList, ground: bool = False) -> Atom:
        if not node:
            raise PDDLError("empty atom", *_loc(node))
        head = node[0]
        if isinstance(head, SList):
            raise PDDLError("expected predicate name", *_loc(head))
        if head in _NUMERIC_HEADS:
            raise UnsupportedFeatureError(f"unsupported feature numeric expression '{head}'", *_loc(head))
        pred = _symbol(head, "predicate")
        args = []
        for a in node[1:]:
            name = _symbol(a, "term")
            if name.startswith("?"):
                if ground:
                    raise PDDLError(f"non-ground atom: variable {name!r}", *_loc(a))
                if name not in self.variables:
                    raise PDDLError(f"undeclared variable {name!r}", *_loc(a))
            elif self.objects is not None and name not in self.objects:
                raise PDDLError(f"unknown object {name!r}", *_loc(a))
            args.append(name)
        if pred == "=":
            if len(args) != 2:
                raise PDDLError("equality takes two arguments", *_loc(node))
            return Atom(pred, tuple(args))
        decl = self.preds.get(pred)
        if decl is None:
            raise PDDLError(f"unknown predicate {pred!r}", *_loc(head))
        if decl.arity != len(args):
            raise PDDLError(
                f"arity mismatch for {pred!r}: expected {decl.arity}, got {len(args)}", *_loc(node))
        if self.is_subtype is not None:
            for a, p, tok in zip(args, decl.params, node[1:]):
                if a.startswith("?"):
                    have = self.variables.get(a)
                    ok = have is None or self.is_subtype(have, p.type) or self.is_subtype(p.type, have)
                else:
                    have = (self.objects or {}).get(a)
                    ok = have is None or self.is_subtype(have, p.type)
                if not ok:
                    raise PDDLError(f"type mismatch: {a!r} is {have}, {pred!r} expects {p.type}", *_loc(tok))
        return Atom(pred, tuple(args))

    def literal(self, node, ground: bool = False) -> Literal:
        node = _expect_list(node, "literal")
        if node and node[0] == "not":
            if len(node) != 2:
                raise PDDLError("'not' takes one argument", *_loc(node))
            inner = _expect_list(node[1], "atom")
            if inner and inner[0] == "not":
                raise PDDLError("double negation", *_loc(inner))
            return Literal(self.atom(inner, ground), False)
        return Literal(self.atom(node, ground), True)

    def condition(self, node, ground: bool = False) -> Condition:
        node = _expect_list(node, "condition")
        if not node:
            return Condition()
        head = node[0]
        if head == "and":
            lits: list[Literal] = []
            for sub in node[1:]:
                sub = _expect_list(sub, "condition")
                if sub and sub[0] == "and":
                    lits.extend(self.condition(sub, ground).literals)
                else:
                    lits.append(self._condition_literal(sub, ground))
            return Condition(tuple(lits))
        return Condition((self._condition_literal(node, ground),))

    def _condition_literal(self, node: SList, ground: bool) -> Literal:
        if node and node[0] in _UNSUPPORTED_CONDITION_HEADS:
            raise UnsupportedFeatureError(
                f"unsupported feature '{node[0]}' in condition", *_loc(node))
        return self.literal(node, ground)

    def effect(self, node) -> Effect:
        node = _expect_list(node, "effect")
        if not node:
            return Effect()
        items = node[1:] if node[0] == "and" else [node]
        entries: list[EffectEntry] = []
        for sub in items:
            sub = _expect_list(sub, "effect")
            if sub and sub[0] == "and":
                entries.extend(self.effect(sub).entries)
            elif sub and sub[0] in ("forall", "when"):
                entries.append(self._conditional(sub))
            else:
                entries.append(self.literal(sub))
        return Effect(tuple(entries))

    def _conditional(self, node: SList) -> ConditionalEffect:
        variables: tuple[TypedVar, ...] = ()
        scope = self
        body = node
        if node[0] == "forall":
            if len(node) != 3:
                raise PDDLError("'forall' takes a variable list and a body", *_loc(node))
            typed = _typed_list(_expect_list(node[1], "variable list"), True, node)
            variables = tuple(tv for tv, _ in typed)
            for tv, tok in typed:
                if tv.name in self.variables:
                    raise PDDLError(f"quantified variable {tv.name!r} shadows a parameter", *_loc(tok))
            scope = self.extended({tv.name: tv.type for tv in variables})
            body = _expect_list(node[2], "effect")
        if body and body[0] == "when":
            if len(body) != 3:
                raise PDDLError("'when' takes a condition and an effect", *_loc(body))
            when = scope.condition(body[1])
            then_node = _expect_list(body[2], "effect")
        else:
            when = Condition()
            then_node = body
        then_items = then_node[1:] if then_node and then_node[0] == "and" else [then_node]
        then = []
        for sub in then_items:
            sub = _expect_list(sub, "effect")
            if sub and sub[0] in ("forall", "when", "and"):
                raise UnsupportedFeatureError("unsupported feature nested conditional effect", *_loc(sub))
            then.append(scope.literal(sub))
        return ConditionalEffect(variables, when, tuple(then))


def _sections(node: SList, kind: str) -> tuple[str, list[SList]]:
    if len(node) < 2 or node[0] != "define":
        raise PDDLError("expected (define ...)", *_loc(node))
    header = _expect_list(node[1], f"({kind} <name>)")
    if len(header) != 2 or header[0] != kind:
        raise PDDLError(f"expected ({kind} <name>)", *_loc(header))
    return _symbol(header[1], f"{kind} name"), [_expect_list(s, "section") for s in node[2:]]


def _single(text: str, what: str) -> SList:
    exprs = parse_sexprs(text)
    if len(exprs) != 1 or not isinstance(exprs[0], SList):
        loc = _loc(exprs[1]) if len(exprs) > 1 else (1, 1)
        raise PDDLError(f"expected exactly one {what} definition", *loc)
    return exprs[0]


# --------------------------------------------------------------------------
# domains


def parse_domain(text: str) -> DomainDef:
    root = _single(text, "domain")
    name, sections = _sections(root, "domain")
    requirements: list[str] = []
    types: list[TypedVar] = []
    type_tokens: dict[str, Sym] = {}
    preds: dict[str, PredicateDecl] = {}
    action_nodes: list[SList] = []

    for sec in sections:
        if not sec or not isinstance(sec[0], Sym):
            raise PDDLError("malformed section", *_loc(sec))
        key = sec[0]
        if key == ":requirements":
            for req in sec[1:]:
                r = str(req)
                if r not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedFeatureError(f"unsupported feature {r!r}", *_loc(req))
                requirements.append(r)
        elif key == ":types":
            for tv, tok in _typed_list(sec[1:], False, sec):
                if tv.name == "object":
                    continue
                types.append(tv)
                type_tokens[tv.name] = tok
        elif key == ":predicates":
            for p in sec[1:]:
                p = _expect_list(p, "predicate declaration")
                if not p:
                    raise PDDLError("empty predicate declaration", *_loc(p))
                pname = _symbol(p[0], "predicate name")
                if pname in preds:
                    raise PDDLError(f"duplicate predicate {pname!r}", *_loc(p[0]))
                params = tuple(tv for tv, _ in _typed_list(p[1:], True, p))
                preds[pname] = PredicateDecl(pname, params)
        elif key == ":action":
            action_nodes.append(sec)
        elif key in (":durative-action", ":functions", ":derived", ":constraints", ":process", ":event"):
            raise UnsupportedFeatureError(f"unsupported feature {str(key)!r}", *_loc(key))
        elif key == ":constants":
            raise UnsupportedFeatureError("unsupported feature ':constants'", *_loc(key))
        else:
            raise PDDLError(f"unknown domain section {str(key)!r}", *_loc(key))

    declared = {"object"} | {t.name for t in types}
    for t in types:
        if t.type not in declared:
            raise PDDLError(f"undeclared type {t.type!r}", *_loc(type_tokens[t.name]))
    if len(set(t.name for t in types)) != len(types):
        dup = next(t for t in types if [u.name for u in types].count(t.name) > 1)
        raise PDDLError(f"duplicate type {dup.name!r}", *_loc(type_tokens[dup.name]))

    def check_types(params, node):
        for p in params:
            if p.type not in declared:
                raise PDDLError(f"undeclared type {p.type!r}", *_loc(node))

    for p in preds.values():
        check_types(p.params, root)

    partial = DomainDef(name, tuple(requirements), tuple(types), tuple(preds.values()), ())
    actions: list[ActionSchema] = []
    for node in action_nodes:
        action = _parse_action(node, preds, partial)
        check_types(action.params, node)
        if any(a.name == action.name for a in actions):
            raise PDDLError(f"duplicate action {action.name!r}", *_loc(node[1]))
        actions.append(action)
    return DomainDef(name, tuple(requirements), tuple(types), tuple(preds.values()), tuple(actions))


def _parse_action(node: SList, preds, domain: DomainDef) -> ActionSchema:
    if len(node) < 2:
        raise PDDLError("action without a name", *_loc(node))
    name = _symbol(node[1], "action name")
    fields: dict[str, SExpr] = {}
    rest = node[2:]
    if len(rest) % 2:
        raise PDDLError(f"malformed action {name!r}", *_loc(node))
    for key, value in zip(rest[::2], rest[1::2]):
        if key not in (":parameters", ":precondition", ":effect"):
            raise PDDLError(f"unknown action field {str(key)!r}", *_loc(key))
        fields[str(key)] = value
    params_node = _expect_list(fields.get(":parameters", SList()), "parameter list")
    typed = _typed_list(params_node, True, params_node)
    params = tuple(tv for tv, _ in typed)
    for tv, tok in typed:
        if tv.type not in domain.type_names():
            raise PDDLError(f"undeclared type {tv.type!r}", *_loc(tok))
    scope = _Scope(preds, {p.name: p.type for p in params}, is_subtype=domain.is_subtype)
    pre = scope.condition(fields[":precondition"]) if ":precondition" in fields else Condition()
    eff = scope.effect(fields[":effect"]) if ":effect" in fields else Effect()
    for ce in eff.conditionals:
        for tv in ce.variables:
            if tv.type not in domain.type_names():
                raise PDDLError(f"undeclared type {tv.type!r}", *_loc(node))
    return ActionSchema(name, params, pre, eff)


# --------------------------------------------------------------------------
# problems


def parse_problem(text: str, domain: DomainDef) -> ProblemDef:
    root = _single(text, "problem")
    name, sections = _sections(root, "problem")
    dom_name = None
    objects: list[TypedVar] = []
    init_node = goal_node = None
    for sec in sections:
        key = sec[0] if sec else None
        if key == ":domain":
            dom_name = _symbol(sec[1], "domain name")
            if dom_name != domain.name:
                raise PDDLError(f"problem targets domain {dom_name!r}, not {domain.name!r}", *_loc(sec[1]))
        elif key == ":objects":
            for tv, tok in _typed_list(sec[1:], False, sec):
                if tv.type not in domain.type_names():
                    raise PDDLError(f"undeclared type {tv.type!r}", *_loc(tok))
                objects.append(tv)
        elif key == ":init":
            init_node = sec
        elif key == ":goal":
            goal_node = sec
        elif key in (":metric", ":constraints"):
            raise UnsupportedFeatureError(f"unsupported feature {str(key)!r}", *_loc(key))
        else:
            raise PDDLError(f"unknown problem section {key!r}", *_loc(sec))
    if dom_name is None:
        raise PDDLError("problem lacks a (:domain ...) section", *_loc(root))
    objmap = {o.name: o.type for o in objects}
    scope = _Scope({p.name: p for p in domain.predicates}, {}, objmap, domain.is_subtype)
    init: set[Atom] = set()
    if init_node is not None:
        for a in init_node[1:]:
            lit = scope.literal(a, ground=True)
            if not lit.positive:
                raise PDDLError("negative literal in :init", *_loc(a))
            init.add(lit.atom)
    goal = Condition()
    if goal_node is not None:
        if len(goal_node) != 2:
            raise PDDLError("(:goal ...) takes exactly one condition", *_loc(goal_node))
        goal = scope.condition(goal_node[1], ground=True)
    return ProblemDef(name, dom_name, tuple(objects), frozenset(init), goal)


# --------------------------------------------------------------------------
# plans

_STEP_RE = re.compile(
    r"^\s*(?P<t>\d+(?:\.\d*)?)\s*:\s*\((?P<body>[^()]*)\)\s*(?:\[[^\]]*\])?\s*$")


def parse_step(line: str, lineno: int = 1) -> PlanStep:
    m = _STEP_RE.match(line)
    if not m:
        raise PDDLError(f"malformed plan step {line.strip()!r}", lineno, 1)
    parts = m.group("body").lower().split()
    if not parts:
        raise PDDLError("plan step without an action", lineno, m.start("body") + 1)
    for p in parts:
        if not _SYMBOL_RE.match(p):
            raise PDDLError(f"malformed symbol {p!r} in plan step", lineno, m.start("body") + 1)
    try:
        t = Decimal(m.group("t"))
    except InvalidOperation:  # pragma: no cover - regex already guarantees digits
        raise PDDLError("malformed timestamp", lineno, 1)
    return PlanStep(t, parts[0], tuple(parts[1:]))


def parse_plan(text: str) -> Plan:
    """Parse an IPC-style plan.  Blank lines, ``;`` comments and a trailing
    ``END`` sentinel (as emitted by completion providers) are tolerated."""
    steps: list[PlanStep] = []
    ended = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        if line == "END":
            ended = True
            break
        step = parse_step(line, lineno)
        if steps and step.time <= steps[-1].time:
            raise PDDLError("non-increasing timestamps", lineno, 1)
        steps.append(step)
    return Plan(tuple(steps), ended)


def render_plan(plan: Plan, retime: bool = False) -> str:
    if retime:
        plan = plan.retimed()
    return "\n".join(str(s) for s in plan.steps)


# --------------------------------------------------------------------------
# printers


def _natural_key(s: str):
    return [int(p) if p.isdigit() else p for p in re.split(r"(\d+)", s)]


def atom_sort_key(atom: Atom):
    return (atom.predicate, [_natural_key(a) for a in atom.args])


def _typed(items: Iterable[TypedVar]) -> str:
    groups: list[tuple[str, list[str]]] = []
    for tv in items:
        if groups and groups[-1][0] == tv.type:
            groups[-1][1].append(tv.name)
        else:
            groups.append((tv.type, [tv.name]))
    return " ".join(f"{' '.join(names)} - {t}" for t, names in groups)


def render_condition(cond: Condition) -> str:
    if not cond.literals:
        return "(and)"
    return "(and " + " ".join(str(lit) for lit in cond.literals) + ")"


def _render_effect(eff: Effect) -> str:
    parts = []
    for e in eff.entries:
        if isinstance(e, Literal):
            parts.append(str(e))
            continue
        then = "(and " + " ".join(str(lit) for lit in e.then) + ")"
        body = f"(when {render_condition(e.when)} {then})"
        if e.variables:
            body = f"(forall ({_typed(e.variables)}) {body})"
        parts.append(body)
    return "(and " + " ".join(parts) + ")" if parts else "(and)"


def render_domain(domain: DomainDef) -> str:
    lines = [f"(define (domain {domain.name})"]
    if domain.requirements:
        lines.append(f"  (:requirements {' '.join(domain.requirements)})")
    if domain.types:
        lines.append(f"  (:types {' '.join(f'{t.name} - {t.type}' for t in domain.types)})")
    lines.append("  (:predicates")
    for p in domain.predicates:
        params = _typed(p.params)
        lines.append(f"    ({p.name}{' ' + params if params else ''})")
    lines[-1] += ")"
    for a in domain.actions:
        lines.append(f"  (:action {a.name}")
        lines.append(f"    :parameters ({_typed(a.params)})")
        lines.append(f"    :precondition {render_condition(a.precondition)}")
        lines.append(f"    :effect {_render_effect(a.effect)})")
    lines.append(")")
    return "\n".join(lines) + "\n"


def render_problem(problem: ProblemDef) -> str:
    init = sorted(problem.init, key=atom_sort_key)
    lines = [
        f"(define (problem {problem.name})",
        f"  (:domain {problem.domain})",
        f"  (:objects {_typed(problem.objects)})",
        "  (:init " + "\n    ".join(str(a) for a in init) + ")",
        f"  (:goal {render_condition(problem.goal)})",
        ")",
    ]
    return "\n".join(lines) + "\n"
