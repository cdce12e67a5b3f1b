"""Forward-chaining inference over a rulebase.

The engine works one hop at a time. A selection strategy picks a rule and a
binding, ``compose`` produces the ground conclusion, and the store grows by
exactly that fact. ``run`` drives the loop to a stopping condition and
returns the trace; ``solve`` reads a three-valued verdict off the trace
under the open-world reading:

    true     the statement itself was given or derived
    false    the statement's negation was given or derived
    unknown  neither

Proofs are serialized to a canonical one-line form, e.g.

    (sent2 & sent1) -> int1 ; (sent3 & int1) -> hypothesis

Each step names the rule, then the facts it consumed (sentence ids before
intermediates, each numerically ascending). Intermediates are renumbered
int1..intK along a canonical topological order that depends only on the
proof's shape, so equal proofs serialize identically no matter which
strategy found them. A statement that is itself a given fact has the
degenerate proof "sentK -> hypothesis".
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .theory import (
    Atom,
    Entity,
    Fact,
    IsAttr,
    QUANT_NONE,
    QUANT_PEOPLE,
    Rel,
    Rule,
    Statement,
    Theory,
    Var,
    render,
)

LABEL_TRUE = "true"
LABEL_FALSE = "false"
LABEL_UNKNOWN = "unknown"
LABELS = (LABEL_TRUE, LABEL_FALSE, LABEL_UNKNOWN)

STOP_GOAL_REACHED = "goal_reached"
STOP_FIXPOINT = "fixpoint"
STOP_BUDGET_EXHAUSTED = "budget_exhausted"
STOP_STRATEGY = "strategy_stop"


class EngineError(RuntimeError):
    pass


class StaleDecisionError(EngineError):
    """A strategy handed back a binding that no longer matches the store."""


class DuplicateConclusionError(EngineError):
    """A strategy tried to re-derive a fact already in the store."""


class ProofCheckError(ValueError):
    """A proof string that does not validate against its theory."""


def substitute(atom: Atom, entity: Entity | None) -> Atom:
    """Ground an atom by replacing its variable (if any) with ``entity``."""
    subject = atom.subject
    if isinstance(subject, Var):
        if entity is None:
            raise ValueError("atom has a variable but no binding target")
        subject = entity
    pred = atom.pred
    if isinstance(pred, Rel) and isinstance(pred.obj, Var):
        if entity is None:
            raise ValueError("atom has a variable but no binding target")
        pred = Rel(pred.verb, entity)
    if subject is atom.subject and pred is atom.pred:
        return atom
    return Atom(subject, pred, atom.positive)


@dataclass(frozen=True)
class Binding:
    """A way to fire a rule: the entity substituted for the variable (None
    for ground rules) plus the store facts matching the premises, in
    premise order."""

    entity: Entity | None
    fact_ids: tuple[str, ...]


@dataclass(frozen=True)
class Proceed:
    rule_id: str
    binding: Binding


@dataclass(frozen=True)
class Stop:
    pass


STOP = Stop()


@dataclass(frozen=True)
class OneHopStep:
    index: int  # 1-based
    rule_id: str
    fact_ids: tuple[str, ...]
    conclusion: Fact


@dataclass
class InferenceTrace:
    theory: Theory
    steps: list[OneHopStep]
    stop_reason: str
    composer_calls: int
    contradiction: bool = False

    def conclusions(self) -> list[Atom]:
        return [s.conclusion.atom for s in self.steps]

    def to_json(self) -> dict:
        return {
            "steps": [
                {
                    "rule": s.rule_id,
                    "facts": list(s.fact_ids),
                    "conclusion": render(s.conclusion.atom),
                }
                for s in self.steps
            ],
            "stop_reason": self.stop_reason,
            "composer_calls": self.composer_calls,
            "contradiction": self.contradiction,
        }

    def to_json_str(self) -> str:
        return json.dumps(self.to_json())


@dataclass(frozen=True)
class ProofGraph:
    """A proof as a DAG plus its canonical serialization.

    Nodes are the given-fact ids, proof-local intermediate ids, rule ids,
    and the distinguished "hypothesis" node. Edges run fact -> rule and
    rule -> conclusion. ``proves_negation`` marks proofs that establish the
    negation of the statement (a "false" verdict).
    """

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    canonical_form: str
    proves_negation: bool = False


@dataclass(frozen=True)
class Verdict:
    label: str
    proof: ProofGraph | None


class FactStore:
    """Given plus derived facts, with atom-level dedup and lookup."""

    def __init__(self, theory: Theory):
        self.theory = theory
        self.given: list[Fact] = list(theory.facts)
        self.derived: list[Fact] = []
        self._by_atom: dict[Atom, Fact] = {f.atom: f for f in self.given}
        self.entity_order: list[Entity] = theory.entity_order()
        self._entity_rank = {e: i for i, e in enumerate(self.entity_order)}
        self.contradiction = any(
            f.atom.negated() in self._by_atom for f in self.given
        )

    def facts(self) -> list[Fact]:
        return self.given + self.derived

    def has_atom(self, atom: Atom) -> bool:
        return atom in self._by_atom

    def fact_for(self, atom: Atom) -> Fact | None:
        return self._by_atom.get(atom)

    def entity_rank(self, entity: Entity | None) -> int:
        if entity is None:
            return -1
        return self._entity_rank.get(entity, len(self._entity_rank))

    def add_derived(self, atom: Atom, step_index: int) -> Fact:
        if atom in self._by_atom:
            raise DuplicateConclusionError(render(atom))
        fact = Fact(f"int{len(self.derived) + 1}", atom, derived_step=step_index)
        self.derived.append(fact)
        self._by_atom[atom] = fact
        if atom.negated() in self._by_atom:
            self.contradiction = True
        return fact


def _quantifier_allows(rule: Rule, entity: Entity) -> bool:
    if rule.quantifier == QUANT_PEOPLE:
        return entity.is_person
    return True


def applicable_bindings(rule: Rule, store: FactStore) -> list[Binding]:
    """Every binding whose premises are all present in the store, in
    canonical order: candidate entities by first mention in the theory;
    a ground rule contributes at most one binding."""
    bindings: list[Binding] = []
    has_var = rule.quantifier != QUANT_NONE
    candidates: list[Entity | None] = (
        [e for e in store.entity_order if _quantifier_allows(rule, e)]
        if has_var
        else [None]
    )
    for entity in candidates:
        fact_ids: list[str] = []
        for premise in rule.premises:
            fact = store.fact_for(substitute(premise, entity))
            if fact is None:
                break
            fact_ids.append(fact.id)
        else:
            bindings.append(Binding(entity, tuple(fact_ids)))
    return bindings


def compose(rule: Rule, binding: Binding) -> Atom:
    """The ground conclusion this rule yields under this binding."""
    return substitute(rule.conclusion, binding.entity)


def step(store: FactStore, decision: Proceed) -> OneHopStep:
    """Apply one selected inference, growing the store by one fact.

    Raises StaleDecisionError if the binding no longer matches the store and
    DuplicateConclusionError if the conclusion is already present.
    """
    rule = store.theory.rule_by_id(decision.rule_id)
    binding = decision.binding
    if len(binding.fact_ids) != len(rule.premises):
        raise StaleDecisionError("binding does not cover the premises")
    by_id = {f.id: f for f in store.facts()}
    for premise, fid in zip(rule.premises, binding.fact_ids):
        fact = by_id.get(fid)
        if fact is None or fact.atom != substitute(premise, binding.entity):
            raise StaleDecisionError(f"premise fact {fid} missing or changed")
    conclusion_atom = compose(rule, binding)
    index = len(store.derived) + 1
    fact = store.add_derived(conclusion_atom, index)
    return OneHopStep(index, rule.id, binding.fact_ids, fact)


def run(
    theory: Theory,
    statement: Statement,
    strategy,
    budget: int | None = None,
) -> InferenceTrace:
    """Drive select/step to a stop and return the trace.

    Halts when the strategy says stop, when the budget (a cap on one-hop
    compositions) runs out, or, for goal-directed strategies, as soon as the
    statement or its negation is in the store. Termination is guaranteed:
    every step grows the store of ground facts, which is finite.
    """
    if budget is not None and budget < 0:
        raise ValueError("budget must be >= 0")
    store = FactStore(theory)
    goal = statement.atom
    anti_goal = goal.negated()
    goal_directed = bool(getattr(strategy, "goal_directed", False))
    steps: list[OneHopStep] = []
    while True:
        if goal_directed and (store.has_atom(goal) or store.has_atom(anti_goal)):
            reason = STOP_GOAL_REACHED
            break
        if budget is not None and len(steps) >= budget:
            reason = STOP_BUDGET_EXHAUSTED
            break
        decision = strategy.select(store, theory, statement)
        if isinstance(decision, Stop):
            reason = STOP_STRATEGY if goal_directed else STOP_FIXPOINT
            break
        steps.append(step(store, decision))
    return InferenceTrace(
        theory=theory,
        steps=steps,
        stop_reason=reason,
        composer_calls=len(steps),
        contradiction=store.contradiction,
    )


def replay_store(trace: InferenceTrace) -> FactStore:
    """Rebuild the store a trace left behind."""
    store = FactStore(trace.theory)
    for s in trace.steps:
        store.add_derived(s.conclusion.atom, s.index)
    return store


def solve(theory: Theory, statement: Statement, trace: InferenceTrace) -> Verdict:
    """Three-valued verdict for the statement given a finished trace.

    A verdict is non-unknown exactly when it carries a proof. If the store
    is contradictory and holds both the statement and its negation, the
    polarity matching the statement wins.
    """
    store = replay_store(trace)
    target = store.fact_for(statement.atom)
    if target is not None:
        return Verdict(LABEL_TRUE, stitch_proof(trace, target))
    anti_fact = store.fact_for(statement.atom.negated())
    if anti_fact is not None:
        proof = stitch_proof(trace, anti_fact)
        return Verdict(
            LABEL_FALSE,
            ProofGraph(proof.nodes, proof.edges, proof.canonical_form, True),
        )
    return Verdict(LABEL_UNKNOWN, None)


def _id_sort_key(fid: str) -> tuple[int, int]:
    m = re.fullmatch(r"(sent|int)(\d+)", fid)
    if not m:
        raise ValueError(f"bad fact id {fid!r}")
    return (0 if m.group(1) == "sent" else 1, int(m.group(2)))


def canonical_proof_order(
    target: Atom,
    given_ids: dict[Atom, str],
    derivations: dict[Atom, tuple[str, tuple[Atom, ...]]],
) -> list[Atom]:
    """Derived atoms of a proof in its canonical topological order.

    The order is a function of the DAG alone: each step's derived premises
    are visited in order of a structural key built from rule ids and leaf
    sentence ids, which is stable under vocabulary renamings.
    """
    key_cache: dict[Atom, tuple] = {}

    def structural_key(atom: Atom) -> tuple:
        cached = key_cache.get(atom)
        if cached is not None:
            return cached
        rule_id, premises = derivations[atom]
        leaf_ids = sorted(
            _id_sort_key(given_ids[p]) for p in premises if p in given_ids
        )
        sub = tuple(sorted(structural_key(p) for p in premises if p not in given_ids))
        key = (_id_sort_key(rule_id), tuple(leaf_ids), sub)
        key_cache[atom] = key
        return key

    order: list[Atom] = []
    seen: set[Atom] = set()

    def visit(atom: Atom) -> None:
        if atom in seen:
            return
        seen.add(atom)
        _, premises = derivations[atom]
        derived_children = [p for p in premises if p not in given_ids]
        for child in sorted(derived_children, key=structural_key):
            visit(child)
        order.append(atom)

    visit(target)
    return order


def canonical_proof_steps(
    target: Atom,
    given_ids: dict[Atom, str],
    derivations: dict[Atom, tuple[str, tuple[Atom, ...]]],
) -> list[tuple[str, tuple[Atom, ...], Atom]]:
    """(rule id, premise atoms, conclusion atom) triples in canonical order.
    Empty when the target is used as a given fact (no derivation supplied)."""
    if target not in derivations:
        if target in given_ids:
            return []
        raise KeyError(f"no derivation for {render(target)!r}")
    return [
        (derivations[atom][0], derivations[atom][1], atom)
        for atom in canonical_proof_order(target, given_ids, derivations)
    ]


def canonical_proof_string(
    target: Atom,
    given_ids: dict[Atom, str],
    derivations: dict[Atom, tuple[str, tuple[Atom, ...]]],
) -> str:
    """Serialize a proof DAG to the canonical one-line form.

    ``given_ids`` maps leaf atoms to their sentence ids; ``derivations``
    maps every derived atom in the proof to (rule id, premise atoms).
    A target present in both maps serializes as the derivation; pass an
    empty ``derivations`` to force the degenerate given form.
    """
    if target not in derivations:
        if target in given_ids:
            return f"{given_ids[target]} -> hypothesis"
        raise KeyError(f"no derivation for {render(target)!r}")

    order = canonical_proof_order(target, given_ids, derivations)
    number = {atom: i + 1 for i, atom in enumerate(order)}

    segments: list[str] = []
    for atom in order:
        rule_id, premises = derivations[atom]
        labels = sorted(
            (
                given_ids[p] if p in given_ids else f"int{number[p]}"
                for p in premises
            ),
            key=_id_sort_key,
        )
        tgt = "hypothesis" if atom == target else f"int{number[atom]}"
        segments.append(f"({rule_id} & {' '.join(labels)}) -> {tgt}")
    return " ; ".join(segments)


def stitch_proof(trace: InferenceTrace, target: Fact) -> ProofGraph:
    """Extract the proof of ``target`` from a trace's provenance.

    Byte-identical across runs for equal traces; more strongly, a pure
    function of the underlying proof DAG.
    """
    if target.is_given:
        canonical = f"{target.id} -> hypothesis"
        return ProofGraph(
            (target.id, "hypothesis"), ((target.id, "hypothesis"),), canonical
        )

    given_by_id = {f.id: f.atom for f in trace.theory.facts}
    step_by_id = {s.conclusion.id: s for s in trace.steps}

    given_ids: dict[Atom, str] = {}
    derivations: dict[Atom, tuple[str, tuple[Atom, ...]]] = {}

    def collect(fid: str) -> Atom:
        s = step_by_id[fid]
        atom = s.conclusion.atom
        if atom in derivations:
            return atom
        premises: list[Atom] = []
        for pid in s.fact_ids:
            if pid.startswith("sent"):
                prem = given_by_id[pid]
                given_ids[prem] = pid
                premises.append(prem)
            else:
                premises.append(collect(pid))
        derivations[atom] = (s.rule_id, tuple(premises))
        return atom

    target_atom = collect(target.id)
    canonical = canonical_proof_string(target_atom, given_ids, derivations)
    nodes, edges = _graph_from_canonical(canonical)
    return ProofGraph(nodes, edges, canonical)


def _graph_from_canonical(canonical: str) -> tuple[tuple[str, ...], tuple[tuple[str, str], ...]]:
    nodes: dict[str, None] = {}
    edges: list[tuple[str, str]] = []
    single = re.fullmatch(r"(sent\d+) -> hypothesis", canonical)
    if single:
        fid = single.group(1)
        return (fid, "hypothesis"), ((fid, "hypothesis"),)
    for seg in canonical.split(" ; "):
        m = re.fullmatch(r"\((sent\d+) & ([^)]+)\) -> (int\d+|hypothesis)", seg)
        if not m:
            raise ValueError(f"bad canonical segment {seg!r}")
        rule_id, fact_part, tgt = m.groups()
        nodes.setdefault(rule_id)
        nodes.setdefault(tgt)
        for fid in fact_part.split(" "):
            nodes.setdefault(fid)
            edges.append((fid, rule_id))
        edges.append((rule_id, tgt))
    return tuple(nodes), tuple(edges)


def check_proof(
    theory: Theory,
    statement: Statement,
    label: str,
    canonical_form: str,
) -> list[Atom]:
    """Validate a canonical proof string against a theory and statement.

    Returns the conclusion atoms of the proof's steps in serialized order
    (empty for a degenerate given-fact proof). Raises ProofCheckError for
    anything malformed or unsound. ``label`` says what the proof claims:
    "true" (proves the statement) or "false" (proves its negation).
    """
    if label == LABEL_TRUE:
        goal = statement.atom
    elif label == LABEL_FALSE:
        goal = statement.atom.negated()
    else:
        raise ProofCheckError("only true/false verdicts carry proofs")

    facts_by_id = {f.id: f for f in theory.facts}

    single = re.fullmatch(r"(sent\d+) -> hypothesis", canonical_form)
    if single:
        fid = single.group(1)
        fact = facts_by_id.get(fid)
        if fact is None:
            raise ProofCheckError(f"{fid} is not a given fact")
        if fact.atom != goal:
            raise ProofCheckError("given fact does not match the hypothesis")
        return []

    step_re = re.compile(
        r"\((sent\d+) & ((?:sent\d+|int\d+)(?: (?:sent\d+|int\d+))*)\) -> (int\d+|hypothesis)"
    )
    segments = canonical_form.split(" ; ")
    bound: dict[str, Atom] = {}
    used: set[str] = set()
    conclusions: list[Atom] = []
    for i, seg in enumerate(segments):
        m = step_re.fullmatch(seg)
        if not m:
            raise ProofCheckError(f"malformed step {seg!r}")
        rule_id, fact_part, target_id = m.groups()
        try:
            rule = theory.rule_by_id(rule_id)
        except KeyError:
            raise ProofCheckError(f"{rule_id} is not a rule")
        fact_ids = fact_part.split(" ")
        if fact_ids != sorted(fact_ids, key=_id_sort_key):
            raise ProofCheckError(f"fact ids out of canonical order in {seg!r}")
        premise_atoms: list[Atom] = []
        for fid in fact_ids:
            if fid.startswith("sent"):
                fact = facts_by_id.get(fid)
                if fact is None:
                    raise ProofCheckError(f"{fid} is not a given fact")
                premise_atoms.append(fact.atom)
            else:
                if fid not in bound:
                    raise ProofCheckError(f"{fid} used before it is derived")
                premise_atoms.append(bound[fid])
                used.add(fid)
        conclusion = _match_rule(theory, rule, premise_atoms)
        last = i == len(segments) - 1
        if target_id == "hypothesis":
            if not last:
                raise ProofCheckError("hypothesis must be the final step")
            if conclusion != goal:
                raise ProofCheckError("final conclusion does not match the hypothesis")
        else:
            if last:
                raise ProofCheckError("final step must target the hypothesis")
            expected = f"int{len(bound) + 1}"
            if target_id != expected:
                raise ProofCheckError(
                    f"intermediates must be numbered in order: got {target_id}, want {expected}"
                )
            bound[target_id] = conclusion
        conclusions.append(conclusion)
    dangling = set(bound) - used
    if dangling:
        raise ProofCheckError(f"unused intermediates: {sorted(dangling)}")
    return conclusions


def _match_rule(theory: Theory, rule: Rule, premise_atoms: list[Atom]) -> Atom:
    """Find a substitution under which ``premise_atoms`` are exactly the
    rule's premises (as a multiset) and return the ground conclusion."""
    if len(premise_atoms) != len(rule.premises):
        raise ProofCheckError(f"{rule.id} takes {len(rule.premises)} facts")
    want = sorted(map(_atom_key, premise_atoms))
    candidates: list[Entity | None]
    if rule.quantifier == QUANT_NONE:
        candidates = [None]
    else:
        candidates = [e for e in theory.entity_order() if _quantifier_allows(rule, e)]
    for entity in candidates:
        got = sorted(_atom_key(substitute(p, entity)) for p in rule.premises)
        if got == want:
            return substitute(rule.conclusion, entity)
    raise ProofCheckError(f"facts do not match the premises of {rule.id}")


def _atom_key(atom: Atom) -> tuple:
    subj = atom.subject
    pred = atom.pred
    if isinstance(pred, IsAttr):
        p = ("attr", pred.attr, "")
    else:
        obj = pred.obj
        p = ("rel", pred.verb, f"{obj.kind}:{obj.surface}")
    return ((subj.kind, subj.surface), p, atom.positive)
