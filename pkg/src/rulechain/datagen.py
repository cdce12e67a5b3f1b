"""Synthetic rulebase generation, gold annotation, perturbation, and
training-record emission.

The generator works backward from a target depth: it lays down a derivation
chain of exactly that length for one subject, then adds distractor chains
over disjoint vocabulary, inapplicable padding rules, and isolated padding
facts. Because every conclusion token is drawn without replacement, each
derivable fact has exactly one derivation, every statement has a unique
proof, and the closure size is known in advance; the instance is then
verified against the closure oracle and resampled on any mismatch.

The closure oracle in this module is deliberately independent of the
inference engine: it recomputes the full forward closure by brute force,
recording every distinct derivation of every fact, and is the authority for
gold labels, depths, and proof sets.

Questions default to one true, one false (the negation of a derivable
fact), and one unknown statement per depth level present in the theory.

Perturbation renames subjects and/or attributes injectively into held-out
replacement pools, producing equivalence sets of variants whose labels and
proofs are preserved by construction (person nouns map to person nouns so
quantified people-rules keep their bindings).
"""
from __future__ import annotations

import hashlib
import itertools
import random
from dataclasses import dataclass, replace

from . import vocab
from .reasoner import canonical_proof_steps, canonical_proof_string
from .theory import (
    Atom,
    COMMON,
    Entity,
    FORM_ALL,
    FORM_BARE,
    FORM_IF,
    Fact,
    IsAttr,
    PROPER,
    QUANT_NONE,
    QUANT_PEOPLE,
    QUANT_THINGS,
    Rel,
    Rule,
    RuleStyle,
    Statement,
    Theory,
    Var,
    X,
    negate,
    parse_statement,
    parse_theory,
    render,
)

LABEL_TRUE = "true"
LABEL_FALSE = "false"
LABEL_UNKNOWN = "unknown"
DEPTH_NA = "N/A"

DATASET_SCHEMA_VERSION = 1
TRAINING_SCHEMA_VERSION = 1


class GenerationError(ValueError):
    """The generator could not satisfy its constraints."""


class PoolExhaustedError(ValueError):
    """A renaming needed more replacement tokens than the pool holds."""


class ContradictionError(ValueError):
    """A theory derives both a fact and its negation."""


class _Retry(Exception):
    pass


# ---------------------------------------------------------------------------
# Closure oracle
# ---------------------------------------------------------------------------

def _ground(atom: Atom, entity: Entity | None) -> Atom:
    subject = atom.subject
    if isinstance(subject, Var):
        subject = entity
    pred = atom.pred
    if isinstance(pred, Rel) and isinstance(pred.obj, Var):
        pred = Rel(pred.verb, entity)
    return Atom(subject, pred, atom.positive)


@dataclass
class GoldClosure:
    """Everything derivable from a theory, with every distinct derivation."""

    given: dict[Atom, str]  # atom -> sentence id
    derived: list[Atom]  # first-derivation order
    derivations: dict[Atom, list[tuple[str, tuple[Atom, ...]]]]
    depth: dict[Atom, int]  # minimal proof depth per known atom
    contradiction: bool

    def knows(self, atom: Atom) -> bool:
        return atom in self.depth


def gold_closure(theory: Theory) -> GoldClosure:
    """Brute-force forward closure recording all derivations of all facts.

    Independent of the engine: premises are checked by direct substitution
    against the known set, iterating rules over candidate entities until
    nothing changes.
    """
    given = {f.atom: f.id for f in theory.facts}
    known: set[Atom] = set(given)
    derived: list[Atom] = []
    derivations: dict[Atom, list[tuple[str, tuple[Atom, ...]]]] = {}
    seen_derivations: set[tuple[str, Atom, tuple[Atom, ...]]] = set()
    entities = theory.entity_order()

    changed = True
    while changed:
        changed = False
        for rule in theory.rules:
            if rule.quantifier == QUANT_NONE:
                candidates: list[Entity | None] = [None]
            elif rule.quantifier == QUANT_PEOPLE:
                candidates = [e for e in entities if e.is_person]
            else:
                candidates = list(entities)
            for entity in candidates:
                premises = tuple(_ground(p, entity) for p in rule.premises)
                if not all(p in known for p in premises):
                    continue
                conclusion = _ground(rule.conclusion, entity)
                key = (rule.id, conclusion, premises)
                if key not in seen_derivations:
                    seen_derivations.add(key)
                    derivations.setdefault(conclusion, []).append((rule.id, premises))
                    changed = True
                if conclusion not in known:
                    known.add(conclusion)
                    derived.append(conclusion)

    depth: dict[Atom, int] = {a: 0 for a in given}
    pending = dict.fromkeys(derived)
    relaxed = True
    while relaxed:
        relaxed = False
        for atom in pending:
            best = depth.get(atom)
            for _, premises in derivations.get(atom, []):
                if all(p in depth for p in premises):
                    d = 1 + max(depth[p] for p in premises)
                    if best is None or d < best:
                        best = d
                        relaxed = True
            if best is not None:
                depth[atom] = best

    contradiction = any(a.negated() in known for a in known)
    return GoldClosure(given, derived, derivations, depth, contradiction)


# ---------------------------------------------------------------------------
# Gold proofs and annotations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GoldAnnotation:
    label: str
    depth: "int | str"  # int, or DEPTH_NA for unknown
    proofs: tuple[str, ...]
    proofs_truncated: bool = False


def _proof_assignments(closure: GoldClosure, target: Atom, limit: int):
    """Yield proof choice-maps for ``target``: one derivation per derived
    atom in the proof's support, acyclic, at most ``limit`` of them."""

    def ordered_derivs(atom: Atom):
        def key(deriv):
            rule_id, premises = deriv
            depths = [closure.depth.get(p) for p in premises]
            d = 1 + max((x for x in depths if x is not None), default=0)
            return (d, rule_id, tuple(sorted(render(p) for p in premises)))

        return sorted(closure.derivations.get(atom, []), key=key)

    def proofs_for(atom: Atom, assignment: dict, stack: frozenset):
        if atom in closure.given:
            yield assignment
            return
        if atom in stack:
            return
        if atom in assignment:
            yield assignment
            return
        yield from derive(atom, assignment, stack)

    def derive(atom: Atom, assignment: dict, stack: frozenset):
        # premises resolve given-first; only the root ignores its givenness
        for deriv in ordered_derivs(atom):
            _, premises = deriv
            started = dict(assignment)
            started[atom] = deriv
            inner_stack = stack | {atom}

            def expand(idx: int, asg: dict):
                if idx == len(premises):
                    yield asg
                    return
                for asg2 in proofs_for(premises[idx], asg, inner_stack):
                    yield from expand(idx + 1, asg2)

            yield from expand(0, started)

    yield from itertools.islice(derive(target, {}, frozenset()), limit)


def _assignment_depth(closure: GoldClosure, assignment: dict, target: Atom) -> int:
    memo: dict[Atom, int] = {}

    def d(atom: Atom) -> int:
        if atom in closure.given:
            return 0
        if atom in memo:
            return memo[atom]
        _, premises = assignment[atom]
        memo[atom] = 1 + max(d(p) for p in premises)
        return memo[atom]

    if target in assignment:
        # score the root's own derivation even when the atom is also given
        _, premises = assignment[target]
        return 1 + max((d(p) for p in premises), default=0)
    return d(target)


def _gold_proofs(
    closure: GoldClosure, target: Atom, cap: int
) -> tuple[list[tuple[int, str, dict]], bool]:
    """Sorted (depth, canonical, assignment) triples, minimal depth first."""
    hard_limit = max(8 * cap, 256)
    found: dict[str, tuple[int, str, dict]] = {}
    count = 0
    if target in closure.given:
        canonical = f"{closure.given[target]} -> hypothesis"
        found[canonical] = (0, canonical, {})
        count += 1
    if target in closure.derivations:
        for assignment in _proof_assignments(closure, target, hard_limit + 1):
            canonical = canonical_proof_string(
                target, closure.given, {a: d for a, d in assignment.items()}
            )
            if canonical not in found:
                found[canonical] = (
                    _assignment_depth(closure, assignment, target),
                    canonical,
                    assignment,
                )
            count += 1
    ordered = sorted(found.values(), key=lambda t: (t[0], t[1]))
    truncated = len(ordered) > cap or count > hard_limit
    return ordered[:cap], truncated


def assign_gold(
    theory: Theory,
    statement: Statement,
    closure: GoldClosure | None = None,
    proof_cap: int = 64,
) -> GoldAnnotation:
    """Label a statement against the closure oracle.

    true when the statement is given or derivable, false when its negation
    is, unknown otherwise. Non-unknown labels carry the enumerated gold
    proof set (canonical strings, minimal depth first, capped) and the
    minimal proof depth; unknown carries no proofs and depth "N/A".
    """
    closure = closure if closure is not None else gold_closure(theory)
    if closure.contradiction:
        raise ContradictionError(theory.id)
    atom = statement.atom
    if closure.knows(atom):
        label, target = LABEL_TRUE, atom
    elif closure.knows(atom.negated()):
        label, target = LABEL_FALSE, atom.negated()
    else:
        return GoldAnnotation(LABEL_UNKNOWN, DEPTH_NA, ())
    proofs, truncated = _gold_proofs(closure, target, proof_cap)
    return GoldAnnotation(
        label,
        closure.depth[target],
        tuple(p[1] for p in proofs),
        truncated,
    )


def gold_proof_steps(
    theory: Theory,
    statement: Statement,
    closure: GoldClosure | None = None,
    proof_cap: int = 64,
) -> tuple[str, list[tuple[str, tuple[Atom, ...], Atom]]]:
    """The label plus the steps of the first gold proof, in canonical order.

    The first gold proof is the one ``assign_gold`` lists first. Unknown
    statements, and statements that are themselves given facts, have no
    steps.
    """
    closure = closure if closure is not None else gold_closure(theory)
    if closure.contradiction:
        raise ContradictionError(theory.id)
    atom = statement.atom
    if closure.knows(atom):
        label, target = LABEL_TRUE, atom
    elif closure.knows(atom.negated()):
        label, target = LABEL_FALSE, atom.negated()
    else:
        return LABEL_UNKNOWN, []
    proofs, _ = _gold_proofs(closure, target, proof_cap)
    _, _, assignment = proofs[0]
    if not assignment:
        return label, []
    steps = canonical_proof_steps(target, closure.given, dict(assignment))
    return label, steps


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GenConfig:
    """Knobs for the synthetic generator. Ranges are inclusive."""

    target_depths: tuple = (0, 1, 2, 3)  # ints 0..5 and/or "unknown"
    theories: int = 10
    facts_range: tuple[int, int] = (1, 40)
    rules_range: tuple[int, int] = (0, 40)
    distractor_chains: "int | tuple[int, int]" = 2
    distractor_len_range: tuple[int, int] = (1, 2)
    conjunction_prob: float = 0.35
    negation_prob: float = 0.15
    rel_prob: float = 0.2
    ground_rule_prob: float = 0.15
    share_subject_prob: float = 0.3
    cone_intersecting_distractors: bool = False
    proper_names: tuple[str, ...] = vocab.GEN_PROPER_NAMES
    person_nouns: tuple[str, ...] = vocab.GEN_PERSON_NOUNS
    animal_nouns: tuple[str, ...] = vocab.GEN_ANIMAL_NOUNS
    attributes: tuple[str, ...] = vocab.GEN_ATTRIBUTES
    verbs: tuple[str, ...] = tuple(vocab.VERB_3SG)
    seed: int = 0
    proof_cap: int = 64
    max_retries: int = 25


def d3_like_config(theories: int = 500, seed: int = 0) -> GenConfig:
    """Depth-3 theories with a spread of extra derivable conclusions.

    Distractor counts and lengths are drawn so the minimum number of
    derivable conclusions per theory is exactly the chain length (3) and
    the mean sits near five.
    """
    return GenConfig(
        target_depths=(3,),
        theories=theories,
        distractor_chains=(1, 3),
        distractor_len_range=(0, 2),
        seed=seed,
    )


@dataclass(frozen=True)
class Question:
    id: str
    statement: Statement
    text: str
    annotation: GoldAnnotation


@dataclass
class Instance:
    id: str
    theory: Theory
    questions: list[Question]


def _validate_config(config: GenConfig) -> None:
    depths = config.target_depths
    if not depths:
        raise GenerationError("target_depths must be non-empty")
    for d in depths:
        if d != "unknown" and (not isinstance(d, int) or not 0 <= d <= 5):
            raise GenerationError(f"bad target depth {d!r}")
    for name in ("facts_range", "rules_range", "distractor_len_range"):
        lo, hi = getattr(config, name)
        if lo < 0 or hi < lo:
            raise GenerationError(f"bad {name} ({lo}, {hi})")
    chains = config.distractor_chains
    if isinstance(chains, tuple):
        if chains[0] < 0 or chains[1] < chains[0]:
            raise GenerationError(f"bad distractor_chains {chains}")
    elif chains < 0:
        raise GenerationError(f"bad distractor_chains {chains}")
    for name in (
        "conjunction_prob", "negation_prob", "rel_prob",
        "ground_rule_prob", "share_subject_prob",
    ):
        p = getattr(config, name)
        if not 0.0 <= p <= 1.0:
            raise GenerationError(f"{name} must be in [0, 1]")
    if config.theories < 0:
        raise GenerationError("theories must be >= 0")
    if config.proof_cap < 1 or config.max_retries < 1:
        raise GenerationError("proof_cap and max_retries must be >= 1")
    if not config.attributes or not (config.proper_names or config.person_nouns):
        raise GenerationError("vocabulary pools must not be empty")


def seed_substream(seed: int, index: int) -> int:
    """A stable per-index child seed; draws from one substream never shift
    the others."""
    digest = hashlib.sha256(f"{seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class _Decks:
    """Per-theory token decks; every draw is unique within the theory."""

    def __init__(self, config: GenConfig, rng: random.Random):
        self.rng = rng
        self.attrs = list(config.attributes)
        rng.shuffle(self.attrs)
        subjects = [Entity(PROPER, n) for n in config.proper_names]
        subjects += [Entity(COMMON, n) for n in config.person_nouns]
        subjects += [Entity(COMMON, n) for n in config.animal_nouns]
        rng.shuffle(subjects)
        self.subjects = subjects
        self.verbs = list(config.verbs)

    def draw_attr(self) -> str:
        if not self.attrs:
            raise _Retry("attribute pool exhausted")
        return self.attrs.pop()

    def draw_subject(self) -> Entity:
        if not self.subjects:
            raise _Retry("subject pool exhausted")
        return self.subjects.pop()

    def draw_rel(self) -> Rel:
        if not self.verbs:
            raise _Retry("verb pool exhausted")
        # A fresh object entity keeps every (verb, object) pair unique.
        return Rel(self.rng.choice(self.verbs), self.draw_subject())


def _rule_style(
    rng: random.Random,
    premises: list[Atom],
    conclusion: Atom,
    quantifier: str,
) -> RuleStyle:
    attr_only = (
        quantifier != QUANT_NONE
        and len(premises) <= 2
        and all(isinstance(p.pred, IsAttr) and p.positive for p in premises)
        and all(isinstance(p.subject, Var) for p in premises)
        and isinstance(conclusion.pred, IsAttr)
        and conclusion.positive
        and isinstance(conclusion.subject, Var)
    )
    if attr_only and rng.random() < 0.4:
        form = FORM_ALL if rng.random() < 0.5 else FORM_BARE
        return RuleStyle(form, tuple(False for _ in premises))
    merged = [False]
    for i in range(1, len(premises)):
        mergeable = (
            isinstance(premises[i].pred, IsAttr)
            and isinstance(premises[i - 1].pred, IsAttr)
            and premises[i].subject == premises[i - 1].subject
        )
        merged.append(mergeable and rng.random() < 0.7)
    return RuleStyle(FORM_IF, tuple(merged))


class _Draft:
    """A theory under construction: atoms and rule blueprints, ids later."""

    def __init__(self) -> None:
        self.fact_atoms: list[Atom] = []
        self.rule_protos: list[tuple[tuple[Atom, ...], Atom, str, RuleStyle]] = []

    def add_fact(self, atom: Atom) -> None:
        if atom not in self.fact_atoms:
            self.fact_atoms.append(atom)

    def add_rule(self, premises, conclusion, quantifier, style) -> None:
        self.rule_protos.append((tuple(premises), conclusion, quantifier, style))


def _build_chain(
    config: GenConfig,
    rng: random.Random,
    decks: _Decks,
    draft: _Draft,
    subject: Entity,
    length: int,
    *,
    plain: bool,
) -> list[Atom]:
    """A derivation chain of ``length`` rules over ``subject``.

    Returns the chain atoms (level 0 is the given base fact). ``plain``
    chains are attribute-only with single positive premises, used for
    distractors.
    """

    def draw_pred():
        if not plain and rng.random() < config.rel_prob:
            try:
                return decks.draw_rel()
            except _Retry:
                return IsAttr(decks.draw_attr())
        return IsAttr(decks.draw_attr())

    chain = [Atom(subject, draw_pred(), True)]
    draft.add_fact(chain[0])
    for _ in range(length):
        ground = not plain and rng.random() < config.ground_rule_prob
        if ground:
            quant = QUANT_NONE
            subj_term: Entity | Var = subject
        elif subject.is_person and rng.random() < 0.5:
            quant = QUANT_PEOPLE
            subj_term = X
        else:
            quant = QUANT_THINGS
            subj_term = X
        prev = chain[-1]
        premises = [Atom(subj_term, prev.pred, prev.positive)]
        if not plain and rng.random() < config.conjunction_prob:
            positive = rng.random() >= config.negation_prob
            extra = decks.draw_attr()
            premises.append(Atom(subj_term, IsAttr(extra), positive))
            draft.add_fact(Atom(subject, IsAttr(extra), positive))
        conclusion_pred = draw_pred()
        conclusion = Atom(subj_term, conclusion_pred, True)
        style = _rule_style(rng, premises, conclusion, quant)
        draft.add_rule(premises, conclusion, quant, style)
        chain.append(Atom(subject, conclusion_pred, True))
    return chain


def generate_instance(
    config: GenConfig,
    target_depth: "int | str",
    rng: random.Random,
    index: int,
) -> Instance:
    """One theory plus its question set, verified against the oracle."""
    last = "constraints never satisfied"
    for _ in range(config.max_retries):
        try:
            return _build_instance(config, target_depth, rng, index)
        except _Retry as e:
            last = str(e)
    raise GenerationError(
        f"instance {index}: gave up after {config.max_retries} attempts ({last})"
    )


def _build_instance(
    config: GenConfig,
    target_depth: "int | str",
    rng: random.Random,
    index: int,
) -> Instance:
    decks = _Decks(config, rng)
    draft = _Draft()
    unknown_only = target_depth == "unknown"
    depth = 0 if unknown_only else int(target_depth)

    subject = decks.draw_subject()
    chain = _build_chain(config, rng, decks, draft, subject, depth, plain=False)

    chains_cfg = config.distractor_chains
    n_chains = (
        rng.randint(*chains_cfg) if isinstance(chains_cfg, tuple) else chains_cfg
    )
    expected_extra = 0
    first_distractor = True
    for _ in range(n_chains):
        length = rng.randint(*config.distractor_len_range)
        if length == 0:
            continue
        other = (
            subject
            if rng.random() < config.share_subject_prob
            else decks.draw_subject()
        )
        _build_chain(config, rng, decks, draft, other, length, plain=True)
        expected_extra += length
        if config.cone_intersecting_distractors and first_distractor and depth >= 1:
            # A rule that concludes straight into the relevance cone of the
            # main chain, derivable from a fresh fact about another subject.
            bait = decks.draw_attr()
            hook = decks.draw_subject()
            level = rng.randint(1, depth)
            target_pred = chain[level].pred
            if isinstance(target_pred, IsAttr):
                draft.add_fact(Atom(hook, IsAttr(bait), True))
                draft.add_rule(
                    (Atom(X, IsAttr(bait), True),),
                    Atom(X, target_pred, True),
                    QUANT_THINGS,
                    RuleStyle(FORM_IF, (False,)),
                )
                first_distractor = False

    while len(draft.fact_atoms) < config.facts_range[0]:
        draft.add_fact(Atom(decks.draw_subject(), IsAttr(decks.draw_attr()), True))
    while len(draft.rule_protos) < config.rules_range[0]:
        draft.add_rule(
            (Atom(X, IsAttr(decks.draw_attr()), True),),
            Atom(X, IsAttr(decks.draw_attr()), True),
            QUANT_THINGS,
            RuleStyle(FORM_IF, (False,)),
        )
    if len(draft.fact_atoms) > config.facts_range[1]:
        raise _Retry(f"needs {len(draft.fact_atoms)} facts > facts_range max")
    if len(draft.rule_protos) > config.rules_range[1]:
        raise _Retry(f"needs {len(draft.rule_protos)} rules > rules_range max")

    rng.shuffle(draft.rule_protos)
    rng.shuffle(draft.fact_atoms)
    rules = [
        Rule(f"sent{i + 1}", prem, concl, quant, style)
        for i, (prem, concl, quant, style) in enumerate(draft.rule_protos)
    ]
    offset = len(rules)
    facts = [
        Fact(f"sent{offset + i + 1}", atom)
        for i, atom in enumerate(draft.fact_atoms)
    ]
    theory_id = f"t{index:05d}"
    theory = Theory(theory_id, facts, rules)

    closure = gold_closure(theory)
    if closure.contradiction:
        raise _Retry("contradictory theory")
    if not config.cone_intersecting_distractors:
        if len(closure.derived) != depth + expected_extra:
            raise _Retry(
                f"closure size {len(closure.derived)} != {depth + expected_extra}"
            )
    for level, atom in enumerate(chain):
        if closure.depth.get(atom) != level:
            raise _Retry(f"chain atom at level {level} has wrong depth")

    questions: list[Question] = []

    def add_question(statement: Statement, want_label: str, want_depth) -> None:
        annotation = assign_gold(theory, statement, closure, config.proof_cap)
        if annotation.label != want_label or annotation.depth != want_depth:
            raise _Retry(
                f"question scored {annotation.label}/{annotation.depth}, "
                f"wanted {want_label}/{want_depth}"
            )
        qid = f"{theory_id}-q{len(questions) + 1}"
        questions.append(Question(qid, statement, render(statement.atom), annotation))

    if unknown_only:
        probe = Statement(Atom(subject, IsAttr(decks.draw_attr()), True))
        add_question(probe, LABEL_UNKNOWN, DEPTH_NA)
    else:
        for level, atom in enumerate(chain):
            statement = Statement(atom)
            add_question(statement, LABEL_TRUE, level)
            add_question(negate(statement), LABEL_FALSE, level)
            probe = Statement(Atom(subject, IsAttr(decks.draw_attr()), True))
            add_question(probe, LABEL_UNKNOWN, DEPTH_NA)

    return Instance(theory_id, theory, questions)


def generate_dataset(config: GenConfig) -> list[Instance]:
    """Generate ``config.theories`` instances, deterministically per seed.

    Target depths cycle through ``config.target_depths``; each instance
    draws from its own seed substream, so regeneration is byte-identical
    and insensitive to partial consumption elsewhere.
    """
    _validate_config(config)
    depths = list(config.target_depths)
    instances: list[Instance] = []
    for i in range(config.theories):
        rng = random.Random(seed_substream(config.seed, i))
        target = depths[i % len(depths)]
        instances.append(generate_instance(config, target, rng, i + 1))
    return instances


def irrelevant_sentences(
    theory: Theory, rng: random.Random, n_facts: int = 1, n_rules: int = 1
) -> list[str]:
    """Sentences over tokens foreign to the theory: isolated facts and
    rules whose premises no fact can ever satisfy. Adding them must never
    change any verdict about the original theory."""
    used_attrs: set[str] = set()
    used_subjects: set[str] = set()

    def note_atom(a: Atom) -> None:
        if isinstance(a.pred, IsAttr):
            used_attrs.add(a.pred.attr)
        if isinstance(a.subject, Entity):
            used_subjects.add(a.subject.surface)
        if isinstance(a.pred, Rel) and isinstance(a.pred.obj, Entity):
            used_subjects.add(a.pred.obj.surface)

    for f in theory.facts:
        note_atom(f.atom)
    for r in theory.rules:
        for p in r.premises:
            note_atom(p)
        note_atom(r.conclusion)

    fresh_attrs = [
        a
        for a in vocab.GEN_ATTRIBUTES + vocab.REPLACEMENT_ATTRIBUTES
        if a not in used_attrs
    ]
    fresh_names = [
        n for n in vocab.GEN_PROPER_NAMES + vocab.REPLACEMENT_PROPER_NAMES
        if n not in used_subjects
    ]
    rng.shuffle(fresh_attrs)
    rng.shuffle(fresh_names)
    lines: list[str] = []
    for _ in range(n_facts):
        if not fresh_attrs or not fresh_names:
            break
        atom = Atom(Entity(PROPER, fresh_names.pop()), IsAttr(fresh_attrs.pop()), True)
        lines.append(render(atom))
    for _ in range(n_rules):
        if len(fresh_attrs) < 2:
            break
        rule = Rule(
            "sent1",
            (Atom(X, IsAttr(fresh_attrs.pop()), True),),
            Atom(X, IsAttr(fresh_attrs.pop()), True),
            QUANT_THINGS,
            RuleStyle(FORM_IF, (False,)),
        )
        lines.append(render(rule))
    return lines


def extend_theory(theory: Theory, extra_lines: list[str]) -> Theory:
    """A new theory with ``extra_lines`` appended; existing ids unchanged."""
    lines = [text for _, text in theory.sentences()] + list(extra_lines)
    return parse_theory(lines, theory.id)


# ---------------------------------------------------------------------------
# Perturbation
# ---------------------------------------------------------------------------

MODE_SUBJECT = "subject"
MODE_ATTRIBUTE = "attribute"
MODE_BOTH = "both"
MODES = (MODE_SUBJECT, MODE_ATTRIBUTE, MODE_BOTH)


@dataclass
class RenamingMap:
    """An injective token renaming. Keys and values never overlap across
    categories because name, noun, and attribute pools are disjoint."""

    mode: str
    mapping: dict[str, str]

    def inverse(self) -> dict[str, str]:
        inv = {v: k for k, v in self.mapping.items()}
        if len(inv) != len(self.mapping):
            raise ValueError("renaming is not injective")
        return inv


@dataclass
class EquivalenceSet:
    base: Instance
    mode: str
    variants: list[tuple[Instance, RenamingMap]]


def _instance_tokens(instance: Instance) -> tuple[list[str], list[str], list[str], list[str]]:
    """(proper names, person nouns, animal nouns, attributes) in order of
    first appearance across the theory and the question statements."""
    propers: dict[str, None] = {}
    persons: dict[str, None] = {}
    animals: dict[str, None] = {}
    attrs: dict[str, None] = {}

    def note_entity(e: Entity) -> None:
        if e.kind == PROPER:
            propers.setdefault(e.surface)
        elif vocab.is_person_noun(e.surface):
            persons.setdefault(e.surface)
        else:
            animals.setdefault(e.surface)

    def note_atom(a: Atom) -> None:
        if isinstance(a.subject, Entity):
            note_entity(a.subject)
        if isinstance(a.pred, IsAttr):
            attrs.setdefault(a.pred.attr)
        elif isinstance(a.pred.obj, Entity):
            note_entity(a.pred.obj)

    for f in instance.theory.facts:
        note_atom(f.atom)
    for r in instance.theory.rules:
        for p in r.premises:
            note_atom(p)
        note_atom(r.conclusion)
    for q in instance.questions:
        note_atom(q.statement.atom)
    return list(propers), list(persons), list(animals), list(attrs)


def _rename_entity(e: Entity, mapping: dict[str, str]) -> Entity:
    new = mapping.get(e.surface)
    return Entity(e.kind, new) if new else e


def _rename_atom(a: Atom, mapping: dict[str, str]) -> Atom:
    subject = (
        _rename_entity(a.subject, mapping)
        if isinstance(a.subject, Entity)
        else a.subject
    )
    pred = a.pred
    if isinstance(pred, IsAttr):
        new = mapping.get(pred.attr)
        if new:
            pred = IsAttr(new)
    elif isinstance(pred.obj, Entity):
        pred = Rel(pred.verb, _rename_entity(pred.obj, mapping))
    return Atom(subject, pred, a.positive)


def apply_renaming(instance: Instance, renaming: RenamingMap, variant_id: str) -> Instance:
    """The same instance with tokens renamed. Sentence order, ids, labels,
    depths, and proofs are untouched; proofs refer only to sentence ids."""
    mapping = renaming.mapping
    theory = Theory(
        variant_id,
        [replace(f, atom=_rename_atom(f.atom, mapping)) for f in instance.theory.facts],
        [
            replace(
                r,
                premises=tuple(_rename_atom(p, mapping) for p in r.premises),
                conclusion=_rename_atom(r.conclusion, mapping),
            )
            for r in instance.theory.rules
        ],
    )
    questions = []
    for q in instance.questions:
        atom = _rename_atom(q.statement.atom, mapping)
        suffix = q.id.rsplit("-", 1)[1]
        questions.append(
            Question(f"{variant_id}-{suffix}", Statement(atom), render(atom), q.annotation)
        )
    return Instance(variant_id, theory, questions)


def perturb(
    instance: Instance,
    mode: str,
    rng: random.Random,
    n: int = 5,
    *,
    proper_pool: tuple[str, ...] = vocab.REPLACEMENT_PROPER_NAMES,
    person_pool: tuple[str, ...] = vocab.REPLACEMENT_PERSON_NOUNS,
    animal_pool: tuple[str, ...] = vocab.REPLACEMENT_ANIMAL_NOUNS,
    attribute_pool: tuple[str, ...] = vocab.REPLACEMENT_ATTRIBUTES,
) -> EquivalenceSet:
    """``n`` injectively renamed variants of an instance.

    Subject mode renames every proper name and common noun (person nouns to
    person nouns, animal nouns to animal nouns); attribute mode renames
    every attribute; both mode does both. Replacements are sampled without
    replacement from the held-out pools.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    propers, persons, animals, attrs = _instance_tokens(instance)

    def sample(domain: list[str], pool: tuple[str, ...], what: str) -> dict[str, str]:
        if len(domain) > len(pool):
            raise PoolExhaustedError(
                f"{what}: need {len(domain)} replacements, pool has {len(pool)}"
            )
        return dict(zip(domain, rng.sample(pool, len(domain))))

    variants: list[tuple[Instance, RenamingMap]] = []
    for k in range(1, n + 1):
        mapping: dict[str, str] = {}
        if mode in (MODE_SUBJECT, MODE_BOTH):
            mapping.update(sample(propers, proper_pool, "proper names"))
            mapping.update(sample(persons, person_pool, "person nouns"))
            mapping.update(sample(animals, animal_pool, "animal nouns"))
        if mode in (MODE_ATTRIBUTE, MODE_BOTH):
            mapping.update(sample(attrs, attribute_pool, "attributes"))
        renaming = RenamingMap(mode, mapping)
        variant_id = f"{instance.id}.{mode}{k}"
        variants.append((apply_renaming(instance, renaming, variant_id), renaming))
    return EquivalenceSet(instance, mode, variants)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def instance_to_json(instance: Instance) -> dict:
    return {
        "id": instance.id,
        "sentences": {sid: text for sid, text in instance.theory.sentences()},
        "questions": [
            {
                "id": q.id,
                "text": q.text,
                "label": q.annotation.label,
                "depth": q.annotation.depth,
                "proofs": list(q.annotation.proofs),
                "proofs_truncated": q.annotation.proofs_truncated,
            }
            for q in instance.questions
        ],
    }


def instance_from_json(obj: dict) -> Instance:
    sentences = obj["sentences"]
    ordered = sorted(sentences.items(), key=lambda kv: int(kv[0][4:]))
    expected = [f"sent{i + 1}" for i in range(len(ordered))]
    if [sid for sid, _ in ordered] != expected:
        raise ValueError(f"instance {obj.get('id')}: sentence ids are not dense")
    theory = parse_theory([text for _, text in ordered], obj["id"])
    questions = []
    for q in obj["questions"]:
        ann = GoldAnnotation(
            q["label"],
            q["depth"],
            tuple(q["proofs"]),
            bool(q.get("proofs_truncated", False)),
        )
        questions.append(Question(q["id"], parse_statement(q["text"]), q["text"], ann))
    return Instance(obj["id"], theory, questions)


def equivalence_to_rows(eqset: EquivalenceSet) -> list[dict]:
    rows = []
    for k, (variant, renaming) in enumerate(eqset.variants, start=1):
        row = instance_to_json(variant)
        row["base_id"] = eqset.base.id
        row["variant_index"] = k
        row["mode"] = eqset.mode
        row["mapping"] = dict(renaming.mapping)
        rows.append(row)
    return rows


def equivalence_from_rows(rows: list[dict]) -> list[tuple[str, int, RenamingMap, Instance]]:
    """(base id, variant index, renaming, variant instance) per row."""
    out = []
    for row in rows:
        renaming = RenamingMap(row["mode"], dict(row["mapping"]))
        out.append((row["base_id"], int(row["variant_index"]), renaming, instance_from_json(row)))
    return out


# ---------------------------------------------------------------------------
# Training records
# ---------------------------------------------------------------------------

def emit_training_records(instance: Instance) -> dict[str, list[dict]]:
    """Per-question supervision records for the three learned roles.

    For every gold proof step there is one rule-selection record (which rule
    to fire given the statement, the facts so far, and all rules), one
    fact-selection record (which fact indices feed that rule), and one
    composition record (rule text plus fact texts to conclusion text). Each
    question additionally contributes one terminal rule-selection record
    whose output is "STOP". Indices are 0-based positions into the record's
    own fact and rule lists.
    """
    closure = gold_closure(instance.theory)
    rule_texts = [render(r) for r in instance.theory.rules]
    rule_index = {r.id: i for i, r in enumerate(instance.theory.rules)}
    rs: list[dict] = []
    fs: list[dict] = []
    kc: list[dict] = []
    for q in instance.questions:
        label, steps = gold_proof_steps(instance.theory, q.statement, closure)
        facts_so_far = [render(f.atom) for f in instance.theory.facts]
        position = {f.atom: i for i, f in enumerate(instance.theory.facts)}
        for rule_id, premises, conclusion in steps:
            premise_indices = sorted(position[p] for p in premises)
            rs.append(
                {
                    "question_id": q.id,
                    "statement": q.text,
                    "facts": list(facts_so_far),
                    "rules": list(rule_texts),
                    "output": rule_index[rule_id],
                }
            )
            fs.append(
                {
                    "question_id": q.id,
                    "statement": q.text,
                    "rule": rule_texts[rule_index[rule_id]],
                    "facts": list(facts_so_far),
                    "output": premise_indices,
                }
            )
            kc.append(
                {
                    "question_id": q.id,
                    "rule": rule_texts[rule_index[rule_id]],
                    "facts": [facts_so_far[i] for i in premise_indices],
                    "output": render(conclusion),
                }
            )
            position[conclusion] = len(facts_so_far)
            facts_so_far.append(render(conclusion))
        rs.append(
            {
                "question_id": q.id,
                "statement": q.text,
                "facts": list(facts_so_far),
                "rules": list(rule_texts),
                "output": "STOP",
            }
        )
    return {"rs": rs, "fs": fs, "kc": kc}
