import pytest

from rulechain.theory import parse_statement, parse_theory

# A 2-chain: one fact, two single-premise rules.
CHAIN2_LINES = [
    "Bob is blue.",
    "If someone is blue then they are quiet.",
    "If someone is quiet then they are smart.",
]

# One conjunctive rule fed by two facts, plus a decoy fact.
CONJ_LINES = [
    "Harry is big.",
    "If someone is white and round then they are happy.",
    "Dave is white.",
    "Dave is round.",
]

# Two derivation paths of equal length to the same conclusion.
DIAMOND_LINES = [
    "Bob is red.",
    "If someone is red then they are kind.",
    "If someone is red then they are nice.",
    "If someone is kind then they are smart.",
    "If someone is nice then they are smart.",
]


@pytest.fixture
def chain2():
    return parse_theory(CHAIN2_LINES)


@pytest.fixture
def conj():
    return parse_theory(CONJ_LINES)


@pytest.fixture
def diamond():
    return parse_theory(DIAMOND_LINES)


@pytest.fixture
def stmt():
    return parse_statement
