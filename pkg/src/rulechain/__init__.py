"""rulechain: a symbolic modular reasoner over controlled-English rulebases.

The package splits multi-hop entailment into single deduction hops. Each
hop selects a rule, selects the facts that satisfy it, and composes them
into a new fact; an outer loop drives hops until an answer or a stop. A
statement is true when derivable, false when its negation is derivable,
and unknown otherwise, and every non-unknown verdict carries a canonical,
machine-checkable proof.

Modules:

* theory: the controlled-English fact and rule language (parse + render).
* reasoner: fact store, one-hop composition, the run loop, verdicts, and
  canonical proofs.
* strategies: exhaustive and goal-directed rule/fact selection.
* datagen: synthetic rulebase generation with oracle-verified gold labels,
  proofs, renamed-variant equivalence sets, and training records.
* evalkit: prediction pipeline and metrics (accuracy, proof accuracy,
  precision/recall, consistency, efficiency, budget curves).
* cli: the command-line entry point.
"""

__version__ = "0.1.0"

SCHEMA_VERSIONS = {
    "dataset": 1,
    "equivalence": 1,
    "predictions": 1,
    "report": 1,
    "training": 1,
}

__all__ = ["SCHEMA_VERSIONS", "__version__"]
