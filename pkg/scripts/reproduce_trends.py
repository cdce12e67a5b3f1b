#!/usr/bin/env python3
"""Regenerate the headline numbers from scratch.

Runs five small studies and prints one section each:

  1. per-depth scoring of both strategies on a mixed-depth corpus
  2. proof accuracy as a function of the composition budget, per depth
  3. composition-call ratio (goal over exhaustive) across seeds
  4. closure-size profile of the reference-shape preset
  5. answer and proof consistency under vocabulary renaming

Everything is seeded; rerunning with the same flags reproduces the same
numbers. With --json the raw figures are also written to a file.

Usage:
    python3 scripts/reproduce_trends.py [--seed N] [--theories N] [--json PATH]
"""
from __future__ import annotations

import argparse
import json
import random
import time

from rulechain import datagen as dg
from rulechain import evalkit as ek
from rulechain.reasoner import LABEL_TRUE

BUDGETS = (1, 3, 5, 7, 10)


def section(title: str) -> None:
    print()
    print(title)
    print("=" * len(title))


def study_strategies(seed: int, theories: int) -> dict:
    """Both strategies on one mixed-depth corpus, scored per depth."""
    cfg = dg.GenConfig(target_depths=(0, 1, 2, 3, 4, 5), theories=theories, seed=seed)
    instances = dg.generate_dataset(cfg)
    out = {}
    for name in ("goal", "exhaustive"):
        started = time.perf_counter()
        preds = ek.predict_instances(instances, name)
        report = ek.build_report(instances, preds, name)
        print(report.render_text())
        print(f"({time.perf_counter() - started:.2f}s)")
        print()
        out[name] = report.to_json()
    return out


def study_budgets(seed: int, theories: int) -> dict:
    """Proof accuracy by budget, restricted to provable questions of one depth."""
    out = {}
    for depth in (1, 3, 5):
        cfg = dg.GenConfig(target_depths=(depth,), theories=theories, seed=seed)
        kept = []
        for inst in dg.generate_dataset(cfg):
            qs = [
                q for q in inst.questions
                if q.annotation.label == LABEL_TRUE and q.annotation.depth == depth
            ]
            if qs:
                kept.append(dg.Instance(inst.id, inst.theory, qs))
        row = {}
        for name in ("goal", "exhaustive"):
            curve = ek.budget_curve(kept, name, BUDGETS)
            row[name] = {str(b): curve.proof_accuracy[b] for b in BUDGETS}
            cells = "  ".join(f"{b}:{curve.proof_accuracy[b]:.3f}" for b in BUDGETS)
            print(f"depth {depth:>2}  {name:<10}  {cells}")
        out[str(depth)] = row
    return out


def study_efficiency(seed: int, theories: int) -> dict:
    """Depth-5 call ratios across consecutive seeds."""
    out = {}
    for s in range(seed, seed + 3):
        cfg = dg.GenConfig(target_depths=(5,), theories=theories, seed=s)
        instances = dg.generate_dataset(cfg)
        goal = ek.predict_instances(instances, "goal")
        exhaustive = ek.predict_instances(instances, "exhaustive")
        ratio = ek.efficiency_ratio(goal, exhaustive)
        out[str(s)] = ratio
        print(f"seed {s}: mean calls ratio {ratio:.3f}")
    return out


def study_closures(seed: int) -> dict:
    """Derived-conclusion counts under the reference-shape preset."""
    instances = dg.generate_dataset(dg.d3_like_config(theories=500, seed=seed))
    counts = [len(dg.gold_closure(inst.theory).derived) for inst in instances]
    mean = sum(counts) / len(counts)
    print(
        f"{len(instances)} theories: conclusions per theory "
        f"min {min(counts)}, mean {mean:.3f}, max {max(counts)}"
    )
    return {"theories": len(instances), "min": min(counts), "mean": mean, "max": max(counts)}


def study_consistency(seed: int, theories: int) -> dict:
    """Renamed variants answered identically, across all renaming modes."""
    cfg = dg.GenConfig(target_depths=(1, 2, 3), theories=theories, seed=seed)
    bases = dg.generate_dataset(cfg)
    groups = []
    for i, inst in enumerate(bases):
        mode = dg.MODES[i % len(dg.MODES)]
        es = dg.perturb(inst, mode, random.Random(seed * 1000 + i), n=5)
        groups.append((es.base, list(es.variants)))
    instances = [b for b, _ in groups] + [v for _, vs in groups for v, _ in vs]
    preds = ek.predict_instances(instances, "goal")
    result = ek.score_consistency(groups, preds)
    print(
        f"{result.sets} equivalence sets: entailment consistency "
        f"{result.entailment_rate:.3f}, proof consistency {result.proof_rate:.3f}"
    )
    return result.to_json()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--theories", type=int, default=60,
                        help="corpus size for the per-depth and budget studies")
    parser.add_argument("--json", help="also dump the raw figures here")
    args = parser.parse_args(argv)

    figures = {}
    section("1. strategy comparison on a mixed-depth corpus")
    figures["strategies"] = study_strategies(args.seed, args.theories)
    section("2. proof accuracy by composition budget")
    figures["budgets"] = study_budgets(args.seed, max(args.theories // 5, 4))
    section("3. composition-call ratio, goal over exhaustive (depth 5)")
    figures["efficiency"] = study_efficiency(args.seed, max(args.theories // 8, 4))
    section("4. closure sizes under the reference-shape preset")
    figures["closures"] = study_closures(args.seed)
    section("5. consistency under renaming")
    figures["consistency"] = study_consistency(args.seed, max(args.theories // 3, 6))

    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(figures, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"\nraw figures written to {args.json}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
