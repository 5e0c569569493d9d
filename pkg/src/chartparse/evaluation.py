"""Labeled-bracket precision, recall and F1.

Counts multiset matches of labeled spans per sentence after unary expansion,
aggregated corpus-wide.  Preterminals are excluded; the root constituent is
counted; no label-equivalence or punctuation exclusions are applied.
"""

from __future__ import annotations

from dataclasses import dataclass

from .trees import leaves_of, spans_of


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class EvalReport:
    matched: int
    gold_total: int
    pred_total: int

    @property
    def lr(self):
        return 100.0 * self.matched / self.gold_total if self.gold_total else 0.0

    @property
    def lp(self):
        return 100.0 * self.matched / self.pred_total if self.pred_total else 0.0

    @property
    def f1(self):
        lr, lp = self.lr, self.lp
        return 2.0 * lp * lr / (lp + lr) if lp + lr > 0 else 0.0

    def format(self):
        return (
            f"LR={self.lr:.2f} LP={self.lp:.2f} F1={self.f1:.2f} "
            f"matched={self.matched} gold={self.gold_total} pred={self.pred_total}"
        )


def score_corpus(gold_trees, pred_trees):
    """Corpus-level labeled bracket scores of predictions against gold."""
    if not gold_trees:
        raise EvalError("empty corpus")
    if len(gold_trees) != len(pred_trees):
        raise EvalError(f"corpus size mismatch: {len(gold_trees)} gold vs {len(pred_trees)} predicted")
    matched = gold_total = pred_total = 0
    for index, (gold, pred) in enumerate(zip(gold_trees, pred_trees)):
        if len(leaves_of(gold)) != len(leaves_of(pred)):
            raise EvalError(f"sentence {index}: length mismatch")
        gold_spans = spans_of(gold)
        pred_spans = spans_of(pred)
        matched += sum((gold_spans & pred_spans).values())
        gold_total += sum(gold_spans.values())
        pred_total += sum(pred_spans.values())
    return EvalReport(matched=matched, gold_total=gold_total, pred_total=pred_total)
