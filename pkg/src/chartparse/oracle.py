"""Supervision oracles for the greedy decoders.

* `oracle_label`: the gold collapsed label of a span, or the empty label.
* `oracle_parents`: the dynamic boundary oracle for in-order decoding; it
  returns the set S of parent right boundaries that keep every still
  reachable gold span reachable, valid from any decoder state including
  off-gold ones.  The second enclosing-constituent query is ambiguous
  between a strict (proper enclosure only) and an inclusive reading; both
  are implemented and brute-force reachability arbitrates in the checker.
* `oracle_splits_topdown`: every split of a span that loses no reachable
  gold span, for training the top-down decoder.
* `brute_force_reachable`: exhaustive enumeration of decode completions,
  the ground truth the oracles are checked against.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .trees import (
    DEFAULT_UNARY_SEP,
    EMPTY_LABEL,
    BinaryTree,
    collapse_unaries,
    gold_index,
    leaves_of,
    unbinarize,
)

STRICT = "strict"
INCLUSIVE = "inclusive"


class OracleError(RuntimeError):
    pass


class StateError(ValueError):
    pass


def oracle_label(gold, i, j):
    """Gold collapsed label of (i, j), or the empty label if not gold."""
    return gold.spans.get((i, j), EMPTY_LABEL)


def smallest_enclosing(gold, i, j, strict):
    """Smallest gold constituent containing (i, j).

    The whole-sentence span (0, n) counts as gold even when unlabeled, so the
    query is total.  With strict=True a constituent equal to (i, j) itself is
    skipped.
    """
    best = None
    for (a, b) in gold.spans:
        if a <= i and j <= b:
            if strict and a == i and b == j:
                continue
            if best is None or b - a < best[1] - best[0]:
                best = (a, b)
    if best is None or (strict and best == (i, j)):
        best = (0, gold.n)
    if strict and best == (i, j):
        raise StateError(f"no strictly enclosing constituent for ({i},{j})")
    return best


def oracle_parents(gold, i, j, R, interpretation=STRICT):
    """Oracle right boundaries S for the parent of (i, j) under bound R.

    Every k in S satisfies j < k <= R.  The rightmost element is the shipped
    training decision; the full set is exposed for testing.
    """
    if not (0 <= i < j < R <= gold.n):
        raise StateError(f"bad parent-oracle state ({i},{j}) with bound {R} (n={gold.n})")
    if interpretation not in (STRICT, INCLUSIVE):
        raise ValueError(f"unknown interpretation {interpretation!r}")
    _, jp = smallest_enclosing(gold, i, j, strict=True)
    j_star = R if jp == j else min(jp, R)
    if j_star == j + 1:
        # the enclosing constituent of a single token is that token span
        # under the inclusive reading, and under the strict reading its
        # boundary is the only child boundary inside (j, j+1]
        return (j + 1,)
    ti, tj = smallest_enclosing(gold, j, j_star, strict=(interpretation == STRICT))
    if tj == ti + 1:
        return (tj,)
    boundaries = gold.children_boundaries.get((ti, tj))
    if boundaries is None:
        raise OracleError(f"no child boundaries for constituent ({ti},{tj})")
    S = tuple(k for k in boundaries if j < k <= j_star)
    if not S:
        raise OracleError(f"empty oracle boundary set at ({i},{j}) with bound {R}")
    return S


def oracle_parent(gold, i, j, R, interpretation=STRICT):
    """The shipped decision: the rightmost oracle boundary."""
    return oracle_parents(gold, i, j, R, interpretation)[-1]


def oracle_splits_topdown(gold, i, j):
    """All splits of (i, j) that keep every reachable gold span reachable.

    A gold span inside (i, j) stays reachable iff the split does not fall
    strictly inside it.  For a gold (i, j) with child boundaries b this is
    exactly b minus {j}.
    """
    if j - i < 2:
        raise StateError(f"span ({i},{j}) is too short to split")
    inside = [(a, b) for (a, b) in gold.spans if i <= a and b <= j and (a, b) != (i, j)]
    return tuple(k for k in range(i + 1, j) if all(not (a < k < b) for a, b in inside))


def oracle_split(gold, i, j):
    return oracle_splits_topdown(gold, i, j)[-1]


# --- decoder states and brute-force reachability ---------------------------

@dataclass(frozen=True)
class InOrderState:
    """Mid-decode state of the in-order parser.

    `frames` lists (i, j, R) triples innermost first.  The top frame is the
    active one: the subtree over (i, j) is complete and, unless `pre_label`,
    its label has been decided.  Deeper frames are pending continuations that
    resume by labeling (i, j) and then extending toward R.  `built` carries
    the labeled spans decided so far.
    """

    n: int
    frames: tuple
    built: tuple = ()
    pre_label: bool = False

    def validate(self):
        # a trailing frame with R < n stands for a sub-decode whose outer
        # continuations are not of interest (they only add a constant)
        prev = None
        for (i, j, R) in self.frames:
            if not (0 <= i < j <= R <= self.n):
                raise StateError(f"bad frame ({i},{j},{R})")
            if prev is not None:
                pi, pj, pR = prev
                if not (i < pi and j == pR):
                    raise StateError(f"frames ({pi},{pj},{pR}) and ({i},{j},{R}) are inconsistent")
            prev = (i, j, R)


def initial_state(n):
    return InOrderState(n=n, frames=((0, 1, n),), pre_label=True)


def state_after_label(state, label):
    if not state.pre_label:
        raise StateError("state already labeled its active span")
    i, j, _ = state.frames[0]
    return InOrderState(state.n, state.frames, state.built + ((i, j, label),), pre_label=False)


def state_after_parent(state, k):
    """Adopt boundary k: descend into the right sibling (j, k).

    Frames whose span is complete upon resumption (j = R) are dropped from
    the front; the new active span (j, j+1) is unlabeled.
    """
    if state.pre_label:
        raise StateError("active span must be labeled before predicting its parent")
    i, j, R = state.frames[0]
    if not (j < k <= R):
        raise StateError(f"boundary {k} outside ({j},{R}]")
    frames = ((j, j + 1, k), (i, k, R)) + state.frames[1:]
    return InOrderState(state.n, frames, state.built, pre_label=True)


class _Reach:
    """Memoized exhaustive reachability for one gold index."""

    def __init__(self, gold, sep=DEFAULT_UNARY_SEP):
        self.gold = gold
        self.sep = sep
        self._best_subtree = {}
        self._best_continue = {}

    def gold_count(self, i, j):
        return len(self.gold.chain_labels(i, j, self.sep))

    def best_subtree(self, a, b):
        """Best gold-span count of a freely built subtree over (a, b),
        counting the label of (a, b) itself."""
        key = (a, b)
        if key not in self._best_subtree:
            own = self.gold_count(a, b)
            if b - a == 1:
                self._best_subtree[key] = own
            else:
                self._best_subtree[key] = own + max(
                    self.best_subtree(a, k) + self.best_subtree(k, b) for k in range(a + 1, b)
                )
        return self._best_subtree[key]

    def best_continue(self, i, j, R):
        """Best count of everything still to come in frame (i, j, R), with
        (i, j) already built and labeled."""
        key = (i, j, R)
        if key not in self._best_continue:
            if j == R:
                self._best_continue[key] = 0
            else:
                self._best_continue[key] = max(
                    self.best_subtree(j, k) + self.gold_count(i, k) + self.best_continue(i, k, R)
                    for k in range(j + 1, R + 1)
                )
        return self._best_continue[key]


def _fixed_matches(gold, built, sep=DEFAULT_UNARY_SEP):
    matched = 0
    for (i, j, label) in built:
        want = Counter(gold.chain_labels(i, j, sep))
        got = Counter(label.split(sep)) if label != EMPTY_LABEL else Counter()
        matched += sum((want & got).values())
    return matched


def brute_force_reachable(gold, state, reach=None, sep=DEFAULT_UNARY_SEP):
    """Maximum number of gold labeled spans over all completions of `state`.

    Counts are over unary-expanded labeled spans, so a collapsed chain label
    on a gold chain span contributes the full chain.  Labels not yet decided
    are chosen optimally; labels already in `state.built` are fixed.
    """
    state.validate()
    if reach is None:
        reach = _Reach(gold, sep)
    total = _fixed_matches(gold, state.built, sep)
    if not state.frames:
        return total
    i, j, R = state.frames[0]
    if state.pre_label:
        total += reach.gold_count(i, j)
    total += reach.best_continue(i, j, R)
    # deeper frames are labeled when resumed, so their labels are still free
    for (fi, fj, fR) in state.frames[1:]:
        total += reach.gold_count(fi, fj) + reach.best_continue(fi, fj, fR)
    return total


def enumerate_completions(gold, state, sep=DEFAULT_UNARY_SEP):
    """Literal enumeration of every completion's best gold count (small n).

    Cross-checks the memoized reachability; exponential, for tests only.
    """
    state.validate()

    def subtree_values(a, b):
        own = len(gold.chain_labels(a, b, sep))
        if b - a == 1:
            return [own]
        out = []
        for k in range(a + 1, b):
            for lv in subtree_values(a, k):
                for rv in subtree_values(k, b):
                    out.append(own + lv + rv)
        return out

    def continue_values(i, j, R):
        if j == R:
            return [0]
        out = []
        for k in range(j + 1, R + 1):
            own = len(gold.chain_labels(i, k, sep))
            for sv in subtree_values(j, k):
                for cv in continue_values(i, k, R):
                    out.append(own + sv + cv)
        return out

    base = _fixed_matches(gold, state.built, sep)
    totals = [0]
    if state.frames:
        i, j, R = state.frames[0]
        if state.pre_label:
            base += len(gold.chain_labels(i, j, sep))
        totals = continue_values(i, j, R)
        for (fi, fj, fR) in state.frames[1:]:
            own = len(gold.chain_labels(fi, fj, sep))
            totals = [t + own + cv for t in totals for cv in continue_values(fi, fj, fR)]
    return max(base + t for t in totals)


# --- gold-path decoding and soundness checking ------------------------------

def oracle_decode(gold, interpretation=STRICT):
    """Follow the label oracle and the rightmost boundary oracle from the
    initial state; the result unbinarizes to the gold tree."""

    def parse(i, j, R, children):
        node = BinaryTree(i, j, oracle_label(gold, i, j), *children)
        if j == R:
            return node
        k = oracle_parent(gold, i, j, R, interpretation)
        right = parse(j, j + 1, k, (None, None))
        return parse(i, k, R, (node, right))

    return parse(0, 1, gold.n, (None, None))


def reachable_parent_states(n):
    """All (i, j, R) triples the in-order decoder can face a parent decision
    at: the initial chain keeps R = n for i = 0, and every inner span with
    i >= 1 can arise under any bound.
    """
    for i in range(0, n):
        for j in range(i + 1, n + 1):
            bounds = (n,) if i == 0 else range(j, n + 1)
            for R in bounds:
                if j < R:
                    yield (i, j, R)


@dataclass
class OracleCheckReport:
    interpretation: str
    trees: int = 0
    states: int = 0
    bound_violations: int = 0
    rightmost_violations: int = 0
    full_set_violations: int = 0
    gold_path_failures: int = 0

    @property
    def violations(self):
        return self.bound_violations + self.rightmost_violations + self.gold_path_failures

    def format(self):
        lines = [
            f"interpretation: {self.interpretation}",
            f"trees tested: {self.trees}",
            f"states tested: {self.states}",
            f"boundary-bound violations: {self.bound_violations}",
            f"rightmost-decision reachability violations: {self.rightmost_violations}",
            f"full-set reachability violations (informational): {self.full_set_violations}",
            f"gold-path reconstruction failures: {self.gold_path_failures}",
            f"violations: {self.violations}",
        ]
        return "\n".join(lines)


def check_tree(tree, interpretation=STRICT, report=None, sep=DEFAULT_UNARY_SEP):
    """Check oracle soundness and gold-path completeness on one gold tree.

    Soundness: at every reachable parent-decision state, adopting the
    rightmost oracle boundary must not reduce brute-force reachability.
    Elements other than the rightmost are tallied separately; they
    distinguish the two readings of the enclosing-constituent query.
    """
    if report is None:
        report = OracleCheckReport(interpretation=interpretation)
    collapsed = collapse_unaries(tree, sep)
    gold = gold_index(collapsed, sep)
    reach = _Reach(gold, sep)
    report.trees += 1

    decoded = oracle_decode(gold, interpretation)
    leaves = [(l.word, l.tag) for l in leaves_of(tree)]
    if unbinarize(decoded, leaves, sep) != tree:
        report.gold_path_failures += 1

    for (i, j, R) in reachable_parent_states(gold.n):
        report.states += 1
        state = InOrderState(gold.n, ((i, j, R),))
        S = oracle_parents(gold, i, j, R, interpretation)
        if any(not (j < k <= R) for k in S):
            report.bound_violations += 1
            continue
        before = brute_force_reachable(gold, state, reach)
        for k in S:
            after = brute_force_reachable(gold, state_after_parent(state, k), reach)
            if after != before:
                if k == S[-1]:
                    report.rightmost_violations += 1
                else:
                    report.full_set_violations += 1
    return report


def check_topdown_tree(tree, sep=DEFAULT_UNARY_SEP):
    """Assert the top-down split oracle equals brute-force reachability.

    For every span, the set of splits preserving the best reachable count
    must equal `oracle_splits_topdown`.  Returns the number of spans checked.
    """
    gold = gold_index(collapse_unaries(tree, sep), sep)
    reach = _Reach(gold, sep)
    checked = 0
    for i in range(gold.n):
        for j in range(i + 2, gold.n + 1):
            values = {k: reach.best_subtree(i, k) + reach.best_subtree(k, j) for k in range(i + 1, j)}
            best = max(values.values())
            preserving = tuple(k for k, v in sorted(values.items()) if v == best)
            if preserving != oracle_splits_topdown(gold, i, j):
                raise OracleError(
                    f"split oracle mismatch at ({i},{j}): {oracle_splits_topdown(gold, i, j)} vs {preserving}"
                )
            checked += 1
    return checked
