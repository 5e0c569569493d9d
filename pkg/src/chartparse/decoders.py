"""The three decoders over a shared scoring interface.

* `decode_cky`: exact bottom-up dynamic program over all binarizations.
* `decode_topdown`: greedy pre-order, label then split.
* `decode_inorder`: greedy, label a left child then predict the right
  boundary of its parent, recursing into the right sibling and the parent.

Top-down and in-order are sequential decision processes and can thread a
recurrent state over their (span, label) records; the chain variant threads
it linearly while the stack variant restores the state saved after a left
child's record when its parent is extended, discarding right-subtree
records.  CKY is not sequential, so with a history-equipped model it scores
every span against the constant initial state.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import autodiff as ad
from .encoder import span_vector
from .trees import EMPTY_LABEL, BinaryTree


class DecodeError(RuntimeError):
    pass


class DecoderKind(str, Enum):
    CKY = "cky"
    TOP_DOWN = "topdown"
    IN_ORDER = "inorder"


class HistoryVariant(str, Enum):
    NONE = "none"
    CHAIN = "chain"
    STACK = "stack"


@dataclass(frozen=True)
class HistoryState:
    """Recurrent tracker state: hidden/cell pair, record count, saved stack."""

    h: object
    c: object
    t: int = 0
    stack: tuple = ()

    def push(self):
        return HistoryState(self.h, self.c, self.t, self.stack + ((self.h, self.c, self.t),))

    def pop(self):
        if not self.stack:
            raise DecodeError("history stack underflow: traversal bug")
        h, c, t = self.stack[-1]
        return HistoryState(h, c, t, self.stack[:-1])


class HistoryTracker:
    """LSTM over (span, label) records whose state augments scorer inputs.

    The input of each step concatenates the span representation and/or the
    label embedding, as configured.
    """

    def __init__(self, store, num_labels, span_dim, label_emb_dim, hidden_dim,
                 use_span_rep=True, use_label_emb=True):
        if not (use_span_rep or use_label_emb):
            raise ValueError("history tracker needs at least one input source")
        self.use_span_rep = use_span_rep
        self.use_label_emb = use_label_emb
        self.hidden_dim = hidden_dim
        self.label_emb = store.embedding("hist/label_emb", num_labels, label_emb_dim) if use_label_emb else None
        input_dim = (span_dim if use_span_rep else 0) + (label_emb_dim if use_label_emb else 0)
        from .encoder import LstmCell

        self.cell = LstmCell(store, "hist_lstm", input_dim, hidden_dim, learned_init=True)

    def initial_state(self):
        h, c = self.cell.initial()
        return HistoryState(h, c)

    def record(self, state, span_vec, label_id):
        parts = []
        if self.use_span_rep:
            parts.append(span_vec)
        if self.use_label_emb:
            parts.append(ad.row(ad.use(self.label_emb), label_id))
        h, c = self.cell.step(ad.concat(parts), (state.h, state.c))
        return HistoryState(h, c, state.t + 1, state.stack)


class DecodeContext:
    """Per-sentence scoring context: history augmentation plus counters."""

    def __init__(self, model, enc, variant=None):
        self.model = model
        self.enc = enc
        self.n = enc.n
        cfg = model.config
        if variant is None:
            variant = HistoryVariant(cfg.history)
        self.variant = HistoryVariant(variant)
        self.tracker = model.tracker
        self.aug_label = self.tracker is not None and cfg.history_for_label
        self.aug_span = self.tracker is not None and cfg.history_for_span
        self.scorer = model.scorer

    def initial_hist(self):
        return self.tracker.initial_state() if self.tracker is not None else None

    def span_vec(self, i, j):
        return span_vector(self.enc, i, j)

    def label_scores(self, i, j, hist):
        x = self.span_vec(i, j)
        if self.aug_label:
            x = ad.concat([x, hist.h])
        return self.scorer.label_scores(x)

    def span_score(self, i, j, hist):
        x = self.span_vec(i, j)
        if self.aug_span:
            x = ad.concat([x, hist.h])
        return self.scorer.span_score(x)

    def _span_input(self, i, j, hist):
        x = self.span_vec(i, j)
        if self.aug_span:
            x = ad.concat([x, hist.h])
        return x

    def parent_scores(self, i, j, R, hist):
        """Vector of span(i,k) + span(j,k) for k = j+1 .. R, in one batch."""
        ks = range(j + 1, R + 1)
        left = [self._span_input(i, k, hist) for k in ks]
        right = [self._span_input(j, k, hist) for k in ks]
        scores = self.scorer.span_scores_batch(left + right)
        m = len(left)
        return ad.add(ad.slice_(scores, 0, m), ad.slice_(scores, m, 2 * m))

    def split_scores(self, i, j, hist):
        """Vector of span(i,k) + span(k,j) for k = i+1 .. j-1, in one batch."""
        ks = range(i + 1, j)
        left = [self._span_input(i, k, hist) for k in ks]
        right = [self._span_input(k, j, hist) for k in ks]
        scores = self.scorer.span_scores_batch(left + right)
        m = len(left)
        return ad.add(ad.slice_(scores, 0, m), ad.slice_(scores, m, 2 * m))

    def record(self, hist, i, j, label_id):
        if self.tracker is None or self.variant == HistoryVariant.NONE:
            return hist
        return self.tracker.record(hist, self.span_vec(i, j), label_id)

    def label_str(self, label_id):
        return self.model.vocab.labels[label_id]


def label_argmax(ctx, i, j, hist=None):
    """Best label id for span (i, j); ties break to the lowest id, so the
    empty label (id 0, score 0) wins when every real label scores <= 0."""
    scores = ctx.label_scores(i, j, hist)
    return int(np.argmax(scores.value))


def split_argmax(ctx, i, j, hist=None):
    """Best split k in (i, j) by span(i,k) + span(k,j); ties pick smallest k."""
    if j - i < 2:
        raise ValueError(f"span ({i},{j}) is too short to split")
    return i + 1 + int(np.argmax(ctx.split_scores(i, j, hist).value))


def parent_argmax(ctx, i, j, R, hist=None):
    """Best parent right boundary k in (j, R] by span(i,k) + span(j,k)."""
    if not (j < R <= ctx.n):
        raise ValueError(f"no parent boundary to predict for ({i},{j}) with bound {R}")
    return j + 1 + int(np.argmax(ctx.parent_scores(i, j, R, hist).value))


class GreedyPolicy:
    """Follow the model's own argmax at every decision."""

    def choose_label(self, ctx, i, j, hist):
        return label_argmax(ctx, i, j, hist)

    def choose_split(self, ctx, i, j, hist):
        return split_argmax(ctx, i, j, hist)

    def choose_parent(self, ctx, i, j, R, hist):
        return parent_argmax(ctx, i, j, R, hist)


def run_inorder(ctx, policy):
    """Drive the in-order traversal, asking `policy` for each decision.

    Node (i, k) is created when the parent boundary k is chosen; its label is
    filled in when the recursion reaches span (i, k).  Each chosen label is
    recorded into the history state right after the label decision.
    """
    stack_mode = ctx.variant == HistoryVariant.STACK

    def parse(i, j, R, children, hist):
        lid = policy.choose_label(ctx, i, j, hist)
        hist = ctx.record(hist, i, j, lid)
        node = BinaryTree(i, j, ctx.label_str(lid), *children)
        if j == R:
            return node, hist
        k = policy.choose_parent(ctx, i, j, R, hist)
        if not (j < k <= R):
            raise DecodeError(f"parent boundary {k} outside ({j},{R}]")
        if stack_mode and hist is not None:
            hist = hist.push()
        right, hist = parse(j, j + 1, k, (None, None), hist)
        if stack_mode and hist is not None:
            hist = hist.pop()
        return parse(i, k, R, (node, right), hist)

    tree, _ = parse(0, 1, ctx.n, (None, None), ctx.initial_hist())
    return tree


def run_topdown(ctx, policy):
    """Drive the pre-order traversal: label, record, split, recurse.

    In stack mode both children start from the state saved right after this
    node's record, so a node's decisions see only its ancestors' records.
    """
    stack_mode = ctx.variant == HistoryVariant.STACK

    def parse(i, j, hist):
        lid = policy.choose_label(ctx, i, j, hist)
        hist = ctx.record(hist, i, j, lid)
        label = ctx.label_str(lid)
        if j == i + 1:
            return BinaryTree(i, j, label), hist
        k = policy.choose_split(ctx, i, j, hist)
        if not (i < k < j):
            raise DecodeError(f"split {k} outside ({i},{j})")
        if stack_mode and hist is not None:
            hist = hist.push()
        left, hist = parse(i, k, hist)
        if stack_mode and hist is not None:
            hist = hist.pop().push()
        right, hist = parse(k, j, hist)
        if stack_mode and hist is not None:
            hist = hist.pop()
        return BinaryTree(i, j, label, left, right), hist

    tree, _ = parse(0, ctx.n, ctx.initial_hist())
    return tree


def decode_inorder(model, enc, variant=None):
    ctx = DecodeContext(model, enc, variant)
    return run_inorder(ctx, GreedyPolicy())


def decode_topdown(model, enc, variant=None):
    ctx = DecodeContext(model, enc, variant)
    return run_topdown(ctx, GreedyPolicy())


def decode_cky(model, enc):
    """Exact maximizer of the tree score over all full binary trees.

    best(i,j) = max_l label(i,j,l) + span(i,j) + max_k best(i,k) + best(k,j),
    with the empty label participating at score 0.  Ties break to the lowest
    label id and the smallest split.
    """
    ctx = DecodeContext(model, enc, HistoryVariant.NONE)
    hist = ctx.initial_hist()
    n = ctx.n
    best = {}
    back = {}
    for length in range(1, n + 1):
        for i in range(0, n - length + 1):
            j = i + length
            scores = ctx.label_scores(i, j, hist).value
            lid = int(np.argmax(scores))
            node_score = scores[lid] + ctx.span_score(i, j, hist).value
            if length == 1:
                best[(i, j)] = node_score
                back[(i, j)] = (lid, None)
                continue
            best_k, best_v = None, None
            for k in range(i + 1, j):
                ctx.scorer.counts["split_candidates"] += 1
                v = best[(i, k)] + best[(k, j)]
                if best_v is None or v > best_v:
                    best_k, best_v = k, v
            best[(i, j)] = node_score + best_v
            back[(i, j)] = (lid, best_k)

    def build(i, j):
        lid, k = back[(i, j)]
        label = ctx.label_str(lid)
        if k is None:
            return BinaryTree(i, j, label)
        return BinaryTree(i, j, label, build(i, k), build(k, j))

    return build(0, n)


def decode(model, enc, kind):
    kind = DecoderKind(kind)
    if kind == DecoderKind.CKY:
        return decode_cky(model, enc)
    if kind == DecoderKind.TOP_DOWN:
        return decode_topdown(model, enc)
    return decode_inorder(model, enc)


def check_binary_tree(bt, n):
    """Structural sanity: full binary tree over (0, n) with n leaves."""
    if bt.i != 0 or bt.j != n:
        raise DecodeError(f"root spans ({bt.i},{bt.j}), expected (0,{n})")
    leaves = 0
    internal = 0
    for node in bt.nodes():
        if node.left is None:
            leaves += 1
        else:
            internal += 1
    if leaves != n or internal != n - 1:
        raise DecodeError(f"bad node counts: {leaves} leaves, {internal} internal for n={n}")
    return True
