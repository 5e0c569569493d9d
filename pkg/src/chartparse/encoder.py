"""Sentence encoding and span scoring.

Each word is represented as [word embedding; character LSTM summary; tag
embedding].  A bidirectional LSTM over the padded sentence yields fencepost
states 0..n per direction, spans are difference-concatenations of those
states, and two feedforward heads score labels and spans.  The reserved
empty label is pinned to score 0 and never receives gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .trees import EMPTY_LABEL


class LstmCell:
    """Single-layer LSTM parameters plus one step of computation."""

    def __init__(self, store, name, input_dim, hidden_dim, learned_init=False):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.W = store.matrix(f"{name}/W", 4 * hidden_dim, input_dim + hidden_dim)
        self.b = store.vector(f"{name}/b", 4 * hidden_dim)
        self.h0 = store.vector(f"{name}/h0", hidden_dim) if learned_init else None
        self.c0 = store.vector(f"{name}/c0", hidden_dim) if learned_init else None

    def initial(self):
        if self.h0 is not None:
            return ad.use(self.h0), ad.use(self.c0)
        zeros = np.zeros(self.hidden_dim)
        return ad.constant(zeros), ad.constant(zeros)

    def step(self, x, state):
        h, c = state
        z = ad.add(ad.matmul(ad.use(self.W), ad.concat([x, h])), ad.use(self.b))
        H = self.hidden_dim
        i = ad.sigmoid(ad.slice_(z, 0, H))
        f = ad.sigmoid(ad.slice_(z, H, 2 * H))
        g = ad.tanh(ad.slice_(z, 2 * H, 3 * H))
        o = ad.sigmoid(ad.slice_(z, 3 * H, 4 * H))
        c2 = ad.add(ad.mul(f, c), ad.mul(i, g))
        h2 = ad.mul(o, ad.tanh(c2))
        return h2, c2

    def run(self, xs):
        """Hidden state after each input, in order."""
        state = self.initial()
        outs = []
        for x in xs:
            state = self.step(x, state)
            outs.append(state[0])
        return outs


@dataclass
class SentenceEncoding:
    """Fencepost states of one sentence: fwd[i], bwd[i] for i in 0..n."""

    n: int
    fwd: list
    bwd: list
    _span_cache: dict = field(default_factory=dict)


def span_vector(enc, i, j):
    """[fwd[j] - fwd[i]; bwd[i] - bwd[j]] for fencepost span (i, j)."""
    if not (0 <= i < j <= enc.n):
        raise ValueError(f"bad span ({i},{j}) for sentence of length {enc.n}")
    cached = enc._span_cache.get((i, j))
    if cached is None:
        cached = ad.concat([ad.sub(enc.fwd[j], enc.fwd[i]), ad.sub(enc.bwd[i], enc.bwd[j])])
        enc._span_cache[(i, j)] = cached
    return cached


class Encoder:
    """Embeddings plus the bidirectional fencepost LSTM."""

    def __init__(self, store, vocab, word_dim, tag_dim, char_emb_dim, char_out_dim,
                 hidden_dim, dropout=0.0):
        self.vocab = vocab
        self.hidden_dim = hidden_dim
        self.dropout = dropout
        self.word_emb = store.embedding("emb/word", vocab.num_words, word_dim)
        self.tag_emb = store.embedding("emb/tag", vocab.num_tags, tag_dim)
        self.char_emb = store.embedding("emb/char", vocab.num_chars, char_emb_dim)
        self.char_cell = LstmCell(store, "char_lstm", char_emb_dim, char_out_dim)
        input_dim = word_dim + char_out_dim + tag_dim
        self.fwd_cell = LstmCell(store, "fwd_lstm", input_dim, hidden_dim)
        self.bwd_cell = LstmCell(store, "bwd_lstm", input_dim, hidden_dim)

    def _word_input(self, word, tag):
        words = ad.use(self.word_emb)
        tags = ad.use(self.tag_emb)
        chars = ad.use(self.char_emb)
        e = ad.row(words, self.vocab.word_id(word))
        p = ad.row(tags, self.vocab.tag_id(tag))
        c = self.char_cell.run([ad.row(chars, cid) for cid in self.vocab.char_ids(word)])[-1]
        return ad.concat([e, c, p])

    def encode(self, words, tags, train_mode=False, rng=None):
        """Fencepost encoding of one sentence.

        Deterministic given parameters and inputs; in train mode, dropout
        masks for the recurrent outputs are drawn from `rng`.
        """
        n = len(words)
        if n == 0:
            raise ValueError("cannot encode an empty sentence")
        if len(tags) != n:
            raise ValueError(f"{n} words but {len(tags)} tags")
        vocab = self.vocab
        xs = [self._word_input(vocab.START, vocab.START)]
        xs += [self._word_input(w, t) for w, t in zip(words, tags)]
        xs.append(self._word_input(vocab.STOP, vocab.STOP))

        fwd = self.fwd_cell.run(xs[:-1])
        bwd_rev = self.bwd_cell.run(xs[1:][::-1])
        bwd = bwd_rev[::-1]

        if train_mode and self.dropout > 0.0:
            if rng is None:
                raise ValueError("train-mode encoding needs an rng for dropout")
            keep = 1.0 - self.dropout
            fwd = [ad.mul(h, ad.constant((rng.random(self.hidden_dim) < keep) / keep)) for h in fwd]
            bwd = [ad.mul(h, ad.constant((rng.random(self.hidden_dim) < keep) / keep)) for h in bwd]
        return SentenceEncoding(n=n, fwd=fwd, bwd=bwd)


class Scorer:
    """Two-layer feedforward heads over span vectors.

    `label_scores` returns one score per label with the empty label (index 0)
    hard-wired to 0; `span_score` is label independent.  `counts` tracks how
    many head evaluations a decoder performed.
    """

    def __init__(self, store, num_labels, label_input_dim, span_input_dim, hidden_dim):
        if num_labels < 1:
            raise ValueError("label inventory must at least contain the empty label")
        self.num_labels = num_labels
        self.label_input_dim = label_input_dim
        self.span_input_dim = span_input_dim
        self.W1_l = store.matrix("label_head/W1", hidden_dim, label_input_dim)
        self.b1_l = store.vector("label_head/b1", hidden_dim)
        self.W2_l = store.matrix("label_head/W2", hidden_dim, hidden_dim)
        self.b2_l = store.vector("label_head/b2", hidden_dim)
        self.V = store.matrix("label_head/V", num_labels - 1, hidden_dim) if num_labels > 1 else None
        self.W1_s = store.matrix("span_head/W1", hidden_dim, span_input_dim)
        self.b1_s = store.vector("span_head/b1", hidden_dim)
        self.W2_s = store.matrix("span_head/W2", hidden_dim, hidden_dim)
        self.b2_s = store.vector("span_head/b2", hidden_dim)
        self.v_s = store.output_vector("span_head/v", hidden_dim)
        self.counts = {"label": 0, "span": 0, "split_candidates": 0}

    def reset_counts(self):
        for key in self.counts:
            self.counts[key] = 0

    @staticmethod
    def _trunk(x, W1, b1, W2, b2):
        h1 = ad.relu(ad.affine(ad.use(W1), x, ad.use(b1)))
        return ad.relu(ad.affine(ad.use(W2), h1, ad.use(b2)))

    def label_scores(self, x):
        """Vector of label scores; index 0 is the constant-0 empty label."""
        if x.value.shape != (self.label_input_dim,):
            raise ad.ShapeError(f"label head expects ({self.label_input_dim},), got {x.value.shape}")
        self.counts["label"] += 1
        zero = ad.constant(np.zeros(1))
        if self.V is None:
            return zero
        h = self._trunk(x, self.W1_l, self.b1_l, self.W2_l, self.b2_l)
        return ad.concat([zero, ad.matmul(ad.use(self.V), h)])

    def span_score(self, x):
        if x.value.shape != (self.span_input_dim,):
            raise ad.ShapeError(f"span head expects ({self.span_input_dim},), got {x.value.shape}")
        self.counts["span"] += 1
        h = self._trunk(x, self.W1_s, self.b1_s, self.W2_s, self.b2_s)
        return ad.dot(ad.use(self.v_s), h)

    def span_scores_batch(self, xs):
        """Span scores of many inputs at once; one vector entry per input."""
        X = ad.concat_cols(xs)
        if X.value.shape[0] != self.span_input_dim:
            raise ad.ShapeError(f"span head expects ({self.span_input_dim},) columns, got {X.value.shape}")
        self.counts["span"] += len(xs)
        H = self._trunk(X, self.W1_s, self.b1_s, self.W2_s, self.b2_s)
        return ad.vecmat(ad.use(self.v_s), H)


def tree_score(scorer, enc, bt, label_ids, hist_for_label=None, hist_for_span=None):
    """Sum of label and span scores over every node of a binary tree.

    Empty-labeled nodes contribute only their span score.  `label_ids` maps
    label strings to scorer indices; unknown labels raise.  The optional
    history vectors are appended to the scorer inputs when the heads were
    built for augmented spans.
    """
    total = ad.constant(0.0)
    for node in bt.nodes():
        s = span_vector(enc, node.i, node.j)
        xs = ad.concat([s, hist_for_span]) if hist_for_span is not None else s
        total = ad.add(total, scorer.span_score(xs))
        if node.label != EMPTY_LABEL:
            if node.label not in label_ids:
                raise LookupError(f"unknown label {node.label!r}")
            xl = ad.concat([s, hist_for_label]) if hist_for_label is not None else s
            scores = scorer.label_scores(xl)
            total = ad.add(total, ad.pick(scores, label_ids[node.label]))
    return total
