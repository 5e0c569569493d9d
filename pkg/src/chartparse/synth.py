"""Synthetic treebanks: random trees for fuzzing and a small grammar for
end-to-end training runs.

The random generator produces n-ary trees with unary chains and length-1
constituents so the collapse/binarize/oracle machinery gets exercised on
awkward shapes.  The grammar is nearly deterministic given the POS tags,
which keeps held-out accuracy meaningful for models overfit on a few dozen
sentences.
"""

from __future__ import annotations

import numpy as np

from .trees import Leaf, Tree

RANDOM_LABELS = ("S", "NP", "VP", "PP", "ADVP", "SBAR")
RANDOM_TAGS = ("DT", "NN", "VBZ", "IN", "JJ", "RB")
RANDOM_WORDS = ("the", "dog", "sees", "near", "old", "now", "a", "cat")


def random_tree(rng, n_tokens, labels=RANDOM_LABELS, tags=RANDOM_TAGS, words=RANDOM_WORDS,
                max_children=4, unary_prob=0.2, leaf_label_prob=0.3):
    """Random n-ary tree over `n_tokens` leaves.

    Internal nodes get 2..max_children children; single-child chains appear
    with `unary_prob` per node, and leaves grow a length-1 constituent with
    `leaf_label_prob`.
    """
    if n_tokens < 1:
        raise ValueError("need at least one token")

    def pick(seq):
        return seq[int(rng.integers(len(seq)))]

    def maybe_chain(node):
        while rng.random() < unary_prob:
            node = Tree(pick(labels), (node,))
        return node

    def build(lo, hi):
        if hi - lo == 1:
            leaf = Leaf(pick(words), pick(tags))
            if rng.random() < leaf_label_prob:
                return maybe_chain(Tree(pick(labels), (leaf,)))
            return leaf
        width = hi - lo
        m = int(rng.integers(2, min(max_children, width) + 1))
        cuts = sorted(rng.choice(np.arange(lo + 1, hi), size=m - 1, replace=False).tolist())
        bounds = [lo] + cuts + [hi]
        children = tuple(build(a, b) for a, b in zip(bounds, bounds[1:]))
        return maybe_chain(Tree(pick(labels), children))

    node = build(0, n_tokens)
    if isinstance(node, Leaf):
        node = Tree(pick(labels), (node,))
    return node


# Hand-written grammar: S -> NP VP PUNCT with optional PP modifiers and a
# gerund complement that yields an S over VP unary chain.
_PRONOUNS = ("she", "he", "they", "it")
_DETS = ("the", "a", "every")
_NOUNS = ("dog", "cat", "story", "code", "idea", "bird")
_ADJS = ("old", "big", "new")
_VERBS = ("loves", "sees", "writes", "makes")
_GERUNDS = ("writing", "reading", "making")
_PREPS = ("near", "with", "about")


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _np(rng, allow_pp, depth):
    r = rng.random()
    if r < 0.3:
        return Tree("NP", (Leaf(_pick(rng, _PRONOUNS), "PRP"),))
    children = [Leaf(_pick(rng, _DETS), "DT")]
    if r < 0.6:
        children.append(Leaf(_pick(rng, _ADJS), "JJ"))
    children.append(Leaf(_pick(rng, _NOUNS), "NN"))
    if allow_pp and depth < 2 and rng.random() < 0.35:
        children.append(_pp(rng, depth + 1))
    return Tree("NP", tuple(children))


def _pp(rng, depth):
    # PP-internal NPs never take another PP, so attachment stays unambiguous
    return Tree("PP", (Leaf(_pick(rng, _PREPS), "IN"), _np(rng, False, depth)))


def _vp(rng, depth):
    r = rng.random()
    if r < 0.3 and depth < 2:
        # gerund complement: (S (VP (VBG ...) (NP ...))) under the verb
        inner = Tree("VP", (Leaf(_pick(rng, _GERUNDS), "VBG"), _np(rng, False, depth + 1)))
        return Tree("VP", (Leaf(_pick(rng, _VERBS), "VBZ"), Tree("S", (inner,))))
    children = [Leaf(_pick(rng, _VERBS), "VBZ"), _np(rng, True, depth)]
    if rng.random() < 0.3:
        children.append(_pp(rng, depth + 1))
    return Tree("VP", tuple(children))


def grammar_sentence(rng):
    return Tree("S", (_np(rng, True, 0), _vp(rng, 0), Leaf(".", ".")))


def grammar_corpus(rng, size, min_len=5, max_len=15):
    """Sample `size` grammar trees whose length falls in [min_len, max_len]."""
    trees = []
    while len(trees) < size:
        tree = grammar_sentence(rng)
        n = sum(1 for _ in _leaf_iter(tree))
        if min_len <= n <= max_len:
            trees.append(tree)
    return trees


def _leaf_iter(tree):
    if isinstance(tree, Leaf):
        yield tree
        return
    for child in tree.children:
        yield from _leaf_iter(child)
