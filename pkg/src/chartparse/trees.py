"""Bracketed constituency trees and the span transforms decoders rely on.

Gold trees are n-ary with (word, tag) leaves.  Decoders produce full binary
trees whose nodes may carry the reserved empty label; unary-chain collapse,
implicit binarization and their inverses convert between the two forms.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple

EMPTY_LABEL = "∅"
EMPTY_ALIAS = "EMPTY"
DEFAULT_UNARY_SEP = "+"
FALLBACK_ROOT_LABEL = "TOP"


class TreeError(ValueError):
    """Malformed bracketing or tree structure.

    `offset` is the 1-based character position of the problem when the error
    came from parsing text.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (offset {offset})"
        super().__init__(message)
        self.offset = offset


@dataclass(frozen=True)
class Leaf:
    word: str
    tag: str


@dataclass(frozen=True)
class Tree:
    label: str
    children: tuple  # of Tree | Leaf, left to right


class LabeledSpan(NamedTuple):
    i: int
    j: int
    label: str


@dataclass(frozen=True)
class BinaryTree:
    """Node of a full binary tree over fencepost span (i, j).

    Leaves (j = i + 1) have no children; internal nodes have exactly two,
    partitioning the span.  `label` may be the empty label or a joined
    unary-chain label.
    """

    i: int
    j: int
    label: str
    left: "BinaryTree | None" = None
    right: "BinaryTree | None" = None

    def __post_init__(self):
        if (self.left is None) != (self.right is None):
            raise TreeError(f"binary node ({self.i},{self.j}) must have zero or two children")
        if self.left is None:
            if self.j != self.i + 1:
                raise TreeError(f"binary leaf must span one token, got ({self.i},{self.j})")
        else:
            if not (self.left.i == self.i and self.left.j == self.right.i and self.right.j == self.j):
                raise TreeError(f"children do not partition span ({self.i},{self.j})")

    def nodes(self):
        """All nodes, pre-order."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            if node.left is not None:
                stack.append(node.right)
                stack.append(node.left)


def parse_sexpr(text):
    """Parse a single bracketed tree like "(S (NP (PRP She)) (VP (VBZ sees)))".

    Preterminals take the form (TAG word) and become Leaf values.  Raises
    TreeError with a 1-based character offset on unbalanced or malformed
    input, including trailing content after the tree.
    """
    pos = 0
    n = len(text)

    def skip_ws():
        nonlocal pos
        while pos < n and text[pos].isspace():
            pos += 1

    def read_atom():
        nonlocal pos
        start = pos
        while pos < n and not text[pos].isspace() and text[pos] not in "()":
            pos += 1
        return text[start:pos]

    def parse_node():
        nonlocal pos
        open_at = pos + 1
        pos += 1  # consume '('
        skip_ws()
        label = read_atom()
        if not label:
            raise TreeError("node without a label", offset=pos + 1)
        children = []
        words = []
        while True:
            skip_ws()
            if pos >= n:
                raise TreeError("unbalanced '('", offset=pos + 1)
            ch = text[pos]
            if ch == ")":
                pos += 1
                break
            if ch == "(":
                children.append(parse_node())
            else:
                words.append(read_atom())
        if words and children:
            raise TreeError("node mixes words and subtrees", offset=open_at)
        if words:
            if len(words) != 1:
                raise TreeError(f"preterminal {label!r} must contain exactly one word", offset=open_at)
            return Leaf(words[0], label)
        if not children:
            raise TreeError("empty node", offset=open_at)
        return Tree(label, tuple(children))

    skip_ws()
    if pos >= n or text[pos] != "(":
        raise TreeError("expected '('", offset=pos + 1)
    node = parse_node()
    skip_ws()
    if pos < n:
        raise TreeError("trailing content after tree", offset=pos + 1)
    if isinstance(node, Leaf):
        raise TreeError("tree needs a constituent above its preterminal", offset=1)
    return node


def _check_atom(atom, what):
    if not atom:
        raise TreeError(f"empty {what}")
    for ch in atom:
        if ch in "()" or ch.isspace():
            raise TreeError(f"illegal {what} character {ch!r} in {atom!r}")


def render_sexpr(tree):
    """Canonical single-space bracketing; inverse of parse_sexpr."""
    out = []

    def emit(node):
        if isinstance(node, Leaf):
            _check_atom(node.tag, "tag")
            _check_atom(node.word, "word")
            out.append(f"({node.tag} {node.word})")
            return
        _check_atom(node.label, "label")
        out.append(f"({node.label}")
        for child in node.children:
            out.append(" ")
            emit(child)
        out.append(")")

    emit(tree)
    return "".join(out)


def collapse_unaries(tree, sep=DEFAULT_UNARY_SEP):
    """Merge maximal same-span unary chains into single nodes.

    A chain A over B over ... over Z spanning the same tokens becomes one
    node labeled "A+B+...+Z".  Chains stop at the leaf level, so a length-1
    constituent over a preterminal survives as its own node.
    """
    if isinstance(tree, Leaf):
        return tree
    labels = [tree.label]
    node = tree
    while len(node.children) == 1 and isinstance(node.children[0], Tree):
        node = node.children[0]
        labels.append(node.label)
    for lab in labels:
        if sep in lab:
            raise TreeError(f"label {lab!r} contains the chain separator {sep!r}")
        if lab == EMPTY_LABEL:
            raise TreeError("input tree uses the reserved empty label")
    return Tree(sep.join(labels), tuple(collapse_unaries(c, sep) for c in node.children))


def expand_chain_label(label, children, sep=DEFAULT_UNARY_SEP):
    """Rebuild the unary chain a joined label stands for, bottom-up."""
    parts = label.split(sep)
    node = Tree(parts[-1], tuple(children))
    for part in reversed(parts[:-1]):
        node = Tree(part, (node,))
    return node


def spans_of(tree):
    """Multiset of labeled spans of an n-ary tree, preterminals excluded.

    Unary chains must be expanded: each node contributes one span, so both
    members of a chain count.
    """
    spans = Counter()

    def walk(node, i):
        if isinstance(node, Leaf):
            return i + 1
        j = i
        for child in node.children:
            j = walk(child, j)
        spans[LabeledSpan(i, j, node.label)] += 1
        return j

    walk(tree, 0)
    return spans


def leaves_of(tree):
    """Leaves left to right."""
    out = []

    def walk(node):
        if isinstance(node, Leaf):
            out.append(node)
            return
        for child in node.children:
            walk(child)

    walk(tree)
    return out


def sentence_of(tree):
    """(words, tags) of a tree."""
    leaves = leaves_of(tree)
    return [l.word for l in leaves], [l.tag for l in leaves]


@dataclass(frozen=True)
class GoldIndex:
    """Span lookup tables for one collapsed gold tree.

    `spans` maps every labeled constituent span (i, j) to its collapsed
    label; `children_boundaries` maps each constituent of length > 1 to the
    sorted right boundaries of its children (preterminal children included),
    so the last entry is always j.
    """

    n: int
    spans: dict
    children_boundaries: dict

    def chain_labels(self, i, j, sep=DEFAULT_UNARY_SEP):
        label = self.spans.get((i, j))
        return label.split(sep) if label is not None else []


def gold_index(tree, sep=DEFAULT_UNARY_SEP):
    """Build the GoldIndex of an already unary-collapsed tree."""
    spans = {}
    boundaries = {}

    def walk(node, i):
        if isinstance(node, Leaf):
            return i + 1
        j = i
        ends = []
        for child in node.children:
            j = walk(child, j)
            ends.append(j)
        if (i, j) in spans:
            raise TreeError(f"duplicate span ({i},{j}): tree is not unary-collapsed")
        spans[(i, j)] = node.label
        if j - i > 1:
            boundaries[(i, j)] = tuple(ends)
        return j

    n = walk(tree, 0)
    return GoldIndex(n=n, spans=spans, children_boundaries=boundaries)


def binarize(tree):
    """Right-branching implicit binarization of a collapsed tree.

    Extra nodes introduced for n-ary constituents carry the empty label;
    leaf spans without a constituent of their own do too.
    """

    def build(node, i):
        if isinstance(node, Leaf):
            return BinaryTree(i, i + 1, EMPTY_LABEL), i + 1
        kids = []
        j = i
        for child in node.children:
            bt, j = build(child, j)
            kids.append(bt)
        if len(kids) == 1:
            only = kids[0]
            if only.label != EMPTY_LABEL:
                raise TreeError("tree is not unary-collapsed")
            return BinaryTree(only.i, only.j, node.label, only.left, only.right), j
        acc = kids[-1]
        for bt in reversed(kids[1:-1]):
            acc = BinaryTree(bt.i, acc.j, EMPTY_LABEL, bt, acc)
        return BinaryTree(i, j, node.label, kids[0], acc), j

    root, _ = build(tree, 0)
    return root


def unbinarize(bt, leaves, sep=DEFAULT_UNARY_SEP, fallback_root_label=FALLBACK_ROOT_LABEL):
    """Invert implicit binarization.

    Empty-labeled nodes are deleted and their children spliced into the
    parent; joined labels expand back into unary chains; (word, tag) leaves
    are re-attached.  If nothing labeled survives at the root, the children
    are wrapped in `fallback_root_label` so the output is a valid tree.
    """
    if bt.i != 0 or bt.j != len(leaves):
        raise TreeError(f"tree spans ({bt.i},{bt.j}) but sentence has {len(leaves)} tokens")

    def expand(node):
        if node.left is None:
            leaf = leaves[node.i]
            if not isinstance(leaf, Leaf):
                leaf = Leaf(leaf[0], leaf[1])
            if node.label == EMPTY_LABEL:
                return [leaf]
            return [expand_chain_label(node.label, [leaf], sep)]
        children = expand(node.left) + expand(node.right)
        if node.label == EMPTY_LABEL:
            return children
        return [expand_chain_label(node.label, children, sep)]

    top = expand(bt)
    if len(top) == 1 and isinstance(top[0], Tree):
        return top[0]
    return Tree(fallback_root_label, tuple(top))


def strip_label_annotations(label):
    """Drop PTB function tags and coindexing: cut at the first '-' or '='.

    Labels starting with '-' (like -LRB-, -RRB-, -NONE-) are left alone.
    """
    if label.startswith("-") or label == EMPTY_LABEL:
        return label
    for k, ch in enumerate(label):
        if ch in "-=":
            return label[:k]
    return label


def normalize_tree(tree, strip_annotations=True, delete_traces=False, trace_tag="-NONE-"):
    """Optional treebank normalization applied after reading."""

    def walk(node):
        if isinstance(node, Leaf):
            if delete_traces and node.tag == trace_tag:
                return None
            return node
        children = [c for c in (walk(child) for child in node.children) if c is not None]
        if not children:
            return None
        label = strip_label_annotations(node.label) if strip_annotations else node.label
        return Tree(label, tuple(children))

    out = walk(tree)
    if out is None or isinstance(out, Leaf):
        raise TreeError("normalization removed the whole tree")
    return out


def read_treebank(path, strip_annotations=True, delete_traces=False):
    """Read one bracketed tree per non-blank line; errors carry line numbers."""
    trees = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                tree = parse_sexpr(line)
                tree = normalize_tree(tree, strip_annotations, delete_traces)
            except TreeError as exc:
                raise TreeError(f"{path}:{lineno}: {exc}") from exc
            trees.append(tree)
    return trees


def write_treebank(path, trees):
    with open(path, "w", encoding="utf-8") as fh:
        for tree in trees:
            fh.write(render_sexpr(tree))
            fh.write("\n")
