"""Vocabularies over words, characters, POS tags and collapsed labels."""

from __future__ import annotations

from collections import Counter

from .trees import DEFAULT_UNARY_SEP, EMPTY_ALIAS, EMPTY_LABEL, collapse_unaries, leaves_of, spans_of

UNK = "<UNK>"
START = "<START>"
STOP = "<STOP>"
_SPECIAL_TOKENS = (UNK, START, STOP)


class Vocab:
    """Dense id maps built from a training corpus.

    Label id 0 is always the empty label; word/char/tag lookups fall back to
    their UNK ids.  Ids are assigned in sorted order so construction is
    deterministic.
    """

    START = START
    STOP = STOP
    UNK = UNK

    def __init__(self, word_counts, chars, tags, labels):
        self.word_counts = dict(word_counts)
        self.words = {}
        for token in _SPECIAL_TOKENS:
            self.words[token] = len(self.words)
        for word in sorted(self.word_counts):
            self.words[word] = len(self.words)
        self.chars = {}
        for token in (UNK, START, STOP):
            self.chars[token] = len(self.chars)
        for ch in sorted(chars):
            self.chars[ch] = len(self.chars)
        self.tags = {}
        for token in (UNK, START, STOP):
            self.tags[token] = len(self.tags)
        for tag in sorted(tags):
            self.tags[tag] = len(self.tags)
        self.labels = [EMPTY_LABEL] + sorted(labels)
        self.label_ids = {label: i for i, label in enumerate(self.labels)}

    @classmethod
    def from_corpus(cls, trees, sep=DEFAULT_UNARY_SEP):
        word_counts = Counter()
        chars = set()
        tags = set()
        labels = set()
        for tree in trees:
            for leaf in leaves_of(tree):
                word_counts[leaf.word] += 1
                chars.update(leaf.word)
                tags.add(leaf.tag)
            for span in spans_of(collapse_unaries(tree, sep)):
                labels.add(span.label)
        return cls(word_counts, chars, tags, labels)

    @property
    def num_words(self):
        return len(self.words)

    @property
    def num_chars(self):
        return len(self.chars)

    @property
    def num_tags(self):
        return len(self.tags)

    @property
    def num_labels(self):
        return len(self.labels)

    def word_id(self, word):
        return self.words.get(word, self.words[UNK])

    def tag_id(self, tag):
        return self.tags.get(tag, self.tags[UNK])

    def char_ids(self, word):
        if word in (UNK, START, STOP):
            return [self.chars[word]]
        unk = self.chars[UNK]
        return [self.chars.get(ch, unk) for ch in word]

    def label_id(self, label):
        if label not in self.label_ids:
            raise LookupError(f"unknown label {label!r}")
        return self.label_ids[label]

    def count(self, word):
        return self.word_counts.get(word, 0)

    def to_json(self):
        return {
            "word_counts": self.word_counts,
            "chars": sorted(c for c in self.chars if c not in _SPECIAL_TOKENS),
            "tags": sorted(t for t in self.tags if t not in _SPECIAL_TOKENS),
            "labels": [EMPTY_ALIAS if l == EMPTY_LABEL else l for l in self.labels[1:]],
        }

    @classmethod
    def from_json(cls, data):
        labels = [EMPTY_LABEL if l == EMPTY_ALIAS else l for l in data["labels"]]
        return cls(data["word_counts"], data["chars"], data["tags"], labels)
