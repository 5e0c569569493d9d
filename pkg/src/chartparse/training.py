"""Margin training for the greedy decoders.

Every label and boundary decision contributes a hinge
max(0, 1 - score(oracle) + score(predicted)), zero when the prediction is
already correct.  With exploration off the oracle decision is followed after
the loss is computed; with exploration on the model's own decision is
followed and the dynamic oracle keeps supplying targets at off-gold states.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import oracle as orc
from .config import Config
from .decoders import DecodeContext, DecoderKind, decode
from .evaluation import score_corpus
from .model import Model
from .trees import collapse_unaries, gold_index, leaves_of, sentence_of, unbinarize
from .vocab import UNK, Vocab

TrainConfig = Config  # training consumes the flat run configuration


def hinge_from_scores(s_oracle, s_predicted):
    """max(0, 1 - s_oracle + s_predicted) as a graph node."""
    return ad.relu(ad.add(ad.sub(ad.constant(1.0), s_oracle), s_predicted))


def unk_replace(word, vocab, z, rng):
    """Replace a training token by the unknown marker with p = z / (z + c)."""
    if z <= 0.0:
        return word
    count = vocab.count(word)
    if rng.random() < z / (z + count):
        return UNK
    return word


@dataclass
class LossStats:
    decisions: int = 0
    wrong: int = 0
    off_oracle: int = 0
    trace: list = field(default_factory=list)


class LossPolicy:
    """Decision policy that accumulates hinge losses while traversing.

    Chooses the oracle decision (explore off) or the model argmax (explore
    on); either way the hinge compares the oracle target against the model
    argmax at the visited state.
    """

    def __init__(self, gold, vocab, explore, interpretation, kind):
        self.gold = gold
        self.vocab = vocab
        self.explore = explore
        self.interpretation = interpretation
        self.kind = DecoderKind(kind)
        self.losses = []
        self.stats = LossStats()

    def _follow(self, predicted, target):
        self.stats.decisions += 1
        if predicted != target:
            self.stats.wrong += 1
        followed = predicted if self.explore else target
        if followed != target:
            self.stats.off_oracle += 1
        return followed

    def choose_label(self, ctx, i, j, hist):
        scores = ctx.label_scores(i, j, hist)
        predicted = int(np.argmax(scores.value))
        target = self.vocab.label_id(orc.oracle_label(self.gold, i, j))
        if predicted != target:
            self.losses.append(hinge_from_scores(ad.pick(scores, target), ad.pick(scores, predicted)))
        followed = self._follow(predicted, target)
        self.stats.trace.append(("L", i, j, followed))
        return followed

    def choose_parent(self, ctx, i, j, R, hist):
        scores = ctx.parent_scores(i, j, R, hist)
        predicted = j + 1 + int(np.argmax(scores.value))
        target = orc.oracle_parent(self.gold, i, j, R, self.interpretation)
        if not (j < target <= R):
            raise orc.OracleError(f"oracle boundary {target} outside ({j},{R}]")
        if predicted != target:
            self.losses.append(hinge_from_scores(
                ad.pick(scores, target - j - 1), ad.pick(scores, predicted - j - 1)))
        followed = self._follow(predicted, target)
        self.stats.trace.append(("P", i, j, R, followed))
        return followed

    def choose_split(self, ctx, i, j, hist):
        scores = ctx.split_scores(i, j, hist)
        predicted = i + 1 + int(np.argmax(scores.value))
        target = orc.oracle_split(self.gold, i, j)
        if predicted != target:
            self.losses.append(hinge_from_scores(
                ad.pick(scores, target - i - 1), ad.pick(scores, predicted - i - 1)))
        followed = self._follow(predicted, target)
        self.stats.trace.append(("S", i, j, followed))
        return followed


def sentence_loss(model, tree, config, rng=None, enc=None):
    """Accumulated hinge loss of one sentence under `config`.

    Returns (loss node, LossStats).  The traversal follows oracle decisions
    unless config.explore is set, in which case it follows the model and the
    dynamic oracle supervises off-gold states too.
    """
    kind = DecoderKind(config.decoder)
    if kind == DecoderKind.CKY:
        raise ValueError("decision-level training applies to the greedy decoders only")
    gold = gold_index(collapse_unaries(tree))
    policy = LossPolicy(gold, model.vocab, config.explore, config.oracle_interpretation, kind)
    if enc is None:
        words, tags = sentence_of(tree)
        train_mode = config.dropout > 0.0
        enc = model.encode(words, tags, train_mode=train_mode, rng=rng)
    ctx = DecodeContext(model, enc)
    from .decoders import run_inorder, run_topdown

    if kind == DecoderKind.IN_ORDER:
        run_inorder(ctx, policy)
    else:
        run_topdown(ctx, policy)
    return ad.add_all(policy.losses), policy.stats


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    dev_lr: float | None
    dev_lp: float | None
    dev_f1: float | None
    seconds: float

    def format(self):
        def fmt(x):
            return "-" if x is None else f"{x:.2f}"

        return "\t".join([
            str(self.epoch), f"{self.train_loss:.4f}",
            fmt(self.dev_lr), fmt(self.dev_lp), fmt(self.dev_f1),
            f"{self.seconds:.2f}",
        ])


@dataclass
class TrainResult:
    model: Model
    vocab: Vocab
    log: list
    best_dev_f1: float | None
    best_params: dict


def parse_corpus(model, trees, kind=None):
    """Greedy-decode a list of gold trees' sentences; returns n-ary trees."""
    kind = DecoderKind(kind if kind is not None else model.config.decoder)
    out = []
    for tree in trees:
        words, tags = sentence_of(tree)
        enc = model.encode(words, tags)
        bt = decode(model, enc, kind)
        out.append(unbinarize(bt, list(zip(words, tags))))
    return out


def evaluate_on(model, trees, kind=None):
    return score_corpus(trees, parse_corpus(model, trees, kind))


def train(train_trees, dev_trees, config, log_fn=None):
    """Train a fresh model; returns the final model plus the best-dev snapshot.

    One sentence per update: build the graph, backward, AdaDelta step.
    Sentence order is reshuffled per epoch from the run seed, as are the
    token UNK draws and dropout masks.  Dev F1 is measured every
    config.dev_every epochs and the best snapshot kept.
    """
    if not train_trees:
        raise ValueError("empty training corpus")
    vocab = Vocab.from_corpus(train_trees)
    model = Model(vocab, config)
    seq = np.random.SeedSequence(config.seed)
    shuffle_rng, unk_rng, dropout_rng = (np.random.default_rng(s) for s in seq.spawn(3))
    logs = []
    best_f1 = None
    best_params = model.store.snapshot()

    # oracle decisions replayed on pre-collapsed trees
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        order = shuffle_rng.permutation(len(train_trees))
        total_loss = 0.0
        for idx in order:
            tree = train_trees[int(idx)]
            words, tags = sentence_of(tree)
            lookup_words = [unk_replace(w, vocab, config.unk_z, unk_rng) for w in words]
            enc = model.encode(lookup_words, tags, train_mode=config.dropout > 0.0, rng=dropout_rng)
            loss, _ = sentence_loss(model, tree, config, enc=enc)
            value = float(loss.value)
            if not np.isfinite(value):
                raise ad.GradientError(f"non-finite loss at sentence {int(idx)}")
            total_loss += value
            if loss.parents or loss.op != "const":
                ad.backward(loss)
                ad.adadelta_step(model.store, config.rho, config.eps)
            else:
                model.store.zero_grads()
        dev_lr = dev_lp = dev_f1 = None
        if dev_trees and epoch % config.dev_every == 0:
            report = evaluate_on(model, dev_trees)
            dev_lr, dev_lp, dev_f1 = report.lr, report.lp, report.f1
            if best_f1 is None or dev_f1 > best_f1:
                best_f1 = dev_f1
                best_params = model.store.snapshot()
        entry = EpochLog(epoch, total_loss, dev_lr, dev_lp, dev_f1, time.perf_counter() - started)
        logs.append(entry)
        if log_fn is not None:
            log_fn(entry)
        if config.stop_on_zero_loss and total_loss == 0.0:
            break
    if best_f1 is None:
        best_params = model.store.snapshot()
    return TrainResult(model=model, vocab=vocab, log=logs, best_dev_f1=best_f1, best_params=best_params)
