"""Model bundle: parameter store, vocabulary, encoder, scorer and the
optional history tracker, plus container save/load."""

from __future__ import annotations

import dataclasses

from . import autodiff as ad
from .config import Config
from .decoders import HistoryTracker
from .encoder import Encoder, Scorer
from .vocab import Vocab


class Model:
    """Everything needed to encode and score one sentence.

    Scorer input widths depend on the history configuration: heads that
    consume the tracker state expect the span vector with the state appended.
    Parameter creation order is fixed (encoder, scorer, tracker) so equal
    seeds give byte-equal initializations.
    """

    def __init__(self, vocab, config):
        self.vocab = vocab
        self.config = config
        self.store = ad.ParamStore(seed=config.seed)
        span_dim = 2 * config.hidden_dim
        has_history = config.history != "none"
        label_in = span_dim + (config.history_dim if has_history and config.history_for_label else 0)
        span_in = span_dim + (config.history_dim if has_history and config.history_for_span else 0)
        self.encoder = Encoder(
            self.store, vocab,
            word_dim=config.word_dim, tag_dim=config.tag_dim,
            char_emb_dim=config.char_emb_dim, char_out_dim=config.char_out_dim,
            hidden_dim=config.hidden_dim, dropout=config.dropout,
        )
        self.scorer = Scorer(self.store, vocab.num_labels, label_in, span_in, config.scorer_hidden_dim)
        self.tracker = None
        if has_history:
            self.tracker = HistoryTracker(
                self.store, vocab.num_labels, span_dim,
                config.label_emb_dim, config.history_dim,
                use_span_rep=config.history_span_rep,
                use_label_emb=config.history_label_emb,
            )

    def encode(self, words, tags, train_mode=False, rng=None):
        return self.encoder.encode(words, tags, train_mode=train_mode, rng=rng)

    def save(self, path):
        tensors = {p.name: p.value for p in self.store}
        extra = {
            "config": dataclasses.asdict(self.config),
            "vocab": self.vocab.to_json(),
        }
        ad.save_container(path, tensors, extra)

    @classmethod
    def load(cls, path):
        tensors, extra = ad.load_container(path)
        try:
            config = Config(**extra["config"])
            vocab = Vocab.from_json(extra["vocab"])
        except (KeyError, TypeError) as exc:
            raise ad.ModelFormatError(f"{path}: incomplete model metadata: {exc}") from exc
        model = cls(vocab, config)
        names = set(model.store.names())
        if names != set(tensors):
            raise ad.ModelFormatError(f"{path}: tensor names do not match the configuration")
        for name in names:
            param = model.store.get(name)
            if param.value.shape != tensors[name].shape:
                raise ad.ModelFormatError(
                    f"{path}: tensor {name!r} has shape {tensors[name].shape}, expected {param.value.shape}"
                )
            param.value[...] = tensors[name]
        return model
