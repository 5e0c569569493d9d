"""Command-line entry point.

Subcommands: train, parse, eval, oracle-check.  Exit codes: 0 success,
1 runtime or data error, 2 usage error.  Every training run logs the fully
resolved configuration; identical configs and seeds reproduce byte-identical
models.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import autodiff as ad
from . import config as cfgmod
from . import oracle as orc
from . import synth
from .decoders import DecodeError, DecoderKind
from .evaluation import EvalError, score_corpus
from .model import Model
from .trees import TreeError, parse_sexpr, read_treebank, render_sexpr, sentence_of, unbinarize
from .training import train


class UsageError(Exception):
    pass


def _add_config_flags(parser, names):
    flags = {
        "decoder": dict(choices=["cky", "topdown", "inorder"]),
        "history": dict(choices=["none", "chain", "stack"]),
        "explore": dict(action="store_true", default=None),
        "epochs": dict(type=int),
        "seed": dict(type=int),
        "dev_every": dict(type=int),
        "stop_on_zero_loss": dict(action="store_true", default=None),
        "unk_z": dict(type=float),
        "rho": dict(type=float),
        "eps": dict(type=float),
        "oracle_interpretation": dict(choices=["strict", "inclusive"]),
        "history_label_emb": dict(type=_flag_bool),
        "history_span_rep": dict(type=_flag_bool),
        "history_for_label": dict(type=_flag_bool),
        "history_for_span": dict(type=_flag_bool),
        "word_dim": dict(type=int),
        "tag_dim": dict(type=int),
        "char_emb_dim": dict(type=int),
        "char_out_dim": dict(type=int),
        "hidden_dim": dict(type=int),
        "scorer_hidden_dim": dict(type=int),
        "history_dim": dict(type=int),
        "label_emb_dim": dict(type=int),
        "dropout": dict(type=float),
    }
    for name in names:
        parser.add_argument("--" + name.replace("_", "-"), dest=name, **flags[name])


def _flag_bool(text):
    if text.lower() in ("true", "1", "yes"):
        return True
    if text.lower() in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


_ALL_CONFIG_FLAGS = [
    "decoder", "history", "explore", "epochs", "seed", "dev_every", "stop_on_zero_loss",
    "unk_z", "rho", "eps", "oracle_interpretation",
    "history_label_emb", "history_span_rep", "history_for_label", "history_for_span",
    "word_dim", "tag_dim", "char_emb_dim", "char_out_dim", "hidden_dim",
    "scorer_hidden_dim", "history_dim", "label_emb_dim", "dropout",
]


def _resolve(args):
    file_values = cfgmod.read_config_file(args.config) if args.config else {}
    overrides = {name: getattr(args, name) for name in _ALL_CONFIG_FLAGS if hasattr(args, name)}
    return cfgmod.resolve_config(file_values, overrides)


def cmd_train(args):
    config = _resolve(args)
    if config.decoder == "cky":
        raise UsageError("training drives a greedy decision sequence; use --decoder topdown or inorder")
    train_trees = read_treebank(args.train)
    dev_trees = read_treebank(args.dev) if args.dev else []
    if not train_trees:
        raise TreeError(f"{args.train}: no trees")
    log_path = args.log if args.log else args.model_out + ".log"
    with open(log_path, "w", encoding="utf-8") as log:
        for line in cfgmod.format_config(config).splitlines():
            log.write(f"# {line}\n")
        log.write("# epoch\ttrain_loss\tdev_LR\tdev_LP\tdev_F1\tseconds\n")

        def emit(entry):
            log.write(entry.format() + "\n")
            log.flush()

        result = train(train_trees, dev_trees, config, log_fn=emit)
    result.model.store.restore(result.best_params)
    result.model.save(args.model_out)
    print(f"saved model to {args.model_out}", file=sys.stderr)
    return 0


def _read_sentences(path):
    """Input lines are bracketed trees or whitespace-separated word_TAG pairs."""
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("("):
                try:
                    sentences.append(sentence_of(parse_sexpr(line)))
                except TreeError as exc:
                    raise TreeError(f"{path}:{lineno}: {exc}") from exc
            else:
                words, tags = [], []
                for token in line.split():
                    if "_" not in token:
                        raise TreeError(f"{path}:{lineno}: token {token!r} is missing its _TAG suffix")
                    word, _, tag = token.rpartition("_")
                    words.append(word)
                    tags.append(tag)
                sentences.append((words, tags))
    return sentences


def cmd_parse(args):
    from .decoders import decode

    model = Model.load(args.model)
    kind = DecoderKind(args.decoder) if args.decoder else DecoderKind(model.config.decoder)
    sentences = _read_sentences(args.input)
    started = time.perf_counter()
    with open(args.output, "w", encoding="utf-8") as out:
        for words, tags in sentences:
            enc = model.encode(words, tags)
            bt = decode(model, enc, kind)
            tree = unbinarize(bt, list(zip(words, tags)))
            out.write(render_sexpr(tree) + "\n")
    elapsed = time.perf_counter() - started
    rate = len(sentences) / elapsed if elapsed > 0 else float("inf")
    print(f"parsed {len(sentences)} sentences, {rate:.2f} sents/sec", file=sys.stderr)
    return 0


def cmd_eval(args):
    gold = read_treebank(args.gold)
    pred = read_treebank(args.pred)
    report = score_corpus(gold, pred)
    print(report.format())
    return 0


def cmd_oracle_check(args):
    if args.trees < 1:
        raise UsageError("--trees must be at least 1")
    if args.max_len < 1:
        raise UsageError("--max-len must be at least 1")
    rng = np.random.default_rng(args.seed)
    report = orc.OracleCheckReport(interpretation=args.interpretation)
    for _ in range(args.trees):
        n = 1 if args.max_len == 1 else int(rng.integers(2, args.max_len + 1))
        tree = synth.random_tree(rng, n)
        orc.check_tree(tree, args.interpretation, report)
    print(report.format())
    return 0 if report.violations == 0 else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="chartparse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model")
    p_train.add_argument("--train", required=True)
    p_train.add_argument("--dev", default=None)
    p_train.add_argument("--model-out", required=True)
    p_train.add_argument("--config", default=None)
    p_train.add_argument("--log", default=None)
    _add_config_flags(p_train, _ALL_CONFIG_FLAGS)
    p_train.set_defaults(run=cmd_train)

    p_parse = sub.add_parser("parse", help="parse sentences with a trained model")
    p_parse.add_argument("--model", required=True)
    p_parse.add_argument("--input", required=True)
    p_parse.add_argument("--output", required=True)
    p_parse.add_argument("--decoder", choices=["cky", "topdown", "inorder"], default=None)
    p_parse.set_defaults(run=cmd_parse)

    p_eval = sub.add_parser("eval", help="score predicted trees against gold")
    p_eval.add_argument("--gold", required=True)
    p_eval.add_argument("--pred", required=True)
    p_eval.set_defaults(run=cmd_eval)

    p_oracle = sub.add_parser("oracle-check", help="verify the dynamic oracle against brute force")
    p_oracle.add_argument("--max-len", type=int, required=True)
    p_oracle.add_argument("--trees", type=int, required=True)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--interpretation", choices=["strict", "inclusive"], default="strict")
    p_oracle.set_defaults(run=cmd_oracle_check)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return args.run(args)
    except (UsageError, cfgmod.ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (TreeError, EvalError, DecodeError, orc.OracleError, orc.StateError,
            ad.ModelFormatError, ad.GradientError, OSError, LookupError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
