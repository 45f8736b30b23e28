"""Command-line front end: gen-data, train, eval, inspect-checkpoint.

Every command reads one flat config file (inspect-checkpoint takes just a
checkpoint path) and is deterministic given that file: the seed lives in the
config, and STACKNET_SEED in the environment overrides it. Exit codes:
0 success, 1 usage or config error, 2 data or shape error, 3 numeric
failure during training.

Training writes a metrics CSV with header epoch,train_ce,dev_ce,dev_acc,
seconds. Row 0 is an evaluation of the untrained (or warm-started) model;
rows 1..epochs log one training epoch each, where train_ce is the running
cross-entropy seen during training and dev_ce/dev_acc come from a
dropout-off pass over the dev corpus. The seconds column is 0.0 unless
record_timing = true, so metrics files from identical seeds are
byte-identical; real timings always go to stdout.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from .bpsn import BpsnConfig, bpsn_evaluate, bpsn_train_epoch
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .compression import load_map, save_map
from .config import Key, apply_env_seed, load_config
from .corpus import Corpus, SpliceConfig, load_corpus, save_corpus
from .datagen import GenConfig, generate_corpus
from .errors import ConfigError, DataError, NumericError, StacknetError
from .nn import ACT_SOFTMAX, Mlp, TrainConfig, build_mlp
from .rdsn import (FEEDBACK_FREE_RUNNING, FEEDBACK_MODES, RdsnConfig,
                   RdsnModel, rdsn_evaluate, rdsn_train_epoch, warm_start)
from .rng import STREAM_DROPOUT, STREAM_INIT, STREAM_ORDER, make_stream
from .training import baseline_train_epoch, evaluate_baseline

GEN_SCHEMA = {
    "out_dir": Key("str", required=True),
    "num_monophones": Key("int", 8),
    "senones_per_monophone": Key("int", 4),
    "feature_dim": Key("int", 10),
    "self_transition_prob": Key("float", 0.85),
    "noise_sigma": Key("float", 1.0),
    "train_utterances": Key("int", 200),
    "dev_utterances": Key("int", 50),
    "test_utterances": Key("int", 50),
    "min_frames": Key("int", 100),
    "max_frames": Key("int", 200),
    "seed": Key("int", 0),
}

TRAIN_SCHEMA = {
    "model": Key("choice", required=True, choices=("baseline", "rdsn", "bpsn")),
    "train_corpus": Key("str", required=True),
    "dev_corpus": Key("str", required=True),
    "map": Key("str"),
    "checkpoint_in": Key("str"),
    "checkpoint_out": Key("str", required=True),
    "metrics_out": Key("str", required=True),
    "hidden": Key("int_list", [64, 64]),
    "learning_rate": Key("float", 0.01),
    "epochs": Key("int", 10),
    "dropout": Key("float", 0.1),
    "minibatch_size": Key("int", 32),
    "seed": Key("int", 0),
    "splice_left": Key("int", 9),
    "splice_right": Key("int", 9),
    "k": Key("int", 9),
    "passes": Key("int", 2),
    "feedback_mode": Key("choice", FEEDBACK_FREE_RUNNING, choices=FEEDBACK_MODES),
    "zero_recurrent": Key("bool", False),
    "record_timing": Key("bool", False),
}

EVAL_SCHEMA = {
    "checkpoint": Key("str", required=True),
    "corpus": Key("str", required=True),
    "mode": Key("choice", required=True, choices=("baseline", "rdsn", "bpsn")),
    "passes": Key("int", 2),
    "feedback_mode": Key("choice", FEEDBACK_FREE_RUNNING, choices=FEEDBACK_MODES),
    "splice_left": Key("int", 9),
    "splice_right": Key("int", 9),
    "per_utterance_csv": Key("str"),
}


def _ensure_parent_dir(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _write_text(path: str, text: str) -> None:
    _ensure_parent_dir(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise DataError(f"cannot write {path}: {e.strerror or e}")


def _reject_keys(present: set[str], keys: tuple[str, ...], reason: str) -> None:
    bad = sorted(present & set(keys))
    if bad:
        raise ConfigError(f"key {bad[0]!r} does not apply {reason}")


def cmd_gen_data(config_path: str) -> None:
    values, _ = load_config(config_path, GEN_SCHEMA)
    apply_env_seed(values)
    out_dir = values.pop("out_dir")
    cfg = GenConfig(**values)
    train, dev, test, smap = generate_corpus(cfg)
    os.makedirs(out_dir, exist_ok=True)
    for corpus in (train, dev, test):
        path = os.path.join(out_dir, f"{corpus.split}.corpus")
        try:
            save_corpus(corpus, path)
        except OSError as e:
            raise DataError(f"cannot write {path}: {e.strerror or e}")
        print(f"wrote {path} ({len(corpus.utterances)} utterances, "
              f"{corpus.num_frames} frames)")
    map_path = os.path.join(out_dir, "senone_map.txt")
    try:
        save_map(smap, map_path)
    except OSError as e:
        raise DataError(f"cannot write {map_path}: {e.strerror or e}")
    print(f"wrote {map_path} ({smap.num_senones} senones, "
          f"{smap.num_monophones} monophones)")


def _load_corpus_checked(path: str, split: str) -> Corpus:
    if not os.path.exists(path):
        raise DataError(f"corpus file not found: {path}")
    return load_corpus(path, split=split)


def _check_corpus_against(corpus: Corpus, num_senones: int, spliced_dim: int,
                          splice_cfg: SpliceConfig, what: str) -> None:
    if corpus.num_senones != num_senones:
        raise DataError(
            f"{what}: corpus has {corpus.num_senones} senones, model expects "
            f"{num_senones}"
        )
    got = splice_cfg.spliced_dim(corpus.feature_dim)
    if got != spliced_dim:
        raise DataError(
            f"{what}: spliced width {got} (feature dim {corpus.feature_dim}, "
            f"window {splice_cfg.width}) does not match model spliced width "
            f"{spliced_dim}"
        )


def _set_dropout(net: Mlp, rate: float) -> None:
    for i, layer in enumerate(net.layers):
        if layer.activation != ACT_SOFTMAX:
            net.layers[i] = type(layer)(layer.weights, layer.bias,
                                        layer.activation, rate)


class _TrainRun:
    """Everything cmd_train resolved from its config: the model to train,
    how to evaluate it, and how to snapshot it."""

    def __init__(self, kind: str, values: dict, train_corpus: Corpus,
                 splice_cfg: SpliceConfig, present: set[str]):
        self.kind = kind
        self.passes = values["passes"]
        self.feedback_mode = values["feedback_mode"]
        spliced_dim = splice_cfg.spliced_dim(train_corpus.feature_dim)
        init_rng = make_stream(values["seed"], STREAM_INIT)

        ckpt_in = values["checkpoint_in"]
        map_path = values["map"]
        smap_file = load_map(map_path) if map_path is not None else None

        if ckpt_in is not None:
            _reject_keys(present, ("hidden",),
                         "when resuming from checkpoint_in")
            if not os.path.exists(ckpt_in):
                raise DataError(f"checkpoint file not found: {ckpt_in}")
            ckpt = load_checkpoint(ckpt_in)
            if smap_file is not None and smap_file != ckpt.senone_map:
                raise DataError(
                    f"senone map {map_path} does not match the map stored in "
                    f"{ckpt_in}"
                )
            smap = ckpt.senone_map
            _check_corpus_against(train_corpus, smap.num_senones,
                                  ckpt.spliced_dim, splice_cfg, "train corpus")
            if kind == "baseline":
                if ckpt.k != 0:
                    raise DataError(
                        f"{ckpt_in} holds a stacking model (k={ckpt.k}); "
                        f"cannot resume it as baseline"
                    )
                self.net = ckpt.model
            elif ckpt.k == 0:
                # warm start: grow the trained feedforward net
                self.model = warm_start(ckpt.model, values["k"], smap, init_rng,
                                        zero_recurrent=values["zero_recurrent"])
            else:
                _reject_keys(present, ("zero_recurrent",),
                             "when resuming an already warm-started model")
                if "k" in present and values["k"] != ckpt.k:
                    raise ConfigError(
                        f"config k={values['k']} conflicts with checkpoint "
                        f"k={ckpt.k}"
                    )
                self.model = RdsnModel(ckpt.model, ckpt.k, smap)
        else:
            _reject_keys(present, ("zero_recurrent",),
                         "without a checkpoint_in to warm-start from")
            if smap_file is None:
                raise ConfigError(
                    "key 'map' is required when training from scratch"
                )
            smap = smap_file
            if train_corpus.num_senones != smap.num_senones:
                raise DataError(
                    f"train corpus has {train_corpus.num_senones} senones, "
                    f"map has {smap.num_senones}"
                )
            if kind == "baseline":
                self.net = build_mlp(spliced_dim, values["hidden"],
                                     smap.num_senones, values["dropout"], init_rng)
            else:
                rec_dim = values["k"] * smap.num_monophones
                net = build_mlp(spliced_dim + rec_dim, values["hidden"],
                                smap.num_senones, values["dropout"], init_rng)
                self.model = RdsnModel(net, values["k"], smap)

        if kind != "baseline":
            self.net = self.model.net
        self.smap = smap
        if "dropout" in present:
            _set_dropout(self.net, values["dropout"])
            if kind != "baseline":
                self.model = RdsnModel(self.net, self.model.k, smap)

    def evaluate(self, corpus: Corpus, splice_cfg: SpliceConfig):
        if self.kind == "baseline":
            return evaluate_baseline(self.net, corpus, splice_cfg)
        if self.kind == "rdsn":
            return rdsn_evaluate(self.model, corpus, splice_cfg)
        return bpsn_evaluate(self.model, corpus, splice_cfg, self.passes)

    def train_epoch(self, corpus: Corpus, splice_cfg: SpliceConfig,
                    train_cfg: TrainConfig, order_rng, dropout_rng):
        if self.kind == "baseline":
            return baseline_train_epoch(self.net, corpus, splice_cfg, train_cfg,
                                        order_rng, dropout_rng)
        if self.kind == "rdsn":
            return rdsn_train_epoch(self.model, corpus, splice_cfg, train_cfg,
                                    order_rng, dropout_rng,
                                    feedback_mode=self.feedback_mode)
        return bpsn_train_epoch(self.model, corpus, splice_cfg, self.passes,
                                train_cfg, order_rng, dropout_rng)

    def checkpoint(self, net: Mlp | None = None) -> Checkpoint:
        net = self.net if net is None else net
        k = 0 if self.kind == "baseline" else self.model.k
        return Checkpoint(net, k, self.smap)


def _save_checkpoint_file(ckpt: Checkpoint, path: str) -> None:
    _ensure_parent_dir(path)
    try:
        save_checkpoint(ckpt, path)
    except OSError as e:
        raise DataError(f"cannot write {path}: {e.strerror or e}")


def cmd_train(config_path: str) -> None:
    values, present = load_config(config_path, TRAIN_SCHEMA)
    apply_env_seed(values)
    kind = values["model"]
    if kind == "baseline":
        _reject_keys(present, ("k", "passes", "feedback_mode", "zero_recurrent"),
                     "to a baseline model")
    elif kind == "rdsn":
        _reject_keys(present, ("passes",), "to an rdsn model")
        RdsnConfig(k=values["k"], feedback_mode=values["feedback_mode"])
    else:
        _reject_keys(present, ("feedback_mode",), "to a bpsn model")
        BpsnConfig(k=values["k"], passes=values["passes"])

    splice_cfg = SpliceConfig(values["splice_left"], values["splice_right"])
    train_corpus = _load_corpus_checked(values["train_corpus"], "train")
    dev_corpus = _load_corpus_checked(values["dev_corpus"], "dev")
    if dev_corpus.feature_dim != train_corpus.feature_dim:
        raise DataError(
            f"dev corpus feature dim {dev_corpus.feature_dim} does not match "
            f"train corpus feature dim {train_corpus.feature_dim}"
        )
    train_cfg = TrainConfig(
        learning_rate=values["learning_rate"],
        epochs=values["epochs"],
        dropout_rate=values["dropout"],
        seed=values["seed"],
        minibatch_size=values["minibatch_size"],
    )
    run = _TrainRun(kind, values, train_corpus, splice_cfg, present)
    _check_corpus_against(dev_corpus, run.smap.num_senones,
                          run.checkpoint().spliced_dim, splice_cfg, "dev corpus")

    order_rng = make_stream(train_cfg.seed, STREAM_ORDER)
    dropout_rng = make_stream(train_cfg.seed, STREAM_DROPOUT)
    record_timing = values["record_timing"]

    rows = []
    best = None  # (dev_ce, epoch, net snapshot)

    def log_row(epoch: int, train_ce: float, dev_stats, seconds: float,
                per_pass=None) -> None:
        nonlocal best
        logged = seconds if record_timing else 0.0
        rows.append(f"{epoch},{train_ce!r},{dev_stats.mean_ce!r},"
                    f"{dev_stats.accuracy!r},{logged!r}")
        line = (f"epoch {epoch}  train_ce {train_ce:.6f}  "
                f"dev_ce {dev_stats.mean_ce:.6f}  "
                f"dev_acc {dev_stats.accuracy:.6f}  ({seconds:.1f}s)")
        print(line, flush=True)
        if per_pass is not None:
            print("  train per-pass ce: "
                  + ", ".join(f"pass {i + 1}: {ce:.6f}"
                              for i, ce in enumerate(per_pass)),
                  flush=True)
        if best is None or dev_stats.mean_ce < best[0]:
            best = (dev_stats.mean_ce, epoch, run.net.copy())

    t0 = time.perf_counter()
    initial_train = run.evaluate(train_corpus, splice_cfg)
    initial_dev = run.evaluate(dev_corpus, splice_cfg)
    log_row(0, initial_train.mean_ce, initial_dev, time.perf_counter() - t0)

    for epoch in range(1, train_cfg.epochs + 1):
        t0 = time.perf_counter()
        stats = run.train_epoch(train_corpus, splice_cfg, train_cfg,
                                order_rng, dropout_rng)
        dev_stats = run.evaluate(dev_corpus, splice_cfg)
        log_row(epoch, stats.train_ce, dev_stats, time.perf_counter() - t0,
                per_pass=stats.per_pass_ce)

    _write_text(values["metrics_out"],
                "epoch,train_ce,dev_ce,dev_acc,seconds\n" + "\n".join(rows) + "\n")
    print(f"wrote metrics {values['metrics_out']}")

    final_path = values["checkpoint_out"]
    _save_checkpoint_file(run.checkpoint(), final_path)
    print(f"wrote checkpoint {final_path}")
    best_path = final_path + ".best"
    _save_checkpoint_file(run.checkpoint(best[2]), best_path)
    print(f"wrote best checkpoint {best_path} "
          f"(dev_ce {best[0]:.6f} at epoch {best[1]})")


def _per_utterance_rows(evaluate_one, corpus: Corpus) -> str:
    lines = ["utt_id,frames,mean_ce,accuracy"]
    for utt in corpus.utterances:
        sub = Corpus([utt], corpus.num_senones, corpus.feature_dim)
        stats = evaluate_one(sub)
        lines.append(f"{utt.utt_id},{stats.frames},{stats.mean_ce!r},"
                     f"{stats.accuracy!r}")
    return "\n".join(lines) + "\n"


def cmd_eval(config_path: str) -> None:
    values, present = load_config(config_path, EVAL_SCHEMA)
    mode = values["mode"]
    if mode == "baseline":
        _reject_keys(present, ("passes", "feedback_mode"), "to baseline mode")
    elif mode == "rdsn":
        _reject_keys(present, ("passes",), "to rdsn mode")
    else:
        _reject_keys(present, ("feedback_mode",), "to bpsn mode")
        if values["passes"] < 2:
            raise ConfigError(f"passes must be >= 2, got {values['passes']}")

    if not os.path.exists(values["checkpoint"]):
        raise DataError(f"checkpoint file not found: {values['checkpoint']}")
    ckpt = load_checkpoint(values["checkpoint"])
    corpus = _load_corpus_checked(values["corpus"], "eval")
    splice_cfg = SpliceConfig(values["splice_left"], values["splice_right"])
    _check_corpus_against(corpus, ckpt.num_senones, ckpt.spliced_dim,
                          splice_cfg, "eval corpus")

    if mode == "baseline":
        if ckpt.k != 0:
            raise DataError(
                f"checkpoint holds a stacking model (k={ckpt.k}); its input "
                f"width {ckpt.model.input_dim} exceeds the spliced width "
                f"{ckpt.spliced_dim}"
            )
        evaluate_one = lambda c: evaluate_baseline(ckpt.model, c, splice_cfg)
    else:
        if ckpt.k == 0:
            raise DataError(
                f"checkpoint holds a plain feedforward model (k=0); "
                f"cannot evaluate it in {mode} mode"
            )
        model = RdsnModel(ckpt.model, ckpt.k, ckpt.senone_map)
        if mode == "rdsn":
            evaluate_one = lambda c: rdsn_evaluate(
                model, c, splice_cfg, feedback_mode=values["feedback_mode"])
        else:
            evaluate_one = lambda c: bpsn_evaluate(
                model, c, splice_cfg, values["passes"])

    stats = evaluate_one(corpus)
    print(f"frames {stats.frames}")
    if mode == "bpsn":
        for i, ce in enumerate(stats.per_pass_ce):
            print(f"pass_{i + 1}_ce {ce!r}")
    print(f"mean_ce {stats.mean_ce!r}")
    print(f"accuracy {stats.accuracy!r}")

    if values["per_utterance_csv"] is not None:
        _write_text(values["per_utterance_csv"],
                    _per_utterance_rows(evaluate_one, corpus))
        print(f"wrote per-utterance metrics {values['per_utterance_csv']}")


def cmd_inspect_checkpoint(path: str) -> None:
    if not os.path.exists(path):
        raise DataError(f"checkpoint file not found: {path}")
    ckpt = load_checkpoint(path)
    print(f"layers {len(ckpt.model.layers)}")
    for i, layer in enumerate(ckpt.model.layers):
        print(f"layer {i} shape {layer.out_dim}x{layer.in_dim} "
              f"activation {layer.activation} dropout {layer.dropout_rate!r}")
    print(f"k {ckpt.k}")
    print(f"num_senones {ckpt.num_senones}")
    print(f"num_monophones {ckpt.num_monophones}")
    print(f"spliced_dim {ckpt.spliced_dim}")
    print(f"input_dim {ckpt.model.input_dim}")
    print(f"params {ckpt.model.num_params()}")


class _Parser(argparse.ArgumentParser):
    """Maps argparse usage errors onto the config-error exit code."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="stacknet",
        description="Frame-level senone classifiers with phoneme-posterior "
                    "feedback: data generation, training, and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("gen-data", help="generate a synthetic corpus")
    p.add_argument("config", help="flat key = value config file")
    p = sub.add_parser("train", help="train a baseline, rdsn, or bpsn model")
    p.add_argument("config", help="flat key = value config file")
    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    p.add_argument("config", help="flat key = value config file")
    p = sub.add_parser("inspect-checkpoint", help="print checkpoint geometry")
    p.add_argument("checkpoint", help="checkpoint file")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "gen-data":
            cmd_gen_data(args.config)
        elif args.command == "train":
            cmd_train(args.config)
        elif args.command == "eval":
            cmd_eval(args.config)
        else:
            cmd_inspect_checkpoint(args.checkpoint)
        return 0
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except StacknetError as e:  # pragma: no cover - safety net
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
