"""Command-line entry points.

Subcommands: preprocess, pretrain, finetune, eval, schedule-dump,
inspect-checkpoint. Exit codes: 0 success, 1 config error, 2 data error,
3 runtime failure. All artifacts land under the run's output directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .checkpoint import CheckpointError, load_checkpoint, restore_model
from .config import ConfigError, RunConfig, load_run_config
from .datapipe.pipeline import DataError, run_preprocess
from .datapipe.tokenizer import Tokenizer
from .model import FineTuneMode, ModelConfig, UnifiedModel
from .schedule import dump_table
from .trainer import finetune, pretrain
from .zeroshot.harness import read_items, run_eval, write_results

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


def _cmd_preprocess(run: RunConfig, args) -> int:
    if not run.datasets:
        raise ConfigError("no datasets configured")
    stats = run_preprocess(run.datasets, run.kg_path, run.data_dir, run.preprocess, run.seed)
    print(json.dumps(stats.to_dict(), sort_keys=True, indent=2))
    return EXIT_OK


def _cmd_pretrain(run: RunConfig, args) -> int:
    result = pretrain(run, resume=args.resume)
    last = result["rows"][-1] if result["rows"] else {}
    print(json.dumps({"steps": result["steps"], "final_checkpoint": result["final_checkpoint"],
                      "last": {k: last.get(k) for k in ("step", "task", "loss")}},
                     sort_keys=True, indent=2))
    return EXIT_OK


def _cmd_finetune(run: RunConfig, args) -> int:
    mode = FineTuneMode(update_universal=args.update_universal,
                        update_nlu_head=args.update_nlu_head,
                        update_nlg_head=args.update_nlg_head)
    result = finetune(run, args.checkpoint, mode, args.task, args.steps, lr=args.lr)
    print(json.dumps({"steps": result["steps"],
                      "final_checkpoint": result["final_checkpoint"]}, indent=2))
    return EXIT_OK


def _cmd_eval(run: RunConfig, args) -> int:
    vocab_path = run.data_dir / "vocab.json"
    if not vocab_path.exists():
        raise DataError(f"no vocabulary at {vocab_path}; run preprocess first")
    tokenizer = Tokenizer.from_json(vocab_path.read_text(encoding="utf-8"))
    ckpt = load_checkpoint(args.checkpoint)
    if ckpt.tokenizer_digest != tokenizer.digest():
        raise DataError("checkpoint vocabulary does not match the tokenizer")
    model = UnifiedModel(ModelConfig(**ckpt.config), seed=run.seed)
    restore_model(model, ckpt)
    items = read_items(args.items)
    summary = run_eval(model, tokenizer, items, beam_width=args.beam_width,
                       span_only=args.span_only)
    write_results(summary, run.eval_dir)
    print(json.dumps(summary.to_dict(), sort_keys=True, indent=2))
    return EXIT_OK


def _cmd_schedule_dump(run: RunConfig, args) -> int:
    rows = dump_table(run.schedule, every=args.every)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            for row in rows:
                f.write(json.dumps(row, sort_keys=True) + "\n")
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        for row in rows:
            print(json.dumps(row, sort_keys=True))
    return EXIT_OK


def _cmd_inspect(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    info = {
        "config": ckpt.config,
        "tokenizer_digest": ckpt.tokenizer_digest.hex(),
        "optimizer_step": ckpt.opt_step if ckpt.has_optimizer else None,
        "groups": {g: {"parameters": len(ps), "elements": int(sum(a.size for a in ps.values()))}
                   for g, ps in ckpt.groups.items()},
    }
    print(json.dumps(info, sort_keys=True, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trunklm",
                                description="Multi-paradigm LM pretraining at desk scale.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", required=True, help="run config JSON")

    sp = sub.add_parser("preprocess", help="corpus -> sample archive + stats")
    with_config(sp)

    sp = sub.add_parser("pretrain", help="multi-task pretraining run")
    with_config(sp)
    sp.add_argument("--resume", default=None, help="checkpoint to resume from")

    sp = sub.add_parser("finetune", help="single-task training from a checkpoint")
    with_config(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--task", required=True)
    sp.add_argument("--steps", type=int, default=100)
    sp.add_argument("--lr", type=float, default=None)
    sp.add_argument("--update-universal", action="store_true")
    sp.add_argument("--update-nlu-head", action="store_true")
    sp.add_argument("--update-nlg-head", action="store_true")

    sp = sub.add_parser("eval", help="zero-shot evaluation of a checkpoint")
    with_config(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--items", required=True, help="newline-delimited eval items")
    sp.add_argument("--beam-width", type=int, default=8)
    sp.add_argument("--span-only", action="store_true",
                    help="score only candidate tokens instead of the full filled text")

    sp = sub.add_parser("schedule-dump", help="emit the per-step factor table")
    with_config(sp)
    sp.add_argument("--every", type=int, default=1)
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("inspect-checkpoint", help="print checkpoint metadata")
    sp.add_argument("checkpoint")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "inspect-checkpoint":
            return _cmd_inspect(args)
        run = load_run_config(args.config)
        handler = {
            "preprocess": _cmd_preprocess,
            "pretrain": _cmd_pretrain,
            "finetune": _cmd_finetune,
            "eval": _cmd_eval,
            "schedule-dump": _cmd_schedule_dump,
        }[args.command]
        return handler(run, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CheckpointError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # noqa: BLE001 - CLI boundary
        log.exception("run failed")
        print(f"runtime failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
