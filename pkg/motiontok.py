#!/usr/bin/env python3
"""
MOTIONTOK Command Line
Synthetic data, tokenizer and language-model training, tokenize/detokenize
round trips and evaluation reports.

Usage:
    motiontok init-config --out run.ini [--full-scale]       Write the default run configuration
    motiontok gen-data --out data/ --count 10 --frames 16    Write synthetic MSKL clips
    motiontok train-tokenizer --config run.ini --out runs/   Train the motion tokenizer
    motiontok train-lm --config run.ini --tokenizer-ckpt runs/tokenizer.mtck --out runs/
    motiontok tokenize --ckpt runs/tokenizer.mtck --in clip.mskl --out clip.tokens.json
    motiontok detokenize --ckpt runs/tokenizer.mtck --in clip.tokens.json --out clip.mskl
    motiontok eval --config run.ini --task mp --tokenizer-ckpt ... --lm-ckpt ... --report reports/
    motiontok ablate-tokenizer --config run.ini --seeds 0,1,2 --out runs/

Exit codes: 0 success, 1 other failure, 2 configuration error, 3 data error,
4 numeric failure.
"""

import sys
import os
import json
import logging
import argparse
from typing import List, Optional, Tuple

import numpy as np
import torch

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import config
from errors import MotionTokError, ConfigError, DataError
from runconfig import RunConfig
from core.skeleton import CoordinateSpace, CameraModel
from core.dataset import (
    MotionClip, generate_clips, save_clips, load_clips, chunk_clips, camera_for,
    clip_filename, CAMERAS_FILENAME, MANIFEST_FILENAME,
)
from core.geometry import preprocess, unproject, root_depths
from core.metrics import mpjpe
from core.mskl import read_mskl, write_mskl
from numerics.checkpoint import save_checkpoint, load_checkpoint
from vgmt.model import VisionGuidedTokenizer
from vgmt.tokens import TokenGrid
from vgmt.trainer import train_tokenizer, run_tokenizer_ablation, write_train_log
from motion_lm.vocabulary import MotionVocabulary
from motion_lm.transformer import MotionLM
from motion_lm.trainer import train_unified
from motion_lm.data import build_task_examples, samples_of
from motion_lm.generation import write_transcripts
from evalsuite.tasks import EVALUATORS, ReplayOracle, LmPredictor, group_by_label
from evalsuite.codebook import codebook_usage, codebook_cosine_hist, semantic_spheres
from evalsuite.export import (
    write_json, write_report_json, write_report_text, report_text,
    write_usage_csv, write_cosine_csv, write_spheres_csv,
)

logger = logging.getLogger("motiontok")

TOKENIZER_CKPT = f"tokenizer{config.CHECKPOINT_SUFFIX}"
LM_CKPT = f"motion_lm{config.CHECKPOINT_SUFFIX}"


# ============================================================================
# HELPERS
# ============================================================================

def setup_logging(verbose: bool = False) -> None:
    level = logging.DEBUG if verbose else getattr(logging, config.LOG_LEVEL)
    logging.basicConfig(level=level, format=config.LOG_FORMAT)


_run_log_handler: Optional[logging.Handler] = None


def add_run_log(directory: str) -> None:
    """Mirror log records into a file next to the run's artifacts (one run log at a time)."""
    global _run_log_handler
    os.makedirs(directory, exist_ok=True)
    root = logging.getLogger()
    if _run_log_handler is not None:
        root.removeHandler(_run_log_handler)
        _run_log_handler.close()
    _run_log_handler = logging.FileHandler(os.path.join(directory, config.LOG_FILE))
    _run_log_handler.setFormatter(logging.Formatter(config.LOG_FORMAT))
    root.addHandler(_run_log_handler)


def apply_threads(requested: int = 0) -> None:
    threads = requested or config.get_thread_count()
    if threads > 0:
        torch.set_num_threads(threads)
        logger.debug(f"Using {threads} threads")


def load_run_config(path: Optional[str]) -> RunConfig:
    return RunConfig.load(path) if path else RunConfig()


def output_dir(args, cfg: RunConfig) -> str:
    return args.out or cfg['run']['out_dir'] or os.path.join(config.get_data_dir(), "runs")


def load_dataset(cfg: RunConfig) -> List[MotionClip]:
    data = cfg['data']
    if data['source'] == "mskl":
        return load_clips(data['path'])
    return generate_clips(data['count'], data['frames'], seed=cfg.seed)


def split_dataset(clips: List[MotionClip], holdout: float) -> Tuple[List[MotionClip], List[MotionClip]]:
    """(train, held-out) split; the held-out part is the tail of the list."""
    n_eval = int(round(len(clips) * holdout)) if len(clips) > 1 else 0
    if n_eval == 0:
        return clips, clips
    return clips[:-n_eval], clips[-n_eval:]


def load_tokenizer(path: str) -> Tuple[VisionGuidedTokenizer, dict]:
    state, metadata = load_checkpoint(path)
    return VisionGuidedTokenizer.from_checkpoint(state, metadata), metadata


def load_lm(path: str) -> Tuple[MotionLM, MotionVocabulary, dict]:
    state, metadata = load_checkpoint(path)
    model = MotionLM.from_checkpoint(state, metadata)
    return model, MotionVocabulary.from_dict(metadata['vocab']), metadata


def check_codebook_size(tokenizer: VisionGuidedTokenizer, num_codes: int) -> None:
    if tokenizer.cfg.num_codes != num_codes:
        raise ConfigError(
            f"Tokenizer has K={tokenizer.cfg.num_codes} codes, the language-model vocabulary "
            f"expects K={num_codes}"
        )


def parse_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_init_config(args) -> int:
    if os.path.exists(args.out) and not args.force:
        raise DataError(f"{args.out} already exists (use --force to overwrite)")
    cfg = RunConfig(config.full_scale_overrides() if args.full_scale else None)
    cfg.save(args.out)
    print(f"✓ Wrote default run configuration to {args.out} ({cfg.config_hash()})")
    return 0


def cmd_gen_data(args) -> int:
    cfg = load_run_config(args.config)
    if args.count < 1 or args.frames < 2:
        raise DataError(f"Need at least one clip of two frames, got --count {args.count} --frames {args.frames}")
    existing = [name for name in os.listdir(args.out) if name.endswith(config.POSE_SUFFIX)] \
        if os.path.isdir(args.out) else []
    if existing and not args.force:
        raise DataError(f"{args.out} already holds {len(existing)} pose files (use --force to overwrite)")
    if args.force:
        for name in existing:
            os.remove(os.path.join(args.out, name))

    clips = generate_clips(args.count, args.frames, seed=args.seed)
    save_clips(args.out, clips)
    write_json(os.path.join(args.out, MANIFEST_FILENAME), {
        'seed': args.seed,
        'count': args.count,
        'frames': args.frames,
        'files': [clip_filename(i) for i in range(args.count)],
        'cameras': CAMERAS_FILENAME,
        'config_hash': cfg.config_hash(),
    })
    print(f"✓ Wrote {args.count} clips of {args.frames} frames to {args.out}")
    return 0


def cmd_train_tokenizer(args) -> int:
    cfg = load_run_config(args.config)
    apply_threads(args.threads or cfg['run']['threads'])
    out = output_dir(args, cfg)
    add_run_log(out)
    config_hash = cfg.config_hash()

    train, _ = split_dataset(load_dataset(cfg), cfg['data']['holdout'])
    chunks = chunk_clips(train, config.CLIP_FRAMES)
    logger.info(f"Tokenizer data: {len(chunks)} chunks of {config.CLIP_FRAMES} frames from {len(train)} clips")

    result = train_tokenizer(chunks, cfg.vgmt_config(), cfg.tokenizer_train_config(), progress=args.progress)
    model = result.model
    model.check_finite()
    model.codebook.check_finite()

    ckpt = os.path.join(out, TOKENIZER_CKPT)
    save_checkpoint(ckpt, model.state_dict(), model.metadata(config_hash))
    write_train_log(os.path.join(out, "tokenizer_log.jsonl"), result.log)
    with open(os.path.join(out, "codebook.json"), 'w') as f:
        f.write(model.codebook.to_json(config_hash))

    final = result.final
    print(f"✓ Tokenizer saved to {ckpt}")
    print(f"  Reconstruction MPJPE: {final.recon_mpjpe_mm:.2f} mm")
    print(f"  Codebook usage: " + ", ".join(f"{k} {v}" for k, v in final.usage.items()))
    return 0


def cmd_train_lm(args) -> int:
    cfg = load_run_config(args.config)
    if args.tasks:
        cfg = cfg.with_tasks(parse_list(args.tasks))
    apply_threads(args.threads or cfg['run']['threads'])
    out = output_dir(args, cfg)
    add_run_log(out)
    config_hash = cfg.config_hash()

    tokenizer, tok_meta = load_tokenizer(args.tokenizer_ckpt)
    vocab = MotionVocabulary.build(cfg['vgmt']['num_codes'])
    check_codebook_size(tokenizer, vocab.num_codes)

    train_cfg = cfg.unified_train_config()
    train, _ = split_dataset(load_dataset(cfg), cfg['data']['holdout'])
    examples = build_task_examples(train, tokenizer, vocab, train_cfg.active_tasks, cfg.task_data_config())

    result = train_unified(samples_of(examples), vocab, cfg.lm_config(vocab.size, tokenizer.cfg),
                           train_cfg, progress=args.progress)
    model = result.model
    model.check_finite()

    ckpt = os.path.join(out, LM_CKPT)
    tokenizer_ref = {'num_codes': tokenizer.cfg.num_codes, 'config_hash': tok_meta.get('config_hash', "")}
    save_checkpoint(ckpt, model.state_dict(), model.metadata(vocab.to_dict(), config_hash, tokenizer_ref))
    write_train_log(os.path.join(out, "lm_log.jsonl"), result.log)

    print(f"✓ Motion language model saved to {ckpt}")
    print(f"  Final loss: {result.final.loss:.4f} "
          + " ".join(f"{t} {v:.4f}" for t, v in result.final.task_losses.items()))
    return 0


def cmd_tokenize(args) -> int:
    apply_threads(args.threads)
    tokenizer, metadata = load_tokenizer(args.ckpt)
    seq = read_mskl(args.input)
    extra = {}
    if seq.coordinate_space is CoordinateSpace.CAMERA_MM:
        cam = camera_for(args.input)
        px = preprocess(seq, cam)
        extra = {'camera': cam.to_dict(), 'root_depth_mm': root_depths(seq).tolist()}
    else:
        px = seq

    grid = tokenizer.tokenize(px)
    data = grid.to_dict(metadata.get('config_hash', ""))
    data.update(extra)
    write_json(args.out, data)

    recon = tokenizer.decode(grid)
    if extra:
        error = mpjpe(unproject(recon, CameraModel.from_dict(extra['camera']), extra['root_depth_mm']), seq)
        print(f"✓ {grid.num_windows} x {grid.num_joints} tokens written to {args.out}")
        print(f"  Reconstruction MPJPE: {error:.2f} mm")
    else:
        error = mpjpe(recon, px)
        print(f"✓ {grid.num_windows} x {grid.num_joints} tokens written to {args.out}")
        print(f"  Reconstruction error: {error:.3f} (pixel_rootrel units)")
    return 0


def cmd_detokenize(args) -> int:
    apply_threads(args.threads)
    tokenizer, _ = load_tokenizer(args.ckpt)
    try:
        with open(args.input) as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"Cannot read token file {args.input}: {e}")
    grid = TokenGrid.from_dict(data)
    seq = tokenizer.decode(grid)
    if 'root_depth_mm' in data:
        cam = CameraModel.from_dict(data.get('camera', CameraModel().to_dict()))
        seq = unproject(seq, cam, data['root_depth_mm'])
    write_mskl(args.out, seq)
    print(f"✓ {seq.num_frames} frames ({seq.coordinate_space.value}) written to {args.out}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_run_config(args.config)
    apply_threads(args.threads or cfg['run']['threads'])
    if not args.task and not args.codebook_report:
        raise ConfigError("Nothing to evaluate: pass --task and/or --codebook-report")
    os.makedirs(args.report, exist_ok=True)
    add_run_log(args.report)
    config_hash = cfg.config_hash()
    ev = cfg['eval']

    tokenizer, _ = load_tokenizer(args.tokenizer_ckpt)
    if args.data:
        clips = load_clips(args.data)
    else:
        _, clips = split_dataset(load_dataset(cfg), cfg['data']['holdout'])

    if args.task:
        if args.oracle:
            vocab = MotionVocabulary.build(tokenizer.cfg.num_codes)
            predictor = ReplayOracle(vocab)
        else:
            if not args.lm_ckpt:
                raise ConfigError("--lm-ckpt is required unless --oracle is given")
            model, vocab, _ = load_lm(args.lm_ckpt)
            predictor = LmPredictor(model, vocab, cfg.decode_config(), config_hash)
        check_codebook_size(tokenizer, vocab.num_codes)

        examples = build_task_examples(clips, tokenizer, vocab, [args.task], cfg.task_data_config())[args.task]
        kwargs = {'strict': ev['strict'], 'config_hash': config_hash}
        if args.task == "mp":
            kwargs['cumulative'] = ev['cumulative']

        def evaluator(items):
            return EVALUATORS[args.task](predictor, tokenizer, items, **kwargs)

        report = evaluator(examples)
        if ev['group_by_label']:
            report.groups = group_by_label(examples, evaluator)

        write_report_json(os.path.join(args.report, f"{args.task}_report.json"), report)
        write_report_text(os.path.join(args.report, f"{args.task}_report.txt"), report)
        if isinstance(predictor, LmPredictor) and args.transcripts:
            write_transcripts(os.path.join(args.report, f"{args.task}_transcripts.jsonl"), predictor.transcripts)
        print(report_text(report), end="")

    if args.codebook_report:
        usage = codebook_usage(tokenizer, clips, config_hash)
        hist = codebook_cosine_hist(tokenizer.codebook, ev['cosine_bins'], config_hash)
        spheres = semantic_spheres(tokenizer, clips, ev['sphere_joint'])
        write_usage_csv(os.path.join(args.report, "codebook_usage.csv"), usage)
        write_cosine_csv(os.path.join(args.report, "codebook_cosine.csv"), hist)
        write_spheres_csv(os.path.join(args.report, "codebook_spheres.csv"), spheres)
        write_json(os.path.join(args.report, "codebook_report.json"), {
            'usage': usage.to_dict(),
            'cosine': hist.to_dict(),
            'sphere_joint': ev['sphere_joint'],
            'spheres_codes': len(spheres),
            'config_hash': config_hash,
        })
        print("✓ Codebook usage: " + ", ".join(f"{k} {v}" for k, v in usage.buckets.items()))
    return 0


def cmd_ablate_tokenizer(args) -> int:
    cfg = load_run_config(args.config)
    apply_threads(args.threads or cfg['run']['threads'])
    out = output_dir(args, cfg)
    add_run_log(out)
    try:
        seeds = [int(s) for s in parse_list(args.seeds)]
    except ValueError:
        raise ConfigError(f"--seeds must be a comma-separated list of integers, got {args.seeds!r}")
    if not seeds:
        raise ConfigError("--seeds is empty")

    train, _ = split_dataset(load_dataset(cfg), cfg['data']['holdout'])
    chunks = chunk_clips(train, config.CLIP_FRAMES)
    report = run_tokenizer_ablation(chunks, cfg.vgmt_config(), cfg.tokenizer_train_config(), seeds,
                                    progress=args.progress)
    data = report.to_dict()
    data['config_hash'] = cfg.config_hash()
    write_json(os.path.join(out, "ablation.json"), data)

    for mode, errors in report.errors.items():
        print(f"  {mode:<9} " + "  ".join(f"{e:8.2f}" for e in errors) + f"   mean {np.mean(errors):.2f} mm")
    status = "holds" if report.trend_holds else "does not hold"
    print(f"✓ Ordering fused <= skeleton <= visual {status} ({report.failures} seed(s) out of order)")
    return 0


COMMANDS = {
    'init-config': cmd_init_config,
    'gen-data': cmd_gen_data,
    'train-tokenizer': cmd_train_tokenizer,
    'train-lm': cmd_train_lm,
    'tokenize': cmd_tokenize,
    'detokenize': cmd_detokenize,
    'eval': cmd_eval,
    'ablate-tokenizer': cmd_ablate_tokenizer,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=config.CLI_NAME,
        description=f'{config.CLIENT_NAME} - motion tokenizer and motion language model',
        formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
    parser.add_argument('--threads', type=int, default=0, help='Cap torch threads (overrides MOTIONTOK_THREADS)')
    parser.add_argument('--progress', action='store_true', help='Show progress bars while training')
    subparsers = parser.add_subparsers(dest='command', help='Commands')

    # init-config
    p_init = subparsers.add_parser('init-config', help='Write the default run configuration')
    p_init.add_argument('--out', required=True, help='Output file')
    p_init.add_argument('--force', action='store_true', help='Overwrite an existing file')
    p_init.add_argument('--full-scale', action='store_true',
                        help='Use the published codebook and fusion block sizes')

    # gen-data
    p_gen = subparsers.add_parser('gen-data', help='Write synthetic MSKL clips')
    p_gen.add_argument('--out', required=True, help='Output directory')
    p_gen.add_argument('--count', type=int, default=200, help='Number of clips')
    p_gen.add_argument('--frames', type=int, default=config.LM_CLIP_FRAMES, help='Frames per clip')
    p_gen.add_argument('--seed', type=int, default=0, help='Random seed')
    p_gen.add_argument('--config', help='Run configuration recorded in the manifest')
    p_gen.add_argument('--force', action='store_true', help='Replace existing pose files')

    # train-tokenizer
    p_tok = subparsers.add_parser('train-tokenizer', help='Train the motion tokenizer')
    p_tok.add_argument('--config', help='Run configuration (defaults when omitted)')
    p_tok.add_argument('--out', help='Output directory (default: [run] out_dir or $MOTIONTOK_HOME/runs)')

    # train-lm
    p_lm = subparsers.add_parser('train-lm', help='Train the motion language model')
    p_lm.add_argument('--config', help='Run configuration (defaults when omitted)')
    p_lm.add_argument('--tokenizer-ckpt', required=True, help='Frozen tokenizer checkpoint')
    p_lm.add_argument('--tasks', help='Comma-separated tasks, e.g. pe,mp,mib or mp')
    p_lm.add_argument('--out', help='Output directory (default: [run] out_dir or $MOTIONTOK_HOME/runs)')

    # tokenize / detokenize
    p_enc = subparsers.add_parser('tokenize', help='MSKL clip -> token JSON')
    p_enc.add_argument('--ckpt', required=True, help='Tokenizer checkpoint')
    p_enc.add_argument('--in', dest='input', required=True, help='Input MSKL file')
    p_enc.add_argument('--out', required=True, help='Output token JSON')

    p_dec = subparsers.add_parser('detokenize', help='Token JSON -> MSKL clip')
    p_dec.add_argument('--ckpt', required=True, help='Tokenizer checkpoint')
    p_dec.add_argument('--in', dest='input', required=True, help='Input token JSON')
    p_dec.add_argument('--out', required=True, help='Output MSKL file')

    # eval
    p_eval = subparsers.add_parser('eval', help='Evaluate a task and/or the codebook')
    p_eval.add_argument('--config', help='Run configuration (defaults when omitted)')
    p_eval.add_argument('--task', choices=config.TASKS, help='Task to evaluate')
    p_eval.add_argument('--tokenizer-ckpt', required=True, help='Tokenizer checkpoint')
    p_eval.add_argument('--lm-ckpt', help='Language-model checkpoint')
    p_eval.add_argument('--oracle', action='store_true', help='Replay ground-truth responses instead of a model')
    p_eval.add_argument('--data', help='Directory of MSKL clips (default: held-out part of the run data)')
    p_eval.add_argument('--report', required=True, help='Report directory')
    p_eval.add_argument('--transcripts', action='store_true', help='Write generation transcripts')
    p_eval.add_argument('--codebook-report', action='store_true', help='Write codebook usage, cosine and sphere CSVs')

    # ablate-tokenizer
    p_abl = subparsers.add_parser('ablate-tokenizer', help='Fused / skeleton / visual stream ablation')
    p_abl.add_argument('--config', help='Run configuration (defaults when omitted)')
    p_abl.add_argument('--seeds', default="0,1,2", help='Comma-separated seeds')
    p_abl.add_argument('--out', help='Output directory (default: [run] out_dir or $MOTIONTOK_HOME/runs)')

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    handler = COMMANDS.get(args.command)
    if handler is None:
        parser.print_help()
        return 0

    try:
        return handler(args)
    except MotionTokError as e:
        logger.error(f"{type(e).__name__}: {e.message}")
        return e.exit_code
    except Exception:
        logger.exception(f"{args.command} failed")
        return MotionTokError.EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
