"""Command-line front end.

Subcommands: features, mix, train, enhance, eval, dcor.  Exit codes:
0 success, 1 validation error, 2 runtime error.  Every command is
deterministic given its inputs and seed; randomness fans out from the
top-level seed per processed item.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import audio, dcor, evaluate, featio, features
from .errors import ConfigError, SkdaeError
from .evaluate import feature_mse_report, training_trajectory_csv
from .features import merge_batches, stack_context
from .model import (
    SkDaeModel,
    TrainConfig,
    VARIANTS,
    enhance,
    load_checkpoint,
    save_checkpoint,
    train,
)

logger = logging.getLogger("skdae")

MANIFEST_FIELDS = ["output", "source", "noise", "snr_db", "noise_offset"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # Argparse exits with status 2 on bad usage; the exit-code contract
    # reserves 2 for runtime errors, so route usage problems to 1.
    def error(self, message):
        raise _UsageError(message)


def _wav_files(directory: Path):
    return sorted(p for p in directory.iterdir() if p.suffix.lower() == ".wav")


def _feature_files(directory: Path):
    return sorted(directory.glob("*.dcdf"))


def cmd_features(args) -> int:
    audio_dir = Path(args.audio_dir)
    out_dir = Path(args.out_dir)
    if not audio_dir.is_dir():
        raise ConfigError(f"audio directory does not exist: {audio_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    skipped = [p for p in sorted(audio_dir.iterdir()) if p.is_file() and p.suffix.lower() != ".wav"]
    for p in skipped:
        logger.warning("skipping non-WAV file %s", p.name)
    wavs = _wav_files(audio_dir)
    if not wavs:
        logger.warning("no WAV files found in %s", audio_dir)
        return 0
    failures = 0
    for path in wavs:
        try:
            utterance = audio.read_wav(path)
            fm = features.normalize_per_utterance(features.log_mel_features(utterance))
            featio.save_features(fm, out_dir / f"{path.stem}.dcdf")
            if args.csv:
                featio.features_to_csv(fm, out_dir / f"{path.stem}.csv")
        except SkdaeError as exc:
            logger.error("failed on %s: %s", path.name, exc)
            failures += 1
    if failures:
        logger.error("%d of %d files failed", failures, len(wavs))
        return 2
    logger.info("wrote features for %d files to %s", len(wavs), out_dir)
    return 0


def cmd_mix(args) -> int:
    clean_dir = Path(args.clean_dir)
    out_dir = Path(args.out_dir)
    if not clean_dir.is_dir():
        raise ConfigError(f"clean directory does not exist: {clean_dir}")
    noise_paths = [Path(p) for p in args.noise]
    missing = [str(p) for p in noise_paths if not p.is_file()]
    if missing:
        raise ConfigError([f"noise file does not exist: {p}" for p in missing])
    out_dir.mkdir(parents=True, exist_ok=True)
    clean_paths = _wav_files(clean_dir)
    if not clean_paths:
        logger.warning("no WAV files found in %s", clean_dir)
        return 0

    noises = {p: audio.read_wav(p) for p in noise_paths}
    rows = []
    failures = 0
    index = 0
    for clean_path in clean_paths:
        speech = audio.read_wav(clean_path)
        for noise_path in noise_paths:
            for snr_db in args.snr:
                name = f"{clean_path.stem}__{noise_path.stem}__snr{snr_db:g}dB.wav"
                try:
                    noise = noises[noise_path]
                    if speech.sample_rate != noise.sample_rate:
                        raise SkdaeError(
                            f"sample rates differ: {speech.sample_rate} vs "
                            f"{noise.sample_rate}"
                        )
                    segment, offset = audio.noise_segment(
                        noise, len(speech), [args.seed, index]
                    )
                    gain = audio.snr_gain(speech.samples, segment, snr_db)
                    mixed = audio.Utterance(
                        speech.samples + gain * segment, speech.sample_rate
                    )
                    audio.write_wav(out_dir / name, mixed)
                    rows.append(
                        {
                            "output": name,
                            "source": clean_path.name,
                            "noise": noise_path.name,
                            "snr_db": f"{snr_db:g}",
                            "noise_offset": offset,
                        }
                    )
                except SkdaeError as exc:
                    logger.error("failed mixing %s: %s", name, exc)
                    failures += 1
                index += 1
    with open(out_dir / "manifest.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    logger.info("wrote %d mixed files and manifest to %s", len(rows), out_dir)
    return 2 if failures else 0


def _load_manifest(path: Path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(MANIFEST_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ConfigError(f"manifest {path} is missing columns: {sorted(missing)}")
        return list(reader)


def _train_pairs(config, problems):
    """Resolve (noisy, clean) feature file pairs from the manifest, or by
    matching stems when no manifest is given."""
    noisy_dir = Path(config["noisy_features"])
    clean_dir = Path(config["clean_features"])
    pairs = []
    if config.get("manifest"):
        for row in _load_manifest(Path(config["manifest"])):
            noisy = noisy_dir / f"{Path(row['output']).stem}.dcdf"
            clean = clean_dir / f"{Path(row['source']).stem}.dcdf"
            pairs.append((noisy, clean))
    else:
        for noisy in _feature_files(noisy_dir):
            clean = clean_dir / noisy.name
            pairs.append((noisy, clean))
    for noisy, clean in pairs:
        if not noisy.is_file():
            problems.append(f"missing noisy feature file: {noisy}")
        if not clean.is_file():
            problems.append(f"missing clean feature file: {clean}")
    if not pairs:
        problems.append("no training pairs found")
    return pairs


_CONFIG_KEYS = {
    "noisy_features", "clean_features", "manifest", "out_dir", "variant",
    "beta", "sigma", "lr", "batch_size", "epochs", "seed",
    "encoder_units", "context_frames",
}


def _build_train_config(args):
    """Merge the JSON config with CLI overrides and validate everything,
    reporting all problems at once."""
    path = Path(args.config)
    problems = []
    try:
        with open(path) as fh:
            config = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file does not exist: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(config, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")

    for key in sorted(set(config) - _CONFIG_KEYS):
        problems.append(f"unknown config key: {key}")
    for key in ("noisy_features", "clean_features", "out_dir"):
        if key not in config:
            problems.append(f"missing config key: {key}")
    for key in ("epochs", "batch_size", "lr", "seed", "variant", "beta", "sigma"):
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value

    variant = config.get("variant", "SK-DAE")
    cfg = None
    if variant not in VARIANTS:
        problems.append(f"unknown variant {variant!r} (expected one of {VARIANTS})")
    else:
        overrides = {
            key: config[key]
            for key in ("beta", "sigma", "lr", "batch_size", "epochs", "seed")
            if key in config
        }
        cfg = TrainConfig.for_variant(variant, **overrides)
        problems.extend(cfg.problems())

    for key in ("noisy_features", "clean_features"):
        if key in config and not Path(config[key]).is_dir():
            problems.append(f"{key} directory does not exist: {config[key]}")
    if config.get("manifest") and not Path(config["manifest"]).is_file():
        problems.append(f"manifest file does not exist: {config['manifest']}")

    pairs = []
    if not problems:
        pairs = _train_pairs(config, problems)
    if problems:
        raise ConfigError(problems)
    return config, cfg, pairs


def cmd_train(args) -> int:
    config, cfg, pairs = _build_train_config(args)
    out_dir = Path(config["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    batches = []
    context = int(config.get("context_frames", features.CONTEXT_FRAMES))
    for noisy_path, clean_path in pairs:
        noisy = featio.load_features(noisy_path)
        clean = featio.load_features(clean_path)
        batches.append(stack_context(noisy, clean, context))
    pool = merge_batches(batches)
    feature_dim = pool.feature_dim

    encoder_units = tuple(config.get("encoder_units", (512, 256, 128)))
    model = SkDaeModel.create(
        feature_dim=feature_dim,
        context_frames=context,
        encoder_units=encoder_units,
        seed=cfg.seed,
    )
    logger.info(
        "training %s on %d rows (units %s, %d epochs, batch %d)",
        cfg.variant, pool.n, encoder_units, cfg.epochs, cfg.batch_size,
    )
    _, reports = train(model, pool, cfg)
    checkpoint_path = out_dir / "checkpoint.skda"
    save_checkpoint(model, cfg, checkpoint_path)
    training_trajectory_csv(reports, out_dir / "trajectory.csv")
    logger.info("wrote %s and trajectory.csv", checkpoint_path)
    return 0


def cmd_enhance(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    in_dir = Path(args.features_dir)
    out_dir = Path(args.out_dir)
    if not in_dir.is_dir():
        raise ConfigError(f"feature directory does not exist: {in_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = _feature_files(in_dir)
    if not paths:
        logger.warning("no feature files found in %s", in_dir)
        return 0
    for path in paths:
        fm = featio.load_features(path)
        featio.save_features(enhance(model, fm), out_dir / path.name)
    logger.info("enhanced %d feature files into %s", len(paths), out_dir)
    return 0


def cmd_eval(args) -> int:
    enhanced_dir = Path(args.enhanced_dir)
    noisy_dir = Path(args.noisy_dir)
    clean_dir = Path(args.clean_dir)
    problems = [
        f"{name} directory does not exist: {d}"
        for name, d in (
            ("enhanced", enhanced_dir), ("noisy", noisy_dir), ("clean", clean_dir)
        )
        if not d.is_dir()
    ]
    manifest_path = Path(args.manifest)
    if not manifest_path.is_file():
        problems.append(f"manifest file does not exist: {manifest_path}")
    if problems:
        raise ConfigError(problems)

    items = []
    for row in _load_manifest(manifest_path):
        stem = Path(row["output"]).stem
        enhanced_fm = featio.load_features(enhanced_dir / f"{stem}.dcdf")
        noisy_fm = featio.load_features(noisy_dir / f"{stem}.dcdf")
        clean_fm = featio.load_features(clean_dir / f"{Path(row['source']).stem}.dcdf")
        items.append(
            (Path(row["noise"]).stem, float(row["snr_db"]), enhanced_fm, noisy_fm, clean_fm)
        )
    report = feature_mse_report(
        items,
        checkpoint_id=args.checkpoint_id,
        corpus_id=args.corpus_id,
        seed=args.seed,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write_json(out_dir / "report.json")
    report.write_csv(out_dir / "report.csv")
    for row in report.rows:
        logger.info(
            "%s @ %g dB: enhanced %.5f noisy %.5f dcor %.4f",
            row.noise_type, row.snr_db, row.mse_enhanced, row.mse_noisy,
            row.dcor_enhanced_clean,
        )
    logger.info("wrote report.json and report.csv to %s", out_dir)
    return 0


def cmd_dcor(args) -> int:
    fm_a = featio.load_features(args.file_a)
    fm_b = featio.load_features(args.file_b)
    n_common = min(fm_a.n_frames, fm_b.n_frames, args.rows)
    # The same seed on both sides picks identical rows for equal-length
    # inputs, so comparing a file with itself prints exactly 1.
    a = evaluate.subsample_rows(fm_a.frames, n_common, args.seed)
    b = evaluate.subsample_rows(fm_b.frames, n_common, args.seed)
    value = dcor.dcor(a, b)
    print(f"{value:.17g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="skdae", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="extract normalized log-mel features from WAVs")
    p.add_argument("audio_dir")
    p.add_argument("out_dir")
    p.add_argument("--csv", action="store_true", help="also export CSV per file")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("mix", help="mix clean WAVs with noise at exact SNRs")
    p.add_argument("clean_dir")
    p.add_argument("out_dir")
    p.add_argument("--noise", nargs="+", required=True, help="noise WAV files")
    p.add_argument("--snr", type=float, nargs="+", default=[0.0, 5.0, 10.0, 20.0])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--beta", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="enhance feature files with a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("features_dir")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("eval", help="feature-space enhancement report")
    p.add_argument("--enhanced", dest="enhanced_dir", required=True)
    p.add_argument("--noisy", dest="noisy_dir", required=True)
    p.add_argument("--clean", dest="clean_dir", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--checkpoint-id", default="")
    p.add_argument("--corpus-id", default="")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("dcor", help="distance correlation between two feature files")
    p.add_argument("file_a")
    p.add_argument("file_b")
    p.add_argument("--rows", type=int, default=evaluate.DEFAULT_DCOR_ROWS)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_dcor)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return 1
    except SkdaeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
