"""Command-line entry point: synth, mix, train, detect, eval, sweep-m.

Exit codes: 0 success, 2 usage/validation problems (bad config, bad audio
format, missing files), 1 runtime failures. Every command is deterministic
given its config and seed, and the effective config is echoed into each
artifact's header or sidecar manifest.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .audio import (MixSpec, WavFormatError, bandpass, mix_at_snr, read_wav, segment,
                    synth_ambient, synth_leak, write_wav)
from .config import ConfigError, detector_m, effective_lines, load_config, model_config_from
from .detector import DetectorConfig, detect, result_csv_row
from .evaluation import (build_close_set, build_distant_set, grid_csv,
                         run_grid, sweep_csv, sweep_m, train_models)
from .models import KINDS, ModelFormatError, fit_score_model, load_model, save_model
from .nn import TrainingError

_VALIDATION_ERRORS = (ConfigError, WavFormatError, ModelFormatError, ValueError,
                      FileNotFoundError, IsADirectoryError, NotADirectoryError)


def _write_manifest(path: Path, lines) -> None:
    path.write_text("\n".join(lines) + "\n")


def cmd_synth(args) -> int:
    if args.duration <= 0:
        raise ValueError(f"duration must be positive, got {args.duration}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ambient = synth_ambient(args.duration, args.seed, args.rate)
    leak = synth_leak(args.duration, args.seed, args.rate)
    write_wav(ambient, out_dir / "ambient.wav")
    write_wav(leak, out_dir / "leak.wav")
    _write_manifest(out_dir / "manifest.txt", [
        "command = synth",
        f"duration = {args.duration}",
        f"seed = {args.seed}",
        f"rate = {args.rate}",
        "files = ambient.wav,leak.wav",
    ])
    print(f"wrote ambient.wav and leak.wav to {out_dir}", file=sys.stderr)
    return 0


def cmd_mix(args) -> int:
    signal = read_wav(args.signal)
    noise = read_wav(args.noise)
    mixed = mix_at_snr(signal, noise, MixSpec(args.snr_db, args.seed))
    write_wav(mixed, args.out)
    _write_manifest(Path(str(args.out) + ".manifest"), [
        "command = mix",
        f"signal = {args.signal}",
        f"noise = {args.noise}",
        f"snr_db = {args.snr_db}",
        f"seed = {args.seed}",
    ])
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def _ingest(recording, cfg):
    if cfg["audio.bandpass"]:
        return bandpass(recording, cfg["audio.band_lo_hz"], cfg["audio.band_hi_hz"])
    return recording


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    data_dir = Path(args.data)
    wav_paths = sorted(data_dir.glob("*.wav"))
    if not wav_paths:
        raise ValueError(f"no .wav files in {data_dir}")
    recordings = [_ingest(read_wav(p), cfg) for p in wav_paths]
    rates = {r.rate for r in recordings}
    if len(rates) != 1:
        raise ValueError(f"training data mixes sample rates: {sorted(rates)}")
    t = cfg["detector.t_seconds"]
    clips = [clip for rec in recordings for clip in segment(rec, t)]
    kind = cfg["model.kind"]
    model = fit_score_model(kind, clips, model_config_from(cfg, kind), seed=cfg["seed"])
    save_model(model, args.out)
    _write_manifest(Path(str(args.out) + ".manifest"),
                    ["command = train", f"data = {data_dir}",
                     f"clips = {len(clips)}"] + effective_lines(cfg))
    if model.training_history:
        print(f"final training objective: {model.training_history[-1]!r}")
    else:
        print(f"trained {kind} on {len(clips)} clips")
    return 0


def cmd_detect(args) -> int:
    cfg = load_config(args.config)
    model = load_model(args.model)
    recording = _ingest(read_wav(args.wav), cfg)
    detector = DetectorConfig(
        model,
        phi=cfg["detector.phi"],
        h_minutes=max(recording.duration / 60.0, cfg["detector.t_seconds"] / 60.0),
        t_seconds=cfg["detector.t_seconds"],
        m=detector_m(cfg),
    )
    result = detect(recording, detector)
    for line in effective_lines(cfg):
        print(f"# {line}")
    print(result_csv_row(Path(args.wav).stem, result, detector))
    return 0


def _build_segments_fn(cfg):
    n_per_class = cfg["data.n_per_class"]
    rate = cfg["audio.rate"]
    if cfg["data.set"] == "close":
        return lambda seed, h: build_close_set(seed, n_per_class, h, rate)
    snr = cfg["data.snr_db"]
    return lambda seed, h: build_distant_set(seed, n_per_class, h, rate, snr)


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    kinds = cfg["eval.models"]
    unknown = [k for k in kinds if k not in KINDS]
    if unknown:
        raise ConfigError(f"eval.models contains unknown kinds: {unknown}")
    seeds = cfg["eval.seeds"]
    t = cfg["detector.t_seconds"]
    h = cfg["detector.h_minutes"]
    m = detector_m(cfg)
    configs = {kind: model_config_from(cfg, kind) for kind in kinds}
    models = train_models(kinds, t, seeds, cfg["data.train_minutes"], configs, cfg["audio.rate"])
    report = run_grid(models, _build_segments_fn(cfg), [h], [t], [m],
                      cfg["detector.phi"], seeds)
    Path(args.out).write_text(grid_csv(report, comments=effective_lines(cfg)))
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def cmd_sweep_m(args) -> int:
    cfg = load_config(args.config)
    kind = cfg["model.kind"]
    seeds = cfg["eval.seeds"]
    t = cfg["detector.t_seconds"]
    h = cfg["detector.h_minutes"]
    configs = {kind: model_config_from(cfg, kind)}
    models = train_models([kind], t, seeds, cfg["data.train_minutes"], configs, cfg["audio.rate"])
    by_seed = {seed: models[(kind, t, seed)] for seed in seeds}
    report = sweep_m(kind, by_seed, _build_segments_fn(cfg), h, t,
                     cfg["detector.phi"], cfg["sweep.m_values"], seeds)
    Path(args.out).write_text(sweep_csv(report, comments=effective_lines(cfg)))
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leakdet",
        description="Acoustic leak detection: synthesize data, train score models, "
                    "detect leaks, run experiment grids.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic ambient and leak WAVs")
    p.add_argument("--duration", type=float, required=True, help="seconds of audio")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate", type=int, default=16000)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mix", help="mix a leak into an ambient WAV at a given SNR")
    p.add_argument("--signal", required=True, help="ambient WAV (the signal)")
    p.add_argument("--noise", required=True, help="leak WAV (the noise)")
    p.add_argument("--snr-db", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("train", help="train a score model on normal-operation WAVs")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True, help="directory of no-leak WAV files")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="score one recording with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="train per seed and report AUC over a labeled synthetic set")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="report CSV to write")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-m", help="AUC as the number of samples m varies")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="sweep CSV to write")
    p.set_defaults(func=cmd_sweep_m)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"leakdet {args.command}: {exc}", file=sys.stderr)
        return 2
    except (TrainingError, ArithmeticError, OSError) as exc:
        print(f"leakdet {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
