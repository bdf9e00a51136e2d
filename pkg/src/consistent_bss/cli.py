"""Command-line interface.

Exit codes: 0 success, 2 unreadable/unsupported input, 3 shape or channel
mismatch, 4 solver divergence.
"""

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import evaluation, mixsim
from .io import (
    RunManifest,
    UnsupportedAudioError,
    array_sha256,
    fixture_path,
    read_wav,
    save_spectrogram_image,
    write_wav,
)
from .models import DEFAULT_LAMBDA, PenaltyModel
from .solver import DEFAULT_INPUT_LEVEL, SolverConfig, SolverDivergence, separate
from .stft import ConfigurationError, design_tight_window, padded_length, project_consistent, stft

logger = logging.getLogger("consistent_bss")

OUT_DIR_ENV = "CONSISTENT_BSS_OUT_DIR"
MODEL_KINDS = {"ica-l1": "laplace_ica", "iva-l21": "laplace_iva"}

EXIT_OK, EXIT_IO, EXIT_SHAPE, EXIT_DIVERGED = 0, 2, 3, 4


class CommandError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _read(path):
    try:
        return read_wav(path)
    except (OSError, UnsupportedAudioError) as exc:
        raise CommandError(f"cannot read {path}: {exc}", EXIT_IO) from exc


def _out_dir(args):
    out = Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CommandError(f"cannot create {out}: {exc}", EXIT_IO) from exc
    return out


def _flags(args):
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _stack_mono(paths):
    """Read several WAV files and stack all their channels."""
    signals, rates = [], set()
    for p in paths:
        data, fs = _read(p)
        signals.extend(data)
        rates.add(fs)
    if len(rates) != 1:
        raise CommandError(f"sample rates differ: {sorted(rates)}", EXIT_SHAPE)
    if len({len(s) for s in signals}) != 1:
        raise CommandError("input signals differ in length", EXIT_SHAPE)
    return np.array(signals), rates.pop()


def cmd_separate(args):
    mixture, fs = _read(args.input)
    if mixture.shape[0] < 2:
        raise CommandError(f"{args.input} has a single channel; need at least two", EXIT_SHAPE)
    kind = MODEL_KINDS[args.model]
    lam = DEFAULT_LAMBDA[kind] if args.lam is None else args.lam
    try:
        win = design_tight_window("hann", args.fft_size, args.hop)
        cfg = SolverConfig(
            mu1=args.mu1, mu2=args.mu2, alpha=args.alpha, iters=args.iters,
            variant=args.variant, normalize_input=args.normalize_input,
            input_level=args.input_level, log_every=args.log_every,
        )
        model = PenaltyModel(kind, lam)
    except (ValueError, ConfigurationError) as exc:
        raise CommandError(str(exc), EXIT_SHAPE) from exc
    try:
        sources, _, diag = separate(mixture, model, cfg, win)
    except SolverDivergence as exc:
        raise CommandError(str(exc), EXIT_DIVERGED) from exc
    out = _out_dir(args)
    manifest = RunManifest.for_files("separate", _flags(args), [args.input])
    for k, src in enumerate(sources):
        path = out / f"source_{k}.wav"
        write_wav(path, src, fs)
        manifest.outputs[path.name] = array_sha256(src.astype(np.float32))
    diag.to_csv(out / "diagnostics.csv")
    manifest.write(out / "manifest.json")
    logger.info("wrote %d sources to %s", len(sources), out)
    return EXIT_OK


def cmd_mix(args):
    sources, fs = _stack_mono(args.sources)
    n = len(sources)
    if n < 2:
        raise CommandError("need at least two source signals", EXIT_SHAPE)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    sidecar = {"kind": args.kind, "seed": args.seed, "sample_rate": fs,
               "sources": [str(p) for p in args.sources]}
    if args.kind == "instantaneous":
        A = mixsim.random_mixing_matrix(args.seed, n, args.max_cond)
        x = mixsim.mix_instantaneous(sources, A)
        sidecar["matrix"] = A.tolist()
    else:
        decay = mixsim.rt60_to_decay(args.rt60, fs)
        rirs = mixsim.rir_grid(args.seed, n, args.taps, decay)
        x = mixsim.mix_convolutive(sources, rirs)
        sidecar.update(taps=args.taps, rt60=args.rt60, decay_samples=decay,
                       rir_sha256=[[array_sha256(r) for r in row] for row in rirs])
    write_wav(out, x, fs)
    sidecar["mixture_sha256"] = array_sha256(x.astype(np.float32))
    with open(out.with_suffix(".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
    manifest = RunManifest.for_files("mix", _flags(args), args.sources, seed=args.seed)
    manifest.outputs[out.name] = sidecar["mixture_sha256"]
    manifest.write(out.with_suffix(".manifest.json"))
    return EXIT_OK


def cmd_eval(args):
    refs, fs_r = _stack_mono(args.references)
    ests, fs_e = _stack_mono(args.estimates)
    mixture, fs_m = _read(args.mixture)
    if len({fs_r, fs_e, fs_m}) != 1:
        raise CommandError("sample rates of references, estimates and mixture differ", EXIT_SHAPE)
    if refs.shape != ests.shape or mixture.shape[1] != refs.shape[1]:
        raise CommandError(
            f"shape mismatch: references {refs.shape}, estimates {ests.shape}, "
            f"mixture {mixture.shape}", EXIT_SHAPE)
    if mixture.shape[0] != refs.shape[0]:
        raise CommandError("mixture must have one channel per source", EXIT_SHAPE)
    try:
        est = evaluation.evaluate(ests, refs, args.filter_len)
        mix = evaluation.evaluate(mixture, refs, args.filter_len)
    except ValueError as exc:
        raise CommandError(str(exc), EXIT_SHAPE) from exc
    gain = evaluation.improvement(est, mix)
    report = {"filter_len": args.filter_len, "estimate": est.to_dict(),
              "mixture": mix.to_dict(), "improvement": gain.to_dict()}
    text = json.dumps(report, indent=2)
    if args.json:
        Path(args.json).write_text(text + "\n")
    else:
        print(text)
    if args.csv:
        new = not Path(args.csv).exists()
        with open(args.csv, "a", newline="") as fh:
            writer = csv.writer(fh)
            if new:
                writer.writerow(["estimate_set", "source", "sdr_db", "sir_db", "sar_db",
                                 "sdr_imp_db", "sir_imp_db", "sar_imp_db"])
            for j in range(len(refs)):
                writer.writerow([args.label or ";".join(args.estimates), j,
                                 est.sdr[j], est.sir[j], est.sar[j],
                                 gain.sdr[j], gain.sir[j], gain.sar[j]])
    return EXIT_OK


def pulse_spectrogram(n_frames, n_bins):
    """Sparse grid of isolated unit coefficients."""
    spec = np.zeros((n_frames, n_bins), dtype=complex)
    spec[n_frames // 8::n_frames // 4, n_bins // 8::n_bins // 4] = 1.0
    return spec


def cmd_demo_consistency(args):
    path = args.input or fixture_path("speech_a.wav")
    signal, _ = _read(path)
    x = signal[0]
    win = design_tight_window("hann", args.fft_size, args.hop)
    x = np.pad(x, (0, padded_length(len(x), win) - len(x)))
    clean = stft(x, win)
    rows = {
        "pulse": pulse_spectrogram(*clean.shape),
        "dropout": mixsim.dropout(clean, args.dropout, args.seed),
    }
    out = _out_dir(args)
    report = {"dropout_rate": args.dropout, "seed": args.seed, "rows": {}}
    for name, spec in rows.items():
        p1 = project_consistent(spec, win)
        p2 = project_consistent(p1, win)
        err = float(np.linalg.norm(p2 - p1) / max(np.linalg.norm(p1), 1e-300))
        for tag, s in (("input", spec), ("proj1", p1), ("proj2", p2)):
            save_spectrogram_image(out / f"{name}_{tag}.png", s)
        report["rows"][name] = {
            "idempotence_error": err,
            "idempotent": err <= 1e-10,
            "input_residual": float(np.linalg.norm(spec - p1) / max(np.linalg.norm(spec), 1e-300)),
        }
    report["passed"] = all(r["idempotent"] for r in report["rows"].values())
    (out / "consistency_report.json").write_text(json.dumps(report, indent=2) + "\n")
    RunManifest.for_files("demo-consistency", _flags(args), [path], seed=args.seed).write(
        out / "manifest.json")
    print(json.dumps(report, indent=2))
    return EXIT_OK if report["passed"] else 1


def cmd_demo_permutation(args):
    paths = args.sources or [fixture_path(f) for f in ("speech_a.wav", "speech_b.wav")]
    sources, _ = _stack_mono(paths)
    win = design_tight_window("hann", args.fft_size, args.hop)
    L = sources.shape[1]
    sources = np.pad(sources, ((0, 0), (0, padded_length(L, win) - L)))
    specs = mixsim.make_exclusive(stft(sources, win))
    M, _, B = specs.shape
    if args.plan == "random":
        plan = mixsim.PermutationPlan.random(args.seed, B, M)
    elif args.plan == "identity":
        plan = mixsim.PermutationPlan.identity(B, M)
    else:
        plan = mixsim.PermutationPlan.reversal(B, M)
    leakage, projected = mixsim.permutation_leakage(specs, plan, win)
    scrambled = mixsim.scramble_permutation(specs, plan)
    out = _out_dir(args)
    for i in range(M):
        save_spectrogram_image(out / f"source{i}_exclusive.png", specs[i])
        save_spectrogram_image(out / f"source{i}_permuted.png", scrambled[i])
        save_spectrogram_image(out / f"source{i}_projected.png", projected[i])
    report = {"plan": args.plan, "seed": args.seed, "leakage": leakage}
    (out / "permutation_report.json").write_text(json.dumps(report, indent=2) + "\n")
    RunManifest.for_files("demo-permutation", _flags(args), paths, seed=args.seed).write(
        out / "manifest.json")
    print(json.dumps(report, indent=2))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="consistent-bss",
        description="Determined BSS with spectrogram consistency.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("separate", help="separate a multichannel WAV file")
    p.add_argument("input")
    p.add_argument("--model", choices=sorted(MODEL_KINDS), default="ica-l1")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="threshold scale (default 0.1 for ica-l1, 1 for iva-l21)")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--consistent", dest="variant", action="store_const", const="consistent")
    group.add_argument("--plain", dest="variant", action="store_const", const="plain")
    p.set_defaults(variant="consistent")
    p.add_argument("--mu1", type=float, default=1.0)
    p.add_argument("--mu2", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.75)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--fft-size", type=int, default=1024)
    p.add_argument("--hop", type=int, default=512)
    p.add_argument("--normalize-input", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--input-level", type=float, default=DEFAULT_INPUT_LEVEL,
                   help="operator norm of the observation after normalization")
    p.add_argument("--log-every", type=int, default=1)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("mix", help="simulate a determined mixture")
    p.add_argument("--sources", nargs="+", required=True)
    p.add_argument("--kind", choices=["instantaneous", "convolutive"], default="instantaneous")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--taps", type=int, default=2048)
    p.add_argument("--rt60", type=float, default=0.13, help="reverberation time in seconds")
    p.add_argument("--max-cond", type=float, default=10.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("eval", help="SDR/SIR/SAR of separated signals")
    p.add_argument("--references", nargs="+", required=True)
    p.add_argument("--estimates", nargs="+", required=True)
    p.add_argument("--mixture", required=True)
    p.add_argument("--filter-len", type=int, default=512)
    p.add_argument("--json")
    p.add_argument("--csv")
    p.add_argument("--label")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("demo-consistency", help="projection of pulse and dropout spectrograms")
    p.add_argument("--input")
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fft-size", type=int, default=1024)
    p.add_argument("--hop", type=int, default=512)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_demo_consistency)

    p = sub.add_parser("demo-permutation", help="leakage caused by per-bin permutations")
    p.add_argument("--sources", nargs=2)
    p.add_argument("--plan", choices=["random", "identity", "swap"], default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fft-size", type=int, default=1024)
    p.add_argument("--hop", type=int, default=512)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_demo_permutation)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
