"""Command-line entry point: ``hmmtts <subcommand> ...``.

Exit status is 0 on success, 1 for bad user input or data and 2 for an
internal failure.  Messages go to standard error; files are written only
to the paths named on the command line (or their documented defaults
next to the output model).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__

DEFAULTS = {"states": 5, "iters": 20, "rate": 1.0, "seed": 0}
_TYPES = {"states": int, "iters": int, "rate": float, "seed": int}

log = logging.getLogger(__name__)


class UsageError(ValueError):
    pass


def load_config(path) -> dict:
    """Read a JSON object holding any of the keys in :data:`DEFAULTS`."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path}: expected a JSON object")
    unknown = sorted(set(data) - set(DEFAULTS))
    if unknown:
        raise UsageError(f"config {path}: unknown keys {', '.join(unknown)}")
    out = {}
    for key, value in data.items():
        try:
            out[key] = _TYPES[key](value)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"config {path}: bad value for {key!r}: {value!r}") from exc
    return out


def resolve(args, key):
    """Flag value if given, else config file value, else the default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    return args.file_config.get(key, DEFAULTS[key])


# --- subcommands -------------------------------------------------------------------

def cmd_corpus_validate(args) -> int:
    from .corpus import load_manifest, validate_corpus

    report = validate_corpus(load_manifest(args.manifest))
    text = report.to_text()
    sys.stderr.write(text)
    if args.report:
        body = report.to_csv() if str(args.report).endswith(".csv") else text
        Path(args.report).write_text(body, encoding="utf-8")
    return 1 if report.fatal else 0


def cmd_train(args) -> int:
    from .corpus import load_manifest, validate_corpus
    from .hmm import save_models
    from .pipeline import prepare_items, train_models
    from .train import write_alignment, write_trace

    n_states, n_iters, seed = (resolve(args, k) for k in ("states", "iters", "seed"))
    if n_states < 1:
        raise UsageError("--states must be at least 1")
    if n_iters < 0:
        raise UsageError("--iters must be non-negative")
    corpus = load_manifest(args.manifest)
    report = validate_corpus(corpus)
    if report.fatal:
        sys.stderr.write(report.to_text())
        raise UsageError("corpus has fatal validation errors")
    items = prepare_items(corpus)
    result = train_models(items, n_states=n_states, n_iterations=n_iters)
    # training itself draws no random numbers; the seed is recorded for provenance
    result.models.meta["seed"] = seed

    out_model = Path(args.out_model)
    trace = Path(args.trace) if args.trace else out_model.with_suffix(".loglik.csv")
    save_models(result.models, out_model)
    write_trace(result.report.loglik, trace)
    written = [out_model, trace]
    if result.segments:
        alignment = Path(args.alignment) if args.alignment else out_model.with_suffix(".align.tsv")
        write_alignment(result.segments, alignment)
        written.append(alignment)
    if result.report.skipped:
        log.warning("skipped utterances: %s", ", ".join(result.report.skipped))
    if result.report.untrained:
        log.warning("phonemes without training data: %s", " ".join(result.report.untrained))
    log.info("wrote %s", ", ".join(str(p) for p in written))
    return 0


def cmd_synth(args) -> int:
    from .corpus import write_wav
    from .hmm import load_models
    from .pipeline import synthesize_text

    rate, seed = resolve(args, "rate"), resolve(args, "seed")
    if rate <= 0:
        raise UsageError("--rate must be positive")
    models = load_models(args.model)
    untrained = set(models.flags.get("untrained", []))
    # --rate is a speaking rate, so durations scale by its inverse
    result = synthesize_text(models, args.text, rate=1.0 / rate, seed=seed)
    used = sorted({e.phone for e in result.plan.entries} & untrained)
    if used:
        log.warning("text uses phonemes with flat-start models only: %s", " ".join(used))
    if result.n_clamped:
        log.warning("%d frames had F0 clamped to the analysis range", result.n_clamped)
    write_wav(result.audio, args.out_wav)
    log.info("wrote %s (%d frames, %.3f s, gain %.4g)", args.out_wav, result.plan.total_frames,
             result.audio.duration, result.gain)
    return 0


def cmd_copysynth(args) -> int:
    from .corpus import read_wav, write_wav
    from .vocoder import copy_synthesis

    audio = read_wav(args.in_wav)
    out, gain = copy_synthesis(audio, seed=resolve(args, "seed"), return_gain=True)
    write_wav(out, args.out_wav)
    log.info("wrote %s (gain %.4g)", args.out_wav, gain)
    return 0


def cmd_eval_report(args) -> int:
    from .eval import evaluate, export_report, read_items, read_responses
    from .eval.tables import ITEMS_CSV, RESPONSES_CSV

    if args.shipped:
        if len(args.paths) != 1:
            raise UsageError("with --shipped give only OUT_DIR")
        items_csv, responses_csv, out_dir = ITEMS_CSV, RESPONSES_CSV, args.paths[0]
    elif len(args.paths) == 3:
        items_csv, responses_csv, out_dir = args.paths
    else:
        raise UsageError("expected ITEMS_CSV RESPONSES_CSV OUT_DIR (or --shipped OUT_DIR)")
    tallies, summaries = evaluate(read_items(items_csv), read_responses(responses_csv))
    for criterion, summ in summaries.items():
        for s in summ.values():
            log.info("%s %s: %d/%d hits (%.1f%%)", criterion, s.voice_type, s.hits,
                     s.responses, s.hit_pct)
    export_report(out_dir, tallies, summaries)
    return 0


def cmd_toy_corpus(args) -> int:
    from .toy import write_toy_corpus

    manifest = write_toy_corpus(args.out_dir, seed=resolve(args, "seed"))
    log.info("wrote %s", manifest)
    return 0


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hmmtts", description="HMM-based Spanish speech synthesis.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="JSON file with defaults for states, iters, rate, seed")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress details")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("corpus-validate", help="check a training manifest")
    s.add_argument("manifest")
    s.add_argument("--report", help="write the report here (CSV if the name ends in .csv)")
    s.set_defaults(func=cmd_corpus_validate)

    s = sub.add_parser("train", help="train phoneme models from a manifest")
    s.add_argument("manifest")
    s.add_argument("out_model")
    s.add_argument("--states", type=int, help=f"emitting states per phoneme (default {DEFAULTS['states']})")
    s.add_argument("--iters", type=int, help=f"Baum-Welch iterations (default {DEFAULTS['iters']})")
    s.add_argument("--seed", type=int, help=f"recorded in the model (default {DEFAULTS['seed']})")
    s.add_argument("--trace", help="log-likelihood CSV (default OUT_MODEL with .loglik.csv)")
    s.add_argument("--alignment", help="alignment TSV (default OUT_MODEL with .align.tsv)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("synth", help="synthesize text with a trained model")
    s.add_argument("model")
    s.add_argument("out_wav")
    s.add_argument("--text", required=True)
    s.add_argument("--rate", type=float, help=f"speaking rate, 2.0 is twice as fast (default {DEFAULTS['rate']})")
    s.add_argument("--seed", type=int, help=f"noise excitation seed (default {DEFAULTS['seed']})")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("copysynth", help="analyse and resynthesize a WAV file")
    s.add_argument("in_wav")
    s.add_argument("out_wav")
    s.add_argument("--seed", type=int, help=f"noise excitation seed (default {DEFAULTS['seed']})")
    s.set_defaults(func=cmd_copysynth)

    s = sub.add_parser("eval-report", help="tally listening-test responses")
    s.add_argument("paths", nargs="+", metavar="PATH",
                   help="ITEMS_CSV RESPONSES_CSV OUT_DIR, or OUT_DIR with --shipped")
    s.add_argument("--shipped", action="store_true", help="use the fixture tables bundled with the package")
    s.set_defaults(func=cmd_eval_report)

    s = sub.add_parser("toy-corpus", help="write the synthetic demo corpus")
    s.add_argument("out_dir")
    s.add_argument("--seed", type=int, help=f"generator seed (default {DEFAULTS['seed']})")
    s.set_defaults(func=cmd_toy_corpus)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; that is a user error here
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    log.setLevel(logging.INFO)
    try:
        args.file_config = load_config(args.config) if args.config else {}
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
