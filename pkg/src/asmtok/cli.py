"""Single executable exposing every pipeline stage.

Exit codes: 0 success, 1 usage error, 2 data error. Data errors go to
standard error as one-line JSON {"error", "detail"}. All commands are
deterministic given their flags and seeds.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import corpus as corpus_mod
from . import evaluation, masking, preprocess
from .errors import DataError
from .tokcore import load_model, save_model, encode, decode

log = logging.getLogger("asmtok")

_TRAINERS = {}


def _trainer(algorithm):
    # populated lazily so plain corpus commands never pay kernel import cost
    if not _TRAINERS:
        from .bpe import train_bpe
        from .unigram import train_unigram
        from .wordpiece import train_wordpiece

        _TRAINERS.update({"bpe": train_bpe, "unigram": train_unigram, "wordpiece": train_wordpiece})
    return _TRAINERS[algorithm]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_corpus_commands(sub):
    p = sub.add_parser("corpus", help="filter, dedup or split a corpus")
    csub = p.add_subparsers(dest="corpus_command", required=True)

    f = csub.add_parser("filter", help="keep records within an instruction-count range")
    f.add_argument("--input", required=True)
    f.add_argument("--output", required=True)
    f.add_argument("--min", type=int, default=30, help="minimum instructions (default 30)")
    f.add_argument("--max", type=int, default=100, help="maximum instructions (default 100)")
    f.set_defaults(func=_cmd_corpus_filter)

    d = csub.add_parser("dedup", help="drop duplicate functions (normalized exact hash)")
    d.add_argument("--input", required=True)
    d.add_argument("--output", required=True)
    d.set_defaults(func=_cmd_corpus_dedup)

    s = csub.add_parser("split", help="deterministic train/test split")
    s.add_argument("--input", required=True)
    s.add_argument("--train-out", required=True)
    s.add_argument("--test-out", required=True)
    s.add_argument("--train-frac", default="0.8", help="training fraction (default 0.8)")
    s.add_argument("--seed", type=int, default=None, help="split seed (default: global --seed)")
    s.set_defaults(func=_cmd_corpus_split)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="asmtok", description=__doc__)
    parser.add_argument("--seed", type=int, default=0, help="global seed (default 0)")
    parser.add_argument(
        "--log-level",
        default=os.environ.get("ASMTOK_LOG", "WARNING"),
        help="logging level (default WARNING; env ASMTOK_LOG)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    _add_corpus_commands(sub)

    p = sub.add_parser("preprocess", help="addresses to identifiers, hex to decimal")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--id-prefix", default="addr", help="identifier prefix (default addr)")
    p.add_argument("--id-base", type=int, choices=(0, 1), default=0, help="first index (default 0)")
    p.add_argument(
        "--addr-threshold",
        default="0x1000",
        help="bracketed literals at or above this value become addresses (default 0x1000)",
    )
    p.set_defaults(func=_cmd_preprocess)

    t = sub.add_parser("train", help="train a tokenizer")
    t.add_argument("--algo", required=True, choices=("bpe", "wordpiece", "unigram"))
    t.add_argument("--vocab-size", type=int, required=True)
    t.add_argument("--input", required=True)
    t.add_argument("--output", required=True)
    t.add_argument("--prune-frac", type=float, default=0.2, help="unigram prune fraction (default 0.2)")
    t.add_argument("--seed-multiplier", type=int, default=4, help="unigram seed cap multiplier (default 4)")
    t.add_argument("--em-iters", type=int, default=2, help="unigram EM iterations per round (default 2)")
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("encode", help="encode text or a corpus to token ids")
    e.add_argument("--model", required=True)
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--text")
    src.add_argument("--corpus")
    e.add_argument("--output", help="output path (default: stdout)")
    e.set_defaults(func=_cmd_encode)

    d = sub.add_parser("decode", help="decode token ids back to text")
    d.add_argument("--model", required=True)
    d.add_argument("--ids", required=True, help="comma-separated token ids")
    d.set_defaults(func=_cmd_decode)

    ev = sub.add_parser("eval", help="intrinsic metrics")
    esub = ev.add_subparsers(dest="eval_command", required=True)
    for name in ("fertility", "overlap", "oov"):
        ep = esub.add_parser(name)
        ep.add_argument("--models", required=True, help="comma-separated model paths")
        ep.add_argument("--corpus", required=name != "overlap")
        ep.add_argument("--format", default="csv", choices=evaluation.FORMATS)
        ep.add_argument("--output", help="output path (default: stdout)")
        ep.set_defaults(func=_cmd_eval, eval_metric=name)

    m = sub.add_parser("mask", help="emit a masked-token-prediction dataset")
    m.add_argument("--model", required=True)
    m.add_argument("--corpus", required=True)
    m.add_argument("--rate", type=float, default=0.15, help="masking rate (default 0.15)")
    m.add_argument("--seed", type=int, default=None, help="masking seed (default: global --seed)")
    m.add_argument("--output", required=True)
    m.set_defaults(func=_cmd_mask)

    g = sub.add_parser("emit-sig", help="emit a function-signature dataset")
    g.add_argument("--corpus", required=True)
    g.add_argument("--output", required=True)
    g.set_defaults(func=_cmd_emit_sig)

    x = sub.add_parser("matrix", help="train and evaluate a whole configuration grid")
    x.add_argument("config", help="JSON grid configuration")
    x.add_argument("--output-dir", default=None, help="overrides output_dir from the config")
    x.add_argument("--jobs", type=int, default=1, help="parallel training cells (default 1)")
    x.set_defaults(func=_cmd_matrix)

    return parser


# --- command bodies -----------------------------------------------------------


def _cmd_corpus_filter(args):
    data = corpus_mod.load_corpus(args.input)
    corpus_mod.save_corpus(corpus_mod.filter_by_length(data, args.min, args.max), args.output)
    return 0


def _cmd_corpus_dedup(args):
    data = corpus_mod.load_corpus(args.input)
    corpus_mod.save_corpus(corpus_mod.dedup(data), args.output)
    return 0


def _cmd_corpus_split(args):
    data = corpus_mod.load_corpus(args.input)
    seed = args.seed if args.seed is not None else args.global_seed
    train, test = corpus_mod.split(data, args.train_frac, seed)
    corpus_mod.save_corpus(train, args.train_out)
    corpus_mod.save_corpus(test, args.test_out)
    return 0


def _cmd_preprocess(args):
    config = preprocess.PreprocessConfig(
        id_prefix=args.id_prefix,
        id_base=args.id_base,
        address_threshold=int(args.addr_threshold, 0),
    )
    data = corpus_mod.load_corpus(args.input)
    corpus_mod.save_corpus(preprocess.preprocess_corpus(data, config), args.output)
    return 0


def _cmd_train(args):
    data = corpus_mod.load_corpus(args.input)
    train = _trainer(args.algo)
    started = time.perf_counter()
    if args.algo == "unigram":
        model = train(
            data,
            args.vocab_size,
            prune_fraction=args.prune_frac,
            em_iters_per_round=args.em_iters,
            seed_multiplier=args.seed_multiplier,
        )
    else:
        model = train(data, args.vocab_size)
    save_model(model, args.output)
    log.info(
        "trained %s vocab=%d on %d records in %.1fs",
        args.algo, len(model.vocabulary), len(data), time.perf_counter() - started,
    )
    return 0


def _write_or_print(text: str, output):
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_encode(args):
    model = load_model(args.model)
    if args.text is not None:
        ids = encode(model, args.text)
        _write_or_print(json.dumps(ids, separators=(",", ":")) + "\n", args.output)
        return 0
    data = corpus_mod.load_corpus(args.corpus)
    lines = []
    for record in data:
        ids = encode(model, corpus_mod.record_text(record))
        lines.append(json.dumps({"name": record.name, "ids": ids}, separators=(",", ":")))
    _write_or_print("\n".join(lines) + ("\n" if lines else ""), args.output)
    return 0


def _cmd_decode(args):
    model = load_model(args.model)
    ids = [int(tok) for tok in args.ids.split(",") if tok.strip() != ""]
    sys.stdout.write(decode(model, ids))
    return 0


def _cmd_eval(args):
    paths = [p for p in args.models.split(",") if p]
    models = [load_model(p) for p in paths]
    if args.eval_metric == "overlap":
        report = evaluation.vocab_overlap(models, ids=[Path(p).stem for p in paths])
    else:
        data = corpus_mod.load_corpus(args.corpus)
        fn = evaluation.fertility if args.eval_metric == "fertility" else evaluation.oov_rate
        reports = [fn(m, data) for m in models]
        report = reports if len(reports) > 1 else reports[0]
    text = evaluation.report_to_text(report, args.format)
    _write_or_print(text, args.output)
    return 0


def _cmd_mask(args):
    model = load_model(args.model)
    data = corpus_mod.load_corpus(args.corpus)
    seed = args.seed if args.seed is not None else args.global_seed
    written = masking.emit_mlm_dataset(model, data, args.rate, seed, args.output)
    log.info("masked dataset: %d line(s)", written)
    return 0


def _cmd_emit_sig(args):
    data = corpus_mod.load_corpus(args.corpus)
    masking.emit_signature_dataset(data, args.output)
    return 0


# --- matrix -------------------------------------------------------------------


def _load_matrix_config(path) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"matrix config {path}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "corpus" not in obj:
        raise DataError(f"matrix config {path}: expected an object with a 'corpus' field")
    obj.setdefault("algorithms", ["bpe", "unigram", "wordpiece"])
    obj.setdefault("vocab_sizes", [1000, 4000, 8000])
    obj.setdefault("variants", ["default", "preprocessed"])
    obj.setdefault("seed", 0)
    obj.setdefault("train_fraction", "0.8")
    obj.setdefault("min_instructions", 30)
    obj.setdefault("max_instructions", 100)
    obj.setdefault("output_dir", "matrix_out")
    return obj


def _matrix_datasets(config, base_dir):
    corpus_path = Path(config["corpus"])
    if not corpus_path.is_absolute():
        corpus_path = base_dir / corpus_path
    data = corpus_mod.load_corpus(corpus_path)
    data = corpus_mod.dedup(data)
    data = corpus_mod.filter_by_length(
        data, config["min_instructions"], config["max_instructions"]
    )
    train, test = corpus_mod.split(data, config["train_fraction"], config["seed"])
    datasets = {"default": (train, test)}
    if "preprocessed" in config["variants"]:
        datasets["preprocessed"] = (
            preprocess.preprocess_corpus(train),
            preprocess.preprocess_corpus(test),
        )
    return datasets


def _run_matrix_cell(config, base_dir, out_dir, algo, size, variant):
    datasets = _matrix_datasets(config, base_dir)
    train_set, test_set = datasets[variant]
    model = _trainer(algo)(train_set, size)
    model_path = out_dir / "models" / f"{algo}-{size}-{variant}.json"
    save_model(model, model_path)
    fert = evaluation.fertility(model, test_set, vocab_size=size)
    oov = evaluation.oov_rate(model, test_set, vocab_size=size)
    return fert, oov


def _matrix_cell_entry(packed):
    config, base_dir, out_dir, algo, size, variant = packed
    return _run_matrix_cell(config, Path(base_dir), Path(out_dir), algo, size, variant)


def run_matrix(config_file, output_dir=None, jobs: int = 1) -> list[str]:
    """Train and evaluate every (algorithm, vocab size, variant) cell.

    Emits one consolidated CSV plus per-cell model files. A failing cell is
    reported and skipped; the remaining cells still run. Returns the list
    of failure descriptions (empty on full success).
    """
    config = _load_matrix_config(config_file)
    base_dir = Path(config_file).resolve().parent
    out_dir = Path(output_dir or config["output_dir"])
    if not out_dir.is_absolute():
        out_dir = base_dir / out_dir
    (out_dir / "models").mkdir(parents=True, exist_ok=True)

    cells = [
        (algo, size, variant)
        for algo in config["algorithms"]
        for size in config["vocab_sizes"]
        for variant in config["variants"]
    ]
    rows = []
    failures = []
    started = time.perf_counter()

    if jobs > 1:
        packed = [(config, str(base_dir), str(out_dir), a, s, v) for a, s, v in cells]
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_matrix_cell_entry, p): c for p, c in zip(packed, cells)}
            results = {}
            for future, cell in futures.items():
                try:
                    results[cell] = future.result()
                except Exception as exc:  # cell isolation: record and keep going
                    failures.append(f"{cell}: {type(exc).__name__}: {exc}")
                    results[cell] = None
        cell_results = [results[c] for c in cells]
    else:
        datasets = _matrix_datasets(config, base_dir)
        cell_results = []
        for algo, size, variant in cells:
            try:
                train_set, test_set = datasets[variant]
                model = _trainer(algo)(train_set, size)
                save_model(model, out_dir / "models" / f"{algo}-{size}-{variant}.json")
                fert = evaluation.fertility(model, test_set, vocab_size=size)
                oov = evaluation.oov_rate(model, test_set, vocab_size=size)
                cell_results.append((fert, oov))
                log.info(
                    "cell %s-%s-%s done (%.1fs elapsed)",
                    algo, size, variant, time.perf_counter() - started,
                )
            except Exception as exc:
                failures.append(f"({algo}, {size}, {variant}): {type(exc).__name__}: {exc}")
                cell_results.append(None)

    for (algo, size, variant), result in zip(cells, cell_results):
        if result is None:
            continue
        fert, oov = result
        rows.append(("fertility", algo, size, variant, format(fert.fertility, ".6g")))
        rows.append(("oov_rate", algo, size, variant, format(oov.oov_rate, ".6g")))

    # overlap across algorithms, per (size, variant)
    for size in config["vocab_sizes"]:
        for variant in config["variants"]:
            models = []
            names = []
            for algo in config["algorithms"]:
                path = out_dir / "models" / f"{algo}-{size}-{variant}.json"
                if path.exists():
                    models.append(load_model(path))
                    names.append(algo)
            if len(models) < 2:
                continue
            report = evaluation.vocab_overlap(models, ids=names)
            joined = "+".join(names)
            rows.append(
                ("overlap_percent", joined, size, variant, format(report.jaccard_percent, ".6g"))
            )
            rows.append(("overlap_intersection", joined, size, variant, str(report.intersection_size)))
            rows.append(("overlap_union", joined, size, variant, str(report.union_size)))

    csv_lines = ["metric,algorithm,vocab_size,variant,value"]
    csv_lines.extend(",".join(str(x) for x in row) for row in rows)
    (out_dir / "matrix.csv").write_text("\n".join(csv_lines) + "\n", encoding="utf-8")

    for failure in failures:
        print(json.dumps({"error": "MatrixCellFailed", "detail": failure}), file=sys.stderr)
    log.info("matrix finished in %.1fs, %d failure(s)", time.perf_counter() - started, len(failures))
    return failures


def _cmd_matrix(args):
    failures = run_matrix(args.config, args.output_dir, args.jobs)
    return 2 if failures else 0


# --- entry point ----------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args.global_seed = args.seed
    try:
        return args.func(args) or 0
    except (DataError, OverflowError) as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "IoError", "detail": str(exc)}), file=sys.stderr)
        return 2
    except ValueError as exc:
        print(json.dumps({"error": "UsageError", "detail": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
