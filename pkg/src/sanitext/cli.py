"""Command-line interface: ``sanitext sanitize | evaluate | measure | cache``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

from sanitext.corpus import (
    CountCache,
    LocalCountProvider,
    ProviderError,
    WebCountProvider,
    WebEndpointConfig,
)
from sanitext.evaluation import load_annotations, score
from sanitext.measures import information_content, pmi
from sanitext.sanitizer import (
    PolicyError,
    SanitizationAborted,
    SanitizerConfig,
    load_policy,
    sanitize_document,
)
from sanitext.taxonomy import TaxonomyError, load_taxonomy
from sanitext.textproc import DEFAULT_MARKER, DEFAULT_MIN_OOV_LENGTH, ContextMode, load_stopwords

log = logging.getLogger("sanitext")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_PROVIDER = 4
EXIT_OUTPUT = 5


class CliError(Exception):
    def __init__(self, message: str, status: int) -> None:
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class ProviderSpec:
    kind: str
    target: Path

    @classmethod
    def parse(cls, spec: str) -> ProviderSpec:
        kind, sep, target = spec.partition(":")
        if not sep or kind not in ("local", "web") or not target:
            raise CliError(f"provider must be local:<dir> or web:<config file>, got {spec!r}", EXIT_USAGE)
        return cls(kind, Path(target))


def build_provider(spec: ProviderSpec, cache_path: str | None):
    cache = CountCache(cache_path) if cache_path else None
    if spec.kind == "local":
        if not spec.target.is_dir():
            raise CliError(f"corpus directory not found: {spec.target}", EXIT_INPUT)
        return LocalCountProvider.from_directory(spec.target, cache)
    if not spec.target.is_file():
        raise CliError(f"web provider config not found: {spec.target}", EXIT_INPUT)
    try:
        config = WebEndpointConfig.from_file(spec.target)
    except (ValueError, TypeError) as exc:
        raise CliError(f"invalid web provider config {spec.target}: {exc}", EXIT_USAGE) from exc
    if cache is None:
        log.warning("no --cache given; web counts will not be persisted")
        cache = CountCache()
    try:
        return WebCountProvider(config, cache)
    except ProviderError as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc


def _read_required(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{what} not found: {p}", EXIT_INPUT)
    return p


def _atomic_write(pairs: list[tuple[Path, str]]) -> None:
    """Write every file to a temporary sibling first, then rename them all."""
    staged = []
    try:
        for target, content in pairs:
            target.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(content)
            staged.append((tmp, target))
        for tmp, target in staged:
            os.replace(tmp, target)
    except OSError as exc:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise CliError(f"cannot write output: {exc}", EXIT_OUTPUT) from exc


def report_document(report, policy, config, provider, status: str, error: str | None = None) -> str:
    doc = {
        "metadata": {
            "status": status,
            "policy_sha256": policy.digest(),
            "policy": [[e.entity, e.generalization] for e in policy.entries],
            "contextualize": policy.contextualize,
            "config": config.describe(),
            "provider": provider.identity,
            "total_units": provider.stats.total_units,
        },
        **report.to_dict(),
    }
    if error is not None:
        doc["metadata"]["error"] = error
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def run_sanitize(args: argparse.Namespace) -> int:
    try:
        mode = ContextMode.parse(args.context)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc
    if args.max_cardinality < 1:
        raise CliError("--max-cardinality must be >= 1", EXIT_USAGE)
    provider_spec = ProviderSpec.parse(args.provider)
    input_path = _read_required(args.input, "input document")
    tax_path = _read_required(args.taxonomy, "taxonomy file")
    policy_path = _read_required(args.policy, "policy file")
    try:
        tax = load_taxonomy(tax_path)
    except TaxonomyError as exc:
        raise CliError(f"{tax_path}: {exc}", EXIT_USAGE) from exc
    try:
        policy = load_policy(policy_path, contextualize=args.contextualize)
        policy.check_taxonomy(tax)
    except PolicyError as exc:
        raise CliError(f"{policy_path}: {exc}", EXIT_USAGE) from exc
    stopwords = None
    if args.stopwords:
        stopwords = load_stopwords(_read_required(args.stopwords, "stopword list"))
    config = SanitizerConfig(
        max_cardinality=args.max_cardinality,
        context_mode=mode,
        marker=args.marker,
        min_oov_length=args.min_oov_length,
        stopwords=stopwords,
    )
    provider = build_provider(provider_spec, args.cache)
    text = input_path.read_text(encoding="utf-8")
    try:
        result = sanitize_document(text, policy, config, tax, provider)
    except SanitizationAborted as exc:
        partial = report_document(exc.report, policy, config, provider, "aborted", str(exc))
        _atomic_write([(Path(args.report), partial)])
        raise CliError(f"count provider failed, run aborted: {exc}", EXIT_PROVIDER) from exc
    finally:
        if provider.cache is not None:
            provider.cache.close()

    outputs = [
        (Path(args.output), result.text),
        (Path(args.report), report_document(result.report, policy, config, provider, "complete")),
    ]
    if args.annotations:
        outputs.append((Path(args.annotations), "".join(f"{t}\n" for t in result.sanitized_terms())))
    _atomic_write(outputs)
    if args.figure:
        from sanitext.plotting import plot_replacements

        plot_replacements(result.report, args.figure, title=input_path.name)
    log.info("%d replacements written to %s", len(result.report.replacements), args.output)
    return EXIT_OK


def run_evaluate(args: argparse.Namespace) -> int:
    system = load_annotations(_read_required(args.system, "system annotations"))
    gold = load_annotations(_read_required(args.gold, "gold annotations"))
    if not gold:
        raise CliError(f"gold annotation file {args.gold} is empty", EXIT_USAGE)
    triple = score(system, gold)
    if triple.empty_system:
        print("warning: system annotation set is empty; precision reported as 0", file=sys.stderr)
    print(triple.format())
    return EXIT_OK


def format_bits(value: float) -> str:
    return "-inf" if value == float("-inf") else f"{value:.6f}"


def run_measure(args: argparse.Namespace) -> int:
    provider = build_provider(ProviderSpec.parse(args.provider), args.cache)
    try:
        if args.kind == "ic":
            if len(args.phrases) != 1:
                raise CliError("ic takes exactly one phrase", EXIT_USAGE)
            value = information_content(args.phrases[0], provider)
        else:
            if len(args.phrases) < 2:
                raise CliError("pmi takes an entity followed by at least one term", EXIT_USAGE)
            value = pmi(args.phrases[0], args.phrases[1:], provider, ctx=args.ctx)
    except ProviderError as exc:
        raise CliError(f"count provider failed: {exc}", EXIT_PROVIDER) from exc
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc
    finally:
        if provider.cache is not None:
            provider.cache.close()
    print(format_bits(value))
    return EXIT_OK


def run_cache(args: argparse.Namespace) -> int:
    path = Path(args.path)
    if args.action == "clear":
        if path.exists():
            CountCache(path).clear()
        print(f"cleared {path}")
        return EXIT_OK
    if not path.is_file():
        raise CliError(f"cache file not found: {path}", EXIT_INPUT)
    try:
        cache = CountCache(path)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from exc
    with path.open(encoding="utf-8") as fh:
        records = sum(1 for line in fh if line.strip())
    print(f"entries\t{len(cache)}")
    print(f"records\t{records}")
    print(f"bytes\t{path.stat().st_size}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sanitext", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sanitize", help="sanitize a document under a protection policy")
    p.add_argument("input")
    p.add_argument("--policy", required=True, help="policy file: entity[<TAB>generalization] per line")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--provider", required=True, help="local:<corpus dir> or web:<config.json>")
    p.add_argument("--output", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--max-cardinality", type=int, default=1)
    p.add_argument("--context", default="whole", help="whole | paragraph | sentence | window:K")
    p.add_argument("--contextualize", action="store_true")
    p.add_argument("--marker", default=DEFAULT_MARKER)
    p.add_argument("--cache")
    p.add_argument("--stopwords")
    p.add_argument("--min-oov-length", type=int, default=DEFAULT_MIN_OOV_LENGTH)
    p.add_argument("--annotations", help="also write the sanitized term set, one per line")
    p.add_argument("--figure", help="render a PMI/threshold chart of the replacements")
    p.set_defaults(func=run_sanitize)

    p = sub.add_parser("evaluate", help="precision/recall/F-measure against gold annotations")
    p.add_argument("system")
    p.add_argument("gold")
    p.set_defaults(func=run_evaluate)

    p = sub.add_parser("measure", help="print IC or PMI in bits")
    p.add_argument("kind", choices=["ic", "pmi"])
    p.add_argument("phrases", nargs="+", help="ic: PHRASE; pmi: ENTITY TERM [TERM ...]")
    p.add_argument("--ctx", help="generalization used to contextualize PMI")
    p.add_argument("--provider", required=True)
    p.add_argument("--cache")
    p.set_defaults(func=run_measure)

    p = sub.add_parser("cache", help="inspect or clear a count cache file")
    p.add_argument("action", choices=["stats", "clear"])
    p.add_argument("path")
    p.set_defaults(func=run_cache)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.status


if __name__ == "__main__":
    sys.exit(main())
