"""Command-line interface: ``vassbound analyze|dump|check|corpus``."""

from __future__ import annotations

import argparse
import sys
from collections import Counter
from pathlib import Path
from typing import Sequence

from .analysis import Analysis, AnalysisConfig, analyze_source
from .lang import ParseError
from .loops import IrreducibleError, UnreachableError
from .oracle import DEFAULT_GRID_MAX, DEFAULT_STEP_CAP, check_soundness, shrink_params
from .ranking import RankFailure
from .report import build_report
from .symexec import DEFAULT_MERGE_THRESHOLD, DEFAULT_PATH_CAP, PathExplosion

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_IRREDUCIBLE = 3
EXIT_RANKING = 4
EXIT_UNBOUNDED = 5
EXIT_VIOLATION = 6


class Fatal(Exception):
    def __init__(self, message: str, status: int):
        super().__init__(message)
        self.status = status


def load(path: str, config: AnalysisConfig) -> Analysis:
    try:
        source = Path(path).read_text()
    except OSError as exc:
        raise Fatal(f"{path}: {exc.strerror}", EXIT_PARSE) from exc
    try:
        return analyze_source(source, config)
    except ParseError as exc:
        raise Fatal(f"{path}:{exc}", EXIT_PARSE) from exc
    except (IrreducibleError, UnreachableError) as exc:
        raise Fatal(f"{path}: {exc}", EXIT_IRREDUCIBLE) from exc
    except PathExplosion as exc:
        raise Fatal(f"{path}: {exc}", EXIT_UNBOUNDED) from exc


def status_of(a: Analysis) -> int:
    if a.failure is not None:
        return EXIT_RANKING
    if a.total is None:
        return EXIT_UNBOUNDED
    return EXIT_OK


def category(a: Analysis) -> str:
    f = a.failure
    if f is not None:
        return f.kind
    return "unbounded" if a.total is None else f"bounded {a.complexity_class}"


def _config(args) -> AnalysisConfig:
    return AnalysisConfig(
        scc_mode=getattr(args, "scc_mode", False),
        merge_threshold=getattr(args, "merge_threshold", DEFAULT_MERGE_THRESHOLD),
        path_cap=getattr(args, "path_cap", DEFAULT_PATH_CAP),
    )


def cmd_analyze(args, out) -> int:
    a = load(args.file, _config(args))
    report = build_report(a, Path(args.file).name)
    out.write(report.to_json() if args.format == "structured" else report.to_text())
    return status_of(a)


def cmd_dump(args, out) -> int:
    a = load(args.file, _config(args))
    if args.stage == "cfg":
        out.write(a.source_cfg.dump())
    elif args.stage == "paths":
        for h in a.info.headers:
            for p, rel in zip(a.paths[h], a.relations[h]):
                out.write(f"{h}: {p.describe(a.cfg)}\n")
                out.write("  " + rel.dump().replace("\n", "\n  ").rstrip() + "\n")
    elif args.stage == "vass":
        out.write(a.vass.dump())
    elif args.stage == "ts":
        out.write(a.ts.dump())
    else:
        r = a.ranking
        if isinstance(r, RankFailure):
            out.write(r.ranked.dump(a.ts))
            out.write(r.describe() + "\n")
        else:
            out.write(r.dump(a.ts))
    return EXIT_OK


def cmd_check(args, out) -> int:
    a = load(args.file, AnalysisConfig(merge_threshold=args.merge_threshold))
    verdict = check_soundness(a, args.grid_max, args.step_cap, shrink_params if args.corrupt else None)
    out.write(verdict.render())
    return EXIT_OK if verdict.ok else EXIT_VIOLATION


def cmd_corpus(args, out) -> int:
    files = sorted(Path(args.dir).glob("*.imp"))
    counts: Counter[str] = Counter()
    for f in files:
        try:
            cat = category(load(str(f), _config(args)))
        except Fatal as exc:
            cat = {EXIT_PARSE: "parse error", EXIT_IRREDUCIBLE: "irreducible"}.get(exc.status, "path explosion")
        counts[cat] += 1
        out.write(f"{f.name}: {cat}\n")
    out.write("summary:\n")
    for cat, n in sorted(counts.items()):
        out.write(f"  {cat}: {n}\n")
    out.write(f"  files: {len(files)}\n")
    return EXIT_OK


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vassbound", description="Loop and complexity bounds for .imp programs.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, threshold=True):
        sp.add_argument("file")
        if threshold:
            sp.add_argument("--merge-threshold", type=int, default=DEFAULT_MERGE_THRESHOLD)
        sp.add_argument("--path-cap", type=int, default=DEFAULT_PATH_CAP)

    a = sub.add_parser("analyze", help="report bounds")
    common(a)
    a.add_argument("--scc-mode", action="store_true", help="bound each top-level loop by its entry values")
    a.add_argument("--format", choices=("text", "structured"), default="text")
    a.set_defaults(run=cmd_analyze)

    d = sub.add_parser("dump", help="print an intermediate stage")
    common(d)
    d.add_argument("--scc-mode", action="store_true")
    d.add_argument("--stage", choices=("cfg", "paths", "vass", "ts", "ranking"), required=True)
    d.set_defaults(run=cmd_dump)

    c = sub.add_parser("check", help="validate bounds against the trace oracle")
    common(c)
    c.add_argument("--grid-max", type=int, default=DEFAULT_GRID_MAX)
    c.add_argument("--step-cap", type=int, default=DEFAULT_STEP_CAP)
    c.add_argument("--corrupt", action="store_true", help="check deliberately shrunk bounds")
    c.set_defaults(run=cmd_check)

    r = sub.add_parser("corpus", help="categorize every .imp file in a directory")
    r.add_argument("dir")
    r.add_argument("--scc-mode", action="store_true")
    r.set_defaults(run=cmd_corpus)
    return p


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = parser().parse_args(argv)
    try:
        return args.run(args, out)
    except (Fatal, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return getattr(exc, "status", EXIT_PARSE)


if __name__ == "__main__":
    sys.exit(main())
