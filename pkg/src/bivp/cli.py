"""
Command-line driver.

Usage::

    bivp classify --corpus counterexample2 --at 0,0
    bivp solve --corpus example1 --at 0,0 --policy interior --eps 1e-3 --out runs/
    bivp envelope --problem problem.json --at 0,0 --out runs/
    bivp uniq --corpus example3 --at 0,0
    bivp probe --corpus example2 --at 0,0
    bivp atlas --corpus example1 --grid 20x20 --out runs/
    bivp corpus-list
    bivp corpus-export example2 example2.json

Exit codes are 0 on success, 1 for input errors, 2 when the analysis is
inconclusive and 3 for internal numeric failures.
"""

import argparse
import dataclasses
import json
import logging
import pathlib
import re
import sys

import numpy as np

from . import corpus
from .classifier import check_condition4, classify_right
from .domain import Direction, ProblemSpec
from .errors import DomainError
from .envelope import EnvelopeVerdict, analyse, probe_extension
from .helpers import BIAS0, DEFAULT_TAU, EULER_STEP, FAMILY_SIZE, SEED
from .integrator import Policy, euler
from .normalize import to_origin
from .peano import boundary_triangle
from .uniqueness import atlas, membership
from .verdicts import REPORT_VERSION, VerdictClass

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INCONCLUSIVE = 2
EXIT_NUMERIC = 3


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Effective settings of one command; embedded in every report."""

    command: str
    corpus: str | None = None
    problem: str | None = None
    at: tuple | None = None
    direction: str = "right"
    eps: float = EULER_STEP
    K: int = FAMILY_SIZE
    bias0: float = BIAS0
    c_star: float = 1.0
    tau: float = DEFAULT_TAU
    seed: int = SEED
    policy: str = "interior"
    span: float | None = None
    grid: tuple = (20, 20)
    workers: int | None = None
    out: str | None = None

    def __post_init__(self):
        for name in ("eps", "bias0", "c_star", "tau"):
            if not getattr(self, name) > 0:
                raise ValueError(f"--{name.replace('_', '-')} must be positive")
        if self.K < 2:
            raise ValueError(f"-K must be at least 2, got {self.K}")
        if self.span is not None and not self.span > 0:
            raise ValueError(f"--span must be positive, got {self.span}")
        if min(self.grid) < 1:
            raise ValueError(f"--grid needs positive sizes, got {self.grid}")
        Direction(self.direction)
        Policy(self.policy)

    def load(self):
        """Return the problem named by ``corpus`` or ``problem``."""
        if self.corpus is not None:
            return corpus.get(self.corpus).problem
        if self.problem is not None:
            try:
                return ProblemSpec.load(self.problem)
            except DomainError as exc:
                raise ValueError(f"Problem file {self.problem}: {exc}") from exc
        raise ValueError("Give a problem with --corpus ID or --problem FILE")

    def anchor(self, problem):
        if self.at is not None:
            return self.at
        if problem.initial_point is None:
            raise ValueError(f"Problem {problem.name!r} has no initial point; use --at X,Y")
        return problem.initial_point


class _Parser(argparse.ArgumentParser):
    """Argument parser reporting usage errors with the input-error exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _point(text):
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {text!r}") from None
    return (x, y)


def _grid(text):
    try:
        nx, ny = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NXxNY, got {text!r}") from None
    return (nx, ny)


def _write(cfg, name, text):
    if cfg.out is None:
        return None
    out = pathlib.Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def _report(cfg, payload):
    """Write ``payload`` with the run configuration as ``<command>.json``."""
    data = {
        "version": REPORT_VERSION,
        "config": dataclasses.asdict(cfg),
        "seed": cfg.seed,
        **payload,
    }
    text = json.dumps(data, indent=2, sort_keys=True, default=str)
    return _write(cfg, f"{cfg.command}.json", text)


def cmd_classify(cfg):
    problem = cfg.load()
    p = to_origin(problem, cfg.anchor(problem), cfg.direction)
    tag = classify_right(p, c_star=cfg.c_star)
    curves = []
    if tag.classified:
        curves += p.upper[:1] if tag.family.has_upper else []
        curves += p.lower[:1] if tag.family.has_lower else []
    conditions = [check_condition4(p, curve) for curve in curves]
    line = str(tag)
    if len(conditions) == 1:
        line += f"; cond4: {conditions[0].status.value}"
    elif conditions:
        statuses = ", ".join(f"{c.side.value} {c.status.value}" for c in conditions)
        line += f"; cond4: {statuses}"
    print(line)
    for diagnostic in tag.diagnostics:
        print(f"  {diagnostic}", file=sys.stderr)
    _report(
        cfg,
        {
            "case": str(tag),
            "window": tag.witness,
            "condition4": [
                {
                    "curve": c.curve,
                    "side": c.side.value,
                    "status": c.status.value,
                    "witness": c.witness,
                    "equality": c.equality,
                }
                for c in conditions
            ],
            "diagnostics": list(tag.diagnostics),
        },
    )
    return EXIT_OK if tag.classified else EXIT_INCONCLUSIVE


def cmd_solve(cfg):
    problem = cfg.load()
    p = to_origin(problem, cfg.anchor(problem), cfg.direction)
    tag = classify_right(p, c_star=cfg.c_star)
    geometry = boundary_triangle(p, tag, tau=cfg.tau)
    if not geometry.h > 0 and cfg.span is None:
        print(f"No Peano segment at {p.anchor}: {geometry.reason}", file=sys.stderr)
        _report(cfg, {"case": str(tag), "geometry": geometry.to_dict()})
        return EXIT_INCONCLUSIVE
    trace = euler(
        p,
        geometry if geometry.h > 0 else None,
        eps=cfg.eps,
        policy=cfg.policy,
        span=cfg.span,
    ).to_global(p)
    text = trace.to_frame().to_csv(index=False)
    if _write(cfg, "trace.csv", text) is None:
        sys.stdout.write(text)
    _report(
        cfg,
        {
            "case": str(tag),
            "geometry": geometry.to_dict(),
            "reason": trace.reason.value,
            "nodes": len(trace),
        },
    )
    return EXIT_OK


def cmd_envelope(cfg):
    problem = cfg.load()
    analysis = analyse(
        problem,
        cfg.anchor(problem),
        cfg.direction,
        eps=cfg.eps,
        K=cfg.K,
        bias0=cfg.bias0,
        c_star=cfg.c_star,
        tau=cfg.tau,
    )
    payload = {"case": str(analysis.tag), "geometry": analysis.geometry.to_dict()}
    if analysis.report is None:
        print(f"{analysis.tag}: no envelopes ({analysis.reason})")
        _report(cfg, payload)
        return EXIT_INCONCLUSIVE
    report = analysis.report
    print(f"{analysis.tag}: {report.verdict.value} (gap {report.gap_max:.3g})")
    frame = report.to_frame()
    for k, (low, up) in enumerate(
        zip(report.lower_sequence, report.upper_sequence, strict=True), start=1
    ):
        frame[f"lower_{k}"] = low.y
        frame[f"upper_{k}"] = up.y
    _write(cfg, "envelope.csv", frame.to_csv(index=False))
    _report(cfg, {**payload, "envelope": report.to_dict()})
    if report.verdict is EnvelopeVerdict.INCONCLUSIVE:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _verdict_exit(cfg, verdict):
    print(verdict)
    for name, trace in verdict.traces.items():
        slug = re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")
        _write(cfg, f"trace-{slug}.csv", trace.to_frame().to_csv(index=False))
    _report(cfg, {"verdict": verdict.to_dict()})
    return EXIT_INCONCLUSIVE if verdict.cls is VerdictClass.UNKNOWN else EXIT_OK


def cmd_uniq(cfg):
    problem = cfg.load()
    verdict = membership(
        problem,
        cfg.anchor(problem),
        eps=cfg.eps,
        K=cfg.K,
        bias0=cfg.bias0,
        seed=cfg.seed,
    )
    return _verdict_exit(cfg, verdict)


def cmd_probe(cfg):
    problem = cfg.load()
    verdict = probe_extension(
        problem, cfg.anchor(problem), eps=cfg.eps, K=cfg.K, bias0=cfg.bias0
    )
    return _verdict_exit(cfg, verdict)


def cmd_atlas(cfg):
    problem = cfg.load()
    x0, x1, y0, y1 = problem.region.bbox
    xs = np.linspace(x0, x1, cfg.grid[0])
    ys = np.linspace(y0, y1, cfg.grid[1])
    frame = atlas(
        problem,
        xs,
        ys,
        workers=cfg.workers,
        eps=cfg.eps,
        K=cfg.K,
        bias0=cfg.bias0,
        seed=cfg.seed,
    )
    text = frame.to_csv(index=False)
    if _write(cfg, "atlas.csv", text) is None:
        sys.stdout.write(text)
    counts = frame["class"].value_counts().to_dict()
    _report(cfg, {"counts": counts, "points": len(frame)})
    logger.info("Atlas of %s: %s", problem.name, counts)
    return EXIT_OK


def cmd_corpus_list(cfg):
    for name in corpus.ids():
        entry = corpus.get(name)
        print(f"{name}: {entry.problem.field.text}")
    return EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "solve": cmd_solve,
    "envelope": cmd_envelope,
    "uniq": cmd_uniq,
    "probe": cmd_probe,
    "atlas": cmd_atlas,
    "corpus-list": cmd_corpus_list,
}


def build_parser():
    parser = _Parser(prog="bivp", description="Boundary initial value problems y' = f(x, y).")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    commands = parser.add_subparsers(dest="command", required=True)

    common = _Parser(add_help=False)
    source = common.add_mutually_exclusive_group(required=True)
    source.add_argument("--corpus", choices=corpus.ids(), help="corpus problem")
    source.add_argument("--problem", help="JSON problem file")
    common.add_argument("--at", type=_point, help="initial point X,Y")
    common.add_argument("--eps", type=float, default=EULER_STEP, help="Euler step")
    common.add_argument("-K", type=int, default=FAMILY_SIZE, help="envelope family size")
    common.add_argument("--bias0", type=float, default=BIAS0, help="largest family bias")
    common.add_argument("--c-star", type=float, default=1.0, help="largest case window")
    common.add_argument("--tau", type=float, default=DEFAULT_TAU, help="default slope bound")
    common.add_argument("--seed", type=int, default=SEED, help="random slice seed")
    common.add_argument("--out", help="output directory for CSV and JSON files")

    for name in ("classify", "solve", "envelope", "uniq", "probe", "atlas"):
        sub = commands.add_parser(name, parents=[common])
        if name in ("classify", "solve", "envelope"):
            sub.add_argument(
                "--direction", choices=[d.value for d in Direction], default="right"
            )
        if name == "solve":
            sub.add_argument(
                "--policy", choices=[p.value for p in Policy], default="interior"
            )
            sub.add_argument("--span", type=float, help="integration length")
        if name == "atlas":
            sub.add_argument("--grid", type=_grid, default=(20, 20), help="NXxNY lattice")
            sub.add_argument("--workers", type=int, help="worker threads")

    commands.add_parser("corpus-list")
    export = commands.add_parser("corpus-export")
    export.add_argument("id", choices=corpus.ids())
    export.add_argument("path")
    return parser


def _config(args):
    fields = {field.name for field in dataclasses.fields(RunConfig)}
    return RunConfig(**{k: v for k, v in vars(args).items() if k in fields})


def main(argv=None):
    """Run the command line; returns the exit code."""
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        if args.command == "corpus-export":
            print(corpus.export(args.id, args.path))
            return EXIT_OK
        cfg = _config(args)
        return COMMANDS[cfg.command](cfg)
    except DomainError as exc:
        logger.debug("Field not evaluable", exc_info=True)
        print(f"bivp: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, FileNotFoundError) as exc:
        print(f"bivp: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (RuntimeError, FloatingPointError) as exc:
        logger.debug("Numeric failure", exc_info=True)
        print(f"bivp: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
