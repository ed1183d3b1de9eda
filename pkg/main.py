import argparse
import csv
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv
from termcolor import colored

from config import get_settings
from coverjoin import Cover, is_cover
from decomposition import width
from drep import count_result, cover_to_drep, enumerate_result, render_drep
from equijoin import equi_bruteforce, equi_cover
from errors import CoverEngineError, NotACover, ValidationError
from faq import faq_bruteforce, faq_cover, faq_enumerate
from jobspec import Job, load_job, load_spec
from logging_config import setup_logging
from materialize import bag_join_tree
from planner import compute_cover, enumerate_plans
from relcore import load_relation_csv, natural_join_bruteforce, project, relation_to_csv, reorder
from schemas import StatsReport

load_dotenv()

logger = logging.getLogger("cover_engine")

COMMANDS = ("cover", "check", "enumerate", "count", "faq", "stats", "plans", "oracle")


def report(level: str, message: str) -> None:
    """One coloured diagnostic line on stderr, mirrored to the log"""
    color_map = {
        "INFO": "green",
        "WARNING": "yellow",
        "ERROR": "red",
    }
    print(colored(f"{level}: {message}", color_map.get(level, "white")), file=sys.stderr)
    if level == "ERROR":
        logger.error(message)
    elif level == "WARNING":
        logger.warning(message)
    else:
        logger.info(message)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cover-engine",
        description="Compute, verify and enumerate covers of join and FAQ results.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("target", nargs="?", help="cover CSV for `check`")
    parser.add_argument("--spec", required=True, help="job spec file")
    parser.add_argument("--plan", help="cover-join plan, e.g. ((R1*R2)*R3)")
    parser.add_argument("--seed", type=int, help="shuffle block rows before pairing")
    parser.add_argument("--emit-drep", action="store_true", help="print the d-representation after the cover")
    parser.add_argument("--strict", action="store_true", help="check consistency and verify the cover")
    parser.add_argument("--table", action="store_true", help="`faq`: print the aggregate table")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def _write_rows(header, rows) -> None:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


def _compute(job: Job, args) -> Cover:
    plan = args.plan or job.spec.plan
    debug = True if args.strict else None
    if job.faq is not None:
        if plan:
            report("WARNING", "FAQ covers use the default plan; --plan ignored")
        return faq_cover(job.faq, job.decomposition, seed=args.seed, debug=debug)

    if job.equi is not None:
        cover = equi_cover(job.equi, job.decomposition, job.source_database, plan=plan, seed=args.seed, debug=debug)
    else:
        cover = compute_cover(job.query, job.decomposition, job.database, plan=plan, seed=args.seed, debug=debug)
    if args.strict:
        verdict = is_cover(cover.relation, job.query, job.decomposition, job.database)
        if not verdict.is_cover:
            raise NotACover(verdict.render())
    return cover


def _faq_table(job: Job, rows) -> None:
    semiring = job.faq.semiring
    _write_rows(
        job.faq.free + ("__value",),
        (key + (semiring.format(value),) for key, value in sorted(rows, key=lambda item: item[0])),
    )


def cmd_cover(job: Job, args) -> int:
    cover = _compute(job, args)
    sys.stdout.write(relation_to_csv(cover.relation))
    if args.emit_drep:
        sys.stdout.write("\n" + render_drep(cover_to_drep(cover)))
    return 0


def cmd_check(job: Job, args) -> int:
    if job.query is None:
        raise ValidationError("`check` needs a join query, not an FAQ")
    if not args.target:
        raise ValidationError("`check` needs the cover CSV to verify")
    relation = load_relation_csv(args.target)
    verdict = is_cover(relation, job.query, job.decomposition, job.database)
    print(verdict.render())
    if verdict.is_cover:
        report("INFO", f"{args.target} is a cover")
        return 0
    report("ERROR", f"{args.target}: {verdict.render()}")
    return NotACover.exit_code


def cmd_enumerate(job: Job, args) -> int:
    cover = _compute(job, args)
    if job.faq is not None:
        _faq_table(job, faq_enumerate(cover))
        return 0
    _write_rows(cover.relation.schema, enumerate_result(cover_to_drep(cover)))
    return 0


def cmd_count(job: Job, args) -> int:
    print(count_result(_compute(job, args)))
    return 0


def cmd_faq(job: Job, args) -> int:
    if job.faq is None:
        raise ValidationError("`faq` needs a spec with a semiring and factors")
    cover = _compute(job, args)
    if args.table:
        _faq_table(job, faq_enumerate(cover))
    else:
        sys.stdout.write(relation_to_csv(cover.relation))
    return 0


def cmd_stats(job: Job, args) -> int:
    cover = _compute(job, args)
    if job.faq is not None:
        database_size = sum(len(f) for f in job.faq.factors)
    elif job.source_database is not None:
        database_size = job.source_database.size
    else:
        database_size = job.database.size
    stats = StatsReport(
        database_size=database_size,
        cover_size=len(cover),
        result_size=count_result(cover),
        width=str(width(job.decomposition)),
        bag_sizes={
            bag: len(project(cover.relation, cover.decomposition.bag_schema(bag)))
            for bag in sorted(cover.decomposition.bags)
        },
    )
    print(stats.render())
    return 0


def cmd_plans(job: Job, args) -> int:
    plans = enumerate_plans(bag_join_tree(job.decomposition))
    for line in sorted(plan.render() for plan in plans):
        print(line)
    return 0


def cmd_oracle(job: Job, args) -> int:
    if job.faq is not None:
        _faq_table(job, faq_bruteforce(job.faq).items())
        return 0
    if job.equi is not None:
        result = equi_bruteforce(job.equi, job.source_database)
    else:
        result = natural_join_bruteforce(job.query.relations_of(job.database))
    sys.stdout.write(relation_to_csv(reorder(result, job.decomposition.attributes)))
    return 0


HANDLERS = {
    "cover": cmd_cover,
    "check": cmd_check,
    "enumerate": cmd_enumerate,
    "count": cmd_count,
    "faq": cmd_faq,
    "stats": cmd_stats,
    "plans": cmd_plans,
    "oracle": cmd_oracle,
}


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    setup_logging("DEBUG" if args.verbose else settings.log_level, settings.log_file)
    try:
        job = load_job(load_spec(args.spec))
        return HANDLERS[args.command](job, args)
    except CoverEngineError as e:
        report("ERROR", f"{e.kind}: {e.detail}")
        return e.exit_code


def cli() -> None:
    sys.exit(run())


if __name__ == "__main__":
    cli()
