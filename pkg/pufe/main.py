import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pufe.core import (
    ConfigurationError,
    PufeError,
    format_diagnostic,
    get_logger,
    load_run_config,
    settings,
    setup_logging,
    with_error_handling,
)
from pufe.models.completion import CompletionConfig
from pufe.models.stream import Phase
from pufe.services.completion import complete_stream
from pufe.services.datasets import read_incomplete_matrix, read_triplet_matrix
from pufe.services.experiment import load_dataset, resolve_geometry, run_experiment
from pufe.services.pipeline import resolve_min_entries
from pufe.services.reports import (
    write_completion,
    write_observed_triplets,
    write_script,
    write_stream_dump,
)
from pufe.services.simulate import make_script, synthesize_stream
from pufe.services.sketch import sketch_row_space

logger = get_logger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.app_name,
        description=settings.app_description,
    )
    parser.add_argument("--log-level", type=str, default=None, help="DEBUG, INFO, WARNING or ERROR.")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run the full experiment from a config file.")
    _add_common(run)
    run.add_argument("--methods", type=str, default=None, help="Comma list, e.g. NOGD,PUFE.")
    run.add_argument("--trials", type=int, default=None, help="Number of seeded trials.")

    complete = commands.add_parser("complete", help="Complete a partially observed matrix.")
    complete.add_argument("matrix", type=str, help="row_id,col_id,value CSV (0-based col_id).")
    complete.add_argument("--dense", action="store_true", help="Read a dense CSV whose blank cells are unobserved.")
    complete.add_argument("--dim", type=int, default=None, help="Column count for triplet input.")
    _add_common(complete)

    simulate = commands.add_parser("simulate", help="Write one feature-evolvable stream and its script.")
    _add_common(simulate)
    return parser


def _add_common(command: argparse.ArgumentParser) -> None:
    command.add_argument("--config", type=str, default=None, help="Path to a key=value config file.")
    command.add_argument("--seed", type=int, default=None, help="Master seed.")
    command.add_argument("--out", type=str, default=None, help="Output directory.")
    command.add_argument("--setting", type=str, default=None, help="C, I or IC.")


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "seed": args.seed,
        "settings": args.setting,
        "methods": getattr(args, "methods", None),
        "trials": getattr(args, "trials", None),
    }


@with_error_handling
def command_run(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config, _overrides(args))
    out = Path(args.out or settings.output_dir)
    report = run_experiment(cfg, out)
    logger.info("finished experiment", trials=report.completed_trials, out=str(out))
    return 0


@with_error_handling
def command_complete(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config, _overrides(args))
    if args.dense:
        rows = read_incomplete_matrix(args.matrix)
        row_ids = list(range(1, len(rows) + 1))
    else:
        row_ids, rows = read_triplet_matrix(args.matrix, dim=args.dim)
    reference = [row.zero_filled() for row in rows if row.is_complete]
    if not reference:
        raise ConfigurationError("the matrix has no fully observed rows to learn a row space from")
    basis = sketch_row_space(reference, rank=cfg.rank)
    partial = [(row_id, row) for row_id, row in zip(row_ids, rows) if not row.is_complete]
    completion = complete_stream(
        (row for _, row in partial),
        basis,
        CompletionConfig(
            rank=basis.rank,
            confidence=cfg.delta,
            min_entries=resolve_min_entries(cfg, basis, max(len(partial), 1)),
            sample_constant=cfg.sample_constant,
        ),
        row_ids=[row_id for row_id, _ in partial],
        expected_rows=max(len(partial), 1),
    )
    write_completion(completion, Path(args.out or settings.output_dir), basis)
    logger.info("completed matrix", kept=len(completion.kept_row_ids), discarded=len(completion.discarded_row_ids))
    return 0


@with_error_handling
def command_simulate(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config, _overrides(args))
    features, labels = load_dataset(cfg, cfg.seed)
    geometry = resolve_geometry(cfg, *features.shape)
    script = make_script(
        features.shape[1],
        cfg.b,
        geometry["T1"],
        geometry["T2"],
        geometry["s_floor"],
        cfg.seed,
        d2=geometry["d2"],
        schedule=cfg.vanish_schedule,
    )
    setting = cfg.settings[0]
    stream = synthesize_stream(features, labels, script, setting, noise_std=cfg.map_noise)
    out = Path(args.out or settings.output_dir)
    write_stream_dump(stream, out / "stream.csv")
    write_script(script, out / "script.txt")
    overlap = [i for i in stream if i.phase is Phase.OVERLAP]
    write_observed_triplets(
        [i.old_features for i in overlap], out / "overlap.csv", row_ids=[i.t for i in overlap]
    )
    return 0


COMMANDS = {
    "run": command_run,
    "complete": command_complete,
    "simulate": command_simulate,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv`` and dispatch; returns the process exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except PufeError as exc:
        print(format_diagnostic(exc), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
