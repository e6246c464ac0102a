from __future__ import annotations

import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional

from tablegraft.config import apply_overrides, load_config
from tablegraft.errors import TableGraftError
from tablegraft.pipeline import Pipeline
from tablegraft.types import GroupingMethod
from tablegraft.version import __version__


logger = logging.getLogger("tablegraft")

COMMANDS: Dict[str, Callable[[Pipeline, argparse.Namespace], object]] = {
    "ingest": lambda p, _: p.relational.ingest(),
    "plan": lambda p, _: p.relational.plan(),
    "link": lambda p, _: p.relational.link(),
    "train-stage1": lambda p, _: p.mining.train_stage1(),
    "split": lambda p, _: p.mining.split(),
    "build-graph": lambda p, _: p.augment.build_graph(),
    "train-stage2": lambda p, _: p.augment.train_stage2(),
    "predict": lambda p, _: p.augment.predict(),
    "evaluate": lambda p, args: p.augment.evaluate(args.split),
    "synth": lambda p, _: p.experiments.synth(),
    "ablate": lambda p, _: p.experiments.ablate(),
    "sweep": lambda p, _: p.experiments.sweep(),
    "run-all": lambda p, _: p.run_all(),
}

HELP = {
    "ingest": "load and validate the dataset",
    "plan": "build the join graph and choose meta-paths",
    "link": "link labeled tuples and sample the coreset",
    "train-stage1": "train the per-table attention models",
    "split": "mine sub-tables from cumulative attention",
    "build-graph": "build and dump the heterogeneous graph",
    "train-stage2": "train the heterogeneous GNN and rank sub-tables",
    "predict": "write predictions and the augmented base table",
    "evaluate": "score a split of the base table",
    "synth": "generate a planted-signal synthetic dataset",
    "ablate": "run the edge-weight / similarity / mining ablation grid",
    "sweep": "run the ell sensitivity and grouping-method comparison",
    "run-all": "run every stage from ingest to evaluate",
}

METHODS: List[GroupingMethod] = [
    "maximal_clique",
    "girvan_newman",
    "random_pairs",
    "per_attribute",
    "projection",
    "unsplit",
]


def _options(default: Optional[str] = None) -> argparse.ArgumentParser:
    options = argparse.ArgumentParser(add_help=False, argument_default=default)
    options.add_argument("--config", help="JSON config file")
    options.add_argument("--seed", type=int, help="root seed")
    options.add_argument("--out", help="artifact directory")
    options.add_argument("--dataset", help="dataset directory")
    options.add_argument("--alpha", type=float, help="meta-path length weight")
    options.add_argument("--beta", type=float, help="meta-path direction weight")
    options.add_argument("--ell", type=float, help="sub-table significance threshold")
    options.add_argument("--method", choices=METHODS, help="sub-table grouping method")
    options.add_argument("--topk", type=int, help="similarity neighbours per base node")
    options.add_argument("--theta", type=float, help="similarity cosine threshold")
    options.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return options


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tablegraft",
        description="Graph-based feature augmentation over relational tables",
        parents=[_options()],
    )
    # flags repeated after the command must not reset the ones given before it
    options = _options(argparse.SUPPRESS)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        command = commands.add_parser(name, help=HELP[name], parents=[options])
        if name == "evaluate":
            command.add_argument("--split", default="test", choices=["train", "val", "test"])
    return parser


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.captureWarnings(True)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Command-line entry point.

    :param argv: Arguments, without the program name.
    :type argv: Optional[List[str]]
    :return: Exit status: 0 on success, 2 for a missing upstream artifact, 3 for an
        invalid config, 4 for dataset errors, 5 for modelling errors, 1 otherwise.
    :rtype: int
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    try:
        config = apply_overrides(
            load_config(args.config),
            seed=args.seed,
            out=args.out,
            dataset=args.dataset,
            alpha=args.alpha,
            beta=args.beta,
            ell=args.ell,
            method=args.method,
            topk=args.topk,
            theta=args.theta,
        )
        COMMANDS[args.command](Pipeline(config), args)
    except TableGraftError as e:
        logger.error("%s", e)
        return e.exit_code
    except Exception:
        logger.exception("%s failed", args.command)
        return 1
    return 0
