"""Command-line entry point for netflux campaigns."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from netflux.campaign.campaigns import (
    check_budget,
    run_bound_audit,
    run_counterexample,
    run_efron_stein,
    run_greens,
    run_normality,
    run_scaling,
)
from netflux.campaign.output import emit_plot_data
from netflux.campaign.spec import ExperimentResult, ExperimentSpec, SpecParser, apply_overrides
from netflux.errors import CampaignError, ConfigError, PreconditionError, SolverError
from netflux.resample.records import RecordWriter
from netflux.settings import SettingsManager

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_REFUSED = 2


class CampaignApp:
    """Runs one campaign of a campaign document and writes its outputs."""

    CAMPAIGN_SCALING = "scaling"
    CAMPAIGN_NORMALITY = "normality"
    CAMPAIGN_EFRON_STEIN = "efron_stein"
    CAMPAIGN_BOUND_AUDIT = "bound_audit"
    CAMPAIGN_GREENS = "greens_decay"
    CAMPAIGN_COUNTEREXAMPLE = "counterexample"

    # CLI subcommand -> campaign name
    COMMANDS = {
        "scaling": CAMPAIGN_SCALING,
        "normality": CAMPAIGN_NORMALITY,
        "efron-stein": CAMPAIGN_EFRON_STEIN,
        "bound-audit": CAMPAIGN_BOUND_AUDIT,
        "greens": CAMPAIGN_GREENS,
        "counterexample": CAMPAIGN_COUNTEREXAMPLE,
    }

    def __init__(self, settings_manager: Optional[SettingsManager] = None):
        self.settings_manager = settings_manager or SettingsManager()

    def run(self, spec: ExperimentSpec) -> list[ExperimentResult]:
        """Run every campaign listed in spec and emit results.csv and manifest.json."""
        settings = self.settings_manager.run
        check_budget(spec, settings)
        out = Path(spec.output_dir)
        out.mkdir(parents=True, exist_ok=True)

        results: list[ExperimentResult] = []
        writer = None
        if {self.CAMPAIGN_EFRON_STEIN, self.CAMPAIGN_BOUND_AUDIT} & set(spec.campaigns):
            writer = RecordWriter(out / "records.jsonl")
        try:
            for campaign in spec.campaigns:
                logger.info("Starting campaign %s", campaign)
                if campaign == self.CAMPAIGN_SCALING:
                    results.extend(run_scaling(spec, settings))
                elif campaign == self.CAMPAIGN_NORMALITY:
                    results.extend(run_normality(spec, settings))
                elif campaign == self.CAMPAIGN_EFRON_STEIN:
                    results.extend(run_efron_stein(spec, settings, writer))
                elif campaign == self.CAMPAIGN_BOUND_AUDIT:
                    results.extend(run_bound_audit(spec, settings, writer))
                elif campaign == self.CAMPAIGN_GREENS:
                    results.extend(run_greens(spec, settings, out))
                else:
                    results.extend(run_counterexample(spec, settings))
                logger.info("Finished campaign %s", campaign)
        finally:
            if writer is not None:
                writer.close()

        emit_plot_data(results, out, spec)
        return results


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", help="JSON campaign document")
    common.add_argument("--seed", type=int, help="Master seed (unsigned 64-bit)")
    common.add_argument("--workers", type=int, help="Worker threads")
    common.add_argument("--out", help="Output directory")
    common.add_argument("--verbose", action="store_true", help="Log at DEBUG level")

    parser = argparse.ArgumentParser(
        prog="netflux",
        allow_abbrev=False,
        description="Random conductor cell problem: flux statistics and bound audits.",
        epilog="Any other --dotted.key VALUE overrides that key of the campaign document.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in CampaignApp.COMMANDS:
        subparsers.add_parser(command, parents=[common], allow_abbrev=False)
    return parser


def load_spec(args: argparse.Namespace, overrides: list[str]) -> ExperimentSpec:
    data = SpecParser.read(args.config) if args.config else {}
    if overrides:
        data = apply_overrides(data, overrides)
    if args.seed is not None:
        data["master_seed"] = args.seed
    if args.workers is not None:
        data["workers"] = args.workers
    if args.out is not None:
        data["output_dir"] = args.out
    data["campaigns"] = [CampaignApp.COMMANDS[args.command]]
    return ExperimentSpec.from_dict(data)


def main(argv: Optional[list[str]] = None) -> int:
    args, overrides = build_parser().parse_known_args(argv)

    settings_manager = SettingsManager()
    settings_manager.load()
    level = logging.DEBUG if args.verbose else settings_manager.run.log_level
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        spec = load_spec(args, overrides)
        CampaignApp(settings_manager).run(spec)
    except (PreconditionError, ConfigError) as e:
        logger.error("Refused: %s", e)
        return EXIT_REFUSED
    except (CampaignError, SolverError) as e:
        logger.error("Campaign failed: %s", e)
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
