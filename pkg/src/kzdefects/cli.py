"""Command-line entry point: ``kzdefects <subcommand> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, campaign
from .config import CampaignConfig
from .exceptions import ConfigError, KZError
from .mitigation import ZNEGrid
from .sweep import default_workers

log = logging.getLogger("kzdefects")


def _common(p, config_required=True):
    p.add_argument("--config", type=Path, required=config_required, help="campaign JSON")
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel workers (default: $KZDEFECTS_WORKERS or 1)")
    p.add_argument("--out", type=Path, default=None, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="kzdefects", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="ramp-time sweep from the vacuum")
    _common(p)
    p.add_argument("--save-states", action="store_true", help="dump final states")

    p = sub.add_parser("hold", help="ramp then hold, with spectrum and gap")
    _common(p)

    p = sub.add_parser("compare-space", help="same sweep in blockade and full spaces")
    _common(p)

    p = sub.add_parser("mitigate", help="zero-noise extrapolation of a shot file")
    _common(p, config_required=False)
    p.add_argument("shots", type=Path)
    p.add_argument("calibration", type=Path)
    p.add_argument("--alphas", type=float, nargs="+", default=[1.0, 2.0, 3.0])
    p.add_argument("--betas", type=float, nargs="+", default=[1.0, 1.5, 2.0])
    p.add_argument("--repeats", type=int, default=4)
    p.add_argument("--corners", action="store_true",
                   help="systematic variants at the four sign corners")
    p.add_argument("--baseline", action="store_true",
                   help="also report the confusion-matrix-inversion mean")

    p = sub.add_parser("fit", help="re-run fits on existing sweep output")
    _common(p, config_required=False)
    p.add_argument("--window", type=float, nargs=2, default=[1, 6])
    p.add_argument("--power-window", type=float, nargs=2, default=None)

    p = sub.add_parser("sample", help="draw a shot file from a saved state")
    _common(p, config_required=False)
    p.add_argument("state", type=Path)
    p.add_argument("--shots", type=int, default=2000)
    return parser


def _load(args):
    cfg = CampaignConfig.load(args.config)
    raw = dict(cfg.raw)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out is not None:
        raw["output_dir"] = str(args.out)
    cfg = CampaignConfig.from_dict(raw)
    workers = args.workers if args.workers is not None else (cfg.workers or default_workers())
    # worker count never changes results, so it stays out of the config hash
    return replace(cfg, workers=workers)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "sweep":
            return campaign.cmd_sweep(_load(args), save_states=args.save_states)
        if args.command == "hold":
            return campaign.cmd_hold(_load(args))
        if args.command == "compare-space":
            return campaign.cmd_compare_space(_load(args))
        if args.command == "mitigate":
            seed = 0 if args.seed is None else args.seed
            grid = ZNEGrid(tuple(args.alphas), tuple(args.betas), args.repeats, seed)
            out = args.out or Path("zne.json")
            if out.suffix != ".json":
                out.mkdir(parents=True, exist_ok=True)
                out = out / "zne.json"
            return campaign.cmd_mitigate(args.shots, args.calibration, out, grid,
                                         args.baseline, args.corners)
        if args.command == "fit":
            return campaign.cmd_fit(args.out or Path("results"), tuple(args.window),
                                    args.power_window)
        if args.command == "sample":
            if args.seed is None:
                raise ConfigError("sample needs --seed", field="seed")
            out = args.out or Path("shots.txt")
            return campaign.cmd_sample(args.state, args.shots, args.seed, out)
    except ConfigError as exc:
        log.error("%s", exc)
        return campaign.EXIT_CONFIG
    except (KZError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return campaign.EXIT_CONFIG
    return campaign.EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
