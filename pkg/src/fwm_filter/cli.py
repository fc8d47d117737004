"""Command-line entry point.

Examples
--------
    fwm-filter --preset fig5a --out-dir results
    fwm-filter --dump-preset fig3 > fig3.ini
    fwm-filter --config fig3.ini --threads 4
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import FORMATS, load_config
from .errors import ConfigError, FWMError
from .io import default_out_dir
from .presets import PRESETS, preset_config, run_config_object

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

log = logging.getLogger("fwm_filter")


def _formats(text: str) -> tuple[str, ...]:
    items = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [x for x in items if x not in FORMATS]
    if bad or not items:
        raise argparse.ArgumentTypeError(
            f"formats must be a comma list drawn from {', '.join(FORMATS)}"
        )
    return items


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fwm-filter",
        description="Four-wave-mixing spectral filter simulator: figure presets and custom runs.",
    )
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=list(PRESETS), help="run a named figure preset")
    src.add_argument("--config", type=Path, metavar="PATH", help="run a configuration file")
    src.add_argument("--dump-preset", choices=list(PRESETS), metavar="NAME",
                     help="print the full configuration of a preset and exit")
    src.add_argument("--list-presets", action="store_true", help="list preset names and exit")
    p.add_argument("--out-dir", type=Path, default=None,
                   help="output directory (default: $FWM_FILTER_OUT_DIR or ./fwm_output)")
    p.add_argument("--format", type=_formats, default=None, dest="formats",
                   help=f"comma list of outputs to write, from {','.join(FORMATS)} (default: all)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for spectra and sweeps")
    p.add_argument("--seed", type=int, default=None,
                   help="reserved; the pipeline is deterministic and ignores it")
    p.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.list_presets:
        print("\n".join(PRESETS))
        return EXIT_OK
    if args.dump_preset:
        from .config import dump_config

        sys.stdout.write(dump_config(preset_config(args.dump_preset)))
        return EXIT_OK
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        log.debug("--seed %d ignored: the pipeline is deterministic", args.seed)

    try:
        cfg = load_config(args.config) if args.config else preset_config(args.preset)
        out_dir = args.out_dir or (Path(cfg.output.directory) if cfg.output.directory
                                   else default_out_dir())
        paths = run_config_object(cfg, out_dir, args.formats, args.threads)
    except ConfigError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FWMError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # parameter combinations that pass validation but are rejected downstream
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in paths:
        log.info("wrote %s", path)
    print(f"wrote {len(paths)} files to {paths[0].parent if paths else out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
