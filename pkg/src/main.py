#!/usr/bin/env python3
"""
Main entry point for the Offloading Score Toolkit.
"""

import logging
import sys

try:
    from .cli import CLI
    from .config import Config
    from .exceptions import ConfigError, OffloadingError
    from .llm_gateway import LLMGateway
except ImportError:
    from cli import CLI
    from config import Config
    from exceptions import ConfigError, OffloadingError
    from llm_gateway import LLMGateway

logger = logging.getLogger(__name__)


def configure_logging(config):
    level = getattr(logging, str(config.log_level).upper(), None)
    if not isinstance(level, int):
        raise ConfigError(f"Unknown LOG_LEVEL {config.log_level!r}")
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(config.log_file),
            logging.StreamHandler(sys.stdout)
        ],
        force=True,
    )


def main(argv=None):
    """Main function to run the toolkit; returns the process exit code."""
    cli = CLI()
    args = cli.build_parser().parse_args(argv)

    gateway = None
    try:
        config = Config()
        config.load_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
        configure_logging(config)

        gateway = LLMGateway.from_config(config, replay=args.replay, record=args.record)
        return cli.run(args, config, gateway)

    except KeyboardInterrupt:
        logger.info("Stopped by user.")
        return 130
    except OffloadingError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return 1
    finally:
        if gateway is not None:
            gateway.save_bundle()


if __name__ == "__main__":
    sys.exit(main())
