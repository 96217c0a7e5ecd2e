"""
Gateset Characterization Toolkit - Main Entry Point
Simulate characterization experiments and estimate the error model
"""

import sys
import signal
from logger_config import setup_logging
from ptm_core import CharacterizationError
import cli


def signal_handler(sig, frame):
    """Handle graceful shutdown on CTRL+C"""
    print("\n🛑 Interrupted, stopping...")
    sys.exit(130)


def main(argv=None) -> int:
    """Main application entry point"""
    args = cli.parse_args(argv)
    logger = setup_logging(args.log_dir, args.verbose)
    logger.info(f"Running command: {args.command}")

    signal.signal(signal.SIGINT, signal_handler)

    try:
        return cli.run(args)

    except CharacterizationError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"✗ {e}", file=sys.stderr)
        return 1

    except OSError as e:
        logger.error(f"I/O error: {e}")
        print(f"✗ {e}", file=sys.stderr)
        return 1

    except Exception as e:
        logger.critical(f"Fatal error: {str(e)}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
