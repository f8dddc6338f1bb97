#!/usr/bin/env python
"""Command-line utility for the preguss pipeline. Same as `python -m preguss`."""
import sys


def main():
    """Run the preguss command line."""
    try:
        from preguss.cli import main as preguss_main
    except ImportError as exc:
        raise ImportError(
            "Couldn't import preguss. Are its requirements installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    preguss_main()


if __name__ == '__main__':
    sys.exit(main())
