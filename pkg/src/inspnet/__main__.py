"""Module entry point so `python -m inspnet` matches the console script."""

from inspnet.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
