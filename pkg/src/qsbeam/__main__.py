"""Module entry point: python -m qsbeam <command> ..."""

from .cli import main

if __name__ == "__main__":
    raise SystemExit(main())
