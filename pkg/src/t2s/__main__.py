"""Allow `python -m t2s`."""

from .cli import main

if __name__ == "__main__":
    main()
