"""Allow ``python -m bdris``."""

import sys

from bdris.scripts.cli import main

if __name__ == "__main__":
    sys.exit(main())
