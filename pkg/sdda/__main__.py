"""Allow ``python -m sdda``."""
import sys

from sdda.main import main

if __name__ == "__main__":
    sys.exit(main())
