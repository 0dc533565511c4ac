#!/usr/bin/env python

import sys

from tractoria.cli import main


if __name__ == "__main__":
    sys.exit(main())
