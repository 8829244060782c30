import sys

from cloudmr.cli import main

sys.exit(main())
