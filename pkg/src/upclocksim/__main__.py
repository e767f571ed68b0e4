import sys

from upclocksim.cli import main

sys.exit(main())
