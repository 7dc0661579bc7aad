import sys

from sgmrd.cli import main

sys.exit(main())
