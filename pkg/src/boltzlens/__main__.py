import sys

from boltzlens.cli import main

sys.exit(main())
