import sys

from erld.cli import main

sys.exit(main())
