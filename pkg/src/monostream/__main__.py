import sys

from monostream.cli import main

sys.exit(main())
