import sys

from opencqed.cli import main

sys.exit(main())
