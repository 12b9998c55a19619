import sys

from bifcurrent.cli import main

sys.exit(main())
