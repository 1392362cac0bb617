import sys

from sandwichbf.cli import main

sys.exit(main())
