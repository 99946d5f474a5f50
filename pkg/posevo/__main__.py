import sys

from posevo.cli import main

sys.exit(main())
