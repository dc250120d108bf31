import sys

from heli_ilqr.cli import main

sys.exit(main())
