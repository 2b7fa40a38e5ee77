import sys

from collision_census.cli import main

sys.exit(main())
