import sys

from socialmfg.cli import main

sys.exit(main())
