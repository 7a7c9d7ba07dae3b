import sys

from qkd_backend.cli import main

sys.exit(main())
