import sys

from speaq.cli import main

sys.exit(main())
