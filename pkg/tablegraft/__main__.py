import sys

from tablegraft.cli import main


sys.exit(main())
