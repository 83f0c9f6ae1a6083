from dolr.cli import main
import sys

sys.exit(main())
