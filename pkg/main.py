import sys

from report_service.cli import main

if __name__ == "__main__":
    sys.exit(main())
