"""Module entry point: python3 -m modspec <subcommand> ..."""
from .cli import main

raise SystemExit(main())
