from sagnacbell.cli import main

raise SystemExit(main())
