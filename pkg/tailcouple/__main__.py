from tailcouple.cli import main

raise SystemExit(main())
