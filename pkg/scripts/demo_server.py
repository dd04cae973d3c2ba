#!/usr/bin/env python3
"""Start the HTTP service in demo mode.

Equivalent to ``python3 -m webarc.serve --demo``: builds a small fixture
corpus (including the 1418-capture art seed), ingests it into a temporary
store, creates a demo/demo account with one writable group, and stubs the
archive-status lookups so the URL options dialog can be exercised offline.
"""

from __future__ import annotations

import sys

from webarc.serve import main

if __name__ == "__main__":
    sys.argv = [sys.argv[0], "--demo", *sys.argv[1:]]
    main()
