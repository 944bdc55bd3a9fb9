"""Worker-count plumbing shared by the CLI and the stages.

``--threads`` and the PAULILAB_THREADS environment variable cap the number
of concurrent workers used by internally parallel stages.  Stages always
produce seed-deterministic results regardless of the cap.
"""

from __future__ import annotations

import os

_ENV_VAR = "PAULILAB_THREADS"
_override = None


def set_max_workers(n):
    global _override
    _override = int(n) if n else None


def get_max_workers() -> int:
    if _override is not None:
        return max(1, _override)
    env = os.environ.get(_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1
