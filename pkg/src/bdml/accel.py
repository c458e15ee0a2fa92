"""Toggle between numba-compiled and pure-numpy kernel paths.

The hot loops in :mod:`bdml.kernels` are JIT-compiled when numba imports
cleanly and the environment variable ``BDML_DISABLE_NUMBA`` is unset.  Set
``BDML_DISABLE_NUMBA=1`` before import to force the vectorized numpy
fallbacks (useful for debugging and for benchmarking the two paths).
"""

import os

ENV_FLAG = "BDML_DISABLE_NUMBA"


def disabled_by_env() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes")


NUMBA_ENABLED = False
njit = None

if not disabled_by_env():
    try:
        from numba import njit  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        njit = None

if njit is None:

    def njit(*args, **kwargs):
        """Identity decorator standing in for numba.njit."""
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap
