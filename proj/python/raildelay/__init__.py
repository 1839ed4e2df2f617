"""Winter railway delay modeling.

The heavy lifting lives in the compiled ``raildelay._core`` extension:
stratified Cox regression for recurrent primary delays, an inhomogeneous
two-state continuous-time Markov chain for arrival delays, and
expanding-window walk-forward validation. This package re-exports its
surface.

When running against a build tree (rather than an installed wheel), point
``RAILDELAY_EXT_DIR`` at the directory containing the built ``_core``
module before importing.
"""

import os
import sys

_ext_dir = os.environ.get("RAILDELAY_EXT_DIR")
if _ext_dir and _ext_dir not in sys.path:
    sys.path.insert(0, _ext_dir)

try:
    from raildelay._core import *  # noqa: F401,F403
    from raildelay._core import __version__  # noqa: F401
except ImportError:
    from _core import *  # type: ignore[import-not-found]  # noqa: F401,F403
    from _core import __version__  # type: ignore[import-not-found]  # noqa: F401
