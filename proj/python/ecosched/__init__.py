"""Carbon- and energy-aware LLM serving simulator (python surface).

The compiled extension carries the implementation; this package just
re-exports it. When working from a build tree (no installed wheel), point
ECOSCHED_MODULE_DIR at the directory holding the compiled module.
"""

import os
import sys

_module_dir = os.environ.get("ECOSCHED_MODULE_DIR")
if _module_dir and _module_dir not in sys.path:
    sys.path.insert(0, _module_dir)

try:
    from _core import *  # noqa: F401,F403  (build-tree layout)
    from _core import __doc__ as _core_doc
except ImportError:
    from ecosched._core import *  # noqa: F401,F403  (installed wheel layout)
    from ecosched._core import __doc__ as _core_doc

__doc__ = _core_doc
