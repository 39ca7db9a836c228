"""Select the kernel backend once, at import time.

The compiled ``_ckernels`` extension is preferred.  Setting the environment
variable ``HABF_PURE_PYTHON=1`` forces the pure-Python twin, which is also
used automatically when the extension was not built.
"""

import os

from . import _pykernels

if os.environ.get("HABF_PURE_PYTHON", "") not in ("", "0"):
    kernels = _pykernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:  # extension not built
        kernels = _pykernels

BACKEND = kernels.NAME


def available_backends():
    """Return every importable kernel module, pure Python first."""
    found = [_pykernels]
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        found.append(_ckernels)
    return found
