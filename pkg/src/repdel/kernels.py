"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
reference is used.  ``REPDEL_KERNELS=python`` forces the fallback.
"""
import os

from . import _pykernels

MYOPIC = _pykernels.MYOPIC
ADVERSARIAL = _pykernels.ADVERSARIAL

_impl = _pykernels
BACKEND = "python"
if os.environ.get("REPDEL_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels

best_response = _impl.best_response
adversarial_response = _impl.adversarial_response
respond = _impl.respond
threshold_utilities = _impl.threshold_utilities
threshold_curve = _impl.threshold_curve
run_ucb = _impl.run_ucb
run_se = _impl.run_se


def backends():
    """Available kernel modules by name (for equivalence tests and benchmarks)."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
