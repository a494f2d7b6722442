"""Per-trial inner loops, compiled when available.

The Cython extension ``_ckernels`` is used if it imports; otherwise, or when
the environment variable ``MOMENTUM_SA_PURE`` is set to a non-empty value
other than ``0``, the pure-Python module ``_fallback`` is used. Both expose
the same functions with identical signatures.
"""

import os

from . import _fallback

_force_pure = os.environ.get("MOMENTUM_SA_PURE", "") not in ("", "0")

_compiled = None
if not _force_pure:
    try:
        from . import _ckernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

impl = _compiled if _compiled is not None else _fallback
BACKEND = "compiled" if _compiled is not None else "python"

async_events = impl.async_events
clock_events = impl.clock_events
qlearn_run = impl.qlearn_run
linear_run = impl.linear_run

Q_CODES = {"Watkins": 0, "SNR": 1, "PolSA": 2, "PolSA_D": 3, "NeSA": 4}
LINEAR_CODES = {"SA": 0, "SNR_ideal": 1, "SNR": 2, "PolSA_fixed": 3, "PolSA": 4, "NeSA": 5}


def backends():
    """Available implementations by name, compiled first."""
    out = {}
    if _compiled is not None:
        out["compiled"] = _compiled
    out["python"] = _fallback
    return out
