"""Select the compiled core if it imports, else the numpy fallback.

Set ``MODALMATRIX_BACKEND=python`` to force the fallback.
"""
import os

from . import _pycore

python_core = _pycore

try:
    from . import _core as compiled_core
except ImportError:  # extension not built
    compiled_core = None

if os.environ.get("MODALMATRIX_BACKEND", "").lower() == "python" or compiled_core is None:
    core = _pycore
else:
    core = compiled_core

NAME = core.NAME


def available():
    """Names of the importable cores."""
    return ["python"] + (["cython"] if compiled_core is not None else [])


def get(name=None):
    if name is None:
        return core
    if name == "python":
        return _pycore
    if name == "cython" and compiled_core is not None:
        return compiled_core
    raise ValueError(f"backend {name!r} is not available")
