"""Hot-kernel backend selection.

The compiled Cython extension (``_native``) is preferred when it imported
successfully; otherwise the pure-numpy fallback (``_python``) is used. The
environment variable ``DEFTEMP_KERNELS`` (``native`` or ``python``) forces a
specific backend, which the benchmark and parity tests rely on.
"""

import os

from deftemp.kernels import _python

_forced = os.environ.get("DEFTEMP_KERNELS", "").strip().lower()

if _forced == "python":
    _impl = _python
elif _forced == "native":
    from deftemp.kernels import _native as _impl
else:
    try:
        from deftemp.kernels import _native as _impl
    except ImportError:
        _impl = _python

conv2_full = _impl.conv2_full
edt = _impl.edt
chamfer_energy = _impl.chamfer_energy


def backend_name() -> str:
    """Name of the backend selected at import: 'native' or 'python'."""
    return "python" if _impl is _python else "native"


def available_backends() -> dict:
    """Importable backend modules keyed by name (for benchmarks/tests)."""
    out = {"python": _python}
    try:
        from deftemp.kernels import _native
        out["native"] = _native
    except ImportError:
        pass
    return out
