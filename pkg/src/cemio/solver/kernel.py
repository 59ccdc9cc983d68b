"""Selects the simplex pivot kernel at import: the compiled Cython
extension when built, otherwise the numpy fallback."""

from __future__ import annotations

from . import _kernel_py

try:
    from . import _kernel_c

    DEFAULT_KERNEL = "c"
except ImportError:
    _kernel_c = None
    DEFAULT_KERNEL = "py"

STATUS_OPTIMAL = _kernel_py.STATUS_OPTIMAL
STATUS_UNBOUNDED = _kernel_py.STATUS_UNBOUNDED
STATUS_ITER_LIMIT = _kernel_py.STATUS_ITER_LIMIT


def get_kernel(name: str | None = None):
    """Return the pivot-loop module for ``name`` ('c', 'py', or None=best)."""
    if name in (None, "auto"):
        name = DEFAULT_KERNEL
    if name == "c":
        if _kernel_c is None:
            raise RuntimeError("compiled kernel not built; run setup.py build_ext")
        return _kernel_c
    if name == "py":
        return _kernel_py
    raise ValueError(f"unknown kernel {name!r}")


def available_kernels() -> list[str]:
    return ["c", "py"] if _kernel_c is not None else ["py"]
