"""Decentralized consensus optimization with truncated-Newton ADMM steps.

Everything lives in the compiled extension; this package re-exports it so
`import dnadmm` works both from an installed wheel (where the extension sits
inside the package) and from an in-tree build (where it sits on PYTHONPATH).
"""

try:
    from . import _core
except ImportError:  # in-tree build: build/bindings is on PYTHONPATH
    import _core  # type: ignore[no-redef]

__all__ = [name for name in dir(_core) if not name.startswith("_")]
globals().update({name: getattr(_core, name) for name in __all__})
__version__ = _core.__version__
