"""Replicator kernel backend selection.

The compiled extension is preferred; the numpy twin is a drop-in fallback so
an interpreter without the build toolchain loses only speed. `BACKEND` names
which one is active; both are importable directly for parity tests.
"""

from . import _replicator_np

numpy_run = _replicator_np.replicator_run

try:  # pragma: no cover - depends on the build environment
    from . import _replicator as _compiled

    compiled_run = _compiled.replicator_run
    replicator_run = compiled_run
    BACKEND = "cython"
except ImportError:  # pragma: no cover
    compiled_run = None
    replicator_run = numpy_run
    BACKEND = "numpy"
