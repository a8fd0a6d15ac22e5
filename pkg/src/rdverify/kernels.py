"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
fallback is loaded.  Setting ``RDVERIFY_KERNELS=python`` forces the fallback.
"""

import os

from rdverify import _pykernels

if os.environ.get("RDVERIFY_KERNELS", "").lower() == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from rdverify import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"

form_histogram = _impl.form_histogram
f1_histograms = _impl.f1_histograms

WEIGHT_ONE, WEIGHT_V, WEIGHT_UV, WEIGHT_B1 = 0, 1, 2, 3
