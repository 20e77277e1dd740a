"""Backend dispatch for the hot inner-loop kernels.

The selected implementation module is chosen once at import time from
lungprep.backend. Both implementations share one contract, documented on
the numpy build; callers do all input conditioning (padding, kernel
flipping, contiguity) so the two backends receive identical arrays and
return bit-identical results.
"""

from lungprep.backend import active_backend

if active_backend() == "numba":
    from lungprep._kernels import numba_impl as _impl
else:
    from lungprep._kernels import numpy_impl as _impl

conv2d_padded = _impl.conv2d_padded
median2d_padded = _impl.median2d_padded
dilate_once = _impl.dilate_once
fill_holes = _impl.fill_holes
largest_component = _impl.largest_component
scan_split = _impl.scan_split

__all__ = [
    "conv2d_padded",
    "median2d_padded",
    "dilate_once",
    "fill_holes",
    "largest_component",
    "scan_split",
]
