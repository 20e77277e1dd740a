"""Pure-numpy builds of the hot kernels.

Every function here has a jitted twin in numba_impl that honors the same
contract bit for bit: accumulation orders are matched so cross-backend
tests can assert exact equality. Callers condition all inputs (replicate
padding, kernel flipping, contiguity, dtype) before calling in, which
keeps the two implementations trivially interchangeable.
"""

import numpy as np


def conv2d_padded(padded, kflip):
    """Valid-mode sweep of a pre-flipped kernel over a pre-padded image.

    ``padded`` is float64 with the replicate margins already applied and
    ``kflip`` is the convolution kernel already flipped in both axes, so
    this is a plain sliding dot product. Each output pixel accumulates
    kflip[i, j] * padded[y + i, x + j] in row-major tap order starting
    from 0.0; the jitted twin uses the same order, making the backends
    bit-identical (no FMA, no reassociation).
    """
    kh, kw = kflip.shape
    oh = padded.shape[0] - kh + 1
    ow = padded.shape[1] - kw + 1
    out = np.zeros((oh, ow), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            out += kflip[i, j] * padded[i:i + oh, j:j + ow]
    return out


def median2d_padded(padded, k):
    """k x k median of a pre-padded float64 image (k odd).

    The result at each pixel is the middle order statistic of the window,
    an exact element of the input, so partition-based and sort-based
    selection agree bitwise.
    """
    oh = padded.shape[0] - k + 1
    ow = padded.shape[1] - k + 1
    win = np.lib.stride_tricks.sliding_window_view(padded, (k, k))
    return np.median(win.reshape(oh, ow, k * k), axis=2)


def dilate_once(mask):
    """One 3x3 binary dilation step; outside the image counts as false."""
    t = mask.copy()
    t[1:, :] |= mask[:-1, :]
    t[:-1, :] |= mask[1:, :]
    out = t.copy()
    out[:, 1:] |= t[:, :-1]
    out[:, :-1] |= t[:, 1:]
    return out


def fill_holes(mask):
    """Set true every false region not 4-connected to the image border.

    Reachability must be re-clipped to the free set after every
    directional step: a bit allowed to sit on a wall pixel mid-sweep
    would leak through it on the next direction, connecting regions a
    true 4-connected flood keeps apart.
    """
    free = ~mask
    reach = np.zeros_like(mask)
    reach[0, :] = free[0, :]
    reach[-1, :] |= free[-1, :]
    reach[:, 0] |= free[:, 0]
    reach[:, -1] |= free[:, -1]
    while True:
        grow = reach.copy()
        grow[1:, :] |= grow[:-1, :] & free[1:, :]
        grow[:-1, :] |= grow[1:, :] & free[:-1, :]
        grow[:, 1:] |= grow[:, :-1] & free[:, 1:]
        grow[:, :-1] |= grow[:, 1:] & free[:, :-1]
        if np.array_equal(grow, reach):
            return mask | ~reach
        reach = grow


def largest_component(mask):
    """Keep only the largest 8-connected true component.

    Ties go to the component containing the smallest row-major pixel
    index. Works by propagating the minimum flat index across each
    component to a fixpoint; the fixpoint is schedule-independent, so the
    in-place sweep order below only affects convergence speed.
    """
    h, w = mask.shape
    n = h * w
    sentinel = n
    outside = ~mask
    lab = np.arange(n, dtype=np.int64).reshape(h, w)
    lab[outside] = sentinel
    steps = (
        (np.s_[1:, :], np.s_[:-1, :]),
        (np.s_[:, 1:], np.s_[:, :-1]),
        (np.s_[1:, 1:], np.s_[:-1, :-1]),
        (np.s_[1:, :-1], np.s_[:-1, 1:]),
        (np.s_[:-1, :], np.s_[1:, :]),
        (np.s_[:, :-1], np.s_[:, 1:]),
        (np.s_[:-1, :-1], np.s_[1:, 1:]),
        (np.s_[:-1, 1:], np.s_[1:, :-1]),
    )
    while True:
        c = lab.copy()
        for dst, src in steps:
            c[dst] = np.minimum(c[dst], c[src])
            # restoring the sentinel after every step keeps labels from
            # hopping across gaps through momentarily relabeled outside
            # pixels on the next direction
            c[outside] = sentinel
        if np.array_equal(c, lab):
            break
        lab = c
    flat = lab[mask]
    if flat.size == 0:
        return np.zeros_like(mask)
    sizes = np.bincount(flat)
    winner = int(np.argmax(sizes))
    return lab == winner


def scan_split(vs, gs, hs, min_leaf):
    """Best boosting split over one feature's sorted column.

    ``vs`` holds the node's feature values in ascending order with ``gs``
    and ``hs`` the co-sorted gradients and hessians. Candidates are the
    midpoints between consecutive distinct values whose partition leaves
    at least min_leaf examples per side and positive hessian mass per
    side. Returns (gain, threshold, left_count) for the first candidate
    attaining the maximum gain (lowest threshold wins ties), or
    (0.0, nan, -1) when no candidate has gain > 0.
    """
    none = (0.0, np.nan, -1)
    n = vs.shape[0]
    if n < 2:
        return none
    gc = np.cumsum(gs)
    hc = np.cumsum(hs)
    gt = gc[-1]
    ht = hc[-1]
    if not ht > 0.0:
        return none
    parent = gt * gt / ht
    gl = gc[:-1]
    hl = hc[:-1]
    gr = gt - gl
    hr = ht - hl
    lefts = np.arange(1, n, dtype=np.int64)
    mids = (vs[:-1] + vs[1:]) * 0.5
    valid = (
        (lefts >= min_leaf)
        & (lefts <= n - min_leaf)
        & (vs[:-1] != vs[1:])
        & (hl > 0.0)
        & (hr > 0.0)
        # adjacent floats can round their midpoint up onto the right
        # value, which would desync the stored threshold from the
        # counted partition; such candidates are skipped
        & (mids < vs[1:])
    )
    if not valid.any():
        return none
    with np.errstate(divide="ignore", invalid="ignore"):
        gains = gl * gl / hl + gr * gr / hr - parent
    gains = np.where(valid, gains, -np.inf)
    i = int(np.argmax(gains))
    if not gains[i] > 0.0:
        return none
    return (float(gains[i]), float(mids[i]), int(lefts[i]))
