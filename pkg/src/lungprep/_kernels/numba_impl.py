"""Jitted twins of the numpy kernels; numpy_impl documents the contracts.

Accumulation orders match the numpy build exactly (default njit keeps
strict IEEE semantics: no fastmath, no FMA contraction), so both backends
return bit-identical arrays.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def conv2d_padded(padded, kflip):
    kh, kw = kflip.shape
    oh = padded.shape[0] - kh + 1
    ow = padded.shape[1] - kw + 1
    out = np.zeros((oh, ow), dtype=np.float64)
    for y in range(oh):
        for x in range(ow):
            acc = 0.0
            for i in range(kh):
                for j in range(kw):
                    acc += kflip[i, j] * padded[y + i, x + j]
            out[y, x] = acc
    return out


@njit(cache=True)
def median2d_padded(padded, k):
    oh = padded.shape[0] - k + 1
    ow = padded.shape[1] - k + 1
    out = np.empty((oh, ow), dtype=np.float64)
    buf = np.empty(k * k, dtype=np.float64)
    mid = (k * k) // 2
    for y in range(oh):
        for x in range(ow):
            t = 0
            for i in range(k):
                for j in range(k):
                    buf[t] = padded[y + i, x + j]
                    t += 1
            out[y, x] = np.sort(buf)[mid]
    return out


@njit(cache=True)
def dilate_once(mask):
    h, w = mask.shape
    out = np.zeros((h, w), dtype=np.bool_)
    for y in range(h):
        y0 = y - 1 if y > 0 else 0
        y1 = y + 1 if y + 1 < h else h - 1
        for x in range(w):
            x0 = x - 1 if x > 0 else 0
            x1 = x + 1 if x + 1 < w else w - 1
            hit = False
            for i in range(y0, y1 + 1):
                for j in range(x0, x1 + 1):
                    if mask[i, j]:
                        hit = True
                        break
                if hit:
                    break
            out[y, x] = hit
    return out


@njit(cache=True)
def fill_holes(mask):
    h, w = mask.shape
    n = h * w
    reach = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    qn = 0
    for x in range(w):
        i = x
        if not mask[0, x] and not reach[i]:
            reach[i] = True
            queue[qn] = i
            qn += 1
        i = (h - 1) * w + x
        if not mask[h - 1, x] and not reach[i]:
            reach[i] = True
            queue[qn] = i
            qn += 1
    for y in range(h):
        i = y * w
        if not mask[y, 0] and not reach[i]:
            reach[i] = True
            queue[qn] = i
            qn += 1
        i = y * w + (w - 1)
        if not mask[y, w - 1] and not reach[i]:
            reach[i] = True
            queue[qn] = i
            qn += 1
    head = 0
    while head < qn:
        i = queue[head]
        head += 1
        y = i // w
        x = i - y * w
        if y > 0:
            j = i - w
            if not mask[y - 1, x] and not reach[j]:
                reach[j] = True
                queue[qn] = j
                qn += 1
        if y + 1 < h:
            j = i + w
            if not mask[y + 1, x] and not reach[j]:
                reach[j] = True
                queue[qn] = j
                qn += 1
        if x > 0:
            j = i - 1
            if not mask[y, x - 1] and not reach[j]:
                reach[j] = True
                queue[qn] = j
                qn += 1
        if x + 1 < w:
            j = i + 1
            if not mask[y, x + 1] and not reach[j]:
                reach[j] = True
                queue[qn] = j
                qn += 1
    out = np.empty((h, w), dtype=np.bool_)
    for y in range(h):
        for x in range(w):
            out[y, x] = mask[y, x] or not reach[y * w + x]
    return out


@njit(cache=True)
def largest_component(mask):
    h, w = mask.shape
    n = h * w
    comp = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    best_size = 0
    best_id = -1
    ncomp = 0
    # row-major discovery order means ties on size keep the component
    # whose first pixel comes first, matching the numpy twin
    for start in range(n):
        sy = start // w
        sx = start - sy * w
        if mask[sy, sx] and comp[start] < 0:
            cid = ncomp
            ncomp += 1
            comp[start] = cid
            queue[0] = start
            qn = 1
            head = 0
            size = 0
            while head < qn:
                i = queue[head]
                head += 1
                size += 1
                y = i // w
                x = i - y * w
                for dy in range(-1, 2):
                    yy = y + dy
                    if yy < 0 or yy >= h:
                        continue
                    for dx in range(-1, 2):
                        xx = x + dx
                        if xx < 0 or xx >= w:
                            continue
                        j = yy * w + xx
                        if mask[yy, xx] and comp[j] < 0:
                            comp[j] = cid
                            queue[qn] = j
                            qn += 1
            if size > best_size:
                best_size = size
                best_id = cid
    out = np.zeros((h, w), dtype=np.bool_)
    if best_id >= 0:  # unlabeled pixels also read -1, so -1 must not match
        for y in range(h):
            for x in range(w):
                out[y, x] = comp[y * w + x] == best_id
    return out


@njit(cache=True)
def scan_split(vs, gs, hs, min_leaf):
    n = vs.shape[0]
    if n < 2:
        return (0.0, np.nan, -1)
    gt = 0.0
    ht = 0.0
    for i in range(n):
        gt += gs[i]
        ht += hs[i]
    if not ht > 0.0:
        return (0.0, np.nan, -1)
    parent = gt * gt / ht
    best_gain = 0.0
    best_t = np.nan
    best_left = -1
    gl = 0.0
    hl = 0.0
    for i in range(n - 1):
        gl += gs[i]
        hl += hs[i]
        left = i + 1
        if left < min_leaf or n - left < min_leaf:
            continue
        if vs[i] == vs[i + 1]:
            continue
        if not hl > 0.0:
            continue
        hr = ht - hl
        if not hr > 0.0:
            continue
        t = (vs[i] + vs[i + 1]) * 0.5
        if not t < vs[i + 1]:
            continue
        gr = gt - gl
        gain = gl * gl / hl + gr * gr / hr - parent
        if gain > best_gain:
            best_gain = gain
            best_t = t
            best_left = left
    if not best_gain > 0.0:
        return (0.0, np.nan, -1)
    return (best_gain, best_t, best_left)
