"""Naive reference implementations the test suite checks the library against.

Everything here favors obviousness over speed: per-pixel loops, explicit
BFS, exhaustive scans. The oracles share the library's public contracts
(padding semantics, rounding rules, tie rules) but none of its code, so
agreement between the two is evidence, not tautology.
"""

import math
from collections import deque

import numpy as np

_MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------------------
# rounding / quantization
# ---------------------------------------------------------------------------

def oracle_round_half_away(x: float) -> int:
    if x >= 0:
        return int(math.floor(x + 0.5))
    return int(math.ceil(x - 0.5))


def oracle_to_u8(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            v = min(max(float(img[y, x]), 0.0), 1.0) * 255.0
            out[y, x] = int(math.floor(v + 0.5))
    return out


# ---------------------------------------------------------------------------
# filtering (replicate padding throughout)
# ---------------------------------------------------------------------------

def _edge_pixel(img: np.ndarray, y: int, x: int) -> float:
    h, w = img.shape
    return float(img[min(max(y, 0), h - 1), min(max(x, 0), w - 1)])


def oracle_convolve2d(img: np.ndarray, kernel) -> np.ndarray:
    """True convolution (kernel flipped) via a quadruple loop."""
    k = np.asarray(kernel, dtype=np.float64)
    kh, kw = k.shape
    ph, pw = kh // 2, kw // 2
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i in range(kh):
                for j in range(kw):
                    acc += float(k[i, j]) * _edge_pixel(img, y + ph - i, x + pw - j)
            out[y, x] = acc
    return out


def oracle_median(img: np.ndarray, k: int) -> np.ndarray:
    pad = k // 2
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            window = sorted(
                _edge_pixel(img, y + dy, x + dx)
                for dy in range(-pad, pad + 1)
                for dx in range(-pad, pad + 1)
            )
            out[y, x] = window[len(window) // 2]
    return out


def oracle_gaussian_smooth(img: np.ndarray, sigma: float) -> np.ndarray:
    """Full (non-separable) 2-D convolution with the outer-product kernel.

    With replicate padding the x and y clamps are independent, so this
    equals the library's two-pass form up to float summation order.
    """
    r = math.ceil(3.0 * sigma)
    xs = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    g = g / g.sum()
    return oracle_convolve2d(img, np.outer(g, g))


def oracle_sobel_magnitude(img: np.ndarray) -> np.ndarray:
    sx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]]
    sy = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]]
    gx = oracle_convolve2d(img, sx)
    gy = oracle_convolve2d(img, sy)
    return np.sqrt(gx * gx + gy * gy)


# ---------------------------------------------------------------------------
# Otsu threshold by exhaustive scan
# ---------------------------------------------------------------------------

def oracle_otsu(img: np.ndarray) -> tuple:
    """(threshold, mask) maximizing between-class variance.

    Tallies are exact python integers; the variance expression keeps the
    same shape as the library's (d = mu0 - mu1, v = c0*c1*d*d) so the two
    argmaxes agree bit for bit, first maximum winning ties.
    """
    q = oracle_to_u8(img)
    hist = [0] * 256
    for v in q.ravel().tolist():
        hist[v] += 1
    if sum(1 for c in hist if c > 0) <= 1:
        return 0, np.zeros(img.shape, dtype=bool)
    best_t = 0
    best_v = -1.0
    for t in range(255):
        c0 = sum(hist[: t + 1])
        c1 = sum(hist[t + 1 :])
        if c0 == 0 or c1 == 0:
            continue
        s0 = sum(b * hist[b] for b in range(t + 1))
        s1 = sum(b * hist[b] for b in range(t + 1, 256))
        d = s0 / c0 - s1 / c1
        v = c0 * c1 * d * d
        if v > best_v:
            best_v = v
            best_t = t
    return best_t, q > best_t


# ---------------------------------------------------------------------------
# morphology by explicit search
# ---------------------------------------------------------------------------

def oracle_dilate_once(mask: np.ndarray) -> np.ndarray:
    h, w = mask.shape
    out = np.zeros((h, w), dtype=bool)
    for y in range(h):
        for x in range(w):
            hit = False
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and mask[yy, xx]:
                        hit = True
            out[y, x] = hit
    return out


def oracle_fill_holes(mask: np.ndarray) -> np.ndarray:
    """BFS the background from the border; unreached background fills."""
    h, w = mask.shape
    reach = np.zeros((h, w), dtype=bool)
    queue = deque()
    for y in range(h):
        for x in range(w):
            if (y in (0, h - 1) or x in (0, w - 1)) and not mask[y, x]:
                reach[y, x] = True
                queue.append((y, x))
    while queue:
        y, x = queue.popleft()
        for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            yy, xx = y + dy, x + dx
            if 0 <= yy < h and 0 <= xx < w and not mask[yy, xx] and not reach[yy, xx]:
                reach[yy, xx] = True
                queue.append((yy, xx))
    return mask | ~reach


def oracle_components(mask: np.ndarray) -> list:
    """8-connected components as pixel lists, in row-major discovery order."""
    h, w = mask.shape
    seen = np.zeros((h, w), dtype=bool)
    comps = []
    for y in range(h):
        for x in range(w):
            if not mask[y, x] or seen[y, x]:
                continue
            comp = []
            queue = deque([(y, x)])
            seen[y, x] = True
            while queue:
                cy, cx = queue.popleft()
                comp.append((cy, cx))
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        yy, xx = cy + dy, cx + dx
                        if 0 <= yy < h and 0 <= xx < w and mask[yy, xx] and not seen[yy, xx]:
                            seen[yy, xx] = True
                            queue.append((yy, xx))
            comps.append(comp)
    return comps


def oracle_largest_component(mask: np.ndarray) -> np.ndarray:
    """Largest component; size ties keep the earliest-discovered one."""
    out = np.zeros(mask.shape, dtype=bool)
    best = None
    for comp in oracle_components(mask):
        if best is None or len(comp) > len(best):
            best = comp
    if best:
        for y, x in best:
            out[y, x] = True
    return out


def oracle_bbox(mask: np.ndarray) -> tuple:
    """(top, left, height, width) of the true pixels by scanning."""
    ys = [y for y in range(mask.shape[0]) if mask[y].any()]
    xs = [x for x in range(mask.shape[1]) if mask[:, x].any()]
    return ys[0], xs[0], ys[-1] - ys[0] + 1, xs[-1] - xs[0] + 1


# ---------------------------------------------------------------------------
# resizing (pixel-center alignment, clamped)
# ---------------------------------------------------------------------------

def _src_coord(i: int, out_size: int, in_size: int) -> float:
    c = (i + 0.5) * (in_size / out_size) - 0.5
    return min(max(c, 0.0), float(in_size - 1))


def oracle_resize_bilinear(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    in_h, in_w = img.shape
    out = np.zeros((out_h, out_w), dtype=np.float64)
    for y in range(out_h):
        sy = _src_coord(y, out_h, in_h)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, in_h - 1)
        wy = sy - y0
        for x in range(out_w):
            sx = _src_coord(x, out_w, in_w)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, in_w - 1)
            wx = sx - x0
            top = (1.0 - wx) * img[y0, x0] + wx * img[y0, x1]
            bot = (1.0 - wx) * img[y1, x0] + wx * img[y1, x1]
            out[y, x] = (1.0 - wy) * top + wy * bot
    return out


def oracle_resize_nearest(mask: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    in_h, in_w = mask.shape
    out = np.zeros((out_h, out_w), dtype=bool)
    for y in range(out_h):
        sy = int(math.floor(_src_coord(y, out_h, in_h) + 0.5))
        for x in range(out_w):
            sx = int(math.floor(_src_coord(x, out_w, in_w) + 0.5))
            out[y, x] = mask[sy, sx]
    return out


# ---------------------------------------------------------------------------
# classical features by per-pixel accumulation
# ---------------------------------------------------------------------------

def oracle_classical_features(gray: np.ndarray, mask: np.ndarray) -> np.ndarray:
    vals = [float(gray[y, x]) for y in range(gray.shape[0]) for x in range(gray.shape[1]) if mask[y, x]]
    n = len(vals)
    hist = [0] * 32
    for v in vals:
        b = int(math.floor(v * 32))
        hist[min(max(b, 0), 31)] += 1
    hist_frac = [c / n for c in hist]

    area_fraction = n / mask.size
    top, left, height, width = oracle_bbox(mask)
    aspect_ratio = width / height

    mean = math.fsum(vals) / n
    var = math.fsum((v - mean) ** 2 for v in vals) / n
    std = math.sqrt(var)
    if std == 0.0:
        skew = 0.0
    else:
        skew = (math.fsum((v - mean) ** 3 for v in vals) / n) / std**3

    h, w = mask.shape
    perimeter = 0
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                yy, xx = y + dy, x + dx
                if not (0 <= yy < h and 0 <= xx < w) or not mask[yy, xx]:
                    perimeter += 1
                    break
    return np.array(hist_frac + [area_fraction, aspect_ratio, mean, std, skew, perimeter / n])


# ---------------------------------------------------------------------------
# boosting reference pieces
# ---------------------------------------------------------------------------

def oracle_split_candidates(values, gs, hs, min_leaf: int) -> list:
    """All legal (gain, threshold, left_count) splits, brute force.

    Sorting, side sums (math.fsum), and the candidate filter mirror the
    published contract: midpoints between consecutive distinct sorted
    values, both sides >= min_leaf with positive hessian mass, midpoint
    strictly below the right value, gain strictly positive.
    """
    order = sorted(range(len(values)), key=lambda i: values[i])
    vs = [float(values[i]) for i in order]
    gso = [float(gs[i]) for i in order]
    hso = [float(hs[i]) for i in order]
    n = len(vs)
    ht = math.fsum(hso)
    if n < 2 or not ht > 0.0:
        return []
    gt = math.fsum(gso)
    parent = gt * gt / ht
    out = []
    for i in range(n - 1):
        left = i + 1
        if left < min_leaf or n - left < min_leaf:
            continue
        if vs[i] == vs[i + 1]:
            continue
        mid = (vs[i] + vs[i + 1]) * 0.5
        if not mid < vs[i + 1]:
            continue
        gl = math.fsum(gso[:left])
        hl = math.fsum(hso[:left])
        gr = gt - gl
        hr = ht - hl
        if not (hl > 0.0 and hr > 0.0):
            continue
        gain = gl * gl / hl + gr * gr / hr - parent
        if gain > 0.0:
            out.append((gain, mid, left))
    return out


def oracle_best_split(values, gs, hs, min_leaf: int):
    """Highest-gain candidate, lowest threshold winning ties."""
    cands = oracle_split_candidates(values, gs, hs, min_leaf)
    if not cands:
        return (0.0, float("nan"), -1)
    best = max(cands, key=lambda c: (c[0], -c[1]))
    return best


def oracle_sigmoid(m: float) -> float:
    if m >= 0:
        return 1.0 / (1.0 + math.exp(-m))
    e = math.exp(m)
    return e / (1.0 + e)


def oracle_logloss(margins, ys) -> float:
    """Mean logistic loss via the stable decomposition."""
    total = 0.0
    for m, y in zip(margins, ys):
        base = max(m, 0.0) + math.log1p(math.exp(-abs(m)))
        total += base - y * m
    return total / len(margins)


# ---------------------------------------------------------------------------
# ensemble reference scorer
# ---------------------------------------------------------------------------

def oracle_combine(preds, weights, tie_order) -> tuple:
    """(label, score) for (model_id, label, confidence) triples.

    Mirrors the contract: positive-effective-weight votes only, per-class
    sums accumulated in model_id order, argmax over tie_order with strict
    improvement, score normalized over the tie_order traversal.
    """
    votes = [p for p in preds if weights.get(p[0], 1.0) > 0.0]
    if not votes:
        raise ValueError("no votes")
    scores = {}
    for model_id, label, confidence in sorted(votes):
        scores[label] = scores.get(label, 0.0) + weights.get(model_id, 1.0) * confidence
    winner = None
    best = -1.0
    for c in tie_order:
        if c in scores and scores[c] > best:
            winner = c
            best = scores[c]
    denom = 0.0
    for c in tie_order:
        if c in scores:
            denom += scores[c]
    return winner, (best / denom if denom > 0.0 else 0.0)


# ---------------------------------------------------------------------------
# 64-bit hashing / patient assignment
# ---------------------------------------------------------------------------

def oracle_fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & _MASK64
    return h


def oracle_splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def oracle_test_patients(patient_ids, test_fraction: float, seed: int) -> set:
    """The set of patients the deterministic split sends to the test side."""
    patient_ids = list(patient_ids)
    counts = {}
    for p in patient_ids:
        counts[p] = counts.get(p, 0) + 1
    total = len(patient_ids)
    key = lambda p: (oracle_splitmix64((seed & _MASK64) ^ oracle_fnv1a64(p.encode("utf-8"))), p)
    target = test_fraction * total
    chosen = set()
    covered = 0
    for p in sorted(counts, key=key):
        if covered >= target:
            break
        chosen.add(p)
        covered += counts[p]
    return chosen
