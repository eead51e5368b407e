"""Pure numpy/scipy implementations of the counting kernels.

Every function takes a 2D integer level array where 0 marks pixels outside
the ROI and 1..ng are gray levels. Outputs are bit-identical to the
compiled versions in ``_ckernels.pyx``.
"""
import numpy as np
from scipy import ndimage

_STRUCT = {
    4: np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    8: np.ones((3, 3), dtype=bool),
}


def _shift_pairs(levels, dy, dx):
    """Return aligned views (a, b) with b[k] = levels[p + (dy, dx)] for a[k] = levels[p]."""
    h, w = levels.shape
    if abs(dy) >= h or abs(dx) >= w:
        empty = levels[:0, :0]
        return empty, empty
    ya0, ya1 = max(0, -dy), h - max(0, dy)
    xa0, xa1 = max(0, -dx), w - max(0, dx)
    a = levels[ya0:ya1, xa0:xa1]
    b = levels[ya0 + dy:ya1 + dy, xa0 + dx:xa1 + dx]
    return a, b


def glcm_counts(levels, ng, dy, dx):
    levels = np.asarray(levels, dtype=np.int64)
    a, b = _shift_pairs(levels, dy, dx)
    both = (a > 0) & (b > 0)
    out = np.zeros((ng, ng), dtype=np.int64)
    np.add.at(out, (a[both] - 1, b[both] - 1), 1)
    return out + out.T


def _lines(levels, dy, dx):
    # run length does not depend on traversal sense, only on the line family
    if dy == 0:
        return list(levels)
    if dx == 0:
        return list(levels.T)
    h, w = levels.shape
    src = levels if dy * dx > 0 else np.fliplr(levels)
    return [np.diagonal(src, offset=k) for k in range(-(h - 1), w)]


def glrlm_counts(levels, ng, dy, dx):
    levels = np.asarray(levels, dtype=np.int64)
    parts = []
    for line in _lines(levels, dy, dx):
        parts.append(line)
        parts.append(np.zeros(1, dtype=np.int64))
    seq = np.concatenate(parts)
    change = np.flatnonzero(np.diff(seq)) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [seq.size]))
    vals = seq[starts]
    keep = vals > 0
    vals, lens = vals[keep], (ends - starts)[keep]
    maxrun = int(lens.max()) if lens.size else 1
    out = np.zeros((ng, maxrun), dtype=np.int64)
    np.add.at(out, (vals - 1, lens - 1), 1)
    return out


def glszm_counts(levels, ng):
    levels = np.asarray(levels, dtype=np.int64)
    sizes_by_level = []
    maxsize = 1
    for lv in range(1, ng + 1):
        lab, n = ndimage.label(levels == lv, structure=_STRUCT[8])
        if n == 0:
            sizes_by_level.append(None)
            continue
        sizes = np.bincount(lab.ravel())[1:]
        maxsize = max(maxsize, int(sizes.max()))
        sizes_by_level.append(sizes)
    out = np.zeros((ng, maxsize), dtype=np.int64)
    for lv, sizes in enumerate(sizes_by_level):
        if sizes is not None:
            np.add.at(out[lv], sizes - 1, 1)
    return out


def _neighbourhood(levels, delta):
    """Yield the level array of every offset in the Chebyshev ball, centre excluded."""
    h, w = levels.shape
    padded = np.pad(levels, delta)
    for oy in range(-delta, delta + 1):
        for ox in range(-delta, delta + 1):
            if oy == 0 and ox == 0:
                continue
            yield padded[delta + oy:delta + oy + h, delta + ox:delta + ox + w]


def ngtdm_stats(levels, ng, delta):
    levels = np.asarray(levels, dtype=np.int64)
    nsum = np.zeros_like(levels)
    ncnt = np.zeros_like(levels)
    for nb in _neighbourhood(levels, delta):
        inside = nb > 0
        nsum += nb
        ncnt += inside
    sel = (levels > 0) & (ncnt > 0)
    lv = levels[sel]
    avg = nsum[sel] / ncnt[sel]
    diff = np.abs(lv.astype(np.float64) - avg)
    n = np.bincount(lv, minlength=ng + 1)[1:].astype(np.int64)
    s = np.bincount(lv, weights=diff, minlength=ng + 1)[1:]
    return n, s


def gldm_counts(levels, ng, delta, alpha):
    levels = np.asarray(levels, dtype=np.int64)
    dep = np.zeros_like(levels)
    for nb in _neighbourhood(levels, delta):
        dep += (nb > 0) & (np.abs(nb - levels) <= alpha)
    ndep = (2 * delta + 1) ** 2
    out = np.zeros((ng, ndep), dtype=np.int64)
    sel = levels > 0
    np.add.at(out, (levels[sel] - 1, dep[sel]), 1)
    return out


def label_components(mask, connectivity):
    """Label connected regions, numbered 1..n by raster order of each region's first pixel."""
    mask = np.asarray(mask, dtype=bool)
    lab, n = ndimage.label(mask, structure=_STRUCT[connectivity])
    if n == 0:
        return lab.astype(np.int32), 0
    flat = lab.ravel()
    vals, first = np.unique(flat, return_index=True)
    keep = vals > 0
    vals, first = vals[keep], first[keep]
    remap = np.zeros(n + 1, dtype=np.int32)
    remap[vals[np.argsort(first)]] = np.arange(1, n + 1, dtype=np.int32)
    return remap[lab], int(n)
