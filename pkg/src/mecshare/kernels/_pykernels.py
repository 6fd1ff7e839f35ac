"""Pure-Python/numpy implementations of the hot loops.

Operation order mirrors ``_ckernels.pyx`` exactly, so the two backends agree
to the last bit.
"""
import numpy as np

EDGE_TOL = 1e-12


def _poly(form, x, m, hq2, gm):
    if form == 1:
        return ((0.5 * x + m) * x + gm) * x - gm
    return (x + gm - hq2) * x - gm


def _bisect_many(form, lo, hi, m, hq2, gm):
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    out = np.full(lo.shape, np.nan)
    flo = _poly(form, lo, m, hq2, gm)
    fhi = _poly(form, hi, m, hq2, gm)
    done = np.zeros(lo.shape, dtype=bool)

    edge_lo = flo > 0.0
    out[edge_lo & (flo <= EDGE_TOL)] = lo[edge_lo & (flo <= EDGE_TOL)]
    done |= edge_lo
    edge_hi = ~done & (fhi < 0.0)
    take = edge_hi & (fhi >= -EDGE_TOL)
    out[take] = hi[take]
    done |= edge_hi

    active = ~done
    while active.any():
        mid = 0.5 * (lo + hi)
        stuck = active & ((mid <= lo) | (mid >= hi))
        out[stuck] = mid[stuck]
        active &= ~stuck
        fm = _poly(form, mid, m, hq2, gm)
        zero = active & (fm == 0.0)
        out[zero] = mid[zero]
        active &= ~zero
        go_lo = active & (fm < 0.0)
        go_hi = active & (fm > 0.0)
        lo = np.where(go_lo, mid, lo)
        hi = np.where(go_hi, mid, hi)
    return out


def solve_psi_many(etas, p, s, B, band_lo, band_hi, band_form, e1, e2):
    etas = np.asarray(etas, dtype=float)
    q = p + s
    m = 1.0 - p - s
    hq2 = 0.5 * q * q
    g = np.maximum(etas * p - s, 0.0)
    k = np.where(etas < e1, 0, np.where(etas < e2, 1, 2))
    out = np.empty(etas.shape)
    for band in range(3):
        sel = k == band
        if not sel.any():
            continue
        form = int(band_form[band])
        if form == 0:
            out[sel] = g[sel] * B
        else:
            hi = min(float(band_hi[band]), 1.0)
            gm = g[sel] * m
            n = int(sel.sum())
            out[sel] = _bisect_many(form, np.full(n, band_lo[band]),
                                    np.full(n, hi), m, hq2, gm)
    return out


def dynamics_epoch(w, c, roles, order, margin, q, B, counts):
    ws = w.tolist()
    cs = c.tolist()
    rs = roles.tolist()
    na_total = int(counts[0])
    nr_total = int(counts[1])
    switches = 0
    for i in order.tolist():
        ro = rs[i]
        na = na_total - (1 if ro == 0 else 0)
        nr = nr_total - (1 if ro == 1 else 0)
        k = na + 1
        cap = B * k
        served = float(nr) if nr < cap else cap
        pa = ws[i] - q - cs[i] + margin * served / k
        pr = ws[i] - q
        if pa >= pr and pa >= 0.0:
            new = 0
        elif pr >= 0.0:
            new = 1
        else:
            new = 2
        if new != ro:
            rs[i] = new
            na_total = na + (1 if new == 0 else 0)
            nr_total = nr + (1 if new == 1 else 0)
            switches += 1
    roles[:] = rs
    counts[0] = na_total
    counts[1] = nr_total
    return switches
