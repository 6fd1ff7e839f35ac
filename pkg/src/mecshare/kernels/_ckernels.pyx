# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.  Must stay operation-for-operation identical to
``_pykernels`` so both backends return bitwise-equal results."""
import numpy as np
from libc.math cimport NAN

cdef double EDGE_TOL = 1e-12


cdef inline double _poly(int form, double x, double m, double hq2, double gm) nogil:
    if form == 1:
        return ((0.5 * x + m) * x + gm) * x - gm
    return (x + gm - hq2) * x - gm


cdef double _bisect(int form, double lo, double hi, double m, double hq2,
                    double gm) nogil:
    cdef double flo = _poly(form, lo, m, hq2, gm)
    cdef double fhi = _poly(form, hi, m, hq2, gm)
    cdef double mid, fm
    if flo > 0.0:
        if flo <= EDGE_TOL:
            return lo
        return NAN
    if fhi < 0.0:
        if fhi >= -EDGE_TOL:
            return hi
        return NAN
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return mid
        fm = _poly(form, mid, m, hq2, gm)
        if fm == 0.0:
            return mid
        if fm < 0.0:
            lo = mid
        else:
            hi = mid


def solve_psi_many(const double[::1] etas, double p, double s, double B,
                   const double[::1] band_lo, const double[::1] band_hi,
                   const int[::1] band_form, double e1, double e2):
    """Equilibrium benefit for every eta; band tables come from the caller.

    ``band_form`` codes: 0 linear, 1 cubic, 2 quadratic.
    """
    cdef Py_ssize_t n = etas.shape[0], i
    cdef int k, form
    cdef double q = p + s
    cdef double m = 1.0 - p - s
    cdef double hq2 = 0.5 * q * q
    cdef double eta, g, hi
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] res = out
    with nogil:
        for i in range(n):
            eta = etas[i]
            g = eta * p - s
            if g < 0.0:
                g = 0.0
            if eta < e1:
                k = 0
            elif eta < e2:
                k = 1
            else:
                k = 2
            form = band_form[k]
            if form == 0:
                res[i] = g * B
            else:
                hi = band_hi[k]
                if hi > 1.0:
                    hi = 1.0
                res[i] = _bisect(form, band_lo[k], hi, m, hq2, g * m)
    return out


def dynamics_epoch(const double[::1] w, const double[::1] c,
                   signed char[::1] roles, const long long[::1] order,
                   double margin, double q, double B, long long[::1] counts):
    """One asynchronous best-response pass in the given visiting order.

    ``counts`` holds ``[n_agents, n_requesters]`` and is updated in place.
    Returns the number of role switches.
    """
    cdef Py_ssize_t n = order.shape[0], j, i
    cdef long long na, nr, k, switches = 0
    cdef signed char ro, new
    cdef double cap, served, pa, pr
    with nogil:
        for j in range(n):
            i = order[j]
            ro = roles[i]
            na = counts[0] - (1 if ro == 0 else 0)
            nr = counts[1] - (1 if ro == 1 else 0)
            k = na + 1
            cap = B * k
            served = <double>nr if nr < cap else cap
            pa = w[i] - q - c[i] + margin * served / k
            pr = w[i] - q
            if pa >= pr and pa >= 0.0:
                new = 0
            elif pr >= 0.0:
                new = 1
            else:
                new = 2
            if new != ro:
                roles[i] = new
                counts[0] = na + (1 if new == 0 else 0)
                counts[1] = nr + (1 if new == 1 else 0)
                switches += 1
    return switches
