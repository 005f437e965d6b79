# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.  Must stay bit-identical to ``_pykernels``."""

import numpy as np


def channel_expectation(const double[:, ::1] v2d, const double[::1] probs, double[::1] out):
    cdef Py_ssize_t i, h
    cdef Py_ssize_t rows = v2d.shape[0]
    cdef Py_ssize_t cols = v2d.shape[1]
    cdef double acc
    for i in range(rows):
        acc = 0.0
        for h in range(cols):
            acc = acc + v2d[i, h] * probs[h]
        out[i] = acc


def backup_min(const double[:, ::1] base, const double[:, ::1] cost,
               double[:, ::1] out, int[:, ::1] policy):
    cdef Py_ssize_t i, h, u
    cdef Py_ssize_t rows = base.shape[0]
    cdef Py_ssize_t n_h = cost.shape[0]
    cdef Py_ssize_t n_u = cost.shape[1]
    cdef double best, q
    cdef int arg
    for i in range(rows):
        for h in range(n_h):
            best = base[i, 0] + cost[h, 0]
            arg = 0
            for u in range(1, n_u):
                q = base[i, u] + cost[h, u]
                if q < best:
                    best = q
                    arg = <int>u
            out[i, h] = best
            policy[i, h] = arg


def simulate_table(const int[::1] table, const int[:, ::1] members,
                   const long long[::1] strides, const long long[::1] aoi_caps,
                   long long dest_cap, long long dest0, long long[::1] aoi,
                   const double[:, ::1] dev_cost, const double[::1] weights,
                   const unsigned char[:, ::1] arrivals, const int[:, ::1] channels,
                   double[::1] energy, double[::1] slot_cost, double[::1] slot_energy,
                   int[::1] slot_delta):
    cdef Py_ssize_t t, j, n
    cdef Py_ssize_t n_slots = channels.shape[0]
    cdef Py_ssize_t n_dev = channels.shape[1]
    cdef Py_ssize_t n1 = aoi.shape[0]
    cdef Py_ssize_t m = members.shape[1]
    cdef long long delta = dest0
    cdef long long idx, nd, maxage
    cdef int a
    cdef double cw, ce, e
    for t in range(n_slots):
        idx = 0
        for n in range(n1):
            idx += (aoi[n] - 1) * strides[n]
        idx += (delta - 1) * strides[n1]
        for n in range(n_dev):
            idx += channels[t, n] * strides[n1 + 1 + n]
        a = table[idx]
        cw = 0.0
        ce = 0.0
        if a != 0:
            maxage = 0
            for j in range(m):
                n = members[a, j]
                e = dev_cost[n, channels[t, n]]
                energy[n] += e
                ce = ce + e
                cw = cw + weights[n] * e
                if n < n1 and aoi[n] > maxage:
                    maxage = aoi[n]
            nd = maxage + 1
        else:
            nd = delta + 1
        if nd > dest_cap:
            nd = dest_cap
        slot_delta[t] = <int>delta
        slot_cost[t] = <double>delta + cw
        slot_energy[t] = ce
        delta = nd
        for n in range(n1):
            if arrivals[t, n]:
                aoi[n] = 1
            elif aoi[n] < aoi_caps[n]:
                aoi[n] += 1
    return delta
