"""NumPy fallback for the compiled kernels in ``_kernels.pyx``.

Every function mirrors its compiled twin's arithmetic order so the two
backends give bit-identical results.
"""

import numpy as np

_CHUNK_ELEMS = 1 << 22


def channel_expectation(v2d, probs, out):
    acc = np.zeros(v2d.shape[0])
    for h in range(v2d.shape[1]):
        acc += v2d[:, h] * probs[h]
    out[:] = acc


def backup_min(base, cost, out, policy):
    rows = base.shape[0]
    step = max(1, _CHUNK_ELEMS // max(1, cost.size))
    for lo in range(0, rows, step):
        q = base[lo : lo + step, None, :] + cost[None, :, :]
        arg = q.argmin(axis=2)
        policy[lo : lo + step] = arg
        out[lo : lo + step] = np.take_along_axis(q, arg[..., None], axis=2)[..., 0]


def simulate_table(table, members, strides, aoi_caps, dest_cap, dest0, aoi,
                   dev_cost, weights, arrivals, channels,
                   energy, slot_cost, slot_energy, slot_delta):
    n1 = len(aoi)
    strides = [int(s) for s in strides]
    aoi_caps = [int(c) for c in aoi_caps]
    ch_strides = strides[n1 + 1 :]
    ch_offsets = (np.asarray(channels, dtype=np.int64) @ np.asarray(ch_strides, dtype=np.int64)).tolist()
    arrivals = np.asarray(arrivals, dtype=bool).tolist()
    channels_l = np.asarray(channels).tolist()
    members_l = [[int(n) for n in row if n >= 0] for row in np.asarray(members)]
    cost_l = np.asarray(dev_cost).tolist()
    weights_l = [float(w) for w in weights]
    table_l = np.asarray(table).tolist()
    ages = [int(a) for a in aoi]
    acc = [float(e) for e in energy]
    delta = int(dest0)
    d_stride = strides[n1]
    for t in range(len(ch_offsets)):
        idx = ch_offsets[t] + (delta - 1) * d_stride
        for n in range(n1):
            idx += (ages[n] - 1) * strides[n]
        a = int(table_l[idx])
        cw = 0.0
        ce = 0.0
        if a != 0:
            h = channels_l[t]
            maxage = 0
            for n in members_l[a]:
                e = cost_l[n][h[n]]
                acc[n] += e
                ce = ce + e
                cw = cw + weights_l[n] * e
                if n < n1 and ages[n] > maxage:
                    maxage = ages[n]
            nd = maxage + 1
        else:
            nd = delta + 1
        if nd > dest_cap:
            nd = dest_cap
        slot_delta[t] = delta
        slot_cost[t] = float(delta) + cw
        slot_energy[t] = ce
        delta = nd
        arr = arrivals[t]
        for n in range(n1):
            if arr[n]:
                ages[n] = 1
            elif ages[n] < aoi_caps[n]:
                ages[n] += 1
    aoi[:] = ages
    energy[:] = acc
    return delta
