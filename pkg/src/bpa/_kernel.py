"""Compiled embedded-chain loop.

State is aggregate counts only, so a step costs O(1) regardless of population
size. Random draws come from numba's per-thread generator, reseeded at the start
of every replication; results therefore do not depend on thread scheduling.
"""

import numpy as np
from numba import njit, prange

# law kinds
K_CONST, K_POISSON, K_BINOM, K_TABLE = 0, 1, 2, 3

# law slots
OFF_X, OFF_Y, ATT_XY, ATT_YX, FRIEND_X, FRIEND_Y = range(6)

# integer state slots
I_N, I_X, I_Y, I_HALT, I_EXT_X, I_EXT_Y = range(6)

# halt codes
RUNNING, H_EXTINCTION, H_HORIZON, H_TRANSITIONS, H_CAP, H_OVERFLOW, H_WATCHED = range(7)
HALT_NAMES = {
    H_EXTINCTION: "extinction",
    H_HORIZON: "horizon",
    H_TRANSITIONS: "transitions",
    H_CAP: "survivalCap",
    H_OVERFLOW: "overflow",
    H_WATCHED: "typeExtinction",
}

COUNT_LIMIT = 2**62


@njit(cache=True)
def seed(s):
    np.random.seed(s)


@njit(cache=True)
def _draw(slot, kinds, mus, ns, cdfs, lens):
    kind = kinds[slot]
    if kind == K_CONST:
        return ns[slot]
    if kind == K_POISSON:
        return np.random.poisson(mus[slot])
    if kind == K_BINOM:
        if ns[slot] == 0:
            return 0
        return np.random.binomial(ns[slot], mus[slot])
    u = np.random.random()
    L = lens[slot]
    k = np.searchsorted(cdfs[slot, :L], u, side="right")
    if k > L - 1:
        k = L - 1
    return k


@njit(cache=True)
def _thin(k, p):
    if k <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return k
    return np.random.binomial(k, p)


@njit(cache=True)
def _attack_free(kinds, ns, resist, joint, split):
    for me in range(2):
        if resist[me] <= 0.0:
            continue
        if joint[me]:
            if split[me, 1] > 0.0:
                return False
        elif not (kinds[ATT_XY + me] == K_CONST and ns[ATT_XY + me] == 0):
            return False
    return True


@njit(cache=True)
def advance(st, tau, kinds, mus, ns, cdfs, lens, resist, joint, split, lam,
            max_n, horizon, cap, watch,
            stride, rec_n, rec_x, rec_y, rec_tau, rec_w, rec_xi, rec_z, rec_count):
    """Step ``st``/``tau`` in place until a halt or until the record buffer fills.

    Returns the number of rows now in the record buffers. ``st[I_HALT]`` stays
    ``RUNNING`` when the call returned only because the buffer is full.
    """
    rec_len = rec_n.shape[0]
    # Without attack the two types are independent continuous-time processes. Once
    # one has reached the cap its fate is settled, so it stops waking and the clock
    # runs on the lagging type alone: the lagging type keeps its exact law and the
    # leader cannot outrun it by orders of magnitude in embedded steps.
    indep = cap > 0 and _attack_free(kinds, ns, resist, joint, split)
    while True:
        n = st[I_N]
        x = st[I_X]
        y = st[I_Y]
        s = x + y
        if s == 0:
            st[I_HALT] = H_EXTINCTION
            return rec_count
        if watch == 0 and x == 0:
            st[I_HALT] = H_WATCHED
            return rec_count
        if watch == 1 and y == 0:
            st[I_HALT] = H_WATCHED
            return rec_count
        if cap > 0 and (x == 0 or x >= cap) and (y == 0 or y >= cap):
            st[I_HALT] = H_CAP
            return rec_count
        if max_n >= 0 and n >= max_n:
            st[I_HALT] = H_TRANSITIONS
            return rec_count
        if x >= COUNT_LIMIT or y >= COUNT_LIMIT:
            st[I_HALT] = H_OVERFLOW
            return rec_count
        if stride > 0 and rec_count >= rec_len:
            return rec_count

        live = s
        frozen = -1
        if indep:
            if x >= cap and 0 < y < cap:
                frozen, live = 0, y
            elif y >= cap and 0 < x < cap:
                frozen, live = 1, x
        dt = np.random.exponential(1.0 / (lam * live))
        if tau[0] + dt > horizon:
            st[I_HALT] = H_HORIZON
            return rec_count

        if frozen < 0:
            x_wakes = np.random.random() * s < x
        else:
            x_wakes = frozen == 1
        me = 0 if x_wakes else 1
        opp = y if x_wakes else x
        if joint[me]:
            f = _draw(FRIEND_X + me, kinds, mus, ns, cdfs, lens)
            xi = _thin(f, split[me, 0])
            cap_k = _thin(f - xi, split[me, 1])
        else:
            xi = _draw(OFF_X + me, kinds, mus, ns, cdfs, lens)
            cap_k = _draw(ATT_XY + me, kinds, mus, ns, cdfs, lens)
        if cap_k > opp:
            cap_k = opp
        zeta = _thin(cap_k, resist[me])
        if x_wakes:
            x = x - 1 + xi + zeta
            y = y - zeta
        else:
            y = y - 1 + xi + zeta
            x = x - zeta
        n += 1
        tau[0] += dt
        st[I_N] = n
        st[I_X] = x
        st[I_Y] = y
        if x == 0 and st[I_EXT_X] < 0:
            st[I_EXT_X] = n
        if y == 0 and st[I_EXT_Y] < 0:
            st[I_EXT_Y] = n
        if stride > 0 and n % stride == 0:
            rec_n[rec_count] = n
            rec_x[rec_count] = x
            rec_y[rec_count] = y
            rec_tau[rec_count] = tau[0]
            rec_w[rec_count] = me
            rec_xi[rec_count] = xi
            rec_z[rec_count] = zeta
            rec_count += 1


@njit(cache=True)
def _one(i, seeds, x0, y0, kinds, mus, ns, cdfs, lens, resist, joint, split, lam,
         max_n, horizon, cap, watch, out_i, out_tau):
    np.random.seed(seeds[i])
    st = np.empty(6, dtype=np.int64)
    st[I_N] = 0
    st[I_X] = x0
    st[I_Y] = y0
    st[I_HALT] = RUNNING
    st[I_EXT_X] = 0 if x0 == 0 else -1
    st[I_EXT_Y] = 0 if y0 == 0 else -1
    tau = np.zeros(1)
    e_i = np.empty(0, dtype=np.int64)
    e_f = np.empty(0)
    advance(st, tau, kinds, mus, ns, cdfs, lens, resist, joint, split, lam,
            max_n, horizon, cap, watch, 0, e_i, e_i, e_i, e_f, e_i, e_i, e_i, 0)
    for j in range(6):
        out_i[i, j] = st[j]
    out_tau[i] = tau[0]


@njit(cache=True)
def batch(seeds, x0, y0, kinds, mus, ns, cdfs, lens, resist, joint, split, lam,
          max_n, horizon, cap, watch, out_i, out_tau):
    for i in range(seeds.shape[0]):
        _one(i, seeds, x0, y0, kinds, mus, ns, cdfs, lens, resist, joint, split, lam,
             max_n, horizon, cap, watch, out_i, out_tau)


@njit(cache=True, parallel=True)
def batch_parallel(seeds, x0, y0, kinds, mus, ns, cdfs, lens, resist, joint, split, lam,
                   max_n, horizon, cap, watch, out_i, out_tau):
    for i in prange(seeds.shape[0]):
        _one(i, seeds, x0, y0, kinds, mus, ns, cdfs, lens, resist, joint, split, lam,
             max_n, horizon, cap, watch, out_i, out_tau)
