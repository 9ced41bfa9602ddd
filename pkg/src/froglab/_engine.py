"""Compiled core of the frog simulations.

Frogs advance in lockstep, one step per unit of time, so activation times
and first-visit times are exact.  Frog ``(site, k)`` draws its death clock
from ``u(key, -1)`` and its n-th step from ``u(key, n)``, where ``key`` is
derived from the run key, the site and ``k``.
"""
import math

import numba
import numpy as np

from .rng import counter_uniform, site_key

NEVER = np.int64(-1)
INF_STEPS = np.int64(2**62)


@numba.njit(cache=True, inline="always")
def _pick(thresholds, u):
    j = 0
    while j < thresholds.shape[0] - 1 and u >= thresholds[j]:
        j += 1
    return j


@numba.njit(cache=True)
def lifetime(key, survival):
    """Number of steps a frog survives: ``P(L >= k) = survival**k``."""
    if survival >= 1.0:
        return INF_STEPS
    if survival <= 0.0:
        return np.int64(0)
    v = 1.0 - counter_uniform(key, -1)
    x = math.floor(math.log(v) / math.log(survival))
    if x > 4.0e18:
        return INF_STEPS
    return np.int64(x)


@numba.njit(cache=True, inline="always")
def _inside(pos, lo, hi):
    for a in range(pos.shape[0]):
        if pos[a] < lo[a] or pos[a] > hi[a]:
            return False
    return True


@numba.njit(cache=True, inline="always")
def _flat(pos, lo, shape):
    idx = 0
    for a in range(pos.shape[0]):
        c = pos[a] - lo[a]
        if c < 0 or c >= shape[a]:
            return -1
        idx = idx * shape[a] + c
    return idx


@numba.njit(cache=True)
def frog_path(key, start, thresholds, vectors, max_steps, survival, arena_lo, arena_hi):
    """Positions ``S_0 .. S_L`` of one frog, truncated at death, at
    ``max_steps`` or before leaving the arena."""
    life = lifetime(key, survival)
    n = min(max_steps, life)
    out = np.empty((n + 1, start.shape[0]), dtype=np.int64)
    out[0] = start
    pos = start.copy()
    length = 0
    for s in range(1, n + 1):
        j = _pick(thresholds, counter_uniform(key, s))
        pos += vectors[j]
        if not _inside(pos, arena_lo, arena_hi):
            break
        out[s] = pos
        length = s
    return out[: length + 1]


@numba.njit(cache=True)
def _hits_point(key, start, target, thresholds, vectors, max_steps, survival, arena_lo, arena_hi):
    life = lifetime(key, survival)
    n = min(max_steps, life)
    pos = start.copy()
    d = start.shape[0]
    for s in range(1, n + 1):
        j = _pick(thresholds, counter_uniform(key, s))
        pos += vectors[j]
        if not _inside(pos, arena_lo, arena_hi):
            return False
        same = True
        for a in range(d):
            if pos[a] != target[a]:
                same = False
                break
        if same:
            return True
    return False


@numba.njit(cache=True)
def simulate(run_key, thresholds, vectors,
             region_lo, region_shape, eta,
             arena_lo, arena_hi, max_steps, survival, horizon,
             init_sites, init_counts, origin,
             watch_lo, watch_shape, watch_group, n_groups, stop_when_watched,
             box_group, box_sizes, stop_when_boxes):
    d = region_lo.shape[0]
    n_region = 1
    for a in range(d):
        n_region *= region_shape[a]
    max_frogs = n_region * eta + init_counts.sum()

    f_site = np.empty((max_frogs, d), dtype=np.int64)
    f_k = np.empty(max_frogs, dtype=np.int64)
    f_key = np.empty(max_frogs, dtype=np.uint64)
    f_time = np.empty(max_frogs, dtype=np.int64)
    f_parent = np.empty(max_frogs, dtype=np.int64)
    f_life = np.empty(max_frogs, dtype=np.int64)
    f_steps = np.zeros(max_frogs, dtype=np.int64)
    f_origin = np.zeros(max_frogs, dtype=np.int64)
    f_pos = np.empty((max_frogs, d), dtype=np.int64)
    first_visit = np.full(n_region, NEVER, dtype=np.int64)
    watch_time = np.full(n_groups, NEVER, dtype=np.int64)
    n_boxes = box_sizes.shape[0]
    box_flag = np.zeros(n_boxes, dtype=np.bool_)
    box_count = np.zeros(n_boxes, dtype=np.int64)
    n_resolved = 0
    for g in range(n_boxes):
        if box_sizes[g] == 0:
            n_resolved += 1
    n_watched = 0
    active = np.empty(max_frogs, dtype=np.int64)
    n_active = 0
    n_frogs = 0

    # initial frogs
    for i in range(init_sites.shape[0]):
        site = init_sites[i]
        idx = _flat(site, region_lo, region_shape)
        if idx >= 0 and first_visit[idx] == NEVER:
            first_visit[idx] = 0
        for k in range(init_counts[i]):
            key = site_key(run_key, site, k)
            f_site[n_frogs] = site
            f_k[n_frogs] = k
            f_key[n_frogs] = key
            f_time[n_frogs] = 0
            f_parent[n_frogs] = -1
            f_life[n_frogs] = min(lifetime(key, survival), max_steps)
            f_pos[n_frogs] = site
            if f_life[n_frogs] > 0:
                active[n_active] = n_frogs
                n_active += 1
            n_frogs += 1
        if idx >= 0 and n_boxes > 0 and box_group[idx] >= 0:
            g = box_group[idx]
            was = box_flag[g] or box_count[g] == box_sizes[g]
            box_count[g] += 1
            for f in range(n_frogs - init_counts[i], n_frogs):
                if not box_flag[g] and _hits_point(f_key[f], site, origin, thresholds, vectors,
                                                   max_steps, survival, arena_lo, arena_hi):
                    box_flag[g] = True
            if not was and (box_flag[g] or box_count[g] == box_sizes[g]):
                n_resolved += 1
        widx = _flat(site, watch_lo, watch_shape)
        if widx >= 0 and watch_group[widx] >= 0 and watch_time[watch_group[widx]] == NEVER:
            watch_time[watch_group[widx]] = 0
            n_watched += 1

    t = 0
    stopped_early = False
    while n_active > 0:
        if stop_when_watched and n_watched == n_groups:
            stopped_early = True
            break
        if stop_when_boxes and n_resolved == n_boxes:
            stopped_early = True
            break
        if horizon >= 0 and t >= horizon:
            break
        t += 1
        n_now = n_active
        keep = 0
        for ii in range(n_now):
            f = active[ii]
            s = f_steps[f] + 1
            j = _pick(thresholds, counter_uniform(f_key[f], s))
            pos = f_pos[f]
            for a in range(d):
                pos[a] += vectors[j, a]
            if not _inside(pos, arena_lo, arena_hi):
                continue
            f_steps[f] = s
            # origin
            same = True
            for a in range(d):
                if pos[a] != origin[a]:
                    same = False
                    break
            if same:
                f_origin[f] += 1
            idx = _flat(pos, region_lo, region_shape)
            if idx >= 0 and first_visit[idx] == NEVER:
                first_visit[idx] = t
                for k in range(eta):
                    key = site_key(run_key, pos, k)
                    f_site[n_frogs] = pos
                    f_k[n_frogs] = k
                    f_key[n_frogs] = key
                    f_time[n_frogs] = t
                    f_parent[n_frogs] = f
                    f_life[n_frogs] = min(lifetime(key, survival), max_steps)
                    f_pos[n_frogs] = pos
                    if f_life[n_frogs] > 0:
                        active[n_active] = n_frogs
                        n_active += 1
                    n_frogs += 1
                if n_boxes > 0 and box_group[idx] >= 0:
                    g = box_group[idx]
                    was = box_flag[g] or box_count[g] == box_sizes[g]
                    box_count[g] += 1
                    for f2 in range(n_frogs - eta, n_frogs):
                        if not box_flag[g] and _hits_point(f_key[f2], f_site[f2], origin, thresholds,
                                                           vectors, max_steps, survival,
                                                           arena_lo, arena_hi):
                            box_flag[g] = True
                    if not was and (box_flag[g] or box_count[g] == box_sizes[g]):
                        n_resolved += 1
            if n_groups > 0:
                widx = _flat(pos, watch_lo, watch_shape)
                if widx >= 0:
                    g = watch_group[widx]
                    if g >= 0 and watch_time[g] == NEVER:
                        watch_time[g] = t
                        n_watched += 1
            if s < f_life[f]:
                active[keep] = f
                keep += 1
        # frogs activated during this step were appended after n_now
        for ii in range(n_now, n_active):
            active[keep] = active[ii]
            keep += 1
        n_active = keep

    return (f_site[:n_frogs].copy(), f_k[:n_frogs].copy(), f_key[:n_frogs].copy(),
            f_time[:n_frogs].copy(), f_parent[:n_frogs].copy(), f_steps[:n_frogs].copy(),
            f_origin[:n_frogs].copy(), f_life[:n_frogs].copy(), first_visit, watch_time,
            box_flag, box_count, t, n_active, stopped_early)


@numba.njit(cache=True)
def offline_visit_counts(key, thresholds, vectors, x0, k_max, margin, max_steps):
    """Walk from ``x0 e_1``; per hyperplane ``x_1 = k`` with ``|k| <= k_max``
    count the distinct sites off the e1-axis line that it visits.

    Also returns the first entrance time and last exit time of each
    hyperplane (-1 if never visited) and whether the step cap was hit.  The
    walk runs until ``x_1 > k_max + margin`` or ``max_steps``.
    """
    d = vectors.shape[1]
    counts = np.zeros(2 * k_max + 1, dtype=np.int64)
    first = np.full(2 * k_max + 1, -1, dtype=np.int64)
    last = np.full(2 * k_max + 1, -1, dtype=np.int64)
    buf = np.empty(1024, dtype=np.int64)
    nbuf = 0
    pos = np.zeros(d, dtype=np.int64)
    pos[0] = x0
    if -k_max <= x0 <= k_max:
        first[x0 + k_max] = 0
        last[x0 + k_max] = 0
    capped = True
    span = 2 * max_steps + 1
    for s in range(1, max_steps + 1):
        j = _pick(thresholds, counter_uniform(key, s))
        for a in range(d):
            pos[a] += vectors[j, a]
        if pos[0] > k_max + margin:
            capped = False
            break
        if pos[0] < -k_max or pos[0] > k_max:
            continue
        h = pos[0] + k_max
        if first[h] < 0:
            first[h] = s
        last[h] = s
        off = False
        for a in range(1, d):
            if pos[a] != 0:
                off = True
                break
        if not off:
            continue
        code = h
        for a in range(1, d):
            code = code * span + (pos[a] + max_steps)
        if nbuf == buf.shape[0]:
            nb = np.empty(2 * buf.shape[0], dtype=np.int64)
            nb[:nbuf] = buf[:nbuf]
            buf = nb
        buf[nbuf] = code
        nbuf += 1
    if nbuf:
        u = np.unique(buf[:nbuf])
        div = 1
        for a in range(1, d):
            div *= span
        for c in u:
            counts[c // div] += 1
    return counts, first, last, capped


@numba.njit(cache=True)
def offline_counts_batch(run_key, thresholds, vectors, x0, k_max, margin, max_steps, trials):
    counts = np.zeros((trials, 2 * k_max + 1), dtype=np.int64)
    n_capped = 0
    one = np.zeros(1, dtype=np.int64)
    for t in range(trials):
        one[0] = t
        c, _f, _l, capped = offline_visit_counts(site_key(run_key, one, 0), thresholds, vectors,
                                                 x0, k_max, margin, max_steps)
        counts[t] = c
        n_capped += capped
    return counts, n_capped


@numba.njit(cache=True)
def xi_batch(run_key, survival, cap, max_steps, trials):
    """Activated frogs in the symmetric one-dimensional frog model with
    death, started with two active frogs at 0 and one sleeping frog on every
    other site.  Counts are capped at ``cap``."""
    thresholds = np.array([0.5, 1.0])
    out = np.empty(trials, dtype=np.int64)
    one = np.zeros(1, dtype=np.int64)
    site = np.zeros(1, dtype=np.int64)
    for tr in range(trials):
        one[0] = tr
        tkey = site_key(run_key, one, 0)
        lo = 0
        hi = 0
        plo = 0
        phi = 0
        pending0 = 2
        capped = False
        while not capped:
            if pending0 > 0:
                pending0 -= 1
                x = 0
                k = pending0
            elif plo > lo:
                plo -= 1
                x = plo
                k = 0
            elif phi < hi:
                phi += 1
                x = phi
                k = 0
            else:
                break
            site[0] = x
            key = site_key(tkey, site, k)
            n = min(max_steps, lifetime(key, survival))
            pos = x
            for s in range(1, n + 1):
                if counter_uniform(key, s) < thresholds[0]:
                    pos += 1
                else:
                    pos -= 1
                if pos < lo:
                    lo = pos
                if pos > hi:
                    hi = pos
                if hi - lo + 2 >= cap:
                    capped = True
                    break
        out[tr] = min(hi - lo + 2, cap)
    return out


@numba.njit(cache=True)
def leftmost_reach_batch(run_key, thresholds, vectors, survival, n_max, right, max_steps, trials):
    """Leftmost site reached by the one-dimensional frog cluster of 0, per trial.

    Frogs sit on every site, one each; a frog is retired once it passes
    ``right``.  The cluster is an interval, so it is grown by activating
    sites at its ends.  The result is clipped at ``-n_max``.
    """
    out = np.empty(trials, dtype=np.int64)
    one = np.zeros(1, dtype=np.int64)
    site = np.zeros(1, dtype=np.int64)
    for tr in range(trials):
        one[0] = tr
        tkey = site_key(run_key, one, 0)
        lo = 0
        hi = 0
        plo = 1
        phi = 0
        while lo > -n_max and (plo > lo or phi < hi):
            if plo > lo:
                plo -= 1
                x = plo
            else:
                phi += 1
                x = phi
            site[0] = x
            key = site_key(tkey, site, 0)
            n = min(max_steps, lifetime(key, survival))
            pos = x
            for s in range(1, n + 1):
                pos += vectors[_pick(thresholds, counter_uniform(key, s)), 0]
                if pos > right:
                    break
                if pos < lo:
                    lo = pos
                    if lo <= -n_max:
                        break
                if pos > hi:
                    hi = pos
        out[tr] = max(lo, -n_max)
    return out


@numba.njit(cache=True, inline="always")
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@numba.njit(cache=True)
def spanning_threshold(u, shape):
    """Threshold ``t`` such that sites with ``u < p`` connect the faces
    ``x_0 = 0`` and ``x_0 = shape[0] - 1`` iff ``p > t``.

    Sites are opened in increasing order of ``u`` with a union-find.
    """
    n = u.shape[0]
    d = shape.shape[0]
    strides = np.ones(d, dtype=np.int64)
    for a in range(d - 2, -1, -1):
        strides[a] = strides[a + 1] * shape[a + 1]
    parent = np.arange(n + 2)
    top = n
    bottom = n + 1
    opened = np.zeros(n, dtype=np.bool_)
    order = np.argsort(u)
    for idx in order:
        opened[idx] = True
        c0 = idx // strides[0]
        if c0 == 0:
            parent[_find(parent, idx)] = _find(parent, top)
        if c0 == shape[0] - 1:
            parent[_find(parent, idx)] = _find(parent, bottom)
        for a in range(d):
            c = (idx // strides[a]) % shape[a]
            if c > 0 and opened[idx - strides[a]]:
                parent[_find(parent, idx)] = _find(parent, idx - strides[a])
            if c < shape[a] - 1 and opened[idx + strides[a]]:
                parent[_find(parent, idx)] = _find(parent, idx + strides[a])
        if _find(parent, top) == _find(parent, bottom):
            return u[idx]
    return 1.0
