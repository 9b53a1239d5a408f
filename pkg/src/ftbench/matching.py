"""Exact minimum-weight perfect matching.

An array-based implementation of Edmonds' weighted blossom algorithm (the
primal-dual method with S/T labels, blossom shrinking and expansion, and
per-blossom best-edge lists), written with flat integer arrays so numba can
compile it.  Recursion is replaced by explicit work stacks.

All weights are integers and are doubled internally, so every dual update is
an exact integer step.
"""

from __future__ import annotations

import numpy as np

try:  # numba is optional at import time; pure Python runs the same code
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def _slack(k, ei, ej, ew, dual):
    return dual[ei[k]] + dual[ej[k]] - 2 * ew[k]


@njit(cache=True)
def _leaves(b, nv, bc, bc_len, out):
    """Write the vertices inside blossom ``b`` into ``out``; return count."""
    if b < nv:
        out[0] = b
        return 1
    n_out = 0
    stack = np.empty(2 * nv, np.int64)
    top = 0
    stack[top] = b
    top += 1
    while top > 0:
        top -= 1
        x = stack[top]
        for i in range(bc_len[x]):
            t = bc[x, i]
            if t < nv:
                out[n_out] = t
                n_out += 1
            else:
                stack[top] = t
                top += 1
    return n_out


@njit(cache=True)
def _max_weight_matching(nv, ei, ej, ew, maxcardinality):
    ne = ei.shape[0]
    nb = 2 * nv
    endpoint = np.empty(2 * ne, np.int64)
    for k in range(ne):
        endpoint[2 * k] = ei[k]
        endpoint[2 * k + 1] = ej[k]
    deg = np.zeros(nv, np.int64)
    for k in range(ne):
        deg[ei[k]] += 1
        deg[ej[k]] += 1
    nb_ptr = np.zeros(nv + 1, np.int64)
    for v in range(nv):
        nb_ptr[v + 1] = nb_ptr[v] + deg[v]
    fill = nb_ptr[:-1].copy()
    nb_list = np.empty(2 * ne, np.int64)
    for k in range(ne):
        nb_list[fill[ei[k]]] = 2 * k + 1
        fill[ei[k]] += 1
        nb_list[fill[ej[k]]] = 2 * k
        fill[ej[k]] += 1

    maxweight = 0
    for k in range(ne):
        if ew[k] > maxweight:
            maxweight = ew[k]

    mate = -np.ones(nv, np.int64)
    label = np.zeros(nb, np.int64)
    labelend = -np.ones(nb, np.int64)
    inblossom = np.arange(nv)
    blossomparent = -np.ones(nb, np.int64)
    bc = np.zeros((nb, nv + 1), np.int64)
    bc_len = np.zeros(nb, np.int64)
    be = np.zeros((nb, nv + 1), np.int64)
    blossombase = -np.ones(nb, np.int64)
    for v in range(nv):
        blossombase[v] = v
    bestedge = -np.ones(nb, np.int64)
    bbe = np.zeros((nb, nb), np.int64)
    bbe_len = -np.ones(nb, np.int64)  # -1 means "no list"
    unused = np.empty(nv, np.int64)
    n_unused = nv
    for i in range(nv):
        unused[i] = nv + i
    dual = np.zeros(nb, np.int64)
    for v in range(nv):
        dual[v] = maxweight
    allowedge = np.zeros(ne, np.bool_)
    queue = np.empty(4 * nv + 4, np.int64)
    qlen = 0
    leafbuf = np.empty(nv, np.int64)
    leafbuf2 = np.empty(nv, np.int64)
    bestedgeto = -np.ones(nb, np.int64)
    tmp = np.empty(nv + 1, np.int64)
    work_b = np.empty(4 * nb, np.int64)
    work_v = np.empty(4 * nb, np.int64)

    for _stage in range(nv):
        label[:] = 0
        bestedge[:] = -1
        for b in range(nv, nb):
            bbe_len[b] = -1
        allowedge[:] = False
        qlen = 0

        for v in range(nv):
            if mate[v] == -1 and label[inblossom[v]] == 0:
                # assignLabel(v, 1, -1)
                w, t, p = v, 1, -1
                while True:
                    b = inblossom[w]
                    label[w] = t
                    label[b] = t
                    labelend[w] = p
                    labelend[b] = p
                    bestedge[w] = -1
                    bestedge[b] = -1
                    if t == 1:
                        cnt = _leaves(b, nv, bc, bc_len, leafbuf)
                        for i in range(cnt):
                            queue[qlen] = leafbuf[i]
                            qlen += 1
                        break
                    base = blossombase[b]
                    w, t, p = endpoint[mate[base]], 1, mate[base] ^ 1

        augmented = False
        while True:
            while qlen > 0 and not augmented:
                qlen -= 1
                v = queue[qlen]
                for idx in range(nb_ptr[v], nb_ptr[v + 1]):
                    p = nb_list[idx]
                    k = p // 2
                    w = endpoint[p]
                    if inblossom[v] == inblossom[w]:
                        continue
                    kslack = 0
                    if not allowedge[k]:
                        kslack = _slack(k, ei, ej, ew, dual)
                        if kslack <= 0:
                            allowedge[k] = True
                    if allowedge[k]:
                        if label[inblossom[w]] == 0:
                            # assignLabel(w, 2, p ^ 1)
                            ww, t, pp = w, 2, p ^ 1
                            while True:
                                b = inblossom[ww]
                                label[ww] = t
                                label[b] = t
                                labelend[ww] = pp
                                labelend[b] = pp
                                bestedge[ww] = -1
                                bestedge[b] = -1
                                if t == 1:
                                    cnt = _leaves(b, nv, bc, bc_len, leafbuf)
                                    for i in range(cnt):
                                        queue[qlen] = leafbuf[i]
                                        qlen += 1
                                    break
                                base = blossombase[b]
                                ww, t, pp = endpoint[mate[base]], 1, mate[base] ^ 1
                        elif label[inblossom[w]] == 1:
                            # scanBlossom(v, w)
                            path_len = 0
                            base = -1
                            sv, sw = v, w
                            while sv != -1 or sw != -1:
                                b = inblossom[sv]
                                if label[b] & 4:
                                    base = blossombase[b]
                                    break
                                tmp[path_len] = b
                                path_len += 1
                                label[b] = 5
                                if labelend[b] == -1:
                                    sv = -1
                                else:
                                    sv = endpoint[labelend[b]]
                                    b = inblossom[sv]
                                    sv = endpoint[labelend[b]]
                                if sw != -1:
                                    sv, sw = sw, sv
                            for i in range(path_len):
                                label[tmp[i]] = 1
                            if base >= 0:
                                n_unused, qlen = _add_blossom(
                                    base, k, nv, ei, ej, ew, endpoint, nb_ptr, nb_list, inblossom,
                                    blossomparent, bc, bc_len, be, blossombase, label, labelend,
                                    dual, bestedge, bbe, bbe_len, unused, n_unused, leafbuf,
                                    bestedgeto, queue, qlen,
                                )
                            else:
                                _augment_matching(
                                    k, nv, ei, ej, endpoint, inblossom, labelend, blossombase,
                                    blossomparent, bc, bc_len, be, mate, work_b, work_v, tmp,
                                )
                                augmented = True
                                break
                        elif label[w] == 0:
                            label[w] = 2
                            labelend[w] = p ^ 1
                    elif label[inblossom[w]] == 1:
                        b = inblossom[v]
                        if bestedge[b] == -1 or kslack < _slack(bestedge[b], ei, ej, ew, dual):
                            bestedge[b] = k
                    elif label[w] == 0:
                        if bestedge[w] == -1 or kslack < _slack(bestedge[w], ei, ej, ew, dual):
                            bestedge[w] = k
            if augmented:
                break

            deltatype = -1
            delta = 0
            deltaedge = -1
            deltablossom = -1
            if not maxcardinality:
                deltatype = 1
                delta = dual[0]
                for v in range(nv):
                    if dual[v] < delta:
                        delta = dual[v]
            for v in range(nv):
                if label[inblossom[v]] == 0 and bestedge[v] != -1:
                    d = _slack(bestedge[v], ei, ej, ew, dual)
                    if deltatype == -1 or d < delta:
                        delta = d
                        deltatype = 2
                        deltaedge = bestedge[v]
            for b in range(nb):
                if blossomparent[b] == -1 and label[b] == 1 and bestedge[b] != -1:
                    d = _slack(bestedge[b], ei, ej, ew, dual) // 2
                    if deltatype == -1 or d < delta:
                        delta = d
                        deltatype = 3
                        deltaedge = bestedge[b]
            for b in range(nv, nb):
                if blossombase[b] >= 0 and blossomparent[b] == -1 and label[b] == 2 and (deltatype == -1 or dual[b] < delta):
                    delta = dual[b]
                    deltatype = 4
                    deltablossom = b
            if deltatype == -1:
                deltatype = 1
                delta = dual[0]
                for v in range(nv):
                    if dual[v] < delta:
                        delta = dual[v]
                if delta < 0:
                    delta = 0

            for v in range(nv):
                lb = label[inblossom[v]]
                if lb == 1:
                    dual[v] -= delta
                elif lb == 2:
                    dual[v] += delta
            for b in range(nv, nb):
                if blossombase[b] >= 0 and blossomparent[b] == -1:
                    if label[b] == 1:
                        dual[b] += delta
                    elif label[b] == 2:
                        dual[b] -= delta

            if deltatype == 1:
                break
            elif deltatype == 2:
                allowedge[deltaedge] = True
                i, j = ei[deltaedge], ej[deltaedge]
                if label[inblossom[i]] == 0:
                    i = j
                queue[qlen] = i
                qlen += 1
            elif deltatype == 3:
                allowedge[deltaedge] = True
                queue[qlen] = ei[deltaedge]
                qlen += 1
            else:
                qlen, n_unused = _expand_blossom(
                    deltablossom, False, nv, endpoint, inblossom, blossomparent, bc, bc_len, be,
                    blossombase, label, labelend, dual, bestedge, bbe_len, unused, n_unused,
                    leafbuf, leafbuf2, mate, allowedge, queue, qlen, work_b,
                )

        if not augmented:
            break
        for b in range(nv, nb):
            if blossomparent[b] == -1 and blossombase[b] >= 0 and label[b] == 1 and dual[b] == 0:
                qlen, n_unused = _expand_blossom(
                    b, True, nv, endpoint, inblossom, blossomparent, bc, bc_len, be,
                    blossombase, label, labelend, dual, bestedge, bbe_len, unused, n_unused,
                    leafbuf, leafbuf2, mate, allowedge, queue, qlen, work_b,
                )

    out = -np.ones(nv, np.int64)
    for v in range(nv):
        if mate[v] >= 0:
            out[v] = endpoint[mate[v]]
    return out


@njit(cache=True)
def _add_blossom(base, k, nv, ei, ej, ew, endpoint, nb_ptr, nb_list, inblossom, blossomparent,
                 bc, bc_len, be, blossombase, label, labelend, dual, bestedge, bbe, bbe_len,
                 unused, n_unused, leafbuf, bestedgeto, queue, qlen):
    v, w = ei[k], ej[k]
    bb = inblossom[base]
    bv = inblossom[v]
    bw = inblossom[w]
    n_unused -= 1
    b = unused[n_unused]
    blossombase[b] = base
    blossomparent[b] = -1
    blossomparent[bb] = b
    m = 0
    while bv != bb:
        blossomparent[bv] = b
        bc[b, m] = bv
        be[b, m] = labelend[bv]
        m += 1
        v = endpoint[labelend[bv]]
        bv = inblossom[v]
    bc[b, m] = bb
    m += 1
    # reverse both lists (childs has m entries, endps has m-1)
    for i in range(m // 2):
        t = bc[b, i]
        bc[b, i] = bc[b, m - 1 - i]
        bc[b, m - 1 - i] = t
    me = m - 1
    for i in range(me // 2):
        t = be[b, i]
        be[b, i] = be[b, me - 1 - i]
        be[b, me - 1 - i] = t
    be[b, me] = 2 * k
    me += 1
    while bw != bb:
        blossomparent[bw] = b
        bc[b, m] = bw
        m += 1
        be[b, me] = labelend[bw] ^ 1
        me += 1
        w = endpoint[labelend[bw]]
        bw = inblossom[w]
    bc_len[b] = m
    label[b] = 1
    labelend[b] = labelend[bb]
    dual[b] = 0
    cnt = _leaves(b, nv, bc, bc_len, leafbuf)
    for i in range(cnt):
        x = leafbuf[i]
        if label[inblossom[x]] == 2:
            queue[qlen] = x
            qlen += 1
        inblossom[x] = b
    bestedgeto[:] = -1
    for ci in range(m):
        child = bc[b, ci]
        if bbe_len[child] < 0:
            c2 = _leaves(child, nv, bc, bc_len, leafbuf)
            for li in range(c2):
                x = leafbuf[li]
                for idx in range(nb_ptr[x], nb_ptr[x + 1]):
                    kk = nb_list[idx] // 2
                    i, j = ei[kk], ej[kk]
                    if inblossom[j] == b:
                        i, j = j, i
                    bj = inblossom[j]
                    if bj != b and label[bj] == 1 and (
                        bestedgeto[bj] == -1
                        or _slack(kk, ei, ej, ew, dual) < _slack(bestedgeto[bj], ei, ej, ew, dual)
                    ):
                        bestedgeto[bj] = kk
        else:
            for li in range(bbe_len[child]):
                kk = bbe[child, li]
                i, j = ei[kk], ej[kk]
                if inblossom[j] == b:
                    i, j = j, i
                bj = inblossom[j]
                if bj != b and label[bj] == 1 and (
                    bestedgeto[bj] == -1
                    or _slack(kk, ei, ej, ew, dual) < _slack(bestedgeto[bj], ei, ej, ew, dual)
                ):
                    bestedgeto[bj] = kk
        bbe_len[child] = -1
        bestedge[child] = -1
    n_b = 0
    for x in range(bestedgeto.shape[0]):
        if bestedgeto[x] != -1:
            bbe[b, n_b] = bestedgeto[x]
            n_b += 1
    bbe_len[b] = n_b
    bestedge[b] = -1
    for li in range(n_b):
        kk = bbe[b, li]
        if bestedge[b] == -1 or _slack(kk, ei, ej, ew, dual) < _slack(bestedge[b], ei, ej, ew, dual):
            bestedge[b] = kk
    return n_unused, qlen


@njit(cache=True)
def _assign_label(w, t, p, nv, endpoint, inblossom, label, labelend, bestedge, blossombase,
                  mate, bc, bc_len, leafbuf, queue, qlen):
    while True:
        b = inblossom[w]
        label[w] = t
        label[b] = t
        labelend[w] = p
        labelend[b] = p
        bestedge[w] = -1
        bestedge[b] = -1
        if t == 1:
            cnt = _leaves(b, nv, bc, bc_len, leafbuf)
            for i in range(cnt):
                queue[qlen] = leafbuf[i]
                qlen += 1
            return qlen
        base = blossombase[b]
        w, t, p = endpoint[mate[base]], 1, mate[base] ^ 1


@njit(cache=True)
def _expand_blossom(b, endstage, nv, endpoint, inblossom, blossomparent, bc, bc_len, be,
                    blossombase, label, labelend, dual, bestedge, bbe_len, unused, n_unused,
                    leafbuf, leafbuf2, mate, allowedge, queue, qlen, work):
    # children first; at end of stage zero-dual sub-blossoms expand too
    top = 0
    work[top] = b
    top += 1
    first = True
    while top > 0:
        top -= 1
        x = work[top]
        for ci in range(bc_len[x]):
            s = bc[x, ci]
            blossomparent[s] = -1
            if s < nv:
                inblossom[s] = s
            elif endstage and dual[s] == 0:
                work[top] = s
                top += 1
            else:
                cnt = _leaves(s, nv, bc, bc_len, leafbuf)
                for i in range(cnt):
                    inblossom[leafbuf[i]] = s
        if first and (not endstage) and label[x] == 2:
            m = bc_len[x]
            entrychild = inblossom[endpoint[labelend[x] ^ 1]]
            j = 0
            for i in range(m):
                if bc[x, i] == entrychild:
                    j = i
                    break
            if j & 1:
                j -= m
                jstep = 1
                endptrick = 0
            else:
                jstep = -1
                endptrick = 1
            p = labelend[x]
            while j != 0:
                label[endpoint[p ^ 1]] = 0
                label[endpoint[be[x, (j - endptrick) % m] ^ endptrick ^ 1]] = 0
                qlen = _assign_label(endpoint[p ^ 1], 2, p, nv, endpoint, inblossom, label, labelend,
                                     bestedge, blossombase, mate, bc, bc_len, leafbuf, queue, qlen)
                allowedge[be[x, (j - endptrick) % m] // 2] = True
                j += jstep
                p = be[x, (j - endptrick) % m] ^ endptrick
                allowedge[p // 2] = True
                j += jstep
            bv = bc[x, j % m]
            label[endpoint[p ^ 1]] = 2
            label[bv] = 2
            labelend[endpoint[p ^ 1]] = p
            labelend[bv] = p
            bestedge[bv] = -1
            j += jstep
            while bc[x, j % m] != entrychild:
                bv = bc[x, j % m]
                if label[bv] == 1:
                    j += jstep
                    continue
                cnt = _leaves(bv, nv, bc, bc_len, leafbuf2)
                found = -1
                for i in range(cnt):
                    if label[leafbuf2[i]] != 0:
                        found = leafbuf2[i]
                        break
                if found >= 0:
                    label[found] = 0
                    label[endpoint[mate[blossombase[bv]]]] = 0
                    qlen = _assign_label(found, 2, labelend[found], nv, endpoint, inblossom, label,
                                         labelend, bestedge, blossombase, mate, bc, bc_len, leafbuf,
                                         queue, qlen)
                j += jstep
        label[x] = -1
        labelend[x] = -1
        bc_len[x] = 0
        blossombase[x] = -1
        bbe_len[x] = -1
        bestedge[x] = -1
        unused[n_unused] = x
        n_unused += 1
        first = False
    return qlen, n_unused


@njit(cache=True)
def _augment_blossom(b0, v0, nv, endpoint, blossomparent, bc, bc_len, be, blossombase, mate,
                     work_b, work_v, tmp):
    top = 0
    work_b[top] = b0
    work_v[top] = v0
    top += 1
    while top > 0:
        top -= 1
        b = work_b[top]
        v = work_v[top]
        t = v
        while blossomparent[t] != b:
            t = blossomparent[t]
        if t >= nv:
            work_b[top] = t
            work_v[top] = v
            top += 1
        m = bc_len[b]
        i = 0
        for c in range(m):
            if bc[b, c] == t:
                i = c
                break
        j = i
        if i & 1:
            j -= m
            jstep = 1
            endptrick = 0
        else:
            jstep = -1
            endptrick = 1
        while j != 0:
            j += jstep
            t = bc[b, j % m]
            p = be[b, (j - endptrick) % m] ^ endptrick
            if t >= nv:
                work_b[top] = t
                work_v[top] = endpoint[p]
                top += 1
            j += jstep
            t = bc[b, j % m]
            if t >= nv:
                work_b[top] = t
                work_v[top] = endpoint[p ^ 1]
                top += 1
            mate[endpoint[p]] = p ^ 1
            mate[endpoint[p ^ 1]] = p
        # rotate so the child containing v comes first
        for c in range(m):
            tmp[c] = bc[b, (c + i) % m]
        for c in range(m):
            bc[b, c] = tmp[c]
        for c in range(m):
            tmp[c] = be[b, (c + i) % m]
        for c in range(m):
            be[b, c] = tmp[c]
        # after augmenting from v, v is the base (children may not be processed yet)
        blossombase[b] = v


@njit(cache=True)
def _augment_matching(k, nv, ei, ej, endpoint, inblossom, labelend, blossombase, blossomparent,
                      bc, bc_len, be, mate, work_b, work_v, tmp):
    for side in range(2):
        if side == 0:
            s, p = ei[k], 2 * k + 1
        else:
            s, p = ej[k], 2 * k
        while True:
            bs = inblossom[s]
            if bs >= nv:
                _augment_blossom(bs, s, nv, endpoint, blossomparent, bc, bc_len, be, blossombase,
                                 mate, work_b, work_v, tmp)
            mate[s] = p
            if labelend[bs] == -1:
                break
            t = endpoint[labelend[bs]]
            bt = inblossom[t]
            s = endpoint[labelend[bt]]
            j = endpoint[labelend[bt] ^ 1]
            if bt >= nv:
                _augment_blossom(bt, j, nv, endpoint, blossomparent, bc, bc_len, be, blossombase,
                                 mate, work_b, work_v, tmp)
            mate[j] = labelend[bt]
            p = labelend[bt] ^ 1


def max_weight_matching(n_vertices: int, edges, maxcardinality: bool = False) -> np.ndarray:
    """Maximum-weight matching; ``edges`` are ``(i, j, weight)`` with integer
    weights.  Returns ``mate`` with ``mate[v] = -1`` for unmatched vertices."""
    edges = list(edges)
    if not edges:
        return -np.ones(n_vertices, np.int64)
    arr = np.asarray(edges, dtype=np.int64)
    return _max_weight_matching(n_vertices, arr[:, 0].copy(), arr[:, 1].copy(), 2 * arr[:, 2], maxcardinality)


def min_weight_perfect_matching(n_vertices: int, edges) -> list[tuple[int, int]]:
    """Minimum-weight perfect matching over integer-weighted ``(i, j, w)`` edges.

    Raises ``ValueError`` if no perfect matching exists.
    """
    edges = list(edges)
    if n_vertices == 0:
        return []
    if not edges:
        raise ValueError("no perfect matching")
    arr = np.asarray(edges, dtype=np.int64)
    big = int(arr[:, 2].max()) + 1
    w = 2 * (big - arr[:, 2])
    mate = _max_weight_matching(n_vertices, arr[:, 0].copy(), arr[:, 1].copy(), w, True)
    if np.any(mate < 0):
        raise ValueError("no perfect matching")
    return [(int(v), int(mate[v])) for v in range(n_vertices) if v < mate[v]]


def brute_force_min_matching(n_vertices: int, weight) -> tuple[int, list]:
    """Exhaustive minimum over all perfect matchings (test oracle).

    ``weight(i, j)`` returns an int or None when the pair is not allowed.
    """
    best = [None, None]

    def rec(free, acc, pairs):
        if not free:
            if best[0] is None or acc < best[0]:
                best[0], best[1] = acc, list(pairs)
            return
        a = free[0]
        for idx in range(1, len(free)):
            b = free[idx]
            w = weight(a, b)
            if w is None:
                continue
            rec(free[1:idx] + free[idx + 1:], acc + w, pairs + [(a, b)])

    rec(list(range(n_vertices)), 0, [])
    return best[0], best[1]


def all_pairings(items):
    """Every perfect pairing of ``items`` (even length)."""
    items = list(items)
    if not items:
        yield []
        return
    a = items[0]
    for i in range(1, len(items)):
        rest = items[1:i] + items[i + 1:]
        for tail in all_pairings(rest):
            yield [(a, items[i])] + tail


__all__ = [
    "max_weight_matching",
    "min_weight_perfect_matching",
    "brute_force_min_matching",
    "all_pairings",
]
