"""Pure-Python event loop, the reference core.

The compiled core in _engine_cy.pyx mirrors this file operation for
operation, including the order of floating-point accumulations and the
number and order of uniform draws per event, so that both cores
produce bit-identical trajectories from the same random stream.  Keep
the two in sync when editing.

Event algorithm (exact continuous-time chain with thinning): the
aggregate rate treats every particle as free to jump anywhere, so the
waiting time uses rate N^2 (sum_v S_v K_v + T_c); a drawn destination
that is already occupied is a null event that still advances time.
Collision sites are selected exactly through a Fenwick tree over the
per-site eligible-quadruple counts, with no thinning.
"""

import math

# status codes shared with the compiled core
REACHED = 0
MAXEVENTS = 1
ABSORBING = 2

# slots of the integer scalar block
I_TC = 0
I_EVENTS = 1
I_MOVES = 2
I_REJECTIONS = 3
I_COLLISIONS = 4


def fenwick_build(c, tree):
    n = len(c)
    tree[:] = 0
    for i in range(1, n + 1):
        tree[i] += c[i - 1]
        j = i + (i & -i)
        if j <= n:
            tree[j] += tree[i]


def fenwick_update(tree, n, i0, delta):
    i = i0 + 1
    while i <= n:
        tree[i] += delta
        i += i & -i


def fenwick_select(tree, n, k):
    """Largest pos with prefix(pos) <= k; returns (site, k - prefix)."""
    pos = 0
    bit = 1
    while (bit << 1) <= n:
        bit <<= 1
    rem = k
    while bit:
        nxt = pos + bit
        if nxt <= n and tree[nxt] <= rem:
            pos = nxt
            rem -= tree[nxt]
        bit >>= 1
    return pos, rem


def eligible_count(occ, y, quads):
    cnt = 0
    for q in range(quads.shape[0]):
        if (occ[y, quads[q, 0]] and occ[y, quads[q, 1]]
                and not occ[y, quads[q, 2]] and not occ[y, quads[q, 3]]):
            cnt += 1
    return cnt


def advance(occ, K, plist, pslot, S, zcum, zoff, quads, c, tree,
            ints, tvec, N, d, speed, rng, t_target, max_events):
    """Run events until t_target, max_events, or an absorbing state.

    Mutates all array arguments in place.  rng is a numpy Generator;
    exactly one to three scalar uniforms are consumed per event in a
    fixed order (time, channel, destination).
    """
    n_sites = occ.shape[0]
    nv = occ.shape[1]
    nz = zoff.shape[0]
    nq = quads.shape[0]
    events = 0
    while events < max_events:
        r_ex = 0.0
        for v in range(nv):
            r_ex += S[v] * K[v]
        tc = ints[I_TC]
        rtot = r_ex + tc
        if tc == 0:
            frozen = True
            for v in range(nv):
                if K[v] != 0 and K[v] != n_sites:
                    frozen = False
                    break
            if frozen:
                return ABSORBING, events

        u1 = rng.random()
        dt = -math.log1p(-u1) / (speed * rtot)
        if tvec[0] + dt > t_target:
            tvec[0] = t_target
            return REACHED, events
        tvec[0] += dt
        events += 1
        ints[I_EVENTS] += 1

        u2 = rng.random()
        r = u2 * rtot
        if r < r_ex:
            # exclusion channel: species by linear scan, particle by the
            # residual, offset by bisection on the cumulative table
            acc = 0.0
            v = nv - 1
            for vv in range(nv):
                nxt = acc + S[vv] * K[vv]
                if r < nxt:
                    v = vv
                    break
                acc = nxt
            i = int((r - acc) / S[v])
            if i >= K[v]:
                i = K[v] - 1
            x = plist[v, i]
            u3 = rng.random()
            target = u3 * S[v]
            lo = 0
            hi = nz
            while lo < hi:
                mid = (lo + hi) >> 1
                if zcum[v, mid] > target:
                    hi = mid
                else:
                    lo = mid + 1
            zi = lo if lo < nz else nz - 1
            # destination with periodic wrap, site index in C order
            dest = 0
            rest = x
            for ax in range(d - 1, -1, -1):
                coord = rest % N
                rest //= N
                coord += zoff[zi, ax]
                coord %= N
                dest += coord * N ** (d - 1 - ax)
            if occ[dest, v]:
                ints[I_REJECTIONS] += 1
            else:
                slot = pslot[x, v]
                plist[v, slot] = dest
                pslot[dest, v] = slot
                pslot[x, v] = -1
                occ[x, v] = 0
                occ[dest, v] = 1
                ints[I_MOVES] += 1
                if nq:
                    for site in (x, dest):
                        new = eligible_count(occ, site, quads)
                        delta = new - c[site]
                        if delta:
                            c[site] = new
                            fenwick_update(tree, n_sites, site, delta)
                            ints[I_TC] += delta
        else:
            kw = int(r - r_ex)
            if kw >= tc:
                kw = tc - 1
            y, rem = fenwick_select(tree, n_sites, kw)
            qi = -1
            cnt = -1
            for q in range(nq):
                if (occ[y, quads[q, 0]] and occ[y, quads[q, 1]]
                        and not occ[y, quads[q, 2]]
                        and not occ[y, quads[q, 3]]):
                    cnt += 1
                    if cnt == rem:
                        qi = q
                        break
            va, vb = quads[qi, 0], quads[qi, 1]
            vc, vd = quads[qi, 2], quads[qi, 3]
            for vdel in (va, vb):
                slot = pslot[y, vdel]
                last = K[vdel] - 1
                moved = plist[vdel, last]
                plist[vdel, slot] = moved
                pslot[moved, vdel] = slot
                pslot[y, vdel] = -1
                K[vdel] = last
                occ[y, vdel] = 0
            for vadd in (vc, vd):
                plist[vadd, K[vadd]] = y
                pslot[y, vadd] = K[vadd]
                K[vadd] += 1
                occ[y, vadd] = 1
            ints[I_COLLISIONS] += 1
            new = eligible_count(occ, y, quads)
            delta = new - c[y]
            if delta:
                c[y] = new
                fenwick_update(tree, n_sites, y, delta)
                ints[I_TC] += delta
    return MAXEVENTS, events
