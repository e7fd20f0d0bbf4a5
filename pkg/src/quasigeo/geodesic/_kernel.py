"""Path straightening kernel, compiled with numba.

A path is a token sequence.  Token ``k`` is either a *pin* (a mesh vertex
the path passes through; ``tb[k] < 0``) or a *crossing* of the mesh edge
``(ta[k], tb[k])`` at parameter ``tt[k]`` measured from ``ta[k]``.  The
first and last tokens are always pins.  The crossings between two
consecutive pins form a corridor: a strip of faces that unfolds into the
plane, inside which the path is a straight segment.

Straightening alternates two moves:

* corridor straightening -- unfold the strip and replace the sub-path by
  the shortest polyline inside it (funnel algorithm); the polyline may bend
  only at strip vertices, which become new pins;
* rerouting -- at a pin whose angle sum on one side of the path is below
  pi (so the discrete geodesic curvature there is non-zero and the path can
  be shortened), merge the two adjacent corridors with the faces on that
  side of the pin and straighten the merged corridor.

Only strictly shorter replacements are accepted, so path length never
increases.
"""

import math

import numpy as np
from numba import njit, prange

PIN = -1
LOCKED = -2
T_EPS = 1e-9
ACCEPT_REL = 1e-13


@njit(cache=True)
def _point(verts, a, b, t):
    if b < 0:
        return verts[a, 0], verts[a, 1], verts[a, 2]
    s = 1.0 - t
    return (s * verts[a, 0] + t * verts[b, 0],
            s * verts[a, 1] + t * verts[b, 1],
            s * verts[a, 2] + t * verts[b, 2])


@njit(cache=True)
def _dist(verts, i, j):
    dx = verts[i, 0] - verts[j, 0]
    dy = verts[i, 1] - verts[j, 1]
    dz = verts[i, 2] - verts[j, 2]
    return math.sqrt(dx * dx + dy * dy + dz * dz)


@njit(cache=True)
def _angle(ux, uy, uz, wx, wy, wz):
    nu = math.sqrt(ux * ux + uy * uy + uz * uz)
    nw = math.sqrt(wx * wx + wy * wy + wz * wz)
    if nu == 0.0 or nw == 0.0:
        return 0.0
    c = (ux * wx + uy * wy + uz * wz) / (nu * nw)
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    return math.acos(c)


@njit(cache=True)
def path_length(verts, ta, tb, tt):
    total = 0.0
    px, py, pz = _point(verts, ta[0], tb[0], tt[0])
    for k in range(1, ta.shape[0]):
        x, y, z = _point(verts, ta[k], tb[k], tt[k])
        total += math.sqrt((x - px) ** 2 + (y - py) ** 2 + (z - pz) ** 2)
        px, py, pz = x, y, z
    return total


@njit(cache=True)
def _third(px, py, qx, qy, dp, dq, side):
    """Apex of the triangle on base P-Q with side lengths dp, dq.

    ``side > 0`` places it to the left of P->Q.
    """
    ex = qx - px
    ey = qy - py
    L = math.sqrt(ex * ex + ey * ey)
    ux = ex / L
    uy = ey / L
    x = (dp * dp - dq * dq + L * L) / (2.0 * L)
    h2 = dp * dp - x * x
    h = math.sqrt(h2) if h2 > 0.0 else 0.0
    if side < 0:
        h = -h
    return px + x * ux - h * uy, py + x * uy + h * ux


@njit(cache=True)
def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


@njit(cache=True)
def _unfold(verts, a, b, pa, pb):
    """Lay the face strip from pin ``a`` across portals ``pa[i]-pb[i]`` to ``b`` flat.

    Returns ``ok, A, B, P2, Q2, leftq`` with 2D positions of the pins and of
    each portal's two endpoints; ``leftq[i]`` is True when ``pb[i]`` lies on
    the left of the direction of travel.
    """
    K = pa.shape[0]
    P2 = np.empty((K, 2))
    Q2 = np.empty((K, 2))
    leftq = np.zeros(K, dtype=np.bool_)
    p0 = pa[0]
    q0 = pb[0]
    if a == p0 or a == q0:
        return False, 0.0, 0.0, 0.0, 0.0, P2, Q2, leftq
    P2[0, 0] = 0.0
    P2[0, 1] = 0.0
    Q2[0, 0] = _dist(verts, p0, q0)
    Q2[0, 1] = 0.0
    ax, ay = _third(0.0, 0.0, Q2[0, 0], 0.0, _dist(verts, a, p0), _dist(verts, a, q0), -1.0)
    ox = ax
    oy = ay
    for i in range(K):
        leftq[i] = _cross(P2[i, 0] - ox, P2[i, 1] - oy, Q2[i, 0] - ox, Q2[i, 1] - oy) > 0.0
        if i == K - 1:
            break
        p = pa[i]
        q = pb[i]
        p1 = pa[i + 1]
        q1 = pb[i + 1]
        if p1 == p or p1 == q:
            shared = p1
            new = q1
            shared_first = True
        elif q1 == p or q1 == q:
            shared = q1
            new = p1
            shared_first = False
        else:
            return False, 0.0, 0.0, 0.0, 0.0, P2, Q2, leftq
        if new == p or new == q:
            return False, 0.0, 0.0, 0.0, 0.0, P2, Q2, leftq
        Px = P2[i, 0]
        Py = P2[i, 1]
        Qx = Q2[i, 0]
        Qy = Q2[i, 1]
        side = _cross(Qx - Px, Qy - Py, ox - Px, oy - Py)
        rx, ry = _third(Px, Py, Qx, Qy, _dist(verts, new, p), _dist(verts, new, q),
                        -1.0 if side > 0 else 1.0)
        if shared == p:
            sx, sy, ox, oy = Px, Py, Qx, Qy
        else:
            sx, sy, ox, oy = Qx, Qy, Px, Py
        if shared_first:
            P2[i + 1, 0] = sx
            P2[i + 1, 1] = sy
            Q2[i + 1, 0] = rx
            Q2[i + 1, 1] = ry
        else:
            Q2[i + 1, 0] = sx
            Q2[i + 1, 1] = sy
            P2[i + 1, 0] = rx
            P2[i + 1, 1] = ry
    p = pa[K - 1]
    q = pb[K - 1]
    if b == p or b == q:
        return False, 0.0, 0.0, 0.0, 0.0, P2, Q2, leftq
    Px = P2[K - 1, 0]
    Py = P2[K - 1, 1]
    Qx = Q2[K - 1, 0]
    Qy = Q2[K - 1, 1]
    side = _cross(Qx - Px, Qy - Py, ox - Px, oy - Py)
    bx, by = _third(Px, Py, Qx, Qy, _dist(verts, b, p), _dist(verts, b, q),
                    -1.0 if side > 0 else 1.0)
    return True, ax, ay, bx, by, P2, Q2, leftq


@njit(cache=True)
def _funnel(ax, ay, bx, by, a, b, P2, Q2, leftq, pa, pb):
    """Shortest polyline through the unfolded strip (simple stupid funnel).

    Returns the apex count and, per apex, the funnel portal index (0 is the
    start pin, ``K + 1`` the end pin), the mesh vertex and its 2D position.
    """
    K = pa.shape[0]
    N = K + 2
    Lx = np.empty(N)
    Ly = np.empty(N)
    Rx = np.empty(N)
    Ry = np.empty(N)
    Lid = np.empty(N, dtype=np.int64)
    Rid = np.empty(N, dtype=np.int64)
    Lx[0] = ax
    Ly[0] = ay
    Rx[0] = ax
    Ry[0] = ay
    Lid[0] = a
    Rid[0] = a
    for i in range(K):
        if leftq[i]:
            Lx[i + 1], Ly[i + 1], Lid[i + 1] = Q2[i, 0], Q2[i, 1], pb[i]
            Rx[i + 1], Ry[i + 1], Rid[i + 1] = P2[i, 0], P2[i, 1], pa[i]
        else:
            Lx[i + 1], Ly[i + 1], Lid[i + 1] = P2[i, 0], P2[i, 1], pa[i]
            Rx[i + 1], Ry[i + 1], Rid[i + 1] = Q2[i, 0], Q2[i, 1], pb[i]
    Lx[N - 1] = bx
    Ly[N - 1] = by
    Rx[N - 1] = bx
    Ry[N - 1] = by
    Lid[N - 1] = b
    Rid[N - 1] = b

    ap_idx = np.empty(N + 1, dtype=np.int64)
    ap_id = np.empty(N + 1, dtype=np.int64)
    ap_x = np.empty(N + 1)
    ap_y = np.empty(N + 1)
    nap = 0
    ap_idx[0] = 0
    ap_id[0] = a
    ap_x[0] = ax
    ap_y[0] = ay
    nap = 1

    cx, cy = ax, ay
    lx, ly, li = ax, ay, 0
    rx, ry, ri = ax, ay, 0
    i = 1
    guard = 0
    while i < N:
        guard += 1
        if guard > 4 * N * N + 16:
            return -1, ap_idx, ap_id, ap_x, ap_y
        nlx, nly = Lx[i], Ly[i]
        nrx, nry = Rx[i], Ry[i]
        l_apex = lx == cx and ly == cy
        r_apex = rx == cx and ry == cy
        # right boundary
        if nrx == cx and nry == cy:
            rx, ry, ri = nrx, nry, i
            r_apex = True
        elif r_apex or _cross(rx - cx, ry - cy, nrx - cx, nry - cy) >= 0.0:
            if l_apex or _cross(lx - cx, ly - cy, nrx - cx, nry - cy) < 0.0:
                rx, ry, ri = nrx, nry, i
                r_apex = False
            else:
                cx, cy = lx, ly
                ap_idx[nap] = li
                ap_id[nap] = Lid[li]
                ap_x[nap] = cx
                ap_y[nap] = cy
                nap += 1
                rx, ry, ri = cx, cy, li
                i = li + 1
                continue
        # left boundary
        if nlx == cx and nly == cy:
            lx, ly, li = nlx, nly, i
        elif l_apex or _cross(lx - cx, ly - cy, nlx - cx, nly - cy) <= 0.0:
            if r_apex or _cross(rx - cx, ry - cy, nlx - cx, nly - cy) > 0.0:
                lx, ly, li = nlx, nly, i
            else:
                cx, cy = rx, ry
                ap_idx[nap] = ri
                ap_id[nap] = Rid[ri]
                ap_x[nap] = cx
                ap_y[nap] = cy
                nap += 1
                lx, ly, li = cx, cy, ri
                i = ri + 1
                continue
        i += 1
    if not (ap_id[nap - 1] == b and ap_idx[nap - 1] == N - 1):
        ap_idx[nap] = N - 1
        ap_id[nap] = b
        ap_x[nap] = bx
        ap_y[nap] = by
        nap += 1
    return nap, ap_idx, ap_id, ap_x, ap_y


@njit(cache=True)
def _has(pa, pb, j, v):
    return pa[j] == v or pb[j] == v


@njit(cache=True)
def straighten_corridor(verts, a, b, pa, pb):
    """Shortest path from pin ``a`` to pin ``b`` inside the given corridor.

    Returns ``ok`` and the interior tokens (``ta, tb, tt``) of the new path.
    """
    K = pa.shape[0]
    cap = 2 * K + 4
    oa = np.empty(cap, dtype=np.int64)
    ob = np.empty(cap, dtype=np.int64)
    ot = np.empty(cap)
    if K == 0:
        return True, oa[:0], ob[:0], ot[:0]
    ok, ax, ay, bx, by, P2, Q2, leftq = _unfold(verts, a, b, pa, pb)
    if not ok:
        return False, oa[:0], ob[:0], ot[:0]
    nap, ap_idx, ap_id, ap_x, ap_y = _funnel(ax, ay, bx, by, a, b, P2, Q2, leftq, pa, pb)
    if nap < 2:
        return False, oa[:0], ob[:0], ot[:0]
    n_out = 0
    last_pin = a
    for k in range(1, nap):
        sa = ap_id[k - 1]
        sb = ap_id[k]
        dx = ap_x[k] - ap_x[k - 1]
        dy = ap_y[k] - ap_y[k - 1]
        lo = ap_idx[k - 1] + 1
        hi = ap_idx[k] - 1
        # funnel index j <-> corridor portal j - 1
        while lo <= hi and _has(pa, pb, lo - 1, sa):
            lo += 1
        while hi >= lo and _has(pa, pb, hi - 1, sb):
            hi -= 1
        seg_start = n_out
        for j in range(lo, hi + 1):
            c = j - 1
            ex = Q2[c, 0] - P2[c, 0]
            ey = Q2[c, 1] - P2[c, 1]
            den = _cross(ex, ey, dx, dy)
            if den == 0.0:
                t = 0.5
            else:
                t = _cross(ap_x[k - 1] - P2[c, 0], ap_y[k - 1] - P2[c, 1], dx, dy) / den
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            hit = -1
            if t <= T_EPS:
                hit = pa[c]
            elif t >= 1.0 - T_EPS:
                hit = pb[c]
            if n_out > 0 and ob[n_out - 1] < 0 and (pa[c] == oa[n_out - 1] or pb[c] == oa[n_out - 1]):
                # still turning around the last pin
                continue
            if hit >= 0:
                if hit == last_pin or hit == sb:
                    continue
                while n_out > seg_start and ob[n_out - 1] >= 0 and (oa[n_out - 1] == hit or ob[n_out - 1] == hit):
                    n_out -= 1
                oa[n_out] = hit
                ob[n_out] = PIN
                ot[n_out] = 0.0
                n_out += 1
                last_pin = hit
                continue
            oa[n_out] = pa[c]
            ob[n_out] = pb[c]
            ot[n_out] = t
            n_out += 1
        if k < nap - 1:
            if not (n_out > 0 and ob[n_out - 1] < 0 and oa[n_out - 1] == sb):
                oa[n_out] = sb
                ob[n_out] = PIN
                ot[n_out] = 0.0
                n_out += 1
            last_pin = sb
    return True, oa[:n_out], ob[:n_out], ot[:n_out]


@njit(cache=True)
def _locate(verts, fptr, fspk, fcum, fclosed, v, a, b, t):
    """Angular position, around ``v``, of the direction towards token (a, b, t).

    Returns ``ok, slot, on_spoke, position``.
    """
    base = fptr[v]
    m = fptr[v + 1] - base - 1
    if m < 1:
        return False, 0, False, 0.0
    if b < 0:
        top = m if fclosed[v] else m + 1
        for j in range(top):
            if fspk[base + j] == a:
                return True, j, True, fcum[base + j]
        return False, 0, False, 0.0
    for i in range(m):
        w0 = fspk[base + i]
        w1 = fspk[base + i + 1]
        if (w0 == a and w1 == b) or (w0 == b and w1 == a):
            x, y, z = _point(verts, a, b, t)
            off = _angle(verts[w0, 0] - verts[v, 0], verts[w0, 1] - verts[v, 1],
                         verts[w0, 2] - verts[v, 2],
                         x - verts[v, 0], y - verts[v, 1], z - verts[v, 2])
            corner = fcum[base + i + 1] - fcum[base + i]
            if off > corner:
                off = corner
            return True, i, False, fcum[base + i] + off
    return False, 0, False, 0.0


@njit(cache=True)
def pin_angles(verts, fptr, fspk, fcum, fclosed, fok, v, pa_, pb_, pt_, na_, nb_, nt_):
    """Angle sums on both sides of the path at pin ``v``.

    The previous and next path nodes are given as tokens.  Returns
    ``ok, side_fwd, side_bwd, trav_fwd, trav_bwd, theta`` plus the located
    in/out slots, where *forward* follows the fan circulation from the
    incoming to the outgoing direction.
    """
    if not fok[v]:
        return False, 0.0, 0.0, False, False, 0.0, 0, False, 0.0, 0, False, 0.0
    ok1, s_in, on_in, pos_in = _locate(verts, fptr, fspk, fcum, fclosed, v, pa_, pb_, pt_)
    ok2, s_out, on_out, pos_out = _locate(verts, fptr, fspk, fcum, fclosed, v, na_, nb_, nt_)
    if not (ok1 and ok2):
        return False, 0.0, 0.0, False, False, 0.0, 0, False, 0.0, 0, False, 0.0
    base = fptr[v]
    m = fptr[v + 1] - base - 1
    theta = fcum[base + m]
    if fclosed[v]:
        d = pos_out - pos_in
        if d < 0.0:
            d += theta
        if d > theta:
            d = theta
        return (True, d, theta - d, True, True, theta,
                s_in, on_in, pos_in, s_out, on_out, pos_out)
    if pos_out >= pos_in:
        d = pos_out - pos_in
        return (True, d, theta - d, True, False, theta,
                s_in, on_in, pos_in, s_out, on_out, pos_out)
    d = pos_in - pos_out
    return (True, theta - d, d, False, True, theta,
            s_in, on_in, pos_in, s_out, on_out, pos_out)


@njit(cache=True)
def _crossed_spokes(fptr, fspk, fclosed, v, forward, s_in, on_in, pos_in, s_out, on_out, pos_out):
    """Spokes of ``v``'s fan crossed when sweeping from the incoming to the
    outgoing direction, in sweep order."""
    base = fptr[v]
    m = fptr[v + 1] - base - 1
    closed = fclosed[v]
    if forward:
        s0 = s_in + 1
        e0 = s_out - 1 if on_out else s_out
        if closed:
            cnt = (e0 - s0 + 1) % m
            if (not on_in) and (not on_out) and s_in == s_out and pos_out < pos_in:
                cnt = m
        else:
            cnt = e0 - s0 + 1
        step = 1
    else:
        s0 = s_in - 1 if on_in else s_in
        e0 = s_out + 1 if on_out else s_out + 1
        if closed:
            cnt = (s0 - e0 + 1) % m
            if (not on_in) and (not on_out) and s_in == s_out and pos_out > pos_in:
                cnt = m
        else:
            cnt = s0 - e0 + 1
        step = -1
    if cnt < 0:
        cnt = 0
    out = np.empty(cnt, dtype=np.int64)
    k = s0
    for i in range(cnt):
        kk = k % m if closed else k
        out[i] = fspk[base + kk]
        k += step
    return out


@njit(cache=True)
def _merge_portals(ta, tb, lo1, hi1, v, spokes, lo2, hi2):
    """Concatenate corridor portals, cancelling immediate back-and-forth crossings."""
    n = (hi1 - lo1) + spokes.shape[0] + (hi2 - lo2)
    pa = np.empty(n, dtype=np.int64)
    pb = np.empty(n, dtype=np.int64)
    c = 0
    for part in range(3):
        if part == 0:
            cnt = hi1 - lo1
        elif part == 1:
            cnt = spokes.shape[0]
        else:
            cnt = hi2 - lo2
        for i in range(cnt):
            if part == 0:
                x, y = ta[lo1 + i], tb[lo1 + i]
            elif part == 1:
                x, y = v, spokes[i]
            else:
                x, y = ta[lo2 + i], tb[lo2 + i]
            if c > 0 and ((pa[c - 1] == x and pb[c - 1] == y) or (pa[c - 1] == y and pb[c - 1] == x)):
                c -= 1
                continue
            pa[c] = x
            pb[c] = y
            c += 1
    return pa[:c], pb[:c]


@njit(cache=True)
def _segment_length(verts, ta, tb, tt, lo, hi):
    total = 0.0
    px, py, pz = _point(verts, ta[lo], tb[lo], tt[lo])
    for k in range(lo + 1, hi + 1):
        x, y, z = _point(verts, ta[k], tb[k], tt[k])
        total += math.sqrt((x - px) ** 2 + (y - py) ** 2 + (z - pz) ** 2)
        px, py, pz = x, y, z
    return total


@njit(cache=True)
def _splice(ta, tb, tt, ip, inx, na, nb, nt):
    """Replace tokens strictly between ``ip`` and ``inx`` by the new interior."""
    n = ip + 1 + na.shape[0] + (ta.shape[0] - inx)
    ra = np.empty(n, dtype=np.int64)
    rb = np.empty(n, dtype=np.int64)
    rt = np.empty(n)
    ra[: ip + 1] = ta[: ip + 1]
    rb[: ip + 1] = tb[: ip + 1]
    rt[: ip + 1] = tt[: ip + 1]
    k = ip + 1
    ra[k: k + na.shape[0]] = na
    rb[k: k + na.shape[0]] = nb
    rt[k: k + na.shape[0]] = nt
    k += na.shape[0]
    ra[k:] = ta[inx:]
    rb[k:] = tb[inx:]
    rt[k:] = tt[inx:]
    return ra, rb, rt


@njit(cache=True)
def _is_pin(tb, k):
    return tb[k] < 0


@njit(cache=True)
def _shortenable(verts, fptr, fspk, fcum, fclosed, fok, ta, tb, tt, k, tol):
    ok, sf, sb, tf, tbw, theta, s_in, on_in, p_in, s_out, on_out, p_out = pin_angles(
        verts, fptr, fspk, fcum, fclosed, fok, ta[k],
        ta[k - 1], tb[k - 1], tt[k - 1], ta[k + 1], tb[k + 1], tt[k + 1])
    if not ok:
        return False, False
    limit = math.pi - tol
    use_f = tf and sf < limit
    use_b = tbw and sb < limit
    if use_f and use_b:
        return True, sf <= sb
    if use_f:
        return True, True
    if use_b:
        return True, False
    return False, False


@njit(cache=True)
def straighten_tokens(verts, fptr, fspk, fcum, fclosed, fok, ta, tb, tt, tol, max_iter):
    """Straighten a token path.  Returns ``ta, tb, tt, length, converged, passes``."""
    ta = ta.copy()
    tb = tb.copy()
    tt = tt.copy()
    # straighten every existing corridor first
    k = 0
    while k < ta.shape[0] - 1:
        nxt = k + 1
        while tb[nxt] >= 0:
            nxt += 1
        if nxt > k + 1:
            ok, na, nb, nt = straighten_corridor(verts, ta[k], ta[nxt], ta[k + 1: nxt], tb[k + 1: nxt])
            if ok:
                old = _segment_length(verts, ta, tb, tt, k, nxt)
                ra, rb, rt = _splice(ta, tb, tt, k, nxt, na, nb, nt)
                if _segment_length(verts, ra, rb, rt, k, k + 1 + na.shape[0]) <= old:
                    ta, tb, tt = ra, rb, rt
                    nxt = k + 1 + na.shape[0]
        k = nxt

    passes = 0
    budget = 64 * (ta.shape[0] + 16)
    while passes < max_iter and budget > 0:
        passes += 1
        changed = False
        k = 1
        prev_pin = 0
        while k < ta.shape[0] - 1:
            if tb[k] >= 0 or tb[k] == LOCKED:
                if tb[k] == LOCKED:
                    prev_pin = k
                k += 1
                continue
            want, forward = _shortenable(verts, fptr, fspk, fcum, fclosed, fok, ta, tb, tt, k, tol)
            if not want:
                prev_pin = k
                k += 1
                continue
            nxt = k + 1
            while tb[nxt] >= 0:
                nxt += 1
            v = ta[k]
            ok, sf, sb, tf, tbw, theta, s_in, on_in, p_in, s_out, on_out, p_out = pin_angles(
                verts, fptr, fspk, fcum, fclosed, fok, v,
                ta[k - 1], tb[k - 1], tt[k - 1], ta[k + 1], tb[k + 1], tt[k + 1])
            spokes = _crossed_spokes(fptr, fspk, fclosed, v, forward,
                                     s_in, on_in, p_in, s_out, on_out, p_out)
            pa, pb = _merge_portals(ta, tb, prev_pin + 1, k, v, spokes, k + 1, nxt)
            ok, na, nb, nt = straighten_corridor(verts, ta[prev_pin], ta[nxt], pa, pb)
            accepted = False
            if ok:
                old = _segment_length(verts, ta, tb, tt, prev_pin, nxt)
                ra, rb, rt = _splice(ta, tb, tt, prev_pin, nxt, na, nb, nt)
                new = _segment_length(verts, ra, rb, rt, prev_pin, prev_pin + 1 + na.shape[0])
                if new < old * (1.0 - ACCEPT_REL):
                    ta, tb, tt = ra, rb, rt
                    accepted = True
            if accepted:
                changed = True
                budget -= 1
                if budget <= 0:
                    break
                k = prev_pin + 1
            else:
                tb[k] = LOCKED
                prev_pin = k
                k += 1
        if not changed:
            break

    converged = True
    for k in range(1, ta.shape[0] - 1):
        if tb[k] < 0:
            want, forward = _shortenable(verts, fptr, fspk, fcum, fclosed, fok, ta, tb, tt, k, tol)
            if want:
                converged = False
            tb[k] = PIN
    return ta, tb, tt, path_length(verts, ta, tb, tt), converged, passes


@njit(cache=True)
def _edge_path(pred_row, s, t):
    cnt = 1
    x = t
    while x != s:
        x = pred_row[x]
        if x < 0:
            return np.empty(0, dtype=np.int64)
        cnt += 1
    out = np.empty(cnt, dtype=np.int64)
    x = t
    for i in range(cnt - 1, -1, -1):
        out[i] = x
        if i > 0:
            x = pred_row[x]
    return out


@njit(cache=True, parallel=True)
def all_pairs_rows(verts, fptr, fspk, fcum, fclosed, fok, pred, sources, tol, max_iter):
    """Straightened path length from each source to every vertex.

    ``pred[r]`` is the Dijkstra predecessor row of ``sources[r]``.  Rows are
    independent, so the result does not depend on the thread count.
    """
    B = sources.shape[0]
    n = verts.shape[0]
    out = np.empty((B, n))
    conv = np.ones((B, n), dtype=np.bool_)
    for r in prange(B):
        s = sources[r]
        for t in range(n):
            if t == s:
                out[r, t] = 0.0
                continue
            vp = _edge_path(pred[r], s, t)
            if vp.shape[0] == 0:
                out[r, t] = np.inf
                conv[r, t] = False
                continue
            m = vp.shape[0]
            tb0 = np.full(m, PIN, dtype=np.int64)
            tt0 = np.zeros(m)
            ra, rb, rt, length, ok, passes = straighten_tokens(
                verts, fptr, fspk, fcum, fclosed, fok, vp, tb0, tt0, tol, max_iter)
            out[r, t] = length
            conv[r, t] = ok
    return out, conv


@njit(cache=True, parallel=True)
def best_relay(d):
    """For each pair, the relay vertex ``k`` minimising ``d[i, k] + d[k, j]``.

    Ties go to the lowest ``k``.  Rows are independent.
    """
    n = d.shape[0]
    best = np.empty((n, n))
    arg = np.empty((n, n), dtype=np.int64)
    for i in prange(n):
        for j in range(n):
            b = np.inf
            a = -1
            for k in range(n):
                if k == i or k == j:
                    continue
                s = d[i, k] + d[k, j]
                if s < b:
                    b = s
                    a = k
            best[i, j] = b
            arg[i, j] = a
    return best, arg


@njit(cache=True)
def _leg(verts, fptr, fspk, fcum, fclosed, fok, pred, row, s, t, tol, max_iter):
    # shorter of the two straightened directions, oriented from s to t
    best_len = np.inf
    ba = np.empty(0, dtype=np.int64)
    bb = np.empty(0, dtype=np.int64)
    bt = np.empty(0)
    for flip in range(2):
        a, b = (t, s) if flip else (s, t)
        vp = _edge_path(pred[row[a]], a, b)
        m = vp.shape[0]
        ra, rb, rt, length, ok, passes = straighten_tokens(
            verts, fptr, fspk, fcum, fclosed, fok, vp, np.full(m, PIN, dtype=np.int64),
            np.zeros(m), tol, max_iter)
        if length < best_len:
            best_len = length
            if flip:
                ba, bb, bt = ra[::-1].copy(), rb[::-1].copy(), rt[::-1].copy()
            else:
                ba, bb, bt = ra, rb, rt
    return ba, bb, bt


@njit(cache=True, parallel=True)
def relay_lengths(verts, fptr, fspk, fcum, fclosed, fok, pred, row, pairs, relay, tol, max_iter):
    """Straightened length of the joined path ``i -> k -> j`` for each pair.

    ``pred[row[v]]`` is the Dijkstra predecessor row of vertex ``v``.
    """
    m = pairs.shape[0]
    out = np.empty(m)
    for r in prange(m):
        i, j, k = pairs[r, 0], pairs[r, 1], relay[r]
        a1, b1, t1 = _leg(verts, fptr, fspk, fcum, fclosed, fok, pred, row, i, k, tol, max_iter)
        a2, b2, t2 = _leg(verts, fptr, fspk, fcum, fclosed, fok, pred, row, k, j, tol, max_iter)
        n1 = a1.shape[0]
        n2 = a2.shape[0]
        ta = np.empty(n1 + n2 - 1, dtype=np.int64)
        tb = np.empty(n1 + n2 - 1, dtype=np.int64)
        tt = np.empty(n1 + n2 - 1)
        ta[:n1], tb[:n1], tt[:n1] = a1, b1, t1
        ta[n1:], tb[n1:], tt[n1:] = a2[1:], b2[1:], t2[1:]
        ra, rb, rt, length, ok, passes = straighten_tokens(
            verts, fptr, fspk, fcum, fclosed, fok, ta, tb, tt, tol, max_iter)
        out[r] = length
    return out
