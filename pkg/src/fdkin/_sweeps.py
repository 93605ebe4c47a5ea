"""Numba kernels for the 6D/9D collision quadratures.

Layout conventions shared by every sweep:

- fields are flat C-ordered float64 arrays over the n^3 lattice; interpolation
  reads from a zero-padded (n+2)^3 copy so post-collision points that leave the
  cube fade to zero without branching on every corner fetch;
- scattering directions come as the mu > 0 hemisphere of the full tensor rule
  with their original weights; the sigma -> -sigma half is folded analytically
  (the post-collision pair just swaps), so each pair/direction term evaluates
  the angular kernel at +cos(theta) and -cos(theta);
- unordered node pairs are swept once: for fixed sigma the outgoing pair is
  symmetric in (v, v*), so one evaluation feeds both output nodes.  Rows are
  paired (h, N-1-h) to balance the triangular loop across threads;
- every thread accumulates into its own buffer and buffers are reduced in
  thread order, so results are bit-reproducible for a fixed thread count.

Interpolated densities are clamped to [0, fmax]; pass fmax = 1/eps so Pauli
factors keep their sign, or a huge value when no bound applies.

The mirror point v'* = 2c - v' of v' around the pair midpoint c needs no
second weight computation: c sits on the half-integer lattice, so the cell of
v'* is (M - 1 - i0) with reversed fractional weights, M = i_axis + j_axis.
"""

import numpy as np
from numba import get_thread_id, njit, prange

BIG = 1e300


@njit(inline="always")
def _tri(fpad, n, i0, j0, k0, ux, uy, uz, fmax):
    s = n + 2
    b = ((i0 + 1) * s + (j0 + 1)) * s + (k0 + 1)
    c00 = fpad[b] * (1.0 - uz) + fpad[b + 1] * uz
    c01 = fpad[b + s] * (1.0 - uz) + fpad[b + s + 1] * uz
    c10 = fpad[b + s * s] * (1.0 - uz) + fpad[b + s * s + 1] * uz
    c11 = fpad[b + s * s + s] * (1.0 - uz) + fpad[b + s * s + s + 1] * uz
    c0 = c00 * (1.0 - uy) + c01 * uy
    c1 = c10 * (1.0 - uy) + c11 * uy
    v = c0 * (1.0 - ux) + c1 * ux
    if v < 0.0:
        return 0.0
    if v > fmax:
        return fmax
    return v


@njit(inline="always")
def _bval(kkind, b0, btab, c):
    if kkind == 0:
        return b0
    # uniform table on [-1, 1]; clamp guards rounding of cos(theta)
    K = btab.shape[0]
    t = (c + 1.0) * 0.5 * (K - 1)
    if t <= 0.0:
        return btab[0]
    if t >= K - 1:
        return btab[K - 1]
    i = int(t)
    u = t - i
    return btab[i] * (1.0 - u) + btab[i + 1] * u


@njit(inline="always")
def _qeps_row(i, f, fpad, pix, piy, piz, ax, n, eps, gamma, kkind, b0, btab,
              sx, sy, sz, sw, accg, accnu, inv_dv, fmax):
    N = f.shape[0]
    m = sx.shape[0]
    nf = float(n)
    xi = ax[pix[i]]
    yi = ax[piy[i]]
    zi = ax[piz[i]]
    fi = f[i]
    g1 = gamma == 1.0
    for j in range(i + 1, N):
        dx = xi - ax[pix[j]]
        dy = yi - ax[piy[j]]
        dz = zi - ax[piz[j]]
        r = np.sqrt(dx * dx + dy * dy + dz * dz)
        rg = r if g1 else r**gamma
        scx = 0.5 * (pix[i] + pix[j])
        scy = 0.5 * (piy[i] + piy[j])
        scz = 0.5 * (piz[i] + piz[j])
        Mx = pix[i] + pix[j]
        My = piy[i] + piy[j]
        Mz = piz[i] + piz[j]
        hs = 0.5 * r * inv_dv
        invr = 1.0 / r
        G = 0.0
        L = 0.0
        for s in range(m):
            tx = scx + hs * sx[s]
            ty = scy + hs * sy[s]
            tz = scz + hs * sz[s]
            if kkind == 0:
                bsum = 2.0 * b0
            else:
                c = (sx[s] * dx + sy[s] * dy + sz[s] * dz) * invr
                bsum = _bval(kkind, b0, btab, c) + _bval(kkind, b0, btab, -c)
            wb = sw[s] * bsum
            fp = 0.0
            if -1.0 <= tx < nf and -1.0 <= ty < nf and -1.0 <= tz < nf:
                i0 = int(np.floor(tx))
                j0 = int(np.floor(ty))
                k0 = int(np.floor(tz))
                ux = tx - i0
                uy = ty - j0
                uz = tz - k0
                fp = _tri(fpad, n, i0, j0, k0, ux, uy, uz, fmax)
                i1 = Mx - 1 - i0
                j1 = My - 1 - j0
                k1 = Mz - 1 - k0
            else:
                i0 = -2
                i1 = -2
                j1 = 0
                k1 = 0
                ux = 0.0
                uy = 0.0
                uz = 0.0
            fq = 0.0
            if -1 <= i1 < n and -1 <= j1 < n and -1 <= k1 < n:
                fq = _tri(fpad, n, i1, j1, k1, 1.0 - ux, 1.0 - uy, 1.0 - uz, fmax)
            elif i0 == -2:
                # v' left the cube entirely; locate v'* directly
                txq = float(Mx) - tx
                tyq = float(My) - ty
                tzq = float(Mz) - tz
                if -1.0 <= txq < nf and -1.0 <= tyq < nf and -1.0 <= tzq < nf:
                    i1 = int(np.floor(txq))
                    j1 = int(np.floor(tyq))
                    k1 = int(np.floor(tzq))
                    fq = _tri(fpad, n, i1, j1, k1, txq - i1, tyq - j1, tzq - k1, fmax)
            G += wb * fp * fq
            L += wb * (1.0 - eps * fp) * (1.0 - eps * fq)
        G *= rg
        L *= rg
        accg[i] += (1.0 - eps * f[j]) * G
        accg[j] += (1.0 - eps * fi) * G
        accnu[i] += f[j] * L
        accnu[j] += fi * L


@njit(parallel=True, fastmath=True, cache=True)
def qeps_parts(f, fpad, pix, piy, piz, ax, n, eps, gamma, kkind, b0, btab,
               sx, sy, sz, sw, nthr, fmax):
    """Raw pair sums for the quantum operator at parameter eps.

    Returns (gpart, nu) with
        gain(i) = dv^3 (1 - eps f_i) gpart_i,   loss(i) = dv^3 f_i nu_i.
    """
    N = f.shape[0]
    accg = np.zeros((nthr, N))
    accnu = np.zeros((nthr, N))
    inv_dv = 1.0 / (ax[1] - ax[0])
    H = N // 2
    for h in prange(H):
        tid = get_thread_id()
        _qeps_row(h, f, fpad, pix, piy, piz, ax, n, eps, gamma, kkind, b0, btab,
                  sx, sy, sz, sw, accg[tid], accnu[tid], inv_dv, fmax)
        i2 = N - 1 - h
        if i2 != h:
            _qeps_row(i2, f, fpad, pix, piy, piz, ax, n, eps, gamma, kkind, b0,
                      btab, sx, sy, sz, sw, accg[tid], accnu[tid], inv_dv, fmax)
    gpart = np.zeros(N)
    nu = np.zeros(N)
    for t in range(nthr):
        for i in range(N):
            gpart[i] += accg[t, i]
            nu[i] += accnu[t, i]
    return gpart, nu


@njit(inline="always")
def _pair_geometry(i, j, pix, piy, piz, ax):
    dx = ax[pix[i]] - ax[pix[j]]
    dy = ax[piy[i]] - ax[piy[j]]
    dz = ax[piz[i]] - ax[piz[j]]
    r = np.sqrt(dx * dx + dy * dy + dz * dz)
    return dx, dy, dz, r


@njit(inline="always")
def _qplus_row(i, f, g, fpad, gpad, pix, piy, piz, ax, n, gamma, kkind, b0, btab,
               sx, sy, sz, sw, aqfg, aqgf, acf, acg, inv_dv, fmax):
    N = f.shape[0]
    m = sx.shape[0]
    nf = float(n)
    fi = f[i]
    gi = g[i]
    g1 = gamma == 1.0
    for j in range(i + 1, N):
        dx, dy, dz, r = _pair_geometry(i, j, pix, piy, piz, ax)
        rg = r if g1 else r**gamma
        scx = 0.5 * (pix[i] + pix[j])
        scy = 0.5 * (piy[i] + piy[j])
        scz = 0.5 * (piz[i] + piz[j])
        Mx = pix[i] + pix[j]
        My = piy[i] + piy[j]
        Mz = piz[i] + piz[j]
        hs = 0.5 * r * inv_dv
        invr = 1.0 / r
        Si = 0.0
        Sj = 0.0
        Ti = 0.0
        Tj = 0.0
        beta = 0.0
        for s in range(m):
            if kkind == 0:
                bp = b0
                bm = b0
            else:
                c = (sx[s] * dx + sy[s] * dy + sz[s] * dz) * invr
                bp = _bval(kkind, b0, btab, c)
                bm = _bval(kkind, b0, btab, -c)
            w = sw[s]
            beta += w * (bp + bm)
            tx = scx + hs * sx[s]
            ty = scy + hs * sy[s]
            tz = scz + hs * sz[s]
            fp = 0.0
            gp = 0.0
            fq = 0.0
            gq = 0.0
            inside_p = -1.0 <= tx < nf and -1.0 <= ty < nf and -1.0 <= tz < nf
            if inside_p:
                i0 = int(np.floor(tx))
                j0 = int(np.floor(ty))
                k0 = int(np.floor(tz))
                ux = tx - i0
                uy = ty - j0
                uz = tz - k0
                fp = _tri(fpad, n, i0, j0, k0, ux, uy, uz, fmax)
                gp = _tri(gpad, n, i0, j0, k0, ux, uy, uz, fmax)
                i1 = Mx - 1 - i0
                j1 = My - 1 - j0
                k1 = Mz - 1 - k0
                if -1 <= i1 < n and -1 <= j1 < n and -1 <= k1 < n:
                    fq = _tri(fpad, n, i1, j1, k1, 1.0 - ux, 1.0 - uy, 1.0 - uz, fmax)
                    gq = _tri(gpad, n, i1, j1, k1, 1.0 - ux, 1.0 - uy, 1.0 - uz, fmax)
            else:
                txq = float(Mx) - tx
                tyq = float(My) - ty
                tzq = float(Mz) - tz
                if -1.0 <= txq < nf and -1.0 <= tyq < nf and -1.0 <= tzq < nf:
                    i1 = int(np.floor(txq))
                    j1 = int(np.floor(tyq))
                    k1 = int(np.floor(tzq))
                    uxq = txq - i1
                    uyq = tyq - j1
                    uzq = tzq - k1
                    fq = _tri(fpad, n, i1, j1, k1, uxq, uyq, uzq, fmax)
                    gq = _tri(gpad, n, i1, j1, k1, uxq, uyq, uzq, fmax)
            p1 = fp * gq
            p2 = fq * gp
            Si += w * (bp * p1 + bm * p2)
            Sj += w * (bm * p1 + bp * p2)
            Ti += w * (bp * p2 + bm * p1)
            Tj += w * (bm * p2 + bp * p1)
        aqfg[i] += rg * Si
        aqfg[j] += rg * Sj
        aqgf[i] += rg * Ti
        aqgf[j] += rg * Tj
        acf[i] += rg * beta * f[j]
        acf[j] += rg * beta * fi
        acg[i] += rg * beta * g[j]
        acg[j] += rg * beta * gi


@njit(parallel=True, fastmath=True, cache=True)
def qplus_pair(f, g, fpad, gpad, pix, piy, piz, ax, n, gamma, kkind, b0, btab,
               sx, sy, sz, sw, nthr, fmax):
    """Bilinear gain sums and loss brackets.

    Returns (qfg, qgf, convf, convg):
        Q+(f,g)(i) = dv^3 qfg_i,  Q+(g,f)(i) = dv^3 qgf_i,
        Q-(f,g)(i) = dv^3 f_i convg_i,  Q-(g,f)(i) = dv^3 g_i convf_i
    (convg carries the angular mass folded per pair).
    """
    N = f.shape[0]
    aqfg = np.zeros((nthr, N))
    aqgf = np.zeros((nthr, N))
    acf = np.zeros((nthr, N))
    acg = np.zeros((nthr, N))
    inv_dv = 1.0 / (ax[1] - ax[0])
    H = N // 2
    for h in prange(H):
        tid = get_thread_id()
        _qplus_row(h, f, g, fpad, gpad, pix, piy, piz, ax, n, gamma, kkind, b0,
                   btab, sx, sy, sz, sw, aqfg[tid], aqgf[tid], acf[tid], acg[tid],
                   inv_dv, fmax)
        i2 = N - 1 - h
        if i2 != h:
            _qplus_row(i2, f, g, fpad, gpad, pix, piy, piz, ax, n, gamma, kkind,
                       b0, btab, sx, sy, sz, sw, aqfg[tid], aqgf[tid], acf[tid],
                       acg[tid], inv_dv, fmax)
    qfg = np.zeros(N)
    qgf = np.zeros(N)
    convf = np.zeros(N)
    convg = np.zeros(N)
    for t in range(nthr):
        for i in range(N):
            qfg[i] += aqfg[t, i]
            qgf[i] += aqgf[t, i]
            convf[i] += acf[t, i]
            convg[i] += acg[t, i]
    return qfg, qgf, convf, convg


@njit(inline="always")
def _gamma_row(i, g, hpad, pix, piy, piz, ax, n, gamma, kkind, b0, btab,
               sx, sy, sz, sw, acc, inv_dv, fmax):
    N = g.shape[0]
    m = sx.shape[0]
    nf = float(n)
    gi = g[i]
    g1 = gamma == 1.0
    for j in range(i + 1, N):
        dx, dy, dz, r = _pair_geometry(i, j, pix, piy, piz, ax)
        rg = r if g1 else r**gamma
        scx = 0.5 * (pix[i] + pix[j])
        scy = 0.5 * (piy[i] + piy[j])
        scz = 0.5 * (piz[i] + piz[j])
        Mx = pix[i] + pix[j]
        My = piy[i] + piy[j]
        Mz = piz[i] + piz[j]
        hs = 0.5 * r * inv_dv
        invr = 1.0 / r
        T = 0.0
        for s in range(m):
            if kkind == 0:
                bsum = 2.0 * b0
            else:
                c = (sx[s] * dx + sy[s] * dy + sz[s] * dz) * invr
                bsum = _bval(kkind, b0, btab, c) + _bval(kkind, b0, btab, -c)
            tx = scx + hs * sx[s]
            ty = scy + hs * sy[s]
            tz = scz + hs * sz[s]
            hp = 0.0
            hq = 0.0
            if -1.0 <= tx < nf and -1.0 <= ty < nf and -1.0 <= tz < nf:
                i0 = int(np.floor(tx))
                j0 = int(np.floor(ty))
                k0 = int(np.floor(tz))
                ux = tx - i0
                uy = ty - j0
                uz = tz - k0
                hp = _tri(hpad, n, i0, j0, k0, ux, uy, uz, fmax)
                i1 = Mx - 1 - i0
                j1 = My - 1 - j0
                k1 = Mz - 1 - k0
                if -1 <= i1 < n and -1 <= j1 < n and -1 <= k1 < n:
                    hq = _tri(hpad, n, i1, j1, k1, 1.0 - ux, 1.0 - uy, 1.0 - uz, fmax)
            else:
                txq = float(Mx) - tx
                tyq = float(My) - ty
                tzq = float(Mz) - tz
                if -1.0 <= txq < nf and -1.0 <= tyq < nf and -1.0 <= tzq < nf:
                    i1 = int(np.floor(txq))
                    j1 = int(np.floor(tyq))
                    k1 = int(np.floor(tzq))
                    hq = _tri(hpad, n, i1, j1, k1, txq - i1, tyq - j1, tzq - k1, fmax)
            T += sw[s] * bsum * (hp + hq)
        T *= rg
        acc[i] += g[j] * T
        acc[j] += gi * T


@njit(parallel=True, fastmath=True, cache=True)
def gamma_sum(g, hpad, pix, piy, piz, ax, n, gamma, kkind, b0, btab,
              sx, sy, sz, sw, nthr, fmax):
    """Raw sums of the gain-pair operator: Gamma(g,h)(i) = dv^3 out_i."""
    N = g.shape[0]
    acc = np.zeros((nthr, N))
    inv_dv = 1.0 / (ax[1] - ax[0])
    H = N // 2
    for h in prange(H):
        tid = get_thread_id()
        _gamma_row(h, g, hpad, pix, piy, piz, ax, n, gamma, kkind, b0, btab,
                   sx, sy, sz, sw, acc[tid], inv_dv, fmax)
        i2 = N - 1 - h
        if i2 != h:
            _gamma_row(i2, g, hpad, pix, piy, piz, ax, n, gamma, kkind, b0, btab,
                       sx, sy, sz, sw, acc[tid], inv_dv, fmax)
    out = np.zeros(N)
    for t in range(nthr):
        for i in range(N):
            out[i] += acc[t, i]
    return out


@njit(inline="always")
def _diss_row(i, f, fpad, pix, piy, piz, ax, n, eps, gamma, kkind, b0, btab,
              sx, sy, sz, sw, inv_dv, fmax):
    """Entropy production contributions of all pairs (i, j > i).

    Returns (d_eps, d0) partial sums.  Terms use the overflow-free grouping
        X = f' f'* (1-eps f_i)(1-eps f_j),  Y = f_i f_j (1-eps f')(1-eps f'*),
    so the quantum integrand is (X - Y) log(X/Y) and the classical integrand
    of the saturation-transformed field is the same divided by the product of
    the four Pauli factors.
    """
    N = f.shape[0]
    m = sx.shape[0]
    nf = float(n)
    fi = f[i]
    pai = 1.0 - eps * fi
    g1 = gamma == 1.0
    d_eps = 0.0
    d0 = 0.0
    for j in range(i + 1, N):
        fj = f[j]
        paj = 1.0 - eps * fj
        dx, dy, dz, r = _pair_geometry(i, j, pix, piy, piz, ax)
        rg = r if g1 else r**gamma
        scx = 0.5 * (pix[i] + pix[j])
        scy = 0.5 * (piy[i] + piy[j])
        scz = 0.5 * (piz[i] + piz[j])
        Mx = pix[i] + pix[j]
        My = piy[i] + piy[j]
        Mz = piz[i] + piz[j]
        hs = 0.5 * r * inv_dv
        invr = 1.0 / r
        se = 0.0
        s0 = 0.0
        for s in range(m):
            if kkind == 0:
                bsum = 2.0 * b0
            else:
                c = (sx[s] * dx + sy[s] * dy + sz[s] * dz) * invr
                bsum = _bval(kkind, b0, btab, c) + _bval(kkind, b0, btab, -c)
            tx = scx + hs * sx[s]
            ty = scy + hs * sy[s]
            tz = scz + hs * sz[s]
            fp = 0.0
            fq = 0.0
            if -1.0 <= tx < nf and -1.0 <= ty < nf and -1.0 <= tz < nf:
                i0 = int(np.floor(tx))
                j0 = int(np.floor(ty))
                k0 = int(np.floor(tz))
                ux = tx - i0
                uy = ty - j0
                uz = tz - k0
                fp = _tri(fpad, n, i0, j0, k0, ux, uy, uz, fmax)
                i1 = Mx - 1 - i0
                j1 = My - 1 - j0
                k1 = Mz - 1 - k0
                if -1 <= i1 < n and -1 <= j1 < n and -1 <= k1 < n:
                    fq = _tri(fpad, n, i1, j1, k1, 1.0 - ux, 1.0 - uy, 1.0 - uz, fmax)
            else:
                txq = float(Mx) - tx
                tyq = float(My) - ty
                tzq = float(Mz) - tz
                if -1.0 <= txq < nf and -1.0 <= tyq < nf and -1.0 <= tzq < nf:
                    i1 = int(np.floor(txq))
                    j1 = int(np.floor(tyq))
                    k1 = int(np.floor(tzq))
                    fq = _tri(fpad, n, i1, j1, k1, txq - i1, tyq - j1, tzq - k1, fmax)
            pap = 1.0 - eps * fp
            paq = 1.0 - eps * fq
            X = fp * fq * pai * paj
            Y = fi * fj * pap * paq
            if X > 1e-300 and Y > 1e-300:
                term = (X - Y) * np.log(X / Y)
                se += sw[s] * bsum * term
                Pi = pai * paj * pap * paq
                if Pi > 1e-280:
                    s0 += sw[s] * bsum * term / Pi
        d_eps += rg * se
        d0 += rg * s0
    return d_eps, d0


@njit(parallel=True, fastmath=True, cache=True)
def dissipation(f, fpad, pix, piy, piz, ax, n, eps, gamma, kkind, b0, btab,
                sx, sy, sz, sw, nthr, fmax):
    """Entropy production sums: D = (1/4) dv^6 * 2 * result.

    Returns the pair (quantum production, classical production of the
    transformed field x -> x/(1-eps x)); for eps = 0 both coincide.
    """
    N = f.shape[0]
    pe = np.zeros(nthr)
    p0 = np.zeros(nthr)
    inv_dv = 1.0 / (ax[1] - ax[0])
    H = N // 2
    for h in prange(H):
        tid = get_thread_id()
        a, b = _diss_row(h, f, fpad, pix, piy, piz, ax, n, eps, gamma, kkind, b0,
                         btab, sx, sy, sz, sw, inv_dv, fmax)
        pe[tid] += a
        p0[tid] += b
        i2 = N - 1 - h
        if i2 != h:
            a, b = _diss_row(i2, f, fpad, pix, piy, piz, ax, n, eps, gamma, kkind,
                             b0, btab, sx, sy, sz, sw, inv_dv, fmax)
            pe[tid] += a
            p0[tid] += b
    de = 0.0
    d0 = 0.0
    for t in range(nthr):
        de += pe[t]
        d0 += p0[t]
    return de, d0


@njit(inline="always")
def _conv_row(i, f, pix, piy, piz, ax, gamma, acc):
    N = f.shape[0]
    g1 = gamma == 1.0
    fi = f[i]
    for j in range(i + 1, N):
        dx, dy, dz, r = _pair_geometry(i, j, pix, piy, piz, ax)
        rg = r if g1 else r**gamma
        acc[i] += rg * f[j]
        acc[j] += rg * fi


@njit(parallel=True, fastmath=True, cache=True)
def convolve_power(f, pix, piy, piz, ax, gamma, nthr):
    """(f * |.|^gamma)(i) = dv^3 out_i by direct double sum."""
    N = f.shape[0]
    acc = np.zeros((nthr, N))
    H = N // 2
    for h in prange(H):
        tid = get_thread_id()
        _conv_row(h, f, pix, piy, piz, ax, gamma, acc[tid])
        i2 = N - 1 - h
        if i2 != h:
            _conv_row(i2, f, pix, piy, piz, ax, gamma, acc[tid])
    out = np.zeros(N)
    for t in range(nthr):
        for i in range(N):
            out[i] += acc[t, i]
    return out
