# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the parsing network.

Mirrors backend/pure.py operation for operation; the parameter layout is the
one defined in backend/layout.py and the agreement between the two backends
is pinned by tests.  Hand-written loops beat the numpy fallback by an order
of magnitude at the matrix sizes this toolkit runs (tens of segments, at most
a few hundred categories), which keeps finite-difference sweeps and training
fast.
"""

import numpy as np

from libc.math cimport exp, log, sqrt


cdef struct AttOffs:
    Py_ssize_t wq, bq, wk, bk, wv, bv, wo, bo


cdef struct NetOffs:
    Py_ssize_t proj_a_w, proj_a_b, proj_v_w, proj_v_b
    AttOffs att[4]
    Py_ssize_t cls_w, cls_b, tatt_w, matt_w, total


cdef NetOffs make_offs(Py_ssize_t da, Py_ssize_t dv, Py_ssize_t d, Py_ssize_t C) noexcept nogil:
    cdef NetOffs o
    cdef Py_ssize_t pos = 0
    cdef int b
    o.proj_a_w = pos; pos += da * d
    o.proj_a_b = pos; pos += d
    o.proj_v_w = pos; pos += dv * d
    o.proj_v_b = pos; pos += d
    for b in range(4):
        o.att[b].wq = pos; pos += d * d
        o.att[b].bq = pos; pos += d
        o.att[b].wk = pos; pos += d * d
        o.att[b].bk = pos; pos += d
        o.att[b].wv = pos; pos += d * d
        o.att[b].bv = pos; pos += d
        o.att[b].wo = pos; pos += d * d
        o.att[b].bo = pos; pos += d
    o.cls_w = pos; pos += d * C
    o.cls_b = pos; pos += C
    o.tatt_w = pos; pos += d * C
    o.matt_w = pos; pos += C
    o.total = pos
    return o


cdef inline double dmax(double a, double b) noexcept nogil:
    return a if a > b else b


cdef inline double bce1(double p, double y, double eps) noexcept nogil:
    return -(y * log(dmax(p, eps)) + (1.0 - y) * log(dmax(1.0 - p, eps)))


cdef inline double bgrad1(double p, double y, double eps) noexcept nogil:
    cdef double g = 0.0
    if p > eps:
        g += -y / p
    if 1.0 - p > eps:
        g += (1.0 - y) / (1.0 - p)
    return g


cdef inline double sigmoid1(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef void lin_fwd(const double[::1] th, Py_ssize_t woff, Py_ssize_t boff,
                  const double[:, ::1] X, double[:, ::1] out) noexcept nogil:
    # out = X @ W (+ b); W row-major (k, m) at woff; boff < 0 means no bias
    cdef Py_ssize_t n = X.shape[0], k = X.shape[1], m = out.shape[1]
    cdef Py_ssize_t i, j, l
    cdef double a
    for i in range(n):
        if boff >= 0:
            for j in range(m):
                out[i, j] = th[boff + j]
        else:
            for j in range(m):
                out[i, j] = 0.0
        for l in range(k):
            a = X[i, l]
            for j in range(m):
                out[i, j] += a * th[woff + l * m + j]


cdef void lin_bwd_params(double[::1] gth, Py_ssize_t woff, Py_ssize_t boff,
                         const double[:, ::1] X, const double[:, ::1] dout) noexcept nogil:
    # gW += X.T @ dout; gb += column sums of dout
    cdef Py_ssize_t n = X.shape[0], k = X.shape[1], m = dout.shape[1]
    cdef Py_ssize_t i, j, l
    cdef double acc
    for l in range(k):
        for j in range(m):
            acc = 0.0
            for i in range(n):
                acc += X[i, l] * dout[i, j]
            gth[woff + l * m + j] += acc
    if boff >= 0:
        for j in range(m):
            acc = 0.0
            for i in range(n):
                acc += dout[i, j]
            gth[boff + j] += acc


cdef void lin_bwd_input(const double[::1] th, Py_ssize_t woff,
                        const double[:, ::1] dout, double[:, ::1] dX,
                        bint accumulate) noexcept nogil:
    # dX (+)= dout @ W.T
    cdef Py_ssize_t n = dout.shape[0], m = dout.shape[1], k = dX.shape[1]
    cdef Py_ssize_t i, j, l
    cdef double acc
    for i in range(n):
        for l in range(k):
            acc = 0.0
            for j in range(m):
                acc += dout[i, j] * th[woff + l * m + j]
            if accumulate:
                dX[i, l] += acc
            else:
                dX[i, l] = acc


cdef void mha_fwd(const double[::1] th, AttOffs o,
                  const double[:, ::1] X, const double[:, ::1] Y,
                  double[:, ::1] Q, double[:, ::1] K, double[:, ::1] V,
                  double[:, :, ::1] A, double[:, ::1] Hcat, double[:, ::1] out,
                  Py_ssize_t h) noexcept nogil:
    cdef Py_ssize_t T = X.shape[0], d = X.shape[1], dk = d // h
    cdef Py_ssize_t hi, t, u, j, base
    cdef double scale = 1.0 / sqrt(<double> dk)
    cdef double acc, mx, s
    lin_fwd(th, o.wq, o.bq, X, Q)
    lin_fwd(th, o.wk, o.bk, Y, K)
    lin_fwd(th, o.wv, o.bv, Y, V)
    for hi in range(h):
        base = hi * dk
        for t in range(T):
            for u in range(T):
                acc = 0.0
                for j in range(dk):
                    acc += Q[t, base + j] * K[u, base + j]
                A[hi, t, u] = acc * scale
            mx = A[hi, t, 0]
            for u in range(1, T):
                mx = dmax(mx, A[hi, t, u])
            s = 0.0
            for u in range(T):
                A[hi, t, u] = exp(A[hi, t, u] - mx)
                s += A[hi, t, u]
            for u in range(T):
                A[hi, t, u] /= s
            for j in range(dk):
                acc = 0.0
                for u in range(T):
                    acc += A[hi, t, u] * V[u, base + j]
                Hcat[t, base + j] = acc
    lin_fwd(th, o.wo, o.bo, Hcat, out)


cdef void mha_bwd(const double[::1] th, AttOffs o,
                  const double[:, ::1] X, const double[:, ::1] Y,
                  const double[:, ::1] Q, const double[:, ::1] K, const double[:, ::1] V,
                  const double[:, :, ::1] A, const double[:, ::1] Hcat,
                  const double[:, ::1] dout, double[::1] gth,
                  double[:, ::1] dX, double[:, ::1] dY,
                  double[:, ::1] dH, double[:, ::1] dQ, double[:, ::1] dK,
                  double[:, ::1] dV, double[:, ::1] dS, Py_ssize_t h) noexcept nogil:
    # dX and dY always accumulate; they may alias for self-attention
    cdef Py_ssize_t T = X.shape[0], d = X.shape[1], dk = d // h
    cdef Py_ssize_t hi, t, u, j, base
    cdef double scale = 1.0 / sqrt(<double> dk)
    cdef double acc, dot
    lin_bwd_params(gth, o.wo, o.bo, Hcat, dout)
    lin_bwd_input(th, o.wo, dout, dH, False)
    for hi in range(h):
        base = hi * dk
        for t in range(T):
            # attention-weight gradient row, then softmax backward in place
            dot = 0.0
            for u in range(T):
                acc = 0.0
                for j in range(dk):
                    acc += dH[t, base + j] * V[u, base + j]
                dS[t, u] = acc
                dot += acc * A[hi, t, u]
            for u in range(T):
                dS[t, u] = A[hi, t, u] * (dS[t, u] - dot)
        for t in range(T):
            for j in range(dk):
                acc = 0.0
                for u in range(T):
                    acc += dS[t, u] * K[u, base + j]
                dQ[t, base + j] = acc * scale
        for u in range(T):
            for j in range(dk):
                acc = 0.0
                for t in range(T):
                    acc += dS[t, u] * Q[t, base + j]
                dK[u, base + j] = acc * scale
                acc = 0.0
                for t in range(T):
                    acc += A[hi, t, u] * dH[t, base + j]
                dV[u, base + j] = acc
    lin_bwd_params(gth, o.wq, o.bq, X, dQ)
    lin_bwd_params(gth, o.wk, o.bk, Y, dK)
    lin_bwd_params(gth, o.wv, o.bv, Y, dV)
    lin_bwd_input(th, o.wq, dQ, dX, True)
    lin_bwd_input(th, o.wk, dK, dY, True)
    lin_bwd_input(th, o.wv, dV, dY, True)


cdef void encode(const double[::1] th, NetOffs* o,
                 const double[:, ::1] audio, const double[:, ::1] visual,
                 double[:, ::1] Fa, double[:, ::1] Fv,
                 double[:, ::1] Fad, double[:, ::1] Fvd,
                 double[:, :, ::1] Qs, double[:, :, ::1] Ks, double[:, :, ::1] Vs,
                 double[:, :, :, ::1] As, double[:, :, ::1] Hs, double[:, :, ::1] Ss,
                 Py_ssize_t h) noexcept nogil:
    cdef Py_ssize_t T = audio.shape[0], d = Fa.shape[1]
    cdef Py_ssize_t t, j
    lin_fwd(th, o.proj_a_w, o.proj_a_b, audio, Fa)
    lin_fwd(th, o.proj_v_w, o.proj_v_b, visual, Fv)
    mha_fwd(th, o.att[0], Fa, Fa, Qs[0], Ks[0], Vs[0], As[0], Hs[0], Ss[0], h)
    mha_fwd(th, o.att[1], Fa, Fv, Qs[1], Ks[1], Vs[1], As[1], Hs[1], Ss[1], h)
    mha_fwd(th, o.att[2], Fv, Fv, Qs[2], Ks[2], Vs[2], As[2], Hs[2], Ss[2], h)
    mha_fwd(th, o.att[3], Fv, Fa, Qs[3], Ks[3], Vs[3], As[3], Hs[3], Ss[3], h)
    for t in range(T):
        for j in range(d):
            Fad[t, j] = Fa[t, j] + Ss[0, t, j] + Ss[1, t, j]
            Fvd[t, j] = Fv[t, j] + Ss[2, t, j] + Ss[3, t, j]


cdef void heads_and_pool(const double[::1] th, NetOffs* o,
                         const double[:, ::1] Fad, const double[:, ::1] Fvd,
                         double[:, ::1] Za, double[:, ::1] Zv,
                         double[:, ::1] Pa, double[:, ::1] Pv,
                         double[:, ::1] Aa, double[:, ::1] Av,
                         double[::1] pa, double[::1] pv, double[::1] pu,
                         double* ua_out, double* uv_out) noexcept nogil:
    cdef Py_ssize_t T = Fad.shape[0], C = Za.shape[1]
    cdef Py_ssize_t t, c
    cdef double mx, s, ga, gv, ea, ev, ua, uv
    lin_fwd(th, o.cls_w, o.cls_b, Fad, Za)
    lin_fwd(th, o.cls_w, o.cls_b, Fvd, Zv)
    lin_fwd(th, o.tatt_w, -1, Fad, Aa)
    lin_fwd(th, o.tatt_w, -1, Fvd, Av)
    for t in range(T):
        for c in range(C):
            Pa[t, c] = sigmoid1(Za[t, c])
            Pv[t, c] = sigmoid1(Zv[t, c])
    # temporal softmax per category column
    for c in range(C):
        mx = Aa[0, c]
        for t in range(1, T):
            mx = dmax(mx, Aa[t, c])
        s = 0.0
        for t in range(T):
            Aa[t, c] = exp(Aa[t, c] - mx)
            s += Aa[t, c]
        for t in range(T):
            Aa[t, c] /= s
        mx = Av[0, c]
        for t in range(1, T):
            mx = dmax(mx, Av[t, c])
        s = 0.0
        for t in range(T):
            Av[t, c] = exp(Av[t, c] - mx)
            s += Av[t, c]
        for t in range(T):
            Av[t, c] /= s
    for c in range(C):
        s = 0.0
        for t in range(T):
            s += Aa[t, c] * Pa[t, c]
        pa[c] = s
        s = 0.0
        for t in range(T):
            s += Av[t, c] * Pv[t, c]
        pv[c] = s
    ga = 0.0
    gv = 0.0
    for c in range(C):
        ga += pa[c] * th[o.matt_w + c]
        gv += pv[c] * th[o.matt_w + c]
    mx = dmax(ga, gv)
    ea = exp(ga - mx)
    ev = exp(gv - mx)
    ua = ea / (ea + ev)
    uv = ev / (ea + ev)
    for c in range(C):
        pu[c] = ua * pa[c] + uv * pv[c]
    ua_out[0] = ua
    uv_out[0] = uv


cdef double loss_terms(const double[:, ::1] Pv,
                       const double[::1] pa, const double[::1] pv, const double[::1] pu,
                       const double[::1] y_union, const double[::1] y_a, const double[::1] y_v,
                       const double[::1] cr, const double[::1] sr, double denom,
                       double lam, double eps,
                       double[::1] pcr_raw, double[::1] psr) noexcept nogil:
    cdef Py_ssize_t T = Pv.shape[0], C = Pv.shape[1]
    cdef Py_ssize_t t, c
    cdef double lv = 0.0, ls = 0.0, s, clipped
    for c in range(C):
        lv += bce1(pu[c], y_union[c], eps) + bce1(pa[c], y_a[c], eps) + bce1(pv[c], y_v[c], eps)
    lv /= C
    for t in range(T):
        s = 0.0
        for c in range(C):
            s += Pv[t, c]
        pcr_raw[t] = s / denom
        clipped = pcr_raw[t] if pcr_raw[t] < 1.0 else 1.0
        ls += bce1(clipped, cr[t], eps)
    ls /= T
    s = 0.0
    for c in range(C):
        psr[c] = 0.0
        for t in range(T):
            psr[c] += Pv[t, c]
        psr[c] /= T
        clipped = psr[c] if psr[c] < 1.0 else 1.0
        s += bce1(clipped, sr[c], eps)
    ls += s / C
    return lv + lam * ls


cdef class _Buffers:
    """Per-call scratch; one allocation batch, memoryviews everywhere."""

    cdef double[:, ::1] Fa, Fv, Fad, Fvd, Za, Zv, Pa, Pv, Aa, Av
    cdef double[:, :, ::1] Qs, Ks, Vs, Hs, Ss
    cdef double[:, :, :, ::1] As
    cdef double[::1] pa, pv, pu, pcr, psr
    cdef object Pa_np, Pv_np, pa_np, pv_np, pu_np

    def __cinit__(self, Py_ssize_t T, Py_ssize_t d, Py_ssize_t h, Py_ssize_t C):
        self.Fa = np.empty((T, d)); self.Fv = np.empty((T, d))
        self.Fad = np.empty((T, d)); self.Fvd = np.empty((T, d))
        self.Qs = np.empty((4, T, d)); self.Ks = np.empty((4, T, d))
        self.Vs = np.empty((4, T, d)); self.Hs = np.empty((4, T, d))
        self.Ss = np.empty((4, T, d)); self.As = np.empty((4, h, T, T))
        self.Za = np.empty((T, C)); self.Zv = np.empty((T, C))
        self.Pa_np = np.empty((T, C)); self.Pv_np = np.empty((T, C))
        self.Pa = self.Pa_np; self.Pv = self.Pv_np
        self.Aa = np.empty((T, C)); self.Av = np.empty((T, C))
        self.pa_np = np.empty(C); self.pv_np = np.empty(C); self.pu_np = np.empty(C)
        self.pa = self.pa_np; self.pv = self.pv_np; self.pu = self.pu_np
        self.pcr = np.empty(T); self.psr = np.empty(C)


cdef inline _prep(theta, dims, audio, visual):
    A_np = np.ascontiguousarray(audio, dtype=np.float64)
    V_np = np.ascontiguousarray(visual, dtype=np.float64)
    th_np = np.ascontiguousarray(theta, dtype=np.float64)
    return th_np, A_np, V_np


def forward(theta, dims, audio, visual):
    """Full forward pass: (P_a, P_v, P_av, p_a, p_v, p_union)."""
    cdef Py_ssize_t da = dims.d_audio_in, dvis = dims.d_visual_in
    cdef Py_ssize_t d = dims.d_model, h = dims.n_heads, C = dims.n_classes
    th_np, A_np, V_np = _prep(theta, dims, audio, visual)
    cdef Py_ssize_t T = A_np.shape[0]
    cdef NetOffs o = make_offs(da, dvis, d, C)
    if th_np.shape[0] != o.total:
        raise ValueError(f"parameter vector has {th_np.shape[0]} entries, layout needs {o.total}")
    cdef _Buffers b = _Buffers(T, d, h, C)
    cdef const double[::1] th = th_np
    cdef const double[:, ::1] Amv = A_np, Vmv = V_np
    cdef double ua = 0.0, uv = 0.0
    with nogil:
        encode(th, &o, Amv, Vmv, b.Fa, b.Fv, b.Fad, b.Fvd, b.Qs, b.Ks, b.Vs, b.As, b.Hs, b.Ss, h)
        heads_and_pool(th, &o, b.Fad, b.Fvd, b.Za, b.Zv, b.Pa, b.Pv, b.Aa, b.Av,
                       b.pa, b.pv, b.pu, &ua, &uv)
    return b.Pa_np, b.Pv_np, b.Pa_np * b.Pv_np, b.pa_np, b.pv_np, b.pu_np


def loss_value(theta, dims, audio, visual, targets, double lam, double eps):
    """Scalar training objective for one video."""
    cdef Py_ssize_t da = dims.d_audio_in, dvis = dims.d_visual_in
    cdef Py_ssize_t d = dims.d_model, h = dims.n_heads, C = dims.n_classes
    y_union_np, y_a_np, y_v_np, cr_np, sr_np, denom = targets
    th_np, A_np, V_np = _prep(theta, dims, audio, visual)
    cdef Py_ssize_t T = A_np.shape[0]
    cdef NetOffs o = make_offs(da, dvis, d, C)
    if th_np.shape[0] != o.total:
        raise ValueError(f"parameter vector has {th_np.shape[0]} entries, layout needs {o.total}")
    cdef _Buffers b = _Buffers(T, d, h, C)
    cdef const double[::1] th = th_np
    cdef const double[:, ::1] Amv = A_np, Vmv = V_np
    cdef const double[::1] yu = np.ascontiguousarray(y_union_np, dtype=np.float64)
    cdef const double[::1] ya = np.ascontiguousarray(y_a_np, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y_v_np, dtype=np.float64)
    cdef const double[::1] crv = np.ascontiguousarray(cr_np, dtype=np.float64)
    cdef const double[::1] srv = np.ascontiguousarray(sr_np, dtype=np.float64)
    cdef double dn = denom, ua = 0.0, uv = 0.0, loss
    with nogil:
        encode(th, &o, Amv, Vmv, b.Fa, b.Fv, b.Fad, b.Fvd, b.Qs, b.Ks, b.Vs, b.As, b.Hs, b.Ss, h)
        heads_and_pool(th, &o, b.Fad, b.Fvd, b.Za, b.Zv, b.Pa, b.Pv, b.Aa, b.Av,
                       b.pa, b.pv, b.pu, &ua, &uv)
        loss = loss_terms(b.Pv, b.pa, b.pv, b.pu, yu, ya, yv, crv, srv, dn, lam, eps, b.pcr, b.psr)
    return loss


def loss_grad(theta, dims, audio, visual, targets, double lam, double eps):
    """Objective and its gradient with respect to the flat parameter vector."""
    cdef Py_ssize_t da = dims.d_audio_in, dvis = dims.d_visual_in
    cdef Py_ssize_t d = dims.d_model, h = dims.n_heads, C = dims.n_classes
    y_union_np, y_a_np, y_v_np, cr_np, sr_np, denom = targets
    th_np, A_np, V_np = _prep(theta, dims, audio, visual)
    cdef Py_ssize_t T = A_np.shape[0]
    cdef NetOffs o = make_offs(da, dvis, d, C)
    if th_np.shape[0] != o.total:
        raise ValueError(f"parameter vector has {th_np.shape[0]} entries, layout needs {o.total}")
    cdef _Buffers b = _Buffers(T, d, h, C)
    grad_np = np.zeros_like(th_np)

    cdef const double[::1] th = th_np
    cdef const double[:, ::1] Amv = A_np, Vmv = V_np
    cdef const double[::1] yu = np.ascontiguousarray(y_union_np, dtype=np.float64)
    cdef const double[::1] ya = np.ascontiguousarray(y_a_np, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y_v_np, dtype=np.float64)
    cdef const double[::1] crv = np.ascontiguousarray(cr_np, dtype=np.float64)
    cdef const double[::1] srv = np.ascontiguousarray(sr_np, dtype=np.float64)
    cdef double[::1] g = grad_np
    cdef double[:, ::1] dFa = np.empty((T, d)), dFv = np.empty((T, d))
    cdef double[:, ::1] dFad = np.empty((T, d)), dFvd = np.empty((T, d))
    cdef double[:, ::1] dPa = np.empty((T, C)), dPv = np.empty((T, C))
    cdef double[:, ::1] dZa = np.empty((T, C)), dZv = np.empty((T, C))
    cdef double[:, ::1] dAa = np.empty((T, C)), dAv = np.empty((T, C))
    cdef double[:, ::1] dEa = np.empty((T, C)), dEv = np.empty((T, C))
    cdef double[::1] dpa = np.empty(C), dpv = np.empty(C), dpu = np.empty(C)
    cdef double[:, ::1] dH = np.empty((T, d)), dQ = np.empty((T, d))
    cdef double[:, ::1] dK = np.empty((T, d)), dV = np.empty((T, d)), dS = np.empty((T, T))

    cdef double dn = denom, ua = 0.0, uv = 0.0, loss
    cdef Py_ssize_t t, c, j
    cdef double d_ua, d_uv, d_ga, dot, tmp, wmc

    with nogil:
        encode(th, &o, Amv, Vmv, b.Fa, b.Fv, b.Fad, b.Fvd, b.Qs, b.Ks, b.Vs, b.As, b.Hs, b.Ss, h)
        heads_and_pool(th, &o, b.Fad, b.Fvd, b.Za, b.Zv, b.Pa, b.Pv, b.Aa, b.Av,
                       b.pa, b.pv, b.pu, &ua, &uv)
        loss = loss_terms(b.Pv, b.pa, b.pv, b.pu, yu, ya, yv, crv, srv, dn, lam, eps, b.pcr, b.psr)

        # video-level and modality-attention gradients
        for c in range(C):
            dpu[c] = bgrad1(b.pu[c], yu[c], eps) / C
            dpa[c] = bgrad1(b.pa[c], ya[c], eps) / C
            dpv[c] = bgrad1(b.pv[c], yv[c], eps) / C
        d_ua = 0.0
        d_uv = 0.0
        for c in range(C):
            d_ua += dpu[c] * b.pa[c]
            d_uv += dpu[c] * b.pv[c]
        d_ga = (d_ua - d_uv) * ua * uv
        for c in range(C):
            wmc = th[o.matt_w + c]
            dpa[c] += dpu[c] * ua + d_ga * wmc
            dpv[c] += dpu[c] * uv - d_ga * wmc
            g[o.matt_w + c] += d_ga * (b.pa[c] - b.pv[c])

        # temporal pooling and richness-alignment gradients
        for t in range(T):
            for c in range(C):
                dPa[t, c] = dpa[c] * b.Aa[t, c]
                dAa[t, c] = dpa[c] * b.Pa[t, c]
                dPv[t, c] = dpv[c] * b.Av[t, c]
                dAv[t, c] = dpv[c] * b.Pv[t, c]
        for t in range(T):
            if b.pcr[t] < 1.0:
                tmp = lam * bgrad1(b.pcr[t], crv[t], eps) / (T * dn)
            else:
                tmp = 0.0
            for c in range(C):
                dPv[t, c] += tmp
        for c in range(C):
            if b.psr[c] < 1.0:
                tmp = lam * bgrad1(b.psr[c], srv[c], eps) / (C * T)
            else:
                tmp = 0.0
            for t in range(T):
                dPv[t, c] += tmp

        # sigmoid and temporal-softmax backward
        for t in range(T):
            for c in range(C):
                dZa[t, c] = dPa[t, c] * b.Pa[t, c] * (1.0 - b.Pa[t, c])
                dZv[t, c] = dPv[t, c] * b.Pv[t, c] * (1.0 - b.Pv[t, c])
        for c in range(C):
            dot = 0.0
            for t in range(T):
                dot += dAa[t, c] * b.Aa[t, c]
            for t in range(T):
                dEa[t, c] = b.Aa[t, c] * (dAa[t, c] - dot)
            dot = 0.0
            for t in range(T):
                dot += dAv[t, c] * b.Av[t, c]
            for t in range(T):
                dEv[t, c] = b.Av[t, c] * (dAv[t, c] - dot)

        lin_bwd_params(g, o.cls_w, o.cls_b, b.Fad, dZa)
        lin_bwd_params(g, o.cls_w, o.cls_b, b.Fvd, dZv)
        lin_bwd_params(g, o.tatt_w, -1, b.Fad, dEa)
        lin_bwd_params(g, o.tatt_w, -1, b.Fvd, dEv)
        lin_bwd_input(th, o.cls_w, dZa, dFad, False)
        lin_bwd_input(th, o.tatt_w, dEa, dFad, True)
        lin_bwd_input(th, o.cls_w, dZv, dFvd, False)
        lin_bwd_input(th, o.tatt_w, dEv, dFvd, True)

        # residual paths, then the four attention blocks
        for t in range(T):
            for j in range(d):
                dFa[t, j] = dFad[t, j]
                dFv[t, j] = dFvd[t, j]
        mha_bwd(th, o.att[0], b.Fa, b.Fa, b.Qs[0], b.Ks[0], b.Vs[0], b.As[0],
                b.Hs[0], dFad, g, dFa, dFa, dH, dQ, dK, dV, dS, h)
        mha_bwd(th, o.att[1], b.Fa, b.Fv, b.Qs[1], b.Ks[1], b.Vs[1], b.As[1],
                b.Hs[1], dFad, g, dFa, dFv, dH, dQ, dK, dV, dS, h)
        mha_bwd(th, o.att[2], b.Fv, b.Fv, b.Qs[2], b.Ks[2], b.Vs[2], b.As[2],
                b.Hs[2], dFvd, g, dFv, dFv, dH, dQ, dK, dV, dS, h)
        mha_bwd(th, o.att[3], b.Fv, b.Fa, b.Qs[3], b.Ks[3], b.Vs[3], b.As[3],
                b.Hs[3], dFvd, g, dFv, dFa, dH, dQ, dK, dV, dS, h)

        lin_bwd_params(g, o.proj_a_w, o.proj_a_b, Amv, dFa)
        lin_bwd_params(g, o.proj_v_w, o.proj_v_b, Vmv, dFv)
    return loss, grad_np
