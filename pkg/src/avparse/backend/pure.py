"""Reference numpy implementation of the network kernels.

The compiled extension mirrors these functions loop for loop; this module is
the fallback when the extension is unavailable and the ground truth the
extension is tested against.  Everything is float64 and allocation order is
fixed, so repeated calls are bitwise reproducible.
"""

from __future__ import annotations

import numpy as np

from .layout import ATTENTION_BLOCKS, NetDims, views


def _softmax_last(x):
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _softmax_cols(x):
    shifted = x - x.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _heads(x, h):
    T, d = x.shape
    return x.reshape(T, h, d // h).transpose(1, 0, 2)


def _unheads(x):
    h, T, dk = x.shape
    return x.transpose(1, 0, 2).reshape(T, h * dk)


def _mha_forward(p, blk, X, Y, h):
    """Multi-head attention with X as queries and Y as keys/values."""
    dk = X.shape[1] // h
    Q = X @ p[f"{blk}_wq"] + p[f"{blk}_bq"]
    K = Y @ p[f"{blk}_wk"] + p[f"{blk}_bk"]
    V = Y @ p[f"{blk}_wv"] + p[f"{blk}_bv"]
    Qh, Kh, Vh = _heads(Q, h), _heads(K, h), _heads(V, h)
    A = _softmax_last(Qh @ Kh.transpose(0, 2, 1) / np.sqrt(dk))
    Hcat = _unheads(A @ Vh)
    out = Hcat @ p[f"{blk}_wo"] + p[f"{blk}_bo"]
    cache = (Qh, Kh, Vh, A, Hcat)
    return out, cache


def _mha_backward(p, g, blk, X, Y, h, d_out, cache):
    """Accumulates parameter gradients into g; returns (dX, dY)."""
    Qh, Kh, Vh, A, Hcat = cache
    dk = X.shape[1] // h
    g[f"{blk}_wo"] += Hcat.T @ d_out
    g[f"{blk}_bo"] += d_out.sum(axis=0)
    dH = _heads(d_out @ p[f"{blk}_wo"].T, h)
    dA = dH @ Vh.transpose(0, 2, 1)
    dVh = A.transpose(0, 2, 1) @ dH
    dS = A * (dA - (dA * A).sum(axis=-1, keepdims=True))
    dQh = dS @ Kh / np.sqrt(dk)
    dKh = dS.transpose(0, 2, 1) @ Qh / np.sqrt(dk)
    dQ, dK, dV = _unheads(dQh), _unheads(dKh), _unheads(dVh)
    g[f"{blk}_wq"] += X.T @ dQ
    g[f"{blk}_bq"] += dQ.sum(axis=0)
    g[f"{blk}_wk"] += Y.T @ dK
    g[f"{blk}_bk"] += dK.sum(axis=0)
    g[f"{blk}_wv"] += Y.T @ dV
    g[f"{blk}_bv"] += dV.sum(axis=0)
    dX = dQ @ p[f"{blk}_wq"].T
    dY = dK @ p[f"{blk}_wk"].T + dV @ p[f"{blk}_wv"].T
    return dX, dY


def _forward_parts(theta, dims: NetDims, audio, visual):
    p = views(theta, dims)
    h = dims.n_heads
    Fa = audio @ p["proj_a_w"] + p["proj_a_b"]
    Fv = visual @ p["proj_v_w"] + p["proj_v_b"]
    Saa, c_aa = _mha_forward(p, "att_aa", Fa, Fa, h)
    Sav, c_av = _mha_forward(p, "att_av", Fa, Fv, h)
    Svv, c_vv = _mha_forward(p, "att_vv", Fv, Fv, h)
    Sva, c_va = _mha_forward(p, "att_va", Fv, Fa, h)
    Fa_dot = Fa + Saa + Sav
    Fv_dot = Fv + Svv + Sva
    Za = Fa_dot @ p["cls_w"] + p["cls_b"]
    Zv = Fv_dot @ p["cls_w"] + p["cls_b"]
    Pa = _sigmoid(Za)
    Pv = _sigmoid(Zv)
    Aa = _softmax_cols(Fa_dot @ p["tatt_w"])
    Av = _softmax_cols(Fv_dot @ p["tatt_w"])
    pa = (Aa * Pa).sum(axis=0)
    pv = (Av * Pv).sum(axis=0)
    ga = float(pa @ p["matt_w"])
    gv = float(pv @ p["matt_w"])
    m = max(ga, gv)
    ea, ev = np.exp(ga - m), np.exp(gv - m)
    ua = ea / (ea + ev)
    uv = ev / (ea + ev)
    pu = ua * pa + uv * pv
    return {
        "p": p, "Fa": Fa, "Fv": Fv, "Fa_dot": Fa_dot, "Fv_dot": Fv_dot,
        "caches": {"att_aa": c_aa, "att_av": c_av, "att_vv": c_vv, "att_va": c_va},
        "Pa": Pa, "Pv": Pv, "Aa": Aa, "Av": Av,
        "pa": pa, "pv": pv, "ua": ua, "uv": uv, "pu": pu,
    }


def forward(theta, dims: NetDims, audio, visual):
    """Full forward pass: (P_a, P_v, P_av, p_a, p_v, p_union)."""
    f = _forward_parts(theta, dims, audio, visual)
    return f["Pa"], f["Pv"], f["Pa"] * f["Pv"], f["pa"], f["pv"], f["pu"]


def _bce_vec(p, y, eps):
    return -(y * np.log(np.maximum(p, eps)) + (1.0 - y) * np.log(np.maximum(1.0 - p, eps)))


def _bce_grad(p, y, eps):
    g = np.where(p > eps, -y / np.maximum(p, eps), 0.0)
    g += np.where(1.0 - p > eps, (1.0 - y) / np.maximum(1.0 - p, eps), 0.0)
    return g


def _loss_from_parts(f, targets, lam, eps):
    y_union, y_a, y_v, cr, sr, denom = targets
    T, C = f["Pv"].shape
    lv = (
        _bce_vec(f["pu"], y_union, eps).mean()
        + _bce_vec(f["pa"], y_a, eps).mean()
        + _bce_vec(f["pv"], y_v, eps).mean()
    )
    pcr_raw = f["Pv"].sum(axis=1) / denom
    pcr = np.minimum(pcr_raw, 1.0)
    psr = f["Pv"].sum(axis=0) / T
    ls = _bce_vec(pcr, cr, eps).mean() + _bce_vec(psr, sr, eps).mean()
    return float(lv + lam * ls), pcr_raw, psr


def loss_value(theta, dims: NetDims, audio, visual, targets, lam, eps):
    f = _forward_parts(theta, dims, audio, visual)
    return _loss_from_parts(f, targets, lam, eps)[0]


def loss_grad(theta, dims: NetDims, audio, visual, targets, lam, eps):
    """Total loss and its gradient with respect to every parameter."""
    f = _forward_parts(theta, dims, audio, visual)
    y_union, y_a, y_v, cr, sr, denom = targets
    T, C = f["Pv"].shape
    h = dims.n_heads
    p = f["p"]
    loss, pcr_raw, psr = _loss_from_parts(f, targets, lam, eps)

    grad = np.zeros_like(theta)
    g = views(grad, dims)

    d_pu = _bce_grad(f["pu"], y_union, eps) / C
    d_pa = _bce_grad(f["pa"], y_a, eps) / C
    d_pv = _bce_grad(f["pv"], y_v, eps) / C

    # modality attention
    d_ua = float(d_pu @ f["pa"])
    d_uv = float(d_pu @ f["pv"])
    d_ga = (d_ua - d_uv) * f["ua"] * f["uv"]
    d_pa = d_pa + d_pu * f["ua"] + d_ga * p["matt_w"]
    d_pv = d_pv + d_pu * f["uv"] - d_ga * p["matt_w"]
    g["matt_w"] += d_ga * (f["pa"] - f["pv"])

    # temporal pooling
    dPa = d_pa[None, :] * f["Aa"]
    dAa = d_pa[None, :] * f["Pa"]
    dPv = d_pv[None, :] * f["Av"]
    dAv = d_pv[None, :] * f["Pv"]

    # richness alignment terms act on the visual segment matrix alone
    d_pcr = _bce_grad(np.minimum(pcr_raw, 1.0), cr, eps) * (pcr_raw < 1.0)
    d_psr = _bce_grad(psr, sr, eps) * (psr < 1.0)
    dPv = dPv + lam * ((d_pcr / (T * denom))[:, None] + (d_psr / (C * T))[None, :])

    dZa = dPa * f["Pa"] * (1.0 - f["Pa"])
    dZv = dPv * f["Pv"] * (1.0 - f["Pv"])
    dEa = f["Aa"] * (dAa - (dAa * f["Aa"]).sum(axis=0, keepdims=True))
    dEv = f["Av"] * (dAv - (dAv * f["Av"]).sum(axis=0, keepdims=True))

    g["cls_w"] += f["Fa_dot"].T @ dZa + f["Fv_dot"].T @ dZv
    g["cls_b"] += dZa.sum(axis=0) + dZv.sum(axis=0)
    g["tatt_w"] += f["Fa_dot"].T @ dEa + f["Fv_dot"].T @ dEv

    dFa_dot = dZa @ p["cls_w"].T + dEa @ p["tatt_w"].T
    dFv_dot = dZv @ p["cls_w"].T + dEv @ p["tatt_w"].T

    dFa = dFa_dot.copy()
    dFv = dFv_dot.copy()
    dX, dY = _mha_backward(p, g, "att_aa", f["Fa"], f["Fa"], h, dFa_dot, f["caches"]["att_aa"])
    dFa += dX + dY
    dX, dY = _mha_backward(p, g, "att_av", f["Fa"], f["Fv"], h, dFa_dot, f["caches"]["att_av"])
    dFa += dX
    dFv += dY
    dX, dY = _mha_backward(p, g, "att_vv", f["Fv"], f["Fv"], h, dFv_dot, f["caches"]["att_vv"])
    dFv += dX + dY
    dX, dY = _mha_backward(p, g, "att_va", f["Fv"], f["Fa"], h, dFv_dot, f["caches"]["att_va"])
    dFv += dX
    dFa += dY

    g["proj_a_w"] += audio.T @ dFa
    g["proj_a_b"] += dFa.sum(axis=0)
    g["proj_v_w"] += visual.T @ dFv
    g["proj_v_b"] += dFv.sum(axis=0)
    return loss, grad
