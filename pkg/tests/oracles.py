"""Naive reference implementations used as independent test oracles.

Everything here is written with explicit Python loops over indices and
``math`` scalars, deliberately sharing no code with the package.
"""

from __future__ import annotations

import math


def scale_mask_predicate(a: int, b: int, scale: int) -> int:
    """1 iff (a - b) / scale is an integer."""
    q = (a - b) / scale
    return int(float(q).is_integer())


def brute_scale_masks(length: int, n: int) -> list[list[list[int]]]:
    return [[[scale_mask_predicate(a, b, i) for b in range(length)] for a in range(length)]
            for i in range(1, n + 1)]


def brute_observation(seqmask, scale_mask) -> tuple[list[list[int]], list[int]]:
    length = len(seqmask)
    cells = [[int(seqmask[l]) * int(scale_mask[j][l]) for l in range(length)] for j in range(length)]
    inc = [sum(cells[j][l] for l in range(length)) for j in range(length)]
    return cells, inc


def softmax_list(values, mask=None) -> list[float]:
    keep = [True] * len(values) if mask is None else [bool(m) for m in mask]
    top = max(v for v, k in zip(values, keep) if k)
    ex = [math.exp(v - top) if k else 0.0 for v, k in zip(values, keep)]
    total = sum(ex)
    return [e / total for e in ex]


def dot(u, v) -> float:
    return sum(a * b for a, b in zip(u, v))


def vec_mat(x, w, b=None) -> list[float]:
    """Row vector times (d_in, d_out) weight, plus bias."""
    d_in, d_out = len(w), len(w[0])
    out = [sum(x[i] * w[i][o] for i in range(d_in)) for o in range(d_out)]
    if b is not None:
        out = [o + bb for o, bb in zip(out, b)]
    return out


def loop_scale_attention(q, k, v, mask) -> tuple[list[list[float]], list[list[float]]]:
    length, dk = len(q), len(q[0])
    weights, out = [], []
    for j in range(length):
        logits = [dot(q[j], k[l]) / math.sqrt(dk) for l in range(length)]
        w = softmax_list(logits, mask[j])
        weights.append(w)
        out.append([sum(w[l] * v[l][d] for l in range(length)) for d in range(len(v[0]))])
    return out, weights


def loop_continuity(weights, rep) -> list[float]:
    return [sum(weights[t] * rep[t][d] for t in range(len(rep))) for d in range(len(rep[0]))]


def loop_fusion(rc, rm, wq, bq, wk, wv, bv, wo, bo, scale: str = "dk") -> list[float]:
    """Continuity queries over every (scale, step) token, mean over scales, projection."""
    n, length = len(rm), len(rm[0])
    tokens = [rm[i][t] for i in range(n) for t in range(length)]
    keys = [vec_mat(tok, wk) for tok in tokens]
    values = [vec_mat(tok, wv, bv) for tok in tokens]
    d_k = len(wq[0])
    div = d_k if scale == "dk" else math.sqrt(d_k)
    fused = []
    for i in range(n):
        query = vec_mat(rc[i], wq, bq)
        w = softmax_list([dot(query, key) / div for key in keys])
        fused.append([sum(w[t] * values[t][d] for t in range(len(tokens))) for d in range(d_k)])
    pooled = [sum(fused[i][d] for i in range(n)) / n for d in range(d_k)]
    return vec_mat(pooled, wo, bo)


def loop_layer_norm(x, gain, bias, eps=1e-5) -> list[float]:
    mu = sum(x) / len(x)
    var = sum((a - mu) ** 2 for a in x) / len(x)
    return [g * (a - mu) / math.sqrt(var + eps) + b for a, g, b in zip(x, gain, bias)]


def loop_mlp(x, layers) -> list[float]:
    h = list(x)
    for idx, (w, b) in enumerate(layers):
        h = vec_mat(h, w, b)
        if idx < len(layers) - 1:
            h = [max(0.0, a) for a in h]
    return h


def loop_positional(length: int, d: int) -> list[list[float]]:
    table = []
    for pos in range(length):
        row = []
        for i in range(d):
            angle = pos / (10000.0 ** ((2 * (i // 2)) / d))
            row.append(math.sin(angle) if i % 2 == 0 else math.cos(angle))
        table.append(row)
    return table


def loop_encoder(traj, P, length, n, layers, d, scales, positional=True, heads_only_last=True,
                 prefix="encoder"):
    """Reference encoder on one (len, 2) sequence; ``P`` maps names to nested lists.

    Returns (per-head outputs of the last layer [n][len][dk], final hidden or None).
    """
    dk = d // n
    emb = [(P[f"{prefix}.embed.0.W"], P[f"{prefix}.embed.0.b"]),
           (P[f"{prefix}.embed.1.W"], P[f"{prefix}.embed.1.b"])]
    pos = loop_positional(length, d)
    h = []
    for t in range(length):
        row = loop_mlp(traj[t], emb)
        if positional:
            row = [a + p for a, p in zip(row, pos[t])]
        h.append(row)
    heads = None
    for layer in range(layers):
        p = f"{prefix}.layer{layer}"
        q = [vec_mat(r, P[f"{p}.attn.q.W"], P[f"{p}.attn.q.b"]) for r in h]
        k = [vec_mat(r, P[f"{p}.attn.k.W"]) for r in h]
        v = [vec_mat(r, P[f"{p}.attn.v.W"], P[f"{p}.attn.v.b"]) for r in h]
        heads = []
        for i in range(n):
            sl = slice(i * dk, (i + 1) * dk)
            mask = [[scale_mask_predicate(a, b, scales[i]) for b in range(length)] for a in range(length)]
            out, _ = loop_scale_attention([r[sl] for r in q], [r[sl] for r in k], [r[sl] for r in v], mask)
            heads.append(out)
        if layer == layers - 1 and heads_only_last:
            return heads, None
        merged = [[heads[i][t][c] for i in range(n) for c in range(dk)] for t in range(length)]
        attn = [vec_mat(r, P[f"{p}.attn.out.W"], P[f"{p}.attn.out.b"]) for r in merged]
        h = [loop_layer_norm([a + b for a, b in zip(h[t], attn[t])], P[f"{p}.norm1.gain"], P[f"{p}.norm1.bias"])
             for t in range(length)]
        ffn = [(P[f"{p}.ffn.0.W"], P[f"{p}.ffn.0.b"]), (P[f"{p}.ffn.1.W"], P[f"{p}.ffn.1.b"])]
        ff = [loop_mlp(r, ffn) for r in h]
        h = [loop_layer_norm([a + b for a, b in zip(h[t], ff[t])], P[f"{p}.norm2.gain"], P[f"{p}.norm2.bias"])
             for t in range(length)]
    return heads, h


def loop_interaction(features, gw, gb, w, real=None) -> tuple[list[list[float]], list[list[float]]]:
    count = len(features)
    real = real or [1] * count
    g = [vec_mat(e, gw, gb) for e in features]
    we = [vec_mat(e, w) for e in features]
    alphas, outs = [], []
    for i in range(count):
        a = softmax_list([dot(g[i], g[j]) for j in range(count)], real)
        alphas.append(a)
        outs.append([max(0.0, sum(a[j] * we[j][d] for j in range(count))) for d in range(len(we[0]))])
    return alphas, outs


def _sig(x):
    return 0.5 * (1.0 + math.tanh(0.5 * x))


def loop_decoder(v, t_f, P, scale=1.0, prefix="decoder") -> list[list[float]]:
    h = vec_mat(v, P[f"{prefix}.init_h.W"], P[f"{prefix}.init_h.b"])
    c = vec_mat(v, P[f"{prefix}.init_c.W"], P[f"{prefix}.init_c.b"])
    H = len(h)
    x = [0.0, 0.0]
    pos = [0.0, 0.0]
    traj = []
    for _ in range(t_f):
        zx = vec_mat(x, P[f"{prefix}.x.W"], P[f"{prefix}.x.b"])
        zh = vec_mat(h, P[f"{prefix}.h.W"])
        z = [a + b for a, b in zip(zx, zh)]
        i = [_sig(a) for a in z[:H]]
        f = [_sig(a) for a in z[H:2 * H]]
        g = [math.tanh(a) for a in z[2 * H:3 * H]]
        o = [_sig(a) for a in z[3 * H:]]
        c = [ff * cc + ii * gg for ff, cc, ii, gg in zip(f, c, i, g)]
        h = [oo * math.tanh(cc) for oo, cc in zip(o, c)]
        x = vec_mat(h, P[f"{prefix}.head.W"], P[f"{prefix}.head.b"])
        pos = [pos[0] + x[0], pos[1] + x[1]]
        traj.append([pos[0] * scale, pos[1] * scale])
    return traj


def loop_metrics(preds, truths, steps, threshold=2.0) -> dict:
    m, t_f = len(preds), len(preds[0])
    dist = [[math.hypot(preds[i][t][0] - truths[i][t][0], preds[i][t][1] - truths[i][t][1])
             for t in range(t_f)] for i in range(m)]
    rmse = {}
    for s in steps:
        rmse[s] = math.sqrt(sum(dist[i][s] ** 2 for i in range(m)) / m)
    ade = sum(sum(row) for row in dist) / (m * t_f)
    fde = sum(row[-1] for row in dist) / m
    mr = sum(1 for row in dist if row[-1] > threshold) / m
    return {"rmse": rmse, "ade": ade, "fde": fde, "mr": mr}


def finite_difference(f, x, step=1e-6):
    """Central differences of scalar ``f`` w.r.t. every element of the numpy array ``x`` (in place)."""
    import numpy as np

    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + step
        fp = f()
        x[idx] = orig - step
        fm = f()
        x[idx] = orig
        grad[idx] = (fp - fm) / (2 * step)
    return grad
