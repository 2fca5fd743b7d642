"""Compiled inner loops for the two training passes.

Both kernels walk samples sequentially over flattened parameter buffers; the
caller packs per-field matrices into 1-D arrays and unpacks them afterwards.
Gradients for one optimization step are always computed against the
parameter values used in that step's forward pass, and updates are applied
per parameter afterwards, so results are independent of update ordering.

Loops are deliberately single-threaded: determinism for a given sample order
matters more here than parallel speed.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_LOSS_EPS = 1e-12


@njit(cache=True)
def train_epoch_kernel(
    feats,
    labels,
    order,
    emb,
    acc,
    freq,
    comp_base,
    row_base,
    l_arr,
    dim_off,
    dense,
    dacc,
    bias_state,
    lr,
    eps,
):
    """Per-sample stochastic Adagrad pass over an uncompressed model.

    Returns the summed (clamped) log loss of the online predictions.
    """
    J = l_arr.size
    D = dense.size
    buf = np.zeros(D, dtype=np.float64)
    loss_sum = 0.0
    bias = bias_state[0]
    bacc = bias_state[1]

    for t in range(order.size):
        s = order[t]
        logit = bias
        for j in range(J):
            f = feats[s, j]
            o = dim_off[j]
            l = l_arr[j]
            if f < 0:
                for d in range(l):
                    buf[o + d] = 0.0
            else:
                base = comp_base[j] + f * l
                for d in range(l):
                    v = emb[base + d]
                    buf[o + d] = v
                    logit += dense[o + d] * v
        p = 1.0 / (1.0 + math.exp(-logit))
        y = labels[s]
        g = p - y
        pc = min(max(p, _LOSS_EPS), 1.0 - _LOSS_EPS)
        loss_sum += -(y * math.log(pc) + (1.0 - y) * math.log(1.0 - pc))

        # embedding rows first: their gradient reads dense pre-update
        for j in range(J):
            f = feats[s, j]
            if f < 0:
                continue
            freq[row_base[j] + f] += 1
            o = dim_off[j]
            l = l_arr[j]
            base = comp_base[j] + f * l
            for d in range(l):
                ge = g * dense[o + d]
                a = acc[base + d] + ge * ge
                acc[base + d] = a
                emb[base + d] -= lr * ge / (math.sqrt(a) + eps)
        for i in range(D):
            gd = g * buf[i]
            a = dacc[i] + gd * gd
            dacc[i] = a
            dense[i] -= lr * gd / (math.sqrt(a) + eps)
        bacc += g * g
        bias -= lr * g / (math.sqrt(bacc) + eps)

    bias_state[0] = bias
    bias_state[1] = bacc
    return loss_sum


@njit(cache=True)
def retrain_epoch_kernel(
    feats,
    labels,
    order,
    comp_flag,
    masks_flat,
    mask_base,
    cent,
    cacc,
    cent_base,
    clus_base,
    emb,
    acc,
    pcomp_base,
    prow_base,
    l_arr,
    dim_off,
    dense,
    dacc,
    bias_state,
    lr,
    eps,
    batch_size,
    gsum_cent,
    cnt_cent,
    gsum_row,
    cnt_row,
    tc_field,
    tc_cluster,
    tr_field,
    tr_row,
    dense_g,
):
    """Minibatch Adagrad pass over a compressed model.

    Per step, gradients of features sharing a cluster are averaged into one
    representative-vector gradient; passthrough rows and dense weights
    receive the summed per-occurrence gradients of the step. Masks are never
    modified.
    """
    J = l_arr.size
    D = dense.size
    buf = np.zeros(D, dtype=np.float64)
    loss_sum = 0.0
    bias = bias_state[0]
    bacc = bias_state[1]

    T = order.size
    step_start = 0
    while step_start < T:
        step_end = min(step_start + batch_size, T)
        ntc = 0
        ntr = 0
        bias_g = 0.0
        for i in range(D):
            dense_g[i] = 0.0

        for t in range(step_start, step_end):
            s = order[t]
            logit = bias
            for j in range(J):
                f = feats[s, j]
                o = dim_off[j]
                l = l_arr[j]
                if f < 0:
                    for d in range(l):
                        buf[o + d] = 0.0
                elif comp_flag[j]:
                    c = masks_flat[mask_base[j] + f]
                    base = cent_base[j] + c * l
                    for d in range(l):
                        v = cent[base + d]
                        buf[o + d] = v
                        logit += dense[o + d] * v
                else:
                    base = pcomp_base[j] + f * l
                    for d in range(l):
                        v = emb[base + d]
                        buf[o + d] = v
                        logit += dense[o + d] * v
            p = 1.0 / (1.0 + math.exp(-logit))
            y = labels[s]
            g = p - y
            pc = min(max(p, _LOSS_EPS), 1.0 - _LOSS_EPS)
            loss_sum += -(y * math.log(pc) + (1.0 - y) * math.log(1.0 - pc))

            for j in range(J):
                f = feats[s, j]
                if f < 0:
                    continue
                o = dim_off[j]
                l = l_arr[j]
                if comp_flag[j]:
                    c = masks_flat[mask_base[j] + f]
                    ci = clus_base[j] + c
                    if cnt_cent[ci] == 0:
                        tc_field[ntc] = j
                        tc_cluster[ntc] = c
                        ntc += 1
                    cnt_cent[ci] += 1
                    base = cent_base[j] + c * l
                    for d in range(l):
                        gsum_cent[base + d] += g * dense[o + d]
                else:
                    ri = prow_base[j] + f
                    if cnt_row[ri] == 0:
                        tr_field[ntr] = j
                        tr_row[ntr] = f
                        ntr += 1
                    cnt_row[ri] += 1
                    base = pcomp_base[j] + f * l
                    for d in range(l):
                        gsum_row[base + d] += g * dense[o + d]
            for i in range(D):
                dense_g[i] += g * buf[i]
            bias_g += g

        # apply the step: centroids get the occurrence mean, rows the sum
        for idx in range(ntc):
            j = tc_field[idx]
            c = tc_cluster[idx]
            ci = clus_base[j] + c
            m = float(cnt_cent[ci])
            l = l_arr[j]
            base = cent_base[j] + c * l
            for d in range(l):
                gm = gsum_cent[base + d] / m
                a = cacc[base + d] + gm * gm
                cacc[base + d] = a
                cent[base + d] -= lr * gm / (math.sqrt(a) + eps)
                gsum_cent[base + d] = 0.0
            cnt_cent[ci] = 0
        for idx in range(ntr):
            j = tr_field[idx]
            r = tr_row[idx]
            l = l_arr[j]
            base = pcomp_base[j] + r * l
            for d in range(l):
                gr = gsum_row[base + d]
                a = acc[base + d] + gr * gr
                acc[base + d] = a
                emb[base + d] -= lr * gr / (math.sqrt(a) + eps)
                gsum_row[base + d] = 0.0
            cnt_row[prow_base[j] + r] = 0
        for i in range(D):
            gd = dense_g[i]
            a = dacc[i] + gd * gd
            dacc[i] = a
            dense[i] -= lr * gd / (math.sqrt(a) + eps)
        bacc += bias_g * bias_g
        bias -= lr * bias_g / (math.sqrt(bacc) + eps)

        step_start = step_end

    bias_state[0] = bias
    bias_state[1] = bacc
    return loss_sum
