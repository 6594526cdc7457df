"""Compiled slot loop. Must consume draws in the same order as engine.advance_slot."""

import numpy as np
from numba import njit

EAS, LAS_IA, LAS_DA, LA_AF, LA_DF = 0, 1, 2, 3, 4
ARR_BERNOULLI, ARR_BATCH, ARR_STATE = 0, 1, 2
SVC_HAZARD, SVC_IID = 0, 1
IDX_TRIAL, IDX_ARRIVAL_EPOCH = 0, 1


@njit(cache=True)
def _inverse_cdf(cdf, u):
    for k in range(cdf.size):
        if u < cdf[k]:
            return k
    k = cdf.size - 1
    while k > 0 and cdf[k] == cdf[k - 1]:
        k -= 1
    return k


@njit(cache=True)
def run(gen, rule, akind, aalpha, avec, atail, skind, betas, btail, hmode, dcdf,
        slots, warmup, edge, center, pa, pre):
    over = edge.size - 1
    n = 0
    comm = -1   # slot in which head-of-line service started (-1: none)
    rem = -1    # residual duration, IidPmf only
    last_pa = 0
    draws = 0
    events = 0
    admitted = 0
    departures = 0

    for t in range(1, slots + 1):
        z_edge = n
        z_center = 0
        z_pa = 0
        k = 0
        for phase in range(3):
            # phase 0: anything before the potential-arrival epoch
            # phase 1: the arrival trial
            # phase 2: anything after it
            do_trial = False
            if phase == 0:
                if rule == EAS:
                    z_pa = n
                elif rule == LAS_IA or rule == LAS_DA:
                    if n >= 1:
                        if rule == LAS_DA and comm == t:
                            if skind == SVC_IID and rem < 0:
                                rem = _inverse_cdf(dcdf, gen.random())
                                draws += 1
                        else:
                            do_trial = True
                elif rule == LA_AF:
                    z_center = n
                    z_pa = n
                else:  # LA_DF
                    z_center = n
                    if n >= 1:
                        do_trial = True
            elif phase == 1:
                if rule == LAS_IA or rule == LAS_DA:
                    z_center = n
                    z_pa = n
                elif rule == LA_DF:
                    z_pa = n
                u = gen.random()
                draws += 1
                if akind == ARR_BERNOULLI:
                    k = 1 if u < aalpha else 0
                elif akind == ARR_BATCH:
                    k = _inverse_cdf(avec, u)
                else:
                    a = avec[n] if n < avec.size else atail
                    k = 1 if u < a else 0
                last_pa = n
                if k > 0:
                    if n == 0:
                        if rule == LAS_DA:
                            comm = t + 1
                            rem = -1
                        else:
                            comm = t
                            if skind == SVC_IID:
                                rem = _inverse_cdf(dcdf, gen.random())
                                draws += 1
                    n += k
                    admitted += k
            else:
                if rule == EAS:
                    z_center = n
                    if n >= 1:
                        do_trial = True
                elif rule == LA_AF:
                    if n >= 1 and comm < t:
                        do_trial = True

            if do_trial:
                if skind == SVC_IID:
                    rem -= 1
                    done = rem == 0
                else:
                    j = n
                    if hmode == IDX_ARRIVAL_EPOCH:
                        j = last_pa if last_pa > 1 else 1
                    b = betas[j - 1] if j <= betas.size else btail
                    done = gen.random() < b
                    draws += 1
                if done:
                    n -= 1
                    departures += 1
                    if n >= 1:
                        comm = t
                        if skind == SVC_IID:
                            rem = _inverse_cdf(dcdf, gen.random())
                            draws += 1
                    else:
                        comm = -1
                        rem = -1

        if t > warmup:
            edge[min(z_edge, over)] += 1
            center[min(z_center, over)] += 1
            pa[min(z_pa, over)] += 1
            if k > 0:
                pre[min(z_pa, over)] += 1
                events += 1

    return events, admitted, departures, n, draws
