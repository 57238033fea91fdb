# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels in ``_kernels_py``.

Same signatures, same math, same update order; only the summation order
inside the matrix products differs from BLAS, so results agree with the
pure kernels to float64 rounding rather than bitwise.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, fabs, isfinite, log, log1p, pow, sqrt

cnp.import_array()

cdef double TWO_PI = 6.283185307179586

cdef double VARIANCE_FLOOR = 1e-12
cdef double ALEATORIC_FLOOR = 1e-6
cdef double ALEATORIC_CEILING = 1e6


cdef inline double _softplus(double v) nogil:
    return log1p(exp(-fabs(v))) + (v if v > 0.0 else 0.0)


cdef inline double _sigmoid(double v) nogil:
    cdef double e
    if v >= 0.0:
        return 1.0 / (1.0 + exp(-v))
    e = exp(v)
    return e / (1.0 + e)


def train_epoch(double[::1] theta, double[::1] first_moment,
                double[::1] second_moment, const double[:, ::1] x,
                const double[:, ::1] y, const long long[::1] order, masks,
                int input_dim, int hidden_units, int output_dim,
                double dropout_rate, int batch_size, double learning_rate,
                double beta1, double beta2, double epsilon, long long step):
    """Drop-in replacement for ``_kernels_py.train_epoch``."""
    cdef Py_ssize_t n = x.shape[0]
    cdef int p = input_dim, h = hidden_units, d = output_dim
    cdef Py_ssize_t n_params = theta.shape[0]
    cdef Py_ssize_t ow1 = 0, ob1 = h * p, owm = ob1 + h, obm = owm + d * h
    cdef Py_ssize_t owv = obm + d, obv = owv + d * h

    cdef cnp.ndarray gf = np.zeros(n_params, dtype=np.float64)
    cdef double[::1] g = gf
    cdef int cap = batch_size if batch_size < n else <int> n
    cdef cnp.ndarray scratch = np.empty((cap, 2 * h + 4 * d + p), dtype=np.float64)
    cdef double[:, ::1] sc = scratch

    cdef const unsigned char[:, ::1] mk
    cdef bint use_masks = masks is not None
    if use_masks:
        mk = masks

    cdef double keep = 1.0 - dropout_rate
    cdef double total = 0.0, loss, row_sum, acc, resid, var, sp, gm, gv
    cdef double corr1, corr2, denom
    cdef Py_ssize_t start, i, j, k, o, nb, row, t
    cdef bint bad = 0

    with nogil:
        start = 0
        while start < n:
            nb = batch_size if start + batch_size <= n else n - start
            # layout per row: xb[0:p] pre[p:p+h] latent[..+h] mean[d] raw[d] var...
            # simpler: columns [0,p)=xb [p,p+h)=pre [p+h,p+2h)=latent
            #          [p+2h, p+2h+d)=mean [..+d)=raw [..+d)=gmean [..+d)=graw
            loss = 0.0
            bad = 0
            for i in range(nb):
                row = order[start + i]
                for k in range(p):
                    sc[i, k] = x[row, k]
                row_sum = 0.0
                for j in range(h):
                    acc = theta[ob1 + j]
                    for k in range(p):
                        acc += sc[i, k] * theta[ow1 + j * p + k]
                    sc[i, p + j] = acc
                    acc = acc if acc > 0.0 else 0.0
                    if use_masks:
                        acc = acc * mk[start + i, j] / keep
                    sc[i, p + h + j] = acc
                for o in range(d):
                    acc = theta[obm + o]
                    for j in range(h):
                        acc += sc[i, p + h + j] * theta[owm + o * h + j]
                    sc[i, p + 2 * h + o] = acc              # mean
                    acc = theta[obv + o]
                    for j in range(h):
                        acc += sc[i, p + h + j] * theta[owv + o * h + j]
                    sc[i, p + 2 * h + d + o] = acc          # raw
                    sp = _softplus(acc) + ALEATORIC_FLOOR
                    var = ALEATORIC_CEILING if sp > ALEATORIC_CEILING else sp
                    resid = sc[i, p + 2 * h + o] - y[row, o]
                    row_sum += 0.5 * log(TWO_PI * var) + resid * resid / (2.0 * var)
                    gm = resid / (nb * var)
                    gv = (1.0 / var - resid * resid / (var * var)) / (2.0 * nb)
                    sc[i, p + 2 * h + 2 * d + o] = gm       # gmean
                    sc[i, p + 2 * h + 3 * d + o] = (        # graw
                        0.0 if sp > ALEATORIC_CEILING
                        else gv * _sigmoid(sc[i, p + 2 * h + d + o]))
                loss += row_sum
            loss /= nb
            if not isfinite(loss):
                bad = 1
                break

            for k in range(n_params):
                g[k] = 0.0
            for i in range(nb):
                for o in range(d):
                    gm = sc[i, p + 2 * h + 2 * d + o]
                    gv = sc[i, p + 2 * h + 3 * d + o]
                    g[obm + o] += gm
                    g[obv + o] += gv
                    for j in range(h):
                        g[owm + o * h + j] += gm * sc[i, p + h + j]
                        g[owv + o * h + j] += gv * sc[i, p + h + j]
                for j in range(h):
                    acc = 0.0
                    for o in range(d):
                        acc += (sc[i, p + 2 * h + 2 * d + o] * theta[owm + o * h + j]
                                + sc[i, p + 2 * h + 3 * d + o] * theta[owv + o * h + j])
                    if use_masks:
                        acc = acc * mk[start + i, j] / keep
                    if sc[i, p + j] <= 0.0:                 # ReLU gate on pre
                        acc = 0.0
                    g[ob1 + j] += acc
                    for k in range(p):
                        g[ow1 + j * p + k] += acc * sc[i, k]

            step += 1
            corr1 = 1.0 - pow(beta1, step)
            corr2 = 1.0 - pow(beta2, step)
            for k in range(n_params):
                first_moment[k] = beta1 * first_moment[k] + (1.0 - beta1) * g[k]
                second_moment[k] = (beta2 * second_moment[k]
                                    + (1.0 - beta2) * g[k] * g[k])
                denom = sqrt(second_moment[k] / corr2) + epsilon
                theta[k] -= learning_rate * (first_moment[k] / corr1) / denom
            total += loss * nb
            start += batch_size
    if bad:
        return step + 1, float("nan")
    return step, total / n


def rollout_cartpole(const double[:, :, ::1] w1, const double[:, ::1] b1,
                     const double[:, :, ::1] wm, const double[:, ::1] bm,
                     const double[:, :, ::1] wv, const double[:, ::1] bv,
                     weight_samples, const long long[::1] member_of,
                     const double[:, ::1] actions,
                     const double[:, :, ::1] noise,
                     const double[::1] feature_means,
                     const double[::1] feature_stds,
                     const double[::1] target_means,
                     const double[::1] target_stds,
                     const double[::1] start, double position_limit,
                     double state_clamp):
    """Drop-in replacement for ``_kernels_py.rollout_cartpole``."""
    cdef Py_ssize_t r = actions.shape[0], horizon = actions.shape[1]
    cdef Py_ssize_t h = w1.shape[1]
    cdef cnp.ndarray totals_arr = np.zeros(r, dtype=np.float64)
    cdef double[::1] totals = totals_arr
    cdef cnp.ndarray states_arr = np.empty((r, 4), dtype=np.float64)
    cdef double[:, ::1] states = states_arr
    cdef cnp.ndarray z_arr = np.empty(h, dtype=np.float64)
    cdef double[::1] z = z_arr

    cdef const double[:, :, ::1] ws
    cdef bint use_ws = weight_samples is not None
    if use_ws:
        ws = weight_samples

    cdef Py_ssize_t i, t, j, k, o, m
    cdef double feats[5]
    cdef double mu[4]
    cdef double acc, sp, var, val

    for i in range(r):
        for k in range(4):
            states[i, k] = start[k]

    with nogil:
        for t in range(horizon):
            for i in range(r):
                m = member_of[i]
                for k in range(4):
                    feats[k] = (states[i, k] - feature_means[k]) / feature_stds[k]
                feats[4] = (actions[i, t] - feature_means[4]) / feature_stds[4]
                for j in range(h):
                    acc = b1[m, j]
                    for k in range(5):
                        acc += feats[k] * w1[m, j, k]
                    z[j] = acc if acc > 0.0 else 0.0
                for o in range(4):
                    if use_ws:
                        acc = 0.0
                        for j in range(h):
                            acc += z[j] * ws[i, o, j]
                    else:
                        acc = bm[m, o]
                        for j in range(h):
                            acc += z[j] * wm[m, o, j]
                    mu[o] = acc
                    acc = bv[m, o]
                    for j in range(h):
                        acc += z[j] * wv[m, o, j]
                    sp = _softplus(acc) + ALEATORIC_FLOOR
                    var = ALEATORIC_CEILING if sp > ALEATORIC_CEILING else sp
                    val = (states[i, o]
                           + (mu[o] + sqrt(var) * noise[i, t, o])
                           * target_stds[o] + target_means[o])
                    states[i, o] = val
                val = states[i, 0]
                if val > position_limit:
                    val = position_limit
                elif val < -position_limit:
                    val = -position_limit
                states[i, 0] = val
                for k in range(4):
                    val = states[i, k]
                    if val > state_clamp:
                        val = state_clamp
                    elif val < -state_clamp:
                        val = -state_clamp
                    states[i, k] = val
                totals[i] += cos(states[i, 2]) - 0.001 * states[i, 0] * states[i, 0]
    return totals_arr
