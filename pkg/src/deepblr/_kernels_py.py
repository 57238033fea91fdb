"""Pure-NumPy reference kernels.

These are the fallback implementations of the hot loops (minibatch
training epochs and batched imagined rollouts).  The compiled extension
in ``_core`` provides drop-in replacements with identical signatures;
``_native`` picks whichever is available.  Everything here must stay
semantically equivalent to the compiled versions, so keep the math in
one obvious place.
"""

from __future__ import annotations

import numpy as np

VARIANCE_FLOOR = 1e-12     # floor applied to any variance before a logarithm
ALEATORIC_FLOOR = 1e-6     # added to softplus(raw variance head output)
ALEATORIC_CEILING = 1e6    # upper clamp on the aleatoric variance


def softplus(x):
    """Numerically stable log(1 + exp(x))."""
    x = np.asarray(x, dtype=np.float64)
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def param_views(theta, input_dim, hidden_units, output_dim):
    """Views into a flat parameter vector, in canonical order.

    Order: first-layer weights (h, p), first-layer bias (h,), mean head
    (d, h), mean bias (d,), variance head (d, h), variance bias (d,).
    """
    p, h, d = input_dim, hidden_units, output_dim
    sizes = (h * p, h, d * h, d, d * h, d)
    shapes = ((h, p), (h,), (d, h), (d,), (d, h), (d,))
    views, off = [], 0
    for size, shape in zip(sizes, shapes):
        views.append(theta[off:off + size].reshape(shape))
        off += size
    if off != theta.shape[0]:
        raise ValueError(f"flat parameter vector has length {theta.shape[0]}, "
                         f"expected {off}")
    return tuple(views)


def grad_arrays(params, dropout_rate, x, y, masks):
    """Gradients of the mean-over-batch Gaussian NLL; returns (grads, loss).

    With v = min(softplus(r) + floor, ceiling) the head gradients are
        dL/dmu = (mu - y) / (n v)
        dL/dv  = (1/(2n)) (1/v - (y - mu)^2 / v^2)
        dL/dr  = dL/dv * sigmoid(r)        (zero where v is clamped)
    and the linear layers backpropagate as usual; the ReLU derivative is
    taken as 1 only for strictly positive preactivations.
    """
    w1, b1, wm, bm, wv, bv = params
    n = x.shape[0]
    pre = x @ w1.T + b1
    latent = np.maximum(pre, 0.0)
    if masks is not None:
        scale = masks / (1.0 - dropout_rate)
        latent = latent * scale
    mean = latent @ wm.T + bm
    raw = latent @ wv.T + bv
    sp = softplus(raw) + ALEATORIC_FLOOR
    clamped = sp > ALEATORIC_CEILING
    var = np.where(clamped, ALEATORIC_CEILING, sp)

    resid = mean - y
    loss = float(np.mean(np.sum(0.5 * np.log(2.0 * np.pi * var)
                                + resid ** 2 / (2.0 * var), axis=1)))

    gmean = resid / (n * var)
    gvar = (1.0 / var - resid ** 2 / var ** 2) / (2.0 * n)
    graw = np.where(clamped, 0.0, gvar * sigmoid(raw))

    gwm = gmean.T @ latent
    gbm = gmean.sum(axis=0)
    gwv = graw.T @ latent
    gbv = graw.sum(axis=0)
    glatent = gmean @ wm + graw @ wv
    if masks is not None:
        glatent = glatent * scale
    gpre = glatent * (pre > 0)
    gw1 = gpre.T @ x
    gb1 = gpre.sum(axis=0)
    return (gw1, gb1, gwm, gbm, gwv, gbv), loss


def train_epoch(theta, first_moment, second_moment, x, y, order, masks,
                input_dim, hidden_units, output_dim, dropout_rate,
                batch_size, learning_rate, beta1, beta2, epsilon, step):
    """One epoch of minibatch Adam over pre-shuffled row order, in place.

    theta, first_moment and second_moment are flat float64 vectors updated
    in place.  ``order`` gives the row visit order; ``masks`` is either
    None or a (n, hidden_units) uint8 array of dropout masks aligned with
    the shuffled order.  The final partial batch is kept.

    Returns (step, epoch_nll) where epoch_nll is the mean per-point NLL
    measured at each batch's pre-update parameters.  A non-finite batch
    loss aborts the epoch and reports nan.
    """
    n = x.shape[0]
    params = param_views(theta, input_dim, hidden_units, output_dim)
    gflat = np.empty_like(theta)
    gviews = param_views(gflat, input_dim, hidden_units, output_dim)
    total = 0.0
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        batch_masks = None if masks is None else masks[start:start + batch_size]
        grads, loss = grad_arrays(params, dropout_rate, x[idx], y[idx], batch_masks)
        if not np.isfinite(loss):
            return step + 1, float("nan")
        for view, grad in zip(gviews, grads):
            view[...] = grad
        step += 1
        first_moment *= beta1
        first_moment += (1.0 - beta1) * gflat
        second_moment *= beta2
        second_moment += (1.0 - beta2) * (gflat * gflat)
        denom = np.sqrt(second_moment / (1.0 - beta2 ** step))
        denom += epsilon
        theta -= learning_rate * (first_moment / (1.0 - beta1 ** step)) / denom
        total += loss * idx.shape[0]
    return step, total / n


def rollout_cartpole(w1, b1, wm, bm, wv, bv, weight_samples, member_of,
                     actions, noise, feature_means, feature_stds,
                     target_means, target_stds, start,
                     position_limit, state_clamp):
    """Batched imagined cart-pole rollouts under a learned delta model.

    Parameter stacks hold one slice per ensemble member: w1 is
    (M, h, 5), the head matrices are (M, 4, h).  Row j of the batch is
    pinned to member member_of[j] for the whole horizon.  When
    weight_samples (R, 4, h) is given it replaces the mean head: the
    step mean becomes z @ weight_samples[j].T with no bias, matching a
    posterior weight draw.  noise (R, H, 4) supplies the standard-normal
    aleatoric draws; every step samples

        delta_norm = mu + sqrt(var) * noise[:, t]

    denormalizes it, adds it to the state, clips the cart position like
    the real track and clamps everything at state_clamp so divergence
    stays finite.  Returns the (R,) total rewards cos(theta) - 0.001 x^2
    summed over the horizon.
    """
    r, horizon = actions.shape
    n_members = w1.shape[0]
    states = np.tile(start, (r, 1))
    groups = [np.flatnonzero(member_of == m) for m in range(n_members)]
    totals = np.zeros(r)
    mu = np.empty((r, 4))
    var = np.empty((r, 4))
    for t in range(horizon):
        feats = np.column_stack([states, actions[:, t]])
        x = (feats - feature_means) / feature_stds
        for m, rows in enumerate(groups):
            if rows.size == 0:
                continue
            z = np.maximum(x[rows] @ w1[m].T + b1[m], 0.0)
            if weight_samples is None:
                mu[rows] = z @ wm[m].T + bm[m]
            else:
                mu[rows] = np.einsum("nh,ndh->nd", z, weight_samples[rows])
            raw = z @ wv[m].T + bv[m]
            var[rows] = np.minimum(softplus(raw) + ALEATORIC_FLOOR,
                                   ALEATORIC_CEILING)
        delta = (mu + np.sqrt(var) * noise[:, t]) * target_stds + target_means
        states += delta
        states[:, 0] = np.clip(states[:, 0], -position_limit, position_limit)
        np.clip(states, -state_clamp, state_clamp, out=states)
        totals += np.cos(states[:, 2]) - 0.001 * states[:, 0] ** 2
    return totals
