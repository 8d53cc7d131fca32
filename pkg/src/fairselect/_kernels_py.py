"""Pure-numpy kernels for the scorer's hidden blocks, output head and Adam.

The compiled module ``_kernels`` exposes the same functions with the same
signatures; :mod:`fairselect.kernels` picks one at import time.

A hidden block is affine -> batch-norm -> ReLU.
"""
import numpy as np

PROB_FLOOR = 1e-12


def hidden_forward(X, W, b, gamma, beta, run_mean, run_var, train, eps):
    """Returns ``(a, xhat, inv_std, y, batch_mean, batch_var)``.

    ``batch_mean``/``batch_var`` (biased) are only meaningful in train mode;
    in eval mode the running statistics are used and echoed back.
    """
    z = X @ W + b
    if train:
        mu = z.mean(axis=0)
        var = ((z - mu) ** 2).mean(axis=0)
    else:
        mu, var = run_mean, run_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (z - mu) * inv_std
    y = gamma * xhat + beta
    a = np.maximum(y, 0.0)
    return a, xhat, inv_std, y, mu, var


def hidden_backward(da, X, W, gamma, xhat, inv_std, y):
    """Backward through a train-mode hidden block. Returns ``(dX, dW, db, dgamma, dbeta)``."""
    n = X.shape[0]
    dy = np.where(y > 0.0, da, 0.0)
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dxhat = dy * gamma
    dz = (inv_std / n) * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    dW = X.T @ dz
    db = dz.sum(axis=0)
    dX = dz @ W.T
    return dX, dW, db, dgamma, dbeta


def _sigmoid(t):
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def output_forward(a, W, b):
    """Sigmoid head; probabilities are clipped into ``[1e-12, 1 - 1e-12]``."""
    logits = a @ W[:, 0] + b[0]
    p = np.clip(_sigmoid(logits), PROB_FLOOR, 1.0 - PROB_FLOOR)
    return logits, p


def output_backward(dp, a, W, p):
    """Returns ``(da, dW, db)`` given dL/dp."""
    dlogit = dp * p * (1.0 - p)
    dW = (a.T @ dlogit)[:, None]
    db = np.array([dlogit.sum()])
    da = np.outer(dlogit, W[:, 0])
    return da, dW, db


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, step):
    """In-place bias-corrected Adam update of ``param``, ``m`` and ``v``."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1**step)
    vhat = v / (1.0 - beta2**step)
    param -= lr * mhat / (np.sqrt(vhat) + eps)
