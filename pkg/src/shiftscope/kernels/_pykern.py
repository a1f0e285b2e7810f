"""Numpy implementation of the dense-chain kernels.

This is the reference backend: the compiled Cython module in `_ckern.pyx`
mirrors these two functions exactly (same signatures, same math, naive
accumulation order instead of BLAS). Arrays are float64 and C-contiguous.
"""

import numpy as np

ACT_RELU = 0
ACT_TANH = 1


def forward_chain(weights, biases, x, activation, skips):
    """Affine + activation chain, with optional identity skips.

    Returns (pre, post, logits) where pre/post hold one batch x width matrix
    per hidden layer and logits is the final affine output (no activation).
    `skips[i]` adds the layer input to the activation output (only legal for
    width-preserving hidden layers).
    """
    pre = []
    post = []
    h = x
    for i, (w, b) in enumerate(zip(weights[:-1], biases[:-1])):
        z = h @ w + b
        if activation == ACT_RELU:
            a = np.maximum(z, 0.0)
        else:
            a = np.tanh(z)
        h = a + h if skips[i] else a
        pre.append(z)
        post.append(h)
    logits = h @ weights[-1] + biases[-1]
    return pre, post, logits


def backward_chain(weights, pre, post, x, d_logits, d_penultimate, activation,
                   skips, want_input_grad):
    """Reverse-mode pass through the chain.

    `d_penultimate` (may be None) is injected at the post-activation of the
    last hidden layer -- or at the input when there are no hidden layers.
    Returns (d_weights, d_biases, d_input-or-None).
    """
    n_layers = len(weights)
    n_hidden = n_layers - 1
    d_w = [None] * n_layers
    d_b = [None] * n_layers

    a_last = post[-1] if n_hidden else x
    g = d_logits
    d_w[n_hidden] = a_last.T @ g
    d_b[n_hidden] = g.sum(axis=0)
    gh = g @ weights[n_hidden].T
    if d_penultimate is not None:
        gh = gh + d_penultimate

    for i in range(n_hidden - 1, -1, -1):
        if activation == ACT_RELU:
            gz = gh * (pre[i] > 0.0)
        else:
            act = post[i] - (post[i - 1] if i > 0 else x) if skips[i] \
                else post[i]
            gz = gh * (1.0 - act * act)
        a_in = post[i - 1] if i > 0 else x
        d_w[i] = a_in.T @ gz
        d_b[i] = gz.sum(axis=0)
        if i > 0 or want_input_grad:
            gh = gz @ weights[i].T + gh if skips[i] else gz @ weights[i].T

    d_input = gh if want_input_grad else None
    return d_w, d_b, d_input
