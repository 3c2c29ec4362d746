"""Pure-numpy MLP kernels.

Reference implementation of the two primitives behind every forward and
gradient computation in the library:

- ``mlp_forward``: batched forward pass, linear output head.
- ``mlp_vjp``: vector-Jacobian product of the outputs with respect to the
  flat parameter vector (and optionally the inputs).

Parameter layout per layer l: weight matrix (d_in, d_out) row-major,
then bias (d_out,). Hidden activations use tanh (code 0) or relu (code 1);
the output layer is always linear.
"""

import numpy as np

ACT_TANH = 0
ACT_RELU = 1


def n_params(dims) -> int:
    return int(sum(dims[l] * dims[l + 1] + dims[l + 1] for l in range(len(dims) - 1)))


def _layers(params, dims):
    off = 0
    for l in range(len(dims) - 1):
        din, dout = int(dims[l]), int(dims[l + 1])
        w = params[off : off + din * dout].reshape(din, dout)
        off += din * dout
        b = params[off : off + dout]
        off += dout
        yield w, b


def mlp_forward(params, dims, act, x):
    """Outputs (batch, dims[-1]) for inputs ``x`` of shape (batch, dims[0])."""
    a = np.asarray(x, dtype=np.float64)
    last = len(dims) - 2
    for l, (w, b) in enumerate(_layers(params, dims)):
        z = a @ w + b
        if l < last:
            a = np.tanh(z) if act == ACT_TANH else np.maximum(z, 0.0)
        else:
            a = z
    return a


def mlp_vjp(params, dims, act, x, gy, need_gx=False):
    """Backprop the upstream output-gradient ``gy`` through the network.

    Returns (grad_params, grad_x); grad_x is None unless ``need_gx``.
    """
    x = np.asarray(x, dtype=np.float64)
    gy = np.asarray(gy, dtype=np.float64)
    nlayers = len(dims) - 1
    weights, biases, acts = [], [], [x]
    a = x
    for l, (w, b) in enumerate(_layers(params, dims)):
        weights.append(w)
        biases.append(b)
        z = a @ w + b
        if l < nlayers - 1:
            a = np.tanh(z) if act == ACT_TANH else np.maximum(z, 0.0)
        else:
            a = z
        acts.append(a)

    grad = np.zeros_like(params)
    off_end = params.size
    g = gy
    gx = None
    for l in range(nlayers - 1, -1, -1):
        w = weights[l]
        a_prev = acts[l]
        din, dout = w.shape
        gb = g.sum(axis=0)
        gw = a_prev.T @ g
        off_end -= dout
        grad[off_end : off_end + dout] = gb
        off_end -= din * dout
        grad[off_end : off_end + din * dout] = gw.reshape(-1)
        if l > 0 or need_gx:
            g = g @ w.T
            if l > 0:
                h = acts[l]  # post-activation of layer l-1's output
                if act == ACT_TANH:
                    g = g * (1.0 - h * h)
                else:
                    g = g * (h > 0.0)
    if need_gx:
        gx = g
    return grad, gx
