"""Independent reference implementations shared by the unit and acceptance tests."""

import numpy as np

from ctxtune.nn import Mlp


def dense_forward(net: Mlp, x):
    """Re-evaluate an Mlp layer by layer with explicit matrix products."""
    acts = {"tanh": np.tanh, "relu": lambda z: np.where(z > 0, z, 0.0), "identity": lambda z: z}
    h = np.atleast_2d(x)
    n = len(net.params) // 2
    for i in range(n):
        w, b = net.params[2 * i], net.params[2 * i + 1]
        z = np.einsum("bi,ij->bj", h, w) + b
        h = acts[net.output if i == n - 1 else net.hidden](z)
    return h


def random_fd_case(rng):
    """A random (net, input, loss) triple. Returns (net, x, loss_fn, dloss_fn)."""
    depth = int(rng.integers(1, 4))
    sizes = [int(s) for s in rng.integers(1, 7, size=depth + 1)]
    net = Mlp(sizes, hidden=str(rng.choice(["tanh", "relu"])), output=str(rng.choice(["identity", "tanh"])),
              rng=rng)
    x = rng.normal(size=(int(rng.integers(1, 5)), sizes[0]))
    kind = rng.integers(3)
    target = rng.normal(size=(x.shape[0], sizes[-1]))
    if kind == 0:
        return net, x, lambda y: float(np.sum((y - target) ** 2)), lambda y: 2 * (y - target)
    if kind == 1:
        return net, x, lambda y: float(np.sum(target * y)), lambda y: target
    return net, x, lambda y: float(np.sum(np.log1p(y**2))), lambda y: 2 * y / (1 + y**2)


def fd_relative_error(net, x, loss, dloss, h=1e-5):
    """Max elementwise relative error of reverse-mode gradients vs central differences."""
    y, cache = net.forward_cached(x)
    grads = net.backward(cache, dloss(y)).grads
    worst = 0.0
    for p, g in zip(net.params, grads):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + h
            up = loss(net.forward(x))
            p[i] = old - h
            down = loss(net.forward(x))
            p[i] = old
            fd = (up - down) / (2 * h)
            scale = max(abs(fd), abs(g[i]), 1e-4)
            worst = max(worst, abs(fd - g[i]) / scale)
    return worst


def brute_force_gae(rewards, values, dones, last_value, gamma, lam):
    """Advantages as the explicit lambda-weighted sum of TD residuals, per time step."""
    n = len(rewards)
    next_values = np.append(values[1:], last_value)
    deltas = [rewards[t] + gamma * next_values[t] * (1.0 - dones[t]) - values[t] for t in range(n)]
    adv = np.zeros(n)
    for t in range(n):
        total, weight = 0.0, 1.0
        for k in range(t, n):
            total += weight * deltas[k]
            if dones[k]:
                break
            weight *= gamma * lam
        adv[t] = total
    return adv, adv + np.asarray(values)


def dense_gp(x, y, kernel, xq, noise_var):
    """Posterior mean/variance and log marginal likelihood via explicit inverses."""
    k = kernel(x, x) + noise_var * np.eye(len(x))
    k_inv = np.linalg.inv(k)
    ks = kernel(xq, x)
    mean = ks @ k_inv @ y
    var = np.diag(kernel(xq, xq)) - np.einsum("ij,jk,ik->i", ks, k_inv, ks)
    sign, logdet = np.linalg.slogdet(k)
    lml = -0.5 * y @ k_inv @ y - 0.5 * logdet - 0.5 * len(x) * np.log(2 * np.pi)
    return mean, var, lml
