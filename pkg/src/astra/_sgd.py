"""Numba kernels for the stochastic layout optimization.

One call runs one epoch so the caller can record a loss trace between
epochs. The RNG is a 3-word Tausworthe generator carried in an int64 array,
making negative sampling reproducible for a fixed seed.
"""
from __future__ import annotations

import numba


@numba.njit("i8(i8[::1])", cache=True, inline="always")
def _tau_rand_int(state):
    state[0] = (((state[0] & 4294967294) << 12) & 0xFFFFFFFF) ^ (
        (((state[0] << 13) & 0xFFFFFFFF) ^ state[0]) >> 19
    )
    state[1] = (((state[1] & 4294967288) << 4) & 0xFFFFFFFF) ^ (
        (((state[1] << 2) & 0xFFFFFFFF) ^ state[1]) >> 25
    )
    state[2] = (((state[2] & 4294967280) << 17) & 0xFFFFFFFF) ^ (
        (((state[2] << 3) & 0xFFFFFFFF) ^ state[2]) >> 11
    )
    return state[0] ^ state[1] ^ state[2]


@numba.njit(
    "void(f8[:, ::1], i4[::1], i4[::1], f8[::1], f8[::1], f8[::1], f8[::1], "
    "f8, f8, i8[::1], f8, f8, i8, i8)",
    cache=True,
)
def run_layout_epoch(
    embedding,
    head,
    tail,
    epochs_per_sample,
    epochs_per_negative_sample,
    epoch_of_next_sample,
    epoch_of_next_negative_sample,
    a,
    b,
    rng_state,
    gamma,
    alpha,
    epoch,
    n_vertices,
):
    dim = embedding.shape[1]
    for i in range(epochs_per_sample.shape[0]):
        if epoch_of_next_sample[i] > epoch:
            continue
        j = head[i]
        k = tail[i]

        d2 = 0.0
        for d in range(dim):
            diff = embedding[j, d] - embedding[k, d]
            d2 += diff * diff
        if d2 > 0.0:
            grad_coeff = -2.0 * a * b * d2 ** (b - 1.0)
            grad_coeff /= a * d2**b + 1.0
        else:
            grad_coeff = 0.0
        for d in range(dim):
            g = grad_coeff * (embedding[j, d] - embedding[k, d])
            if g > 4.0:
                g = 4.0
            elif g < -4.0:
                g = -4.0
            embedding[j, d] += g * alpha
            embedding[k, d] -= g * alpha
        epoch_of_next_sample[i] += epochs_per_sample[i]

        n_neg = int(
            (epoch - epoch_of_next_negative_sample[i]) / epochs_per_negative_sample[i]
        )
        for _ in range(n_neg):
            t = _tau_rand_int(rng_state) % n_vertices
            if t < 0:
                t += n_vertices
            if t == j:
                continue
            d2 = 0.0
            for d in range(dim):
                diff = embedding[j, d] - embedding[t, d]
                d2 += diff * diff
            if d2 > 0.0:
                grad_coeff = 2.0 * gamma * b
                grad_coeff /= (0.001 + d2) * (a * d2**b + 1.0)
            else:
                grad_coeff = 0.0
            for d in range(dim):
                if grad_coeff > 0.0:
                    g = grad_coeff * (embedding[j, d] - embedding[t, d])
                    if g > 4.0:
                        g = 4.0
                    elif g < -4.0:
                        g = -4.0
                else:
                    g = 4.0
                embedding[j, d] += g * alpha
        epoch_of_next_negative_sample[i] += n_neg * epochs_per_negative_sample[i]
