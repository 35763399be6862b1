"""Pure-Python trajectory kernel.

Reference implementation of the batch sampler; qcond._ctmc is the
compiled mirror.  Both consume the same per-trajectory random stream
(Philox keyed by the master seed, counter block = trajectory index) in
the same draw order with the same IEEE arithmetic, so their outputs are
bit-identical and either backend may serve any request.

Per trajectory, with rate = gamma * N (constant degree):

    u1 -> waiting time dt = -log(u1)/rate
    u2 -> flipped bit j = floor(u2 * N), clamped to N-1

the weight accumulates (rate - V(n)) * (sojourn length) in log space,
the configuration held when the horizon t is reached is the final one
(left-continuous convention), and the boundary-transit counters advance
on each crossing of the partition:

    q: entries into cond from norm
    k: completed norm -> cond -> norm transits
    l: completed cond -> norm -> cond transits

Sojourns still open at the horizon do not close a transit.
"""

import math

import numpy as np

BUFFER = 256


def _value_fn(vkind, vu64, vf64):
    if vkind == 0:
        table = vf64

        def value(bits):
            return table[bits]
    elif vkind == 1:
        targets = frozenset(int(x) for x in vu64)
        hit = vf64[0]

        def value(bits):
            return hit if bits in targets else 0.0
    elif vkind == 2:
        mask = int(vu64[0])
        base, step = vf64[0], vf64[1]

        def value(bits):
            return base + step * ((bits ^ (bits >> 1)) & mask).bit_count()
    else:
        raise ValueError(f"unknown potential kind {vkind}")
    return value


def run_batch(seed, i0, n, n_qubits, gamma, t, start_bits,
              vkind, vu64, vf64, cond_bits,
              weights, finals, njumps, kt, lt, qt):
    """Sample trajectories i0 .. i0+n-1, writing per-trajectory results
    into the first n slots of the output arrays."""
    value = _value_fn(vkind, vu64, vf64)
    track = cond_bits is not None
    cond = frozenset(int(x) for x in cond_bits) if track else frozenset()
    rate = gamma * n_qubits

    for local in range(n):
        gi = i0 + local
        gen = np.random.Generator(np.random.Philox(key=seed, counter=gi << 128))
        buf = gen.random(BUFFER)
        ptr = 0

        bits = start_bits
        s = 0.0
        logw = 0.0
        jumps = 0
        k = l = q = 0
        in_cond = bits in cond
        cond_open = False
        norm_open = False

        if rate > 0.0 and t > 0.0:
            while True:
                if ptr >= BUFFER:
                    buf = gen.random(BUFFER)
                    ptr = 0
                u1 = buf[ptr]
                ptr += 1
                dt = math.inf if u1 <= 0.0 else -math.log(u1) / rate
                s_next = s + dt
                if s_next >= t:
                    break
                logw += (rate - value(bits)) * dt
                s = s_next
                if ptr >= BUFFER:
                    buf = gen.random(BUFFER)
                    ptr = 0
                u2 = buf[ptr]
                ptr += 1
                j = int(u2 * n_qubits)
                if j >= n_qubits:
                    j = n_qubits - 1
                bits ^= 1 << j
                jumps += 1
                if track:
                    now_cond = bits in cond
                    if now_cond != in_cond:
                        if now_cond:
                            q += 1
                            if norm_open:
                                l += 1
                                norm_open = False
                            cond_open = True
                        else:
                            if cond_open:
                                k += 1
                                cond_open = False
                            norm_open = True
                        in_cond = now_cond
        logw += (rate - value(bits)) * (t - s)

        weights[local] = math.exp(logw)
        finals[local] = bits
        njumps[local] = jumps
        if track:
            kt[local] = k
            lt[local] = l
            qt[local] = q
