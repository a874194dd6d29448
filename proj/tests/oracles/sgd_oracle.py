# Copyright 2026 The Maskfed Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Reference for the seeded RNG, synthetic data and mini-batch SGD.

Reimplements the keystream RNG on top of pyca ChaCha20 and runs plain
Python SGD. Output is pasted into trainer_test.cc / datadist_test.cc.
"""
import math
import struct

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms


class Rng:
    def __init__(self, seed):
        key = struct.pack("<Q", seed) + b"\0" * 24
        nonce = b"\0" * 16  # counter 0, nonce 0
        self.enc = Cipher(algorithms.ChaCha20(key, nonce), mode=None).encryptor()
        self.spare = None

    def word(self):
        return struct.unpack("<Q", self.enc.update(b"\0" * 8))[0]

    def below(self, bound):
        limit = bound * ((2**64 - 1) // bound)
        while True:
            w = self.word()
            if w < limit:
                return w % bound

    def uniform(self):
        return (self.word() >> 11) * 2.0**-53

    def normal(self):
        if self.spare is not None:
            s, self.spare = self.spare, None
            return s
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        t = 2.0 * math.pi * u2
        self.spare = r * math.sin(t)
        return r * math.cos(t)

    def shuffle(self, items):
        for i in range(len(items), 1, -1):
            j = self.below(i)
            items[i - 1], items[j] = items[j], items[i - 1]


def synthetic(rows, dim, sep, corr, seed):
    us = [a / 90 for a in range(91)]
    mean = sum(us) / 91
    var = sum((u - mean) ** 2 for u in us) / 91
    slope = corr / (2 * math.sqrt(var))
    rng = Rng(seed)
    out = []
    for _ in range(rows):
        age = float(rng.below(91))
        p = 0.5 + slope * (age / 90 - 0.5)
        y = 1 if rng.uniform() < p else 0
        c = (0.5 if y else -0.5) * sep
        x = [c + rng.normal() for _ in range(dim)]
        out.append((x, y, age))
    return out


def sigmoid(z):
    if z >= 0:
        return 1 / (1 + math.exp(-z))
    e = math.exp(z)
    return e / (1 + e)


def sgd(data, lr, epochs, batch, seed):
    dim = len(data[0][0])
    w, b = [0.0] * dim, 0.0
    for epoch in range(epochs):
        order = list(range(len(data)))
        Rng(seed ^ epoch).shuffle(order)
        for s in range(0, len(order), batch):
            idx = order[s:s + batch]
            gw, gb = [0.0] * dim, 0.0
            for i in idx:
                x, y, _ = data[i]
                err = sigmoid(sum(wk * xk for wk, xk in zip(w, x)) + b) - y
                gw = [g + err * xk for g, xk in zip(gw, x)]
                gb += err
            w = [wk - lr * g / len(idx) for wk, g in zip(w, gw)]
            b -= lr * gb / len(idx)
    return w, b


def main():
    perm = list(range(10))
    Rng(42).shuffle(perm)
    print("shuffle seed 42 n 10:", perm)
    data = synthetic(200, 3, 2.0, 0.3, 11)
    print("first rows:")
    for x, y, a in data[:3]:
        print("  ", [repr(v) for v in x], y, a)
    w, b = sgd(data, 0.1, 3, 32, 5)
    print("sgd weights:", [repr(v) for v in w])
    print("sgd bias:", repr(b))


def four_point_gradient():
    """High-precision gradient and loss for the 4-row fixture in trainer_test."""
    import mpmath as mp
    mp.mp.dps = 40
    xs, ys = [1, 2, -1, 0], [1, 0, 0, 1]
    w, b = mp.mpf("0.5"), mp.mpf("-0.375")
    s = lambda z: 1 / (1 + mp.e ** (-z))
    gw = sum((s(w * x + b) - y) * x for x, y in zip(xs, ys)) / 4
    gb = sum(s(w * x + b) - y for x, y in zip(xs, ys)) / 4
    loss = sum(mp.log(1 + mp.e ** (w * x + b)) - y * (w * x + b) for x, y in zip(xs, ys)) / 4
    print("4-point grad w, grad b, loss:", mp.nstr(gw, 20), mp.nstr(gb, 20), mp.nstr(loss, 20))


if __name__ == "__main__":
    main()
    four_point_gradient()
