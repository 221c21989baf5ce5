#!/usr/bin/env python3
# Copyright 2026 The Protoscope Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates the golden test assets in this directory.

Written against numpy/struct only, independently of the C++ code, so the
C++ reader and writer are checked against a second implementation.
"""

import os
import struct
from fractions import Fraction

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))


def fmap_bytes(grid, version=1):
    h, w, d = grid.shape
    header = b"FMAP" + struct.pack("<4I", version, h, w, d)
    return header + grid.astype("<f4").tobytes(order="C")


def write(name, data):
    with open(os.path.join(HERE, name), "wb") as f:
        f.write(data)


def write_bits(name, grid):
    # One hex u32 bit pattern per value, channel-fastest row-major.
    bits = grid.astype("<f4").view("<u4").reshape(-1)
    with open(os.path.join(HERE, name), "w") as f:
        h, w, d = grid.shape
        f.write(f"{h} {w} {d}\n")
        for b in bits:
            f.write(f"{int(b):08x}\n")


def main():
    small = np.arange(24, dtype=np.float32).reshape(2, 3, 4) * 0.25 - 2.5
    small[0, 0, 0] = -0.0
    small[1, 2, 3] = np.float32(1e-40)  # subnormal
    small[1, 1, 1] = np.float32(3.4028235e38)
    write("small_2x3x4.fmap", fmap_bytes(small))
    write_bits("small_2x3x4.bits", small)

    rng = np.random.default_rng(20260101)
    grid = rng.standard_normal((5, 7, 3)).astype(np.float32)
    write("random_5x7x3.fmap", fmap_bytes(grid))
    write_bits("random_5x7x3.bits", grid)

    one = np.array([[[np.float32(0.1)]]], dtype=np.float32)
    write("single_1x1x1.fmap", fmap_bytes(one))
    write_bits("single_1x1x1.bits", one)

    good = fmap_bytes(small)
    write("bad_magic.fmap", b"FMAQ" + good[4:])
    write("bad_version.fmap", fmap_bytes(small, version=2))
    write("truncated_header.fmap", good[:10])
    write("truncated_payload.fmap", good[:-5])
    nan = small.copy()
    nan[0, 1, 2] = np.nan
    write("nonfinite.fmap", fmap_bytes(nan))

    # Jet colormap: channel k is 1.5 - |4x - (3 - k)| clamped to [0, 1],
    # x = i / 255, scaled to 255 and rounded half up. Exact rationals avoid
    # float ties.
    with open(os.path.join(HERE, "colormap.csv"), "w") as f:
        f.write("index,r,g,b\n")
        for i in range(256):
            x = Fraction(i, 255)
            vals = []
            for k in range(3):
                v = Fraction(3, 2) - abs(4 * x - (3 - k))
                v = min(max(v, Fraction(0)), Fraction(1))
                scaled = v * 255 + Fraction(1, 2)
                vals.append(scaled.numerator // scaled.denominator)
            f.write(f"{i},{vals[0]},{vals[1]},{vals[2]}\n")


if __name__ == "__main__":
    main()
