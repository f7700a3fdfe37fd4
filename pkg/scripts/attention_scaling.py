#!/usr/bin/env python3
"""Wall-time and memory scaling of row-constrained vs dense cross-attention.

Times the row-constrained kernel across feature-map sizes and prints the
16-bit attention-matrix footprint both ways. The dense variant is only run
where its matrix fits comfortably in RAM, which is exactly the point.
"""

import argparse
import time

import numpy as np

from stereobench.attention import (
    AttentionWeights,
    attention_memory_model,
    epipolar_attention,
    full_cross_attention_row_masked,
)


def fmt_bytes(n):
    for unit in ("B", "KiB", "MiB", "GiB"):
        if n < 1024:
            return f"{n:.0f} {unit}"
        n /= 1024
    return f"{n:.0f} TiB"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--c", type=int, default=16)
    parser.add_argument("--d", type=int, default=8)
    parser.add_argument("--sizes", default="32,64,128,256,512")
    args = parser.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    weights = AttentionWeights.random(args.c, args.d, seed=0)
    rng = np.random.default_rng(1)

    header = f"{'size':>6}{'row-attn time':>16}{'dense time':>14}{'row-attn mem':>16}{'dense mem':>14}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        h = rng.standard_normal((n, n, args.c))
        g = rng.standard_normal((n, n, args.c))
        start = time.perf_counter()
        epipolar_attention(h, g, weights)
        row_time = time.perf_counter() - start

        dense_time = None
        if (n * n) ** 2 * 8 <= 2**31:
            start = time.perf_counter()
            full_cross_attention_row_masked(h, g, weights)
            dense_time = time.perf_counter() - start

        row_mem = attention_memory_model(n, n, 2, "epipolar")
        full_mem = attention_memory_model(n, n, 2, "full")
        dense_cell = f"{dense_time:12.3f}s" if dense_time is not None else f"{'skipped':>13}"
        print(
            f"{n:>6}{row_time:14.3f}s{dense_cell}"
            f"{fmt_bytes(row_mem):>16}{fmt_bytes(full_mem):>14}"
        )


if __name__ == "__main__":
    main()
