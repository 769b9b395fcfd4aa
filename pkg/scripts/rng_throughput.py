"""Uniform and Gaussian draw rates of the buffered stream against raw numpy."""

import argparse
import time

import numpy as np

from qcontrolde.rng import seeded_stream


def rate(fn, count, repeats):
    start = time.perf_counter()
    for _ in range(repeats):
        fn(count)
    return count * repeats / (time.perf_counter() - start)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--count", type=int, default=1_000_000)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()
    stream = seeded_stream(1)
    gen = np.random.Generator(np.random.Philox(1))
    print(f"stream uniform   {rate(stream.uniform, args.count, args.repeats) / 1e6:8.1f} M/s")
    print(f"stream gaussian  {rate(stream.gaussian, args.count, args.repeats) / 1e6:8.1f} M/s")
    print(f"numpy  uniform   {rate(gen.random, args.count, args.repeats) / 1e6:8.1f} M/s")
    print(f"stream uniform1  {rate(lambda n: [stream.uniform1() for _ in range(n)], 100_000, 3) / 1e6:8.2f} M/s")


if __name__ == "__main__":
    main()
