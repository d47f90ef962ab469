"""Compare the compiled and pure-Python field backends.

Times the Montgomery kernels (multiply, square, add, subtract), modular
inversion and a full scalar multiplication on both backends with
identical seeded operands, and prints per-operation timings plus the
speedup factor.

Usage: python3 benchmarks/bench_field.py [--reps 20000] [--kp-bits 64]
"""

from __future__ import annotations

import argparse
import random
import time

from atomkp.curve import AffinePoint
from atomkp.gfp import compiled_available, inverse_mod, p256, square_mod
from atomkp.scalar import Scalar, kp_right_to_left


def _bench(fn, reps: int) -> float:
    """Best-of-three mean seconds per call."""
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        best = min(best, (time.perf_counter() - t0) / reps)
    return best


def _field_times(backend: str, reps: int, rng: random.Random) -> dict:
    params = p256(backend=backend)
    ctx = params.ctx
    a = ctx.element(rng.getrandbits(256))
    b = ctx.element(rng.getrandbits(256))
    return {
        "mont_mul": _bench(lambda: a * b, reps),
        "square": _bench(lambda: square_mod(a), reps),
        "add": _bench(lambda: a + b, reps),
        "sub": _bench(lambda: a - b, reps),
        "inverse": _bench(lambda: inverse_mod(a), max(1, reps // 100)),
    }


def _kp_time(backend: str, bits: int, rng: random.Random) -> float:
    params = p256(backend=backend)
    base = AffinePoint(params.gx, params.gy)
    k = Scalar.from_int(rng.getrandbits(bits) | (1 << (bits - 1)), bits)
    t0 = time.perf_counter()
    kp_right_to_left(k, base, params)
    return time.perf_counter() - t0


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=20000,
                    help="repetitions per field operation")
    ap.add_argument("--kp-bits", type=int, default=64,
                    help="scalar width for the kP benchmark")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if not compiled_available():
        print("compiled backend not built; run pip install -e . first")
        return 1

    results = {}
    for backend in ("compiled", "pure"):
        rng = random.Random(args.seed)
        results[backend] = _field_times(backend, args.reps, rng)
        results[backend]["kp"] = _kp_time(backend, args.kp_bits, rng)

    print(f"{'operation':<10} {'compiled':>12} {'pure':>12} {'speedup':>9}")
    for op in ("mont_mul", "square", "add", "sub", "inverse", "kp"):
        c, p = results["compiled"][op], results["pure"][op]
        unit, scale = ("us", 1e6) if p < 1e-3 else ("ms", 1e3)
        print(f"{op:<10} {c * scale:>10.3f}{unit} {p * scale:>10.3f}{unit} "
              f"{p / c:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
