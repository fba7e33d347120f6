"""Brute-force parallelogram averaging, kept apart from the fast engine.

Reads and writes DMG1 grids with ``struct`` only and evaluates every window
by a direct double loop, so it can serve as an oracle for
:func:`dirmax.gridops.parallelogram_max`.

    dirmax-ref INPUT OUTPUT --alpha 0.375 --scales 1x1,2x4
"""

import argparse
import struct
import sys

MAGIC = b"DMAXGRD1"


def read_grid(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise ValueError("bad magic")
    n, L = struct.unpack("<Id", data[8:20])
    vals = struct.unpack("<%dd" % (n * n), data[20:20 + 8 * n * n])
    return n, L, [list(vals[i * n:(i + 1) * n]) for i in range(n)]


def write_grid(path, n, L, rows):
    flat = [v for row in rows for v in row]
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<Id", n, L) + struct.pack("<%dd" % (n * n), *flat))


def brute_parallelogram_max(rows, alpha, scales):
    n = len(rows)
    absf = [[abs(v) for v in row] for row in rows]
    out = [[0.0] * n for _ in range(n)]
    for d1, d2 in scales:
        count = (2 * d1 + 1) * (2 * d2 + 1)
        offs = [(i, round(i * alpha)) for i in range(-d1, d1 + 1)]
        for x1 in range(n):
            for x2 in range(n):
                total = 0.0
                for i, si in offs:
                    row = absf[(x1 + i) % n]
                    for j in range(-d2, d2 + 1):
                        total += row[(x2 + si + j) % n]
                v = total / count
                if v > out[x1][x2]:
                    out[x1][x2] = v
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(prog="dirmax-ref", description=__doc__.splitlines()[0])
    ap.add_argument("input")
    ap.add_argument("output")
    ap.add_argument("--alpha", type=float, required=True)
    ap.add_argument("--scales", required=True, help="comma-separated d1xd2 half-widths")
    args = ap.parse_args(argv)
    scales = [tuple(int(t) for t in item.lower().split("x")) for item in args.scales.split(",")]
    try:
        n, L, rows = read_grid(args.input)
    except (OSError, ValueError, struct.error) as exc:
        print(f"dirmax-ref: {exc}", file=sys.stderr)
        return 2
    write_grid(args.output, n, L, brute_parallelogram_max(rows, args.alpha, scales))
    return 0


if __name__ == "__main__":
    sys.exit(main())
