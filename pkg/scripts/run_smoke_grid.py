"""Run the two-cell smoke grid twice and verify the registries match byte-for-byte.

Usage:
    python scripts/run_smoke_grid.py --out runs/smoke
"""

from __future__ import annotations

import argparse
from pathlib import Path

from gridcast.cli import main as gridcast


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=5)
    parser.add_argument("--out", default="runs/smoke")
    parser.add_argument("--config", default="configs/smoke_grid.ini")
    args = parser.parse_args()

    payloads = []
    for tag in ("first", "second"):
        out = Path(args.out) / tag
        rc = gridcast(["grid", "--config", args.config, "--seed", str(args.seed), "--out", str(out)])
        if rc != 0:
            return rc
        payloads.append((out / "registry.jsonl").read_bytes())

    if payloads[0] == payloads[1]:
        print("registries are byte-identical")
        return 0
    print("registries differ!")
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
