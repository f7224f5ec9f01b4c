#!/usr/bin/env python3
"""Recompute the modulus-of-continuity constants in src/stochqi/holder_constants.json.

trig3:  max |grad f| on a 200^3 grid; the analytic value is 2*pi.
sine11: f is a product of 1-D factors bounded by 1, so
        |f(x) - f(y)| <= sum_j |g_j(x_j) - g_j(y_j)|.
        Factors j=1..10 are Lipschitz (constant L_j, grid max of |g_j'|);
        g_11(t) = cos(pi t / 2)^(5/11) vanishes at t=1 and is only Holder-5/11
        there, with constant C_11 (grid sup over pairs). For h <= 1 this gives
        omega(h) <= (|L|_2 + C_11) h^(5/11); for h > 1 the same expression is
        >= 1 >= osc f.

Usage: python scripts/compute_holder_constants.py [--write]
"""
import argparse
import json
import math
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "stochqi" / "holder_constants.json"
MARGIN = 1.0 + 1e-6


def trig3_grid_lipschitz(m=200):
    t = np.linspace(0.0, 1.0, m)
    a = 2 * np.pi * t
    sa, ca = np.sin(a), np.cos(a)
    # |grad f|^2 / (2 pi)^2 = ca^2 cb^2 sc^2 + sa^2 sb^2 sc^2 + sa^2 cb^2 cc^2
    A = ca[:, None, None] ** 2 * ca[None, :, None] ** 2 * sa[None, None, :] ** 2
    B = sa[:, None, None] ** 2 * sa[None, :, None] ** 2 * sa[None, None, :] ** 2
    C = sa[:, None, None] ** 2 * ca[None, :, None] ** 2 * ca[None, None, :] ** 2
    return 2 * np.pi * float(np.sqrt(np.max(A + B + C)))


def sine11_factor_lipschitz(j, m=2_000_001):
    x = np.linspace(0.0, 1.0, m)
    theta = 0.5 * np.pi * (x + j / 11.0)
    s = np.sin(theta)
    dg = (5.0 / j) * 0.5 * np.pi * s ** (5.0 / j - 1.0) * np.cos(theta)
    return float(np.max(np.abs(dg)))


def sine11_last_holder(m=4001):
    p = 5.0 / 11.0
    x = np.linspace(0.0, 1.0, m)
    g = np.maximum(np.cos(0.5 * np.pi * x), 0.0) ** p
    dx = np.abs(x[:, None] - x[None, :])
    dg = np.abs(g[:, None] - g[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dx > 0, dg / dx**p, 0.0)
    # limit at the endpoint: g(t) ~ (pi/2 (1 - t))^p
    return max(float(ratio.max()), (0.5 * np.pi) ** p)


def compute():
    trig = trig3_grid_lipschitz()
    lj = [sine11_factor_lipschitz(j) for j in range(1, 11)]
    c11 = sine11_last_holder()
    sine_const = (math.sqrt(sum(v * v for v in lj)) + c11) * MARGIN
    return {
        "absx": {"constant": 1.0, "exponent": 1.0},
        "trig3": {"constant": 2.0 * math.pi, "exponent": 1.0, "grid_max_grad": trig},
        "sine11": {
            "constant": sine_const,
            "exponent": 5.0 / 11.0,
            "factor_lipschitz": lj,
            "last_factor_holder": c11,
        },
        "one": {"constant": 0.0, "exponent": 1.0},
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--write", action="store_true", help="overwrite the checked-in constants file")
    args = ap.parse_args()
    data = compute()
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    print(text)
    if args.write:
        OUT.write_text(text)
        print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
