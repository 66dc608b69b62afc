#!/usr/bin/env python3
"""Phase structure of the single-species model.

Walks the coupling axis at zero field: below J=1 the only equilibrium is
the disordered one, above J=1 a spontaneous magnetization pair appears.
The pressure stays smooth but its second J-derivative jumps by 3/2 at
the transition, and mu0 grows like sqrt(3 (1 - 1/J)) just above it.
"""

import math

import numpy as np

from meanfield_lab import (
    ModelSpec,
    classify_maximum,
    cw_phase_scan,
    pressure_limit,
    solve_fixed_points,
    validate_model,
)


def cw(J, h=0.0):
    return validate_model(ModelSpec(n=1, alpha=(1.0,), J=((J,),), h=(h,)))


print("=== Equilibria across the transition (h = 0) ===")
for J in (0.6, 0.9, 1.0, 1.1, 1.4):
    points = solve_fixed_points(cw(J))
    xs = ", ".join(f"{p.x[0]:+.6f}" for p in points)
    print(f"  J = {J:4.2f}: {len(points)} fixed point(s) at [{xs}]")

print("\n=== Classified maxima ===")
for J, h in ((0.8, 0.0), (1.0, 0.0), (1.4, 0.0), (1.4, 0.05)):
    res = pressure_limit(cw(J, h))
    for cls in res.maxima:
        lam = f"{cls.strength:.6f}" if cls.strength is not None else "n/a"
        print(f"  J = {J:4.2f}, h = {h:+.2f}: maximum at {cls.point.x[0]:+.6f}"
              f"  type k = {cls.k}, strength = {lam}")

print("\n=== Pressure scan (h = 0) ===")
grid = np.round(np.arange(0.90, 1.21, 0.02), 10)
table = cw_phase_scan(grid, 0.0)
print(f"  {'J':>6} {'mu0':>10} {'pressure':>12} {'dp/dJ':>10} {'d2p/dJ2':>10}")
for i, J in enumerate(table["J"]):
    d2 = table["d2p"][i]
    d2s = f"{d2:10.4f}" if math.isfinite(d2) else " " * 10
    print(f"  {J:6.2f} {table['mu'][i]:10.6f} {table['pressure'][i]:12.8f} "
          f"{table['dp_dJ'][i]:10.6f} {d2s}")

print("\n=== Critical scaling just above J = 1 ===")
for J in (1.001, 1.002, 1.005, 1.01):
    mu0 = max(p.x[0] for p in solve_fixed_points(cw(J)))
    ratio = mu0 / math.sqrt(3.0 * (1.0 - 1.0 / J))
    print(f"  J = {J:6.3f}: mu0 = {mu0:.6f}, mu0 / sqrt(3(1-1/J)) = {ratio:.5f}")

print("\nAt the critical point itself the maximum flattens from quadratic")
print("to quartic:")
cls = classify_maximum(cw(1.0), solve_fixed_points(cw(1.0))[0])
print(f"  J = 1: k = {cls.k}, strength = {cls.strength:.3f}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(table["J"], table["mu"], "o-")
    ax1.set_xlabel("J")
    ax1.set_ylabel("spontaneous magnetization")
    ax2.plot(table["J"], table["pressure"], "o-")
    ax2.set_xlabel("J")
    ax2.set_ylabel("pressure limit")
    fig.tight_layout()
    fig.savefig("phase_transition.png", dpi=120)
    print("\nWrote phase_transition.png")
except ImportError:
    pass
