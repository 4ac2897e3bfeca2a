"""Moduli of continuity and the theta weight.

A log-power modulus is much weaker than any Holder modulus, and the
weight theta built from it grows only like a power of log r.  This
script prints a few values side by side and fits the growth exponent.
"""
import numpy as np

from calderon_dini.modulus import (ModulusSpec, ThetaWeight, dini_integral, eval_modulus,
                                   eval_theta, square_dini_constant)

logp = ModulusSpec("log-power", 2.0)
hold = ModulusSpec("holder", 0.5)

print("   r        log-power(2)   holder(1/2)")
for r in (1e-1, 1e-3, 1e-6, 1e-12):
    print(f"{r:8.0e}   {eval_modulus(logp, r):12.5g}   {eval_modulus(hold, r):12.5g}")

# Dini condition: int_0 omega(r)/r dr is finite for exponent > 1, so the
# truncated integral settles as delta -> 0 (limit 1/log 2 = 1.4427)
print()
for delta in (1e-3, 1e-10, 1e-100):
    print(f"Dini integral down to {delta:.0e}: {dini_integral(logp, delta):.6f}")

w = ThetaWeight(ModulusSpec("log-power", 1.2))
r = np.logspace(1, 4, 7)
th = np.array([eval_theta(w, x) for x in r])
print("\ntheta for beta = 1.2")
for x, t in zip(r, th):
    print(f"  theta({x:9.1f}) = {t:10.4f}")

slope = np.polyfit(np.log(np.log(r)), np.log(th), 1)[0]
print(f"local slope of log theta against log log r: {slope:.3f}")

print("square-Dini constant (alpha 2, beta 1.2):", square_dini_constant(2.0, 1.2))
