"""A function with an integrable gradient whose fractional modular is infinite.

    python3 demos/02_counterexample.py        # about 15 s

In the plane, u(x) = |x|^(-1/2) near the origin has |grad u|^(7/6) integrable,
so u sits in the first-order space with exponent 7/6.  The fractional exponent
p(x, y) equals 7/6 near the diagonal but climbs to 4 once |x - y| >= 3/4.
Far-apart pairs then see |u(x) - u(y)|^4 / |x - y|^(2 + 4s), and the piece
with y near the origin behaves like the integral of |y|^-2, which is
logarithmically divergent.

The run removes a ball of radius eps around the origin and lets eps shrink.
"""

import math

from varexp import counterexample_run

rep = counterexample_run()
print(f"{'eps':>8} {'log(1/eps)':>10} {'fractional':>12} {'gradient':>12}")
for e, m, g in zip(rep.cutoffs, rep.modulars, rep.sobolev_by_eps):
    print(f"{e:8.0e} {math.log(1 / e):10.3f} {m:12.5f} {g:12.8f}")
print(f"slope of fractional modular against log(1/eps): {rep.slope_vs_log:.4f}")
print(f"per-decade slopes: {', '.join(f'{s:.4f}' for s in rep.decade_slopes)}")
print(f"gradient modular relative change over the last decade: {rep.sobolev_change:.1e}")
print(f"verdict: {rep.verdict}")
print(f"exponent bins carrying the divergence: {rep.divergent_exponents}")
print(f"Luxemburg routine: {rep.not_in_space_message}")
