"""Watch the fractional modular of a smooth bump approach its local limit.

    python3 demos/01_bbm_limit.py

The bump lives on (-1, 1) inside the interval (-2, 2) and the exponent is the
shipped log-Hölder field 2 + 0.5 sin(x + y).  As s grows toward 1 the scaled
double integral closes in on the weighted gradient integral; the last column
shows the gap shrinking by roughly a factor of ten per decade of 1 - s.
"""

from varexp import Domain, bbm_sweep, bump, sine_exponent

rep = bbm_sweep(bump(1, 1.0), Domain.interval(-2, 2), sine_exponent(1))
print(f"local limit      {rep.local_limit.value:.12f}  (+/- {rep.local_limit.error_estimate:.1e})")
print(f"{'s':>8} {'modular':>16} {'error est.':>11} {'rel. gap':>10}")
for s, m, e in zip(rep.s_values, rep.modulars, rep.rel_errors):
    print(f"{s:8.3f} {m.value:16.12f} {m.error_estimate:11.1e} {e:10.2e}")
print(f"Richardson guess {rep.extrapolated_limit:.12f}  (gap {rep.extrapolated_rel_error:.1e})")
print(f"converging: {rep.converging}")
print(rep.note)
