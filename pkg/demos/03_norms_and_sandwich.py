"""Constants, Luxemburg norms and the modular/seminorm sandwich.

    python3 demos/03_norms_and_sandwich.py

For a variable exponent the modular is not homogeneous, so the seminorm is
defined through a Luxemburg infimum.  With p between p_- and p_+ the modular
is trapped between the seminorm raised to those two powers.  The script
prints both sides for a few multiples of one bump.
"""

from varexp import Domain, bump, k_constant, lebesgue_norm, sandwich_check, sine_exponent

print("K_{n,p}: closed form vs. sphere quadrature")
for n in (1, 2, 3):
    for p in (1.5, 2.0, 3.0):
        k = k_constant(n, p)
        print(f"  n={n} p={p:<4} {k.value_gamma:.15f} {k.value_sphere:.15f} gap {k.rel_gap:.1e}")

dom, p = Domain.interval(-2, 2), sine_exponent(1)
print("\nscale   L^p norm      seminorm      lower        modular      upper")
for c in (0.25, 1.0, 4.0):
    u = bump(1, 1.0).scaled(c)
    lp = lebesgue_norm(u, dom, p)
    rep = sandwich_check(u, dom, 0.5, p)
    print(f"{c:5.2f} {lp.norm:13.9f} {rep.seminorm:13.9f} {rep.lower:12.6g} "
          f"{rep.modular:12.6g} {rep.upper:12.6g}  holds={rep.holds}")
