"""Acceptance criteria 1-9.  Each test prints one PASS/FAIL line (visible in
``pytest -v`` output) and then asserts the same condition."""

import math
import sys
import time

import numpy as np
import pytest

from varexp import (Domain, QuadratureSpec, bbm_sweep, bump, counterexample_run,
                    far_field_decay, fractional_modular, k_constant, linear_field,
                    majorant_check, make_constant_exponent, pointwise_limit_study,
                    sandwich_check, sine_exponent)
from varexp.exponent import counterexample_profile, lipschitz_distance_exponent, make_radial_exponent
from varexp.fields import tent_field

P2 = make_constant_exponent(2, 1)
BUMP_DOMAIN = Domain.interval(-2, 2)

# Independent oracles, computed once with mpmath at 30 digits and frozen.
# K_{1,2} int |u'|^2 for the unit bump:
BUMP_P2_LIMIT = 0.409587060752770128
# int K_{1,pbar(x)} |u'|^pbar(x) for the unit bump with the sine exponent:
BUMP_SINE_N1_LIMIT = 0.466400557697747184
# the same in n = 2 (bump of radius 1 on ball(2)):
BUMP_SINE_N2_LIMIT = 1.52357510527603301


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        return ok
    return emit


def strictly_decreasing(seq):
    return all(b < a for a, b in zip(seq, seq[1:]))


def test_criterion_1_k_constant_routes(verdict):
    t0 = time.perf_counter()
    gaps = [k_constant(n, p).rel_gap for n in (1, 2, 3) for p in (1.1, 1.5, 2, 3, 3.7, 7 / 6)]
    dt = time.perf_counter() - t0
    ok = max(gaps) < 1e-8 and dt < 1.0
    assert verdict(1, ok, f"max rel gap {max(gaps):.2e} over 18 pairs in {dt:.3f}s")


def test_criterion_2_linear_oracle(verdict):
    t0 = time.perf_counter()
    errs = []
    for s in (0.3, 0.5, 0.9, 0.99):
        v = fractional_modular(linear_field(1), Domain.interval(0, 1), s, P2).value
        errs.append(abs(v - s / (3 - 2 * s)) / (s / (3 - 2 * s)))
    dt = time.perf_counter() - t0
    ok = max(errs) < 1e-6 and dt < 10
    assert verdict(2, ok, f"max rel error {max(errs):.2e} in {dt:.2f}s")


def test_criterion_3_constant_exponent_bbm(verdict):
    t0 = time.perf_counter()
    rep = bbm_sweep(bump(1, 1.0), BUMP_DOMAIN, P2)
    dt = time.perf_counter() - t0
    lim_err = abs(rep.local_limit.value - BUMP_P2_LIMIT) / BUMP_P2_LIMIT
    tail = rep.rel_errors[-3:]
    ok = (rep.s_values[-3:] == [0.9, 0.99, 0.999] and strictly_decreasing(tail)
          and tail[-1] < 0.02 and rep.extrapolated_rel_error < 0.01 and dt < 120
          and lim_err < 1e-9)
    assert verdict(3, ok, f"rel errors {[f'{e:.3g}' for e in tail]}, extrapolated "
                          f"{rep.extrapolated_rel_error:.2e}, limit vs oracle {lim_err:.1e}, {dt:.1f}s")


def test_criterion_4_variable_exponent_bbm(verdict):
    t0 = time.perf_counter()
    r1 = bbm_sweep(bump(1, 1.0), BUMP_DOMAIN, sine_exponent(1))
    r2 = bbm_sweep(bump(2, 1.0), Domain.ball(2, 2.0), sine_exponent(2))
    dt = time.perf_counter() - t0
    e1 = abs(r1.local_limit.value - BUMP_SINE_N1_LIMIT) / BUMP_SINE_N1_LIMIT
    e2 = abs(r2.local_limit.value - BUMP_SINE_N2_LIMIT) / BUMP_SINE_N2_LIMIT
    ok = (r1.converging and r1.rel_errors[-1] < 0.05 and r2.converging
          and r2.rel_errors[-1] < 0.08 and dt < 900 and max(e1, e2) < 1e-7)
    assert verdict(4, ok, f"n=1 final {r1.rel_errors[-1]:.3g} (converging {r1.converging}), "
                          f"n=2 final {r2.rel_errors[-1]:.3g} (converging {r2.converging}), "
                          f"limits vs oracle {max(e1, e2):.1e}, {dt:.0f}s")


def test_criterion_5_pointwise_limit(verdict):
    study = pointwise_limit_study(bump(1, 1.0), [0.3, 0.5, 0.7], BUMP_DOMAIN, sine_exponent(1))
    finals = [r.rel_errors[-1] for r in study.rows]
    ok = not study.flagged and study.s_values[-1] == 0.999 and max(finals) < 0.05
    assert verdict(5, ok, f"final rel errors {[f'{e:.3g}' for e in finals]}, "
                          f"non-monotone points {study.flagged}")


def test_criterion_6_decay_and_majorant(verdict):
    dom = Domain.interval(-32, 32)
    dec = far_field_decay(bump(1, 1.0), dom, P2, s0=0.5, radii=(4, 8, 16))
    maj = majorant_check(bump(1, 1.0), dom, P2, s0=0.5, s_list=(0.9, 0.99),
                         sample_points=(4, 8, 16))
    ok = dec.ok and maj.ok
    assert verdict(6, ok, f"decay exponent {dec.exponent:.3f} vs bound {0.9 * dec.reference:.3f}; "
                          f"majorant violations {len(maj.violations)}")


def test_criterion_7_counterexample(verdict):
    t0 = time.perf_counter()
    rep = counterexample_run(2, 1.5, 7 / 6, 4.0, (1e-2, 1e-3, 1e-4), 0.5)
    dt = time.perf_counter() - t0
    a, b = rep.decade_slopes
    stable = a > 0 and b > 0 and abs(b - a) <= 0.2 * max(a, b)
    ok = (rep.sobolev_change < 0.01 and rep.slope_vs_log > 0 and stable
          and rep.verdict == "diverges-log" and rep.not_in_space and dt < 600)
    assert verdict(7, ok, f"Sobolev change {rep.sobolev_change:.1e}, decade slopes {a:.3f}/{b:.3f}, "
                          f"not in space {rep.not_in_space}, {dt:.1f}s")


def _sandwich_trials(count=20, seed=20261015):
    rng = np.random.default_rng(seed)
    fields_1d = [("bump", lambda r: bump(1, r), BUMP_DOMAIN),
                 ("tent", lambda r: tent_field(1, r), BUMP_DOMAIN)]
    trials = []
    for i in range(count):
        s = float(rng.uniform(0.2, 0.9))
        c = float(np.exp(rng.uniform(math.log(0.2), math.log(5))))
        if i < 14:
            name, make, dom = fields_1d[i % 2]
            u = make(float(rng.uniform(0.5, 1.5))).scaled(c)
            kind = i % 3
            if kind == 0:
                p, pname = sine_exponent(1), "sine"
            elif kind == 1:
                p, pname = lipschitz_distance_exponent(1), "lipdist"
            else:
                lo = float(rng.uniform(1.2, 2.0))
                p = make_radial_exponent(counterexample_profile(lo, lo + float(rng.uniform(0.3, 1.5))), 1)
                pname = "radial"
            trials.append((f"n1-{name}-{pname}", u, dom, s, p))
        else:
            lo = float(rng.uniform(1.3, 2.0))
            p = make_radial_exponent(counterexample_profile(lo, lo + float(rng.uniform(0.3, 1.2))), 2)
            trials.append(("n2-bump-radial", bump(2, 1.0).scaled(c), Domain.ball(2, 2.0), s, p))
    return trials


def test_criterion_8_sandwich(verdict):
    results = []
    for label, u, dom, s, p in _sandwich_trials():
        rep = sandwich_check(u, dom, s, p)
        results.append((label, rep.holds, abs(rep.modular_at_norm - 1)))
    failed = [r[0] for r in results if not r[1]]
    worst = max(r[2] for r in results)
    ok = not failed and worst <= 1e-6 and len(results) == 20
    assert verdict(8, ok, f"{len(results) - len(failed)}/20 triples hold, "
                          f"max |modular_at_norm - 1| = {worst:.1e}")


def _fingerprint(workers):
    spec = QuadratureSpec(workers=workers)
    lin = [fractional_modular(linear_field(1), Domain.interval(0, 1), s, P2, spec)
           for s in (0.3, 0.5, 0.9, 0.99)]
    sweep = bbm_sweep(bump(1, 1.0), BUMP_DOMAIN, sine_exponent(1), spec=spec)
    ce = counterexample_run(spec=spec)
    vals = ([r.value for r in lin] + [r.error_estimate for r in lin]
            + [m.value for m in sweep.modulars] + [sweep.local_limit.value]
            + ce.modulars + ce.errors + ce.sobolev_by_eps)
    return [float(v).hex() for v in vals]


def test_criterion_9_determinism(verdict):
    prints = {w: _fingerprint(w) for w in (1, 2, 8)}
    ok = prints[1] == prints[2] == prints[8]
    assert verdict(9, ok, f"{len(prints[1])} values from criteria 2, 4 and 7 "
                          f"{'identical' if ok else 'differ'} under 1, 2 and 8 workers")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
