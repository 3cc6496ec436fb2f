"""Brute-force Rayleigh oracles, frozen into tests/acceptance.rs.

SINR ~ Exp(mean g). Values are computed by direct mpmath quadrature of the
conditional metric against the exponential density; the textbook closed
forms are printed alongside as a cross-check only.

    python3 rayleigh.py
"""
from mpmath import mp, mpf, quad, exp, log, e1, inf

mp.dps = 40


def dpsk_bep(g):
    # conditional DPSK BEP: exp(-x)/2
    return quad(lambda x: exp(-x) / 2 * exp(-x / g) / g, [0, 1, 10, inf])


def capacity(g):
    return quad(lambda x: log(1 + x, 2) * exp(-x / g) / g, [0, g, 10 * g, 100 * g, inf])


for g in (mpf("0.1"), mpf(1), mpf(10)):
    b, c = dpsk_bep(g), capacity(g)
    b_ref = 1 / (2 * (1 + g))
    c_ref = exp(1 / g) * e1(1 / g) / log(2)
    assert abs(b - b_ref) < mpf("1e-30") and abs(c - c_ref) < mpf("1e-30")
    print(f"gamma={mp.nstr(g, 3)} dpsk_bep={mp.nstr(b, 20)} capacity={mp.nstr(c, 20)}")
