#!/usr/bin/env python3
"""Generate frozen high-precision reference values for the test suite.

Outputs C++ initializer-list fragments. Requires mpmath.
"""
import mpmath as mp

mp.mp.dps = 50


def fmt(v):
    return mp.nstr(v, 22, strip_zeros=False)


def airy_row(x):
    ai = mp.airyai(x)
    bi = mp.airybi(x)
    aip = mp.airyai(x, 1)
    bip = mp.airybi(x, 1)
    return ai, bi, aip, bip


def envelope(x):
    # oscillation envelope scale ~ |x|^{-1/4} (negative side), smooth positive side
    ax = abs(x)
    return ax ** mp.mpf("-0.25") if ax > 1 else mp.mpf(1)


def good_point(x):
    if abs(x) < 0.05:
        return True
    ai, bi, aip, bip = airy_row(x)
    env = envelope(x)
    envp = 1 / env
    if x > 0:
        return True  # no zeros on the positive axis
    return (abs(ai) > 0.02 * env and abs(bi) > 0.02 * env
            and abs(aip) > 0.02 * envp and abs(bip) > 0.02 * envp)


# --- 64-point grid spanning [-20, 10], denser near the +-8 cutoff ---
pts = []
x = mp.mpf(-19.85)
while x < -0.3 and len(pts) < 34:
    pts.append(x)
    x += mp.mpf("0.6")
extra = [mp.mpf(s) for s in
         ("-8.25", "-8.05", "-7.95", "-7.72", "-0.11", "0.13",
          "7.75", "7.95", "8.05", "8.25",
          "-14.15", "-5.15", "1.27", "4.27", "9.67")]
pos = [mp.mpf("0.6") * k + mp.mpf("0.37") for k in range(16)]  # 0.37 .. 9.37
pts = pts + extra + pos
# nudge away from zeros
fixed = []
for x in pts:
    t = x
    while not good_point(t):
        t += mp.mpf("0.07")
    fixed.append(t)
fixed = sorted(set(fixed))
print(f"// {len(fixed)} airy grid points")
print("// {x, Ai, Bi, Ai', Bi'}")
print("static constexpr AiryRef kAiryRef[] = {")
for x in fixed:
    ai, bi, aip, bip = airy_row(x)
    print(f"    {{{fmt(x)}, {fmt(ai)}, {fmt(bi)}, {fmt(aip)}, {fmt(bip)}}},")
print("};")

print()
print("// Airy at 0 and first zero of Ai")
print("ai0  =", fmt(mp.airyai(0)))
print("bi0  =", fmt(mp.airybi(0)))
print("aip0 =", fmt(mp.airyai(0, 1)))
print("bip0 =", fmt(mp.airybi(0, 1)))
print("ai_zero1 =", fmt(mp.findroot(mp.airyai, -2.338)))

print()
print("// erfc reference: {x, erfc(x)}")
print("static constexpr Pair kErfcRef[] = {")
for x in ["-3", "-1", "-0.5", "0", "0.5", "1", "2", "5", "10", "26"]:
    print(f"    {{{x}, {fmt(mp.erfc(mp.mpf(x)))}}},")
print("};")

print()
print("// log_gamma reference: {x, lgamma(x)}")
print("static constexpr Pair kLgammaRef[] = {")
for x in ["0.1", "0.5", "1.0", "1.5", "2.5", "10.3", "41.7", "171.6"]:
    print(f"    {{{x}, {fmt(mp.loggamma(mp.mpf(x)))}}},")
print("};")

print()
print("// Gamma((1+chi)/2) for chi = 0..4")
for chi in range(5):
    print(f"chi={chi}:", fmt(mp.gamma(mp.mpf(1 + chi) / 2)))

print()
print("// integral of p over [-3,3] for chi in {0,1,2,4}")
for chi in [0, 1, 2, 4]:
    f = lambda t: t ** chi * mp.exp(-t * t) / mp.gamma(mp.mpf(1 + chi) / 2)
    v = 2 * mp.quad(f, [0, 3])
    print(f"chi={chi}:", fmt(v))

print()
print("// Parseval ||f*||^2_p = Gamma((chi-2xi+1)/2)/Gamma((chi+1)/2)")
for chi, xi in [(0, 0), (1, 0), (2, 0), (2, mp.mpf("0.5")), (4, 1),
                (1, mp.mpf("0.25"))]:
    v = mp.gamma((chi - 2 * xi + 1) / mp.mpf(2)) / mp.gamma((chi + 1) / mp.mpf(2))
    print(f"chi={chi} xi={xi}:", fmt(v))

print()
print("// replica two-mode root: lambdas {1, 0.1}, P=1, ridge=0.5")
g = lambda t: 1 / (1 + 1 / (mp.mpf("0.5") + t)) + 1 / (10 + 1 / (mp.mpf("0.5") + t)) - t
print("t_root =", fmt(mp.findroot(g, mp.mpf("0.7"))))

print()
print("// erf(3) etc for sampler CDF tests")
print("erf3 =", fmt(mp.erf(3)))
