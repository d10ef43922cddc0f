"""High-precision reference values for the exponent engine and scalar kernels.

Run with `python3 tools/exponent_oracle.py`; the printed values are frozen
into the Rust unit tests.
"""
from mpmath import mp, mpf, fsum

mp.dps = 40


def derive(n, alpha, p):
    alpha = mpf(alpha)
    p = sorted(mpf(x) for x in p)
    pbar = n / fsum(1 / x for x in p)
    lam1 = n * (pbar - (alpha + 1)) + pbar
    lam_v = n * (pbar - (alpha + 1)) + alpha * pbar
    supp = [(n * (pbar - x) + pbar) / (lam1 * x) for x in p]
    supp_mass = [pbar * (x - alpha - 1) / (lam1 * x) for x in p]
    a_v = n / lam_v
    ss = [(1 - a_v * (x - 1 - alpha)) / x for x in p]
    big_p = max(alpha + 1, p[-1])
    return dict(
        pbar=pbar,
        lam1=lam1,
        decay=n / lam1,
        gain=pbar / lam1,
        supp=supp,
        supp_mass=supp_mass,
        m_threshold=(n / pbar) * (alpha + 1 - pbar),
        lambda_small=big_p - (n / pbar) * (pbar * (1 + (alpha + 1) / n) - big_p),
        supercritical=pbar > n * (alpha + 1) / (n + alpha + 1),
        slow=(alpha + 1 < p[0]) and (p[-1] < pbar * (1 + alpha / n)) and (pbar * (1 + alpha / n) < n + alpha),
        conserved_decay=a_v,
        conserved_supp=ss,
    )


for case in [(2, 1, [2, 2]), (3, 0.5, [2.2, 2.4, 2.6]), (2, 0.5, [1.7, 1.9]), (2, 0.8, [2.2, 2.4]), (1, 0.5, [1.7])]:
    d = derive(*case)
    print(case)
    for k, v in d.items():
        if isinstance(v, list):
            print("  ", k, [mp.nstr(x, 17) for x in v])
        else:
            print("  ", k, mp.nstr(v, 17) if not isinstance(v, bool) else v)


def b_alpha(v, w, a):
    v, w, a = mpf(v), mpf(w), mpf(a)
    sp = lambda x, g: (abs(x) ** g) * (1 if x > 0 else -1) if x != 0 else mpf(0)
    return a / (a + 1) * (abs(v) ** (a + 1) - abs(w) ** (a + 1)) - w * (sp(v, a) - sp(w, a))


print("b_alpha(2,-1,0.5) =", mp.nstr(b_alpha(2, -1, 0.5), 20))
print("b_alpha(1,0,0.5) =", mp.nstr(b_alpha(1, 0, 0.5), 20))
