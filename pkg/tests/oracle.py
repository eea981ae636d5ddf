"""Independent high-precision evaluation of the threshold formulas.

Written directly from the closed forms with mpmath, sharing no code with the
package, so frozen test values are not checked against themselves.
"""

import mpmath as mp

mp.mp.dps = 40


def thresholds(A, mu1, mu2, gamma, beta, eta, sigmas, atoms):
    """atoms: list of (weight, lam1, lam2, lam4)."""
    A, mu1, mu2, gamma, beta, eta = (mp.mpf(str(x)) for x in (A, mu1, mu2, gamma, beta, eta))
    s1, s2, s4 = (mp.mpf(str(x)) for x in sigmas)
    atoms = [tuple(mp.mpf(str(x)) for x in a) for a in atoms]
    out = {}
    t_star = beta * A / (mu1 * (mu2 + gamma))
    out["t_star"] = t_star
    c = min(mu2 + gamma, eta) if t_star <= 1 else max(mu2 + gamma, eta)
    out["upsilon"] = c * (mp.sqrt(t_star) - 1)
    pi = mp.mpf(0)
    for w, l1, l2, l4 in atoms:
        lo, hi = min(l2, l4), max(l2, l4)
        if lo > 0:
            pi += w * (mp.log(1 + lo) - lo)
        if hi <= 0:
            pi += w * (mp.log(1 + hi) - hi)
    out["pi_term"] = pi
    if s2 > 0 and s4 > 0:
        out["sigma_term"] = 1 / (2 * (1 / s2**2 + 1 / s4**2))
    lam = s1**2 + sum(w * l1**2 for w, l1, _, _ in atoms)
    out["lambda_term"] = lam
    out["chi2"] = 2 * mu1 - lam
    if "sigma_term" in out:
        out["theta"] = (out["upsilon"] + pi - out["sigma_term"]
                        + eta * mp.sqrt(t_star * lam / out["chi2"]))
    sb = []
    for k, s in enumerate((s1, s2, s4)):
        sb.append(s**2 / 2 + sum(a[0] * (a[k + 1] - mp.log(1 + a[k + 1])) for a in atoms))
    out["sbar1"], out["sbar2"], out["sbar4"] = sb
    x = A / (mu1 + sb[0])
    tt = beta * x / ((mu2 + gamma + sb[1]) + beta * x * sb[2] / eta)
    out["t_tilde"] = tt
    c1 = beta * x**2 * (eta + sb[2]) / (A * eta)
    out["c1"] = c1
    out["c2"] = beta * x / (eta + sb[2])
    out["c3"] = c1 * beta / eta
    out["persistence_lower_bound"] = (x / c1) * (1 - 1 / tt) if tt > 1 else mp.mpf(0)
    return {k: float(v) for k, v in out.items()}


def chi1p(A, mu1, mu2, gamma, beta, eta, sigmas, atoms, p):
    mu1, mu2, gamma, eta, p = (mp.mpf(str(x)) for x in (mu1, mu2, gamma, eta, p))
    vartheta = min(mu1, mu2 + gamma - eta, eta)
    sbar = max(mp.mpf(str(s)) ** 2 for s in sigmas)
    ell = mp.mpf(0)
    for w, *lams in atoms:
        lams = [mp.mpf(str(x)) for x in lams]
        vals = [(1 + lam) ** p - 1 - p * lam for lam in (max(lams), min(lams))]
        ell += mp.mpf(str(w)) * max(vals)
    return float(vartheta - (p - 1) / 2 * sbar - ell / p), float(ell)
