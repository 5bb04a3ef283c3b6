"""Extended-precision reference values for the closed-form constants."""
import mpmath as mp

DPS = 50


def constants_oracle(lam, Lam, N, mu, p=None):
    with mp.workdps(DPS):
        lam, Lam, mu = mp.mpf(lam), mp.mpf(Lam), mp.mpf(mu)
        Np = lam / Lam * (N - 1) + 1
        Nm = Lam / lam * (N - 1) + 1
        tau = (Np - 2) / 2
        disc = mp.sqrt(tau**2 - mu / Lam)
        tp, tm = tau + disc, tau - disc
        out = {
            "Ntilde_plus": Np, "Ntilde_minus": Nm, "tau": tau, "lambda_bar": Lam * tau**2,
            "tau_plus": tp, "tau_minus": tm, "p_star": 1 + 2 / tp, "p_star_star": 1 + 2 / tm,
            "K_bar": (Lam * tm * (tau - tm)) ** (tm / 2),
            "tau_minus_operator": (Nm - 2) / 2, "lambda_bar_minus_operator": lam * ((Nm - 2) / 2) ** 2,
        }
        if p is not None:
            p = mp.mpf(p)
            g = 2 / (p - 1)
            out["lambda1"], out["lambda2"] = g - tp, g - tm
            prod = Lam * (g - tp) * (g - tm)
            if prod > 0:
                out["K_opt"] = prod ** (1 / (p - 1))
        return out


def significant_digits(x, ref):
    with mp.workdps(DPS):
        ref = mp.mpf(ref)
        if ref == 0:
            return mp.inf if x == 0 else -mp.log10(abs(mp.mpf(x)))
        err = abs(mp.mpf(x) - ref) / abs(ref)
        return mp.inf if err == 0 else -mp.log10(err)
