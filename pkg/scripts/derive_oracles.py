"""Independent extended-precision oracles for the frozen test constants.

Nothing here imports the package under test.  Run with ``python3
scripts/derive_oracles.py``; the printed values are copied into
``tests/oracle_values.py``.
"""

import mpmath as mp

mp.mp.dps = 40


def bump(t):
    t = mp.mpf(t)
    if not (mp.mpf(1) / 2 < t < 2):
        return mp.mpf(0)
    u = mp.log(t, 2)
    return mp.e ** (1 - 1 / (1 - u * u))


def band(j):
    return range(2 ** (j - 1), 2 ** (j + 1) + 1)


def weight(ell, j, alpha):
    return bump(mp.mpf(ell) / 2 ** j) ** 2 * (2 * ell + 1) / (4 * mp.pi) * mp.mpf(ell) ** (-alpha)


def band_norm(j, alpha):
    return mp.fsum(weight(l, j, alpha) for l in band(j))


def lam(j, alpha):
    return mp.fsum(weight(l, j, alpha) * l * (l + 1) / 2 for l in band(j)) / band_norm(j, alpha)


def legendre_rodrigues(ell, x):
    # explicit sum P_l(x) = 2^-l sum_k (-1)^k C(l,k) C(2l-2k,l) x^(l-2k)
    x = mp.mpf(x)
    return mp.fsum((-1) ** k * mp.binomial(ell, k) * mp.binomial(2 * ell - 2 * k, ell)
                   * x ** (ell - 2 * k) for k in range(ell // 2 + 1)) / 2 ** ell


def real_ylm(ell, m, theta, phi):
    # orthonormal, no Condon-Shortley phase
    x = mp.cos(theta)
    plm = mp.legenp(ell, m, x) * (-1) ** m  # mpmath includes the (-1)^m phase
    norm = mp.sqrt((2 * ell + 1) / (4 * mp.pi) * mp.factorial(ell - m) / mp.factorial(ell + m))
    return mp.sqrt(2) * norm * plm * mp.cos(m * phi)


def rho(j, alpha, theta):
    num = mp.fsum(weight(l, j, alpha) * legendre_rodrigues(l, mp.cos(theta)) for l in band(j))
    return num / band_norm(j, alpha)


def main():
    print("band_norm_j4", mp.nstr(band_norm(4, 2.5), 17))
    print("lambda_j5", mp.nstr(lam(5, 2.5), 17))
    ff = mp.fsum((2 * l + 1) / (4 * mp.pi) * mp.mpf(l) ** -3 * l * (l + 1) / 2 for l in range(1, 101))
    print("full_lambda_a3_100", mp.nstr(ff, 17))
    print("P10_0.3", mp.nstr(legendre_rodrigues(10, mp.mpf("0.3")), 17))
    print("Y42", mp.nstr(real_ylm(4, 2, mp.mpf("1.1"), mp.mpf("0.7")), 17))
    phi1 = mp.quad(lambda t: mp.e ** (-t * t / 2) / mp.sqrt(2 * mp.pi), [0, 1]) + mp.mpf(1) / 2
    print("Phi1", mp.nstr(phi1, 17))
    th = mp.mpf("0.01")
    hilb = mp.sqrt(th / mp.sin(th)) * mp.besselj(0, (10 + mp.mpf(1) / 2) * th)
    print("hilb_res_10_0.01", mp.nstr(legendre_rodrigues(10, mp.cos(th)) - hilb, 17))
    print("rho_j5_0.01", mp.nstr(rho(5, 2.5, mp.mpf("0.01")), 20))
    print("one_minus_rho_j5_0.01", mp.nstr(1 - rho(5, 2.5, mp.mpf("0.01")), 17))
    u, lj = mp.mpf(3), mp.mpf(100)
    pdf = mp.e ** (-u * u / 2) / mp.sqrt(2 * mp.pi)
    sf = mp.erfc(u / mp.sqrt(2)) / 2
    print("ec_3_100", mp.nstr(2 * (sf + u * pdf * lj), 17))
    print("ec_l0_3_100", mp.nstr(2 * sf + 4 * mp.pi * lj * u * pdf / mp.sqrt((2 * mp.pi) ** 3), 17))
    print("j0_zero", mp.nstr(mp.findroot(lambda x: mp.besselj(0, x), 2.4), 17))
    for z in (1, 3, mp.mpf("0.1")):
        sfz = mp.quad(lambda t: mp.e ** (-t * t / 2) / mp.sqrt(2 * mp.pi), [z, mp.inf])
        print("sf", z, mp.nstr(sfz, 17))


if __name__ == "__main__":
    main()
