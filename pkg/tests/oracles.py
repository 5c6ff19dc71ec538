"""Independent reference computations used to freeze expected values.

Nothing here imports the package's numerical code.  The annulus oracle
solves the transmission problem per Fourier mode straight from the interface
conditions (piecewise ``r^m``, ``r^-m`` ansatz) in extended precision.
"""
from __future__ import annotations

import mpmath as mp

mp.mp.dps = 40


def dipole_coeff(n, y, r_e):
    """``g_n`` of ``-dF/dr`` on ``|x| = r_e`` for a unit x-dipole at ``(y, 0)``.

    Computed by quadrature of the Newtonian potential's radial derivative.
    """
    y, r_e = mp.mpf(y), mp.mpf(r_e)

    def minus_dFdr(t):
        x = r_e * mp.cos(t)
        yy = r_e * mp.sin(t)
        dx, dy = x - y, yy
        d2 = dx * dx + dy * dy
        # F = (x - y) / (2 pi |x - y|^2)
        Fx = (d2 - 2 * dx * dx) / (2 * mp.pi * d2**2)
        Fy = (-2 * dx * dy) / (2 * mp.pi * d2**2)
        return -(Fx * mp.cos(t) + Fy * mp.sin(t))

    return mp.quad(lambda t: minus_dFdr(t) * mp.expj(-n * t), [0, mp.pi / 2, mp.pi, 3 * mp.pi / 2, 2 * mp.pi]) / (2 * mp.pi)


def dipole_coeff_closed(n, y, r_e):
    """Laurent expansion of ``1 / (2 pi (X - y))``: ``g_n = n r_e^(n-1) / (4 pi y^(n+1))``."""
    n, y, r_e = mp.mpf(n), mp.mpf(y), mp.mpf(r_e)
    return n * r_e ** (n - 1) / (4 * mp.pi * y ** (n + 1))


def mode_solution(m, g, delta, r_i, r_e):
    """Interface-scaled coefficients ``(a, b, k, s, d)`` of the mode-``m`` field.

    ``V = a (r/r_i)^m`` in the core, ``b (r/r_e)^m + k (r_i/r)^m`` in the
    shell and ``s (r/r_e)^m + d (r_e/r)^m`` outside, where ``s (r/r_e)^m`` is
    the incident part fixed by ``-dF/dr = g`` on ``r = r_e``.  Shell
    permittivity is ``-1 + i delta``; core and exterior have permittivity one.
    Scaling by the interface radii keeps every entry O(1) or a power ``rho^m``.
    """
    m = mp.mpf(m)
    r_i, r_e = mp.mpf(r_i), mp.mpf(r_e)
    p = (r_i / r_e) ** m
    eps = mp.mpc(-1, delta)
    s = -g * r_e / m
    # continuity and flux at r_i (flux multiplied by r_i / m), then at r_e
    M = mp.matrix(
        [
            [1, -p, -1, 0],
            [1, -eps * p, eps, 0],
            [0, 1, p, -1],
            [0, eps, -eps * p, 1],
        ]
    )
    rhs = mp.matrix([0, 0, s, s])
    a, b, k, d = mp.lu_solve(M, rhs)
    return a, b, k, s, d


def shell_energy(m, b, k, delta, r_i, r_e):
    """``delta * int_shell |grad V_m|^2`` for ``V_m = (b (r/r_e)^m + k (r_i/r)^m) e^(i m theta)``.

    The cross term between the two radial powers integrates to zero.
    """
    m = mp.mpf(m)
    p2 = (mp.mpf(r_i) / r_e) ** (2 * m)
    return 2 * mp.pi * delta * m * (abs(b) ** 2 + abs(k) ** 2) * (1 - p2)


def dipole_energies(delta, y, r_i=1, r_e=2, m_max=400):
    """Full and layer-only shell energy for a unit x-dipole at ``(y, 0)``.

    Both signs of ``n`` contribute equally for a real source.
    """
    delta = mp.mpf(delta)
    full = layer = mp.mpf(0)
    for m in range(1, m_max + 1):
        g = dipole_coeff_closed(m, y, r_e)
        a, b, k, s, d = mode_solution(m, g, delta, r_i, r_e)
        full += 2 * shell_energy(m, b, k, delta, r_i, r_e)
        layer += 2 * shell_energy(m, b - s, k, delta, r_i, r_e)
    return float(full), float(layer)


def dipole_series(delta, y, r_i=1, r_e=2, m_max=2000):
    """``sum_n delta |g_n|^2 / (|n| (delta^2 + rho^(2|n|)))`` over both signs."""
    delta = mp.mpf(delta)
    rho = mp.mpf(r_i) / r_e
    total = mp.mpf(0)
    for m in range(1, m_max + 1):
        g = dipole_coeff_closed(m, y, r_e)
        total += 2 * delta * g**2 / (m * (delta**2 + rho ** (2 * m)))
    return float(total)


def mode_field(x, y_pt, delta, y_src, r_i=1, r_e=2, m_max=200):
    """``V - F`` (layer part) at the point ``(x, y_pt)`` for the unit x-dipole."""
    r = mp.sqrt(mp.mpf(x) ** 2 + mp.mpf(y_pt) ** 2)
    th = mp.atan2(y_pt, x)
    r_i, r_e = mp.mpf(r_i), mp.mpf(r_e)
    total = mp.mpc(0)
    for m in range(1, m_max + 1):
        g = dipole_coeff_closed(m, y_src, r_e)
        a, b, k, s, d = mode_solution(m, g, delta, r_i, r_e)
        inc = s * (r / r_e) ** m
        if r < r_i:
            u = a * (r / r_i) ** m - inc
        elif r < r_e:
            u = b * (r / r_e) ** m + k * (r_i / r) ** m - inc
        else:
            u = d * (r_e / r) ** m
        # g_(-m) = g_m for this source, so modes +/-m share u: u (e^(i m t) + e^(-i m t))
        total += 2 * u * mp.cos(m * th)
    return complex(total)


def lsq_exponent(deltas, energies):
    """Least squares fit of ``log E = c + s L + t log L`` with ``L = log(1/delta)``."""
    rows = []
    rhs = []
    for d, e in zip(deltas, energies):
        L = -mp.log(d)
        rows.append([1, L, mp.log(L)])
        rhs.append(mp.log(e))
    X = mp.matrix(rows)
    y = mp.matrix(rhs)
    coef = mp.lu_solve(X.T * X, X.T * y)
    return float(coef[1]), float(coef[2])


def counterexample_constant(rho, j_max=80):
    rho = mp.mpf(rho)
    return float(mp.fsum(mp.mpf(2) ** j * rho ** (mp.mpf(2) ** (j - 2)) for j in range(1, j_max + 1)))


def counterexample_energy(delta, rho=0.5, r_e=2, j_max=40):
    """Series energy for ``g_n = n rho^(n/2)`` at ``n = 2^j`` (positive indices only)."""
    delta, rho = mp.mpf(delta), mp.mpf(rho)
    total = mp.mpf(0)
    for j in range(1, j_max + 1):
        n = mp.mpf(2) ** j
        g2 = n**2 * rho**n
        total += delta * g2 / (n * (delta**2 + rho ** (2 * n)))
    return float(total)
