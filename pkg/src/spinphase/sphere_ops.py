"""Spherical-harmonic coefficient space: grids, quadrature, and band-limited
operators.

A function W(theta, phi) = sum_{l<=L,|m|<=l} c_lm Y_lm is a flat complex
vector with index l*l + l + m.  Evolution happens on these vectors; grids
exist for quadrature, verification and CSV output.  Quadrature is
Gauss-Legendre in cos(theta) (L+1 nodes) times a uniform phi grid (2L+2
points), exact for integrands of spherical-harmonic degree <= 2L.

Multiplication by the direction components m_i and the combinations
i(m x L)_i are genuinely band-limited here: products that would leave
shell L are dropped (documented lossy top shell).
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


def num_coefficients(band_limit):
    return (band_limit + 1) ** 2


def flat_index(l, m):
    """Flat coefficient index l*l + l + m."""
    if l < 0 or abs(m) > l:
        raise ValueError(f"invalid (l, m) = ({l}, {m})")
    return l * l + l + m


def band_limit_of(n):
    """Band limit L with (L+1)^2 == n; rejects non-square lengths."""
    band = math.isqrt(n) - 1
    if n < 1 or (band + 1) ** 2 != n:
        raise ValueError(f"coefficient length {n} is not a square")
    return band


def lm_arrays(band_limit):
    """Arrays l_of[idx], m_of[idx] over the flat index."""
    n = num_coefficients(band_limit)
    l_of = np.empty(n, dtype=int)
    m_of = np.empty(n, dtype=int)
    for l in range(band_limit + 1):
        for m in range(-l, l + 1):
            l_of[l * l + l + m] = l
            m_of[l * l + l + m] = m
    return l_of, m_of


def _half_index(l, m):
    # packed index over 0 <= m <= l
    return l * (l + 1) // 2 + m


def _legendre_table(band_limit, x):
    """Fully normalized associated Legendre values P_lm(x) for 0 <= m <= l <= L.

    Normalization (including 1/sqrt(4pi) and the Condon-Shortley phase) is
    such that Y_lm = P_l|m| * e^{i m phi} for m >= 0.  Standard stable
    recurrences: diagonal, first off-diagonal, then upward in l at fixed m.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    L = band_limit
    table = np.zeros((_half_index(L, L) + 1, x.size))
    sx = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    table[0] = 1.0 / math.sqrt(4.0 * math.pi)
    for m in range(1, L + 1):
        table[_half_index(m, m)] = (
            -math.sqrt((2 * m + 1) / (2.0 * m)) * sx * table[_half_index(m - 1, m - 1)]
        )
    for m in range(L):
        table[_half_index(m + 1, m)] = math.sqrt(2 * m + 3) * x * table[_half_index(m, m)]
    for m in range(L + 1):
        for l in range(m + 2, L + 1):
            a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1) ** 2 - m * m) / (4.0 * (l - 1) ** 2 - 1))
            table[_half_index(l, m)] = a * (
                x * table[_half_index(l - 1, m)] - b * table[_half_index(l - 2, m)]
            )
    return table


def ylm_eval(l, m, theta, phi):
    """Y_lm(theta, phi), orthonormal with Condon-Shortley phase.

    Broadcasts over array-valued theta/phi of a common shape.
    """
    if l < 0 or abs(m) > l:
        raise ValueError(f"invalid (l, m) = ({l}, {m})")
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    shape = np.broadcast_shapes(theta.shape, phi.shape)
    th = np.broadcast_to(theta, shape).ravel()
    ph = np.broadcast_to(phi, shape).ravel()
    p = _legendre_table(l, np.cos(th))[_half_index(l, abs(m))]
    sign = 1.0 if m >= 0 else (-1.0) ** (-m)
    out = sign * p * np.exp(1j * m * ph)
    return out.reshape(shape) if shape else out[0]


@dataclass(frozen=True)
class SphereGrid:
    """Quadrature grid: Gauss-Legendre in cos(theta) x uniform phi."""

    band_limit: int
    thetas: np.ndarray   # ascending, length L+1
    x: np.ndarray        # cos(thetas)
    weights: np.ndarray  # Gauss-Legendre weights for integral over dx
    phis: np.ndarray     # uniform, length 2L+2

    @property
    def n_theta(self):
        return self.thetas.size

    @property
    def n_phi(self):
        return self.phis.size


def make_grid(band_limit):
    if band_limit < 0:
        raise ValueError("band_limit must be >= 0")
    x, w = np.polynomial.legendre.leggauss(band_limit + 1)
    order = np.argsort(-x)  # descending x = ascending theta
    x, w = x[order], w[order]
    n_phi = 2 * band_limit + 2
    phis = 2.0 * math.pi * np.arange(n_phi) / n_phi
    return SphereGrid(band_limit, np.arccos(x), x, w, phis)


def grid_synthesis_analysis(band_limit):
    """(grid, synthesize, analyze, integrate) closures at the given band limit.

    synthesize: coefficients (length <= (L+1)^2) -> values on the grid.
    analyze: values -> coefficients at the grid band limit.
    integrate: values -> integral over the plain solid angle d(Omega).
    analyze(synthesize(c)) recovers c exactly (band-limited quadrature).
    """
    grid = make_grid(band_limit)
    L = band_limit
    table = _legendre_table(L, grid.x)  # (packed lm, n_theta)
    ms = np.arange(-L, L + 1)
    phase = np.exp(1j * np.outer(ms, grid.phis))  # (2L+1, n_phi)
    dphi = 2.0 * math.pi / grid.n_phi

    def synthesize(c):
        c = np.asarray(c, dtype=complex)
        band = band_limit_of(c.size)
        if band > L:
            raise ValueError(f"coefficient band {band} exceeds grid band {L}")
        g = np.zeros((2 * L + 1, grid.n_theta), dtype=complex)
        for l in range(band + 1):
            for m in range(-l, l + 1):
                coeff = c[l * l + l + m]
                if coeff == 0:
                    continue
                sign = 1.0 if m >= 0 else (-1.0) ** (-m)
                g[L + m] += coeff * sign * table[_half_index(l, abs(m))]
        return g.T @ phase

    def analyze(values):
        values = np.asarray(values, dtype=complex)
        if values.shape != (grid.n_theta, grid.n_phi):
            raise ValueError(
                f"values shape {values.shape} does not match grid "
                f"({grid.n_theta}, {grid.n_phi})"
            )
        h = dphi * (values @ phase.conj().T)  # (n_theta, 2L+1)
        c = np.zeros(num_coefficients(L), dtype=complex)
        for l in range(L + 1):
            for m in range(-l, l + 1):
                sign = 1.0 if m >= 0 else (-1.0) ** (-m)
                c[l * l + l + m] = sign * np.dot(
                    grid.weights, table[_half_index(l, abs(m))] * h[:, L + m]
                )
        return c

    def integrate(values):
        values = np.asarray(values)
        return dphi * np.dot(grid.weights, values.sum(axis=1))

    return grid, synthesize, analyze, integrate


def alpha_beta(l, m):
    """Couplings (alpha1, alpha2, beta1, beta2) for shell transitions l -> l+-1.

    cos(theta) Y_lm = alpha1 Y_{l+1,m} + alpha2 Y_{l-1,m}
    sin(theta) dY_lm/dtheta = beta1 Y_{l+1,m} + beta2 Y_{l-1,m}
    with beta1 = l*alpha1 and beta2 = -(l+1)*alpha2.
    """
    if l < 0 or abs(m) > l:
        raise ValueError(f"invalid (l, m) = ({l}, {m})")
    alpha1 = math.sqrt((l - m + 1) * (l + m + 1) / ((2 * l + 1) * (2 * l + 3)))
    if l == 0:
        alpha2 = 0.0
    else:
        alpha2 = math.sqrt((l - m) * (l + m) / ((2 * l - 1) * (2 * l + 1)))
    return alpha1, alpha2, l * alpha1, -(l + 1) * alpha2


def angular_operators(band_limit):
    """Angular-momentum differential operators (L1, L2, L3, L^2) on shells l <= L.

    Shell-diagonal, hence exact (no truncation loss).  CSR matrices.
    """
    L = band_limit
    n = num_coefficients(L)
    l_of, m_of = lm_arrays(L)
    lp = sp.lil_matrix((n, n))
    for l in range(L + 1):
        for m in range(-l, l):
            lp[flat_index(l, m + 1), flat_index(l, m)] = math.sqrt(
                l * (l + 1) - m * (m + 1)
            )
    lp = lp.tocsr()
    lm = lp.T.tocsr()
    l1 = ((lp + lm) / 2.0).astype(complex)
    l2 = ((lp - lm) / 2j).tocsr()
    l3 = sp.diags(m_of.astype(complex)).tocsr()
    lam2 = sp.diags((l_of * (l_of + 1)).astype(complex)).tocsr()
    return l1.tocsr(), l2, l3, lam2


def position_operators(band_limit):
    """Multiplication operators M_i (by m_i) and K_i (by i(m x L)_i), band-limited.

    M3/K3 couple (l, m) -> (l+-1, m); components 1 and 2 follow from the
    commutators M1 = i[M3, L2], M2 = -i[M3, L1] (same for K).  Transitions
    to shell L+1 are dropped: products of top-shell content are lossy.
    """
    L = band_limit
    n = num_coefficients(L)
    l1, l2, _, _ = angular_operators(L)
    m3 = sp.lil_matrix((n, n))
    k3 = sp.lil_matrix((n, n))
    for l in range(L + 1):
        for m in range(-l, l + 1):
            a1, a2, b1, b2 = alpha_beta(l, m)
            col = flat_index(l, m)
            if l + 1 <= L:
                m3[flat_index(l + 1, m), col] = a1
                k3[flat_index(l + 1, m), col] = b1
            if l >= 1 and abs(m) <= l - 1:
                m3[flat_index(l - 1, m), col] = a2
                k3[flat_index(l - 1, m), col] = b2
    m3 = m3.tocsr().astype(complex)
    k3 = k3.tocsr().astype(complex)
    m1 = (1j * (m3 @ l2 - l2 @ m3)).tocsr()
    m2 = (-1j * (m3 @ l1 - l1 @ m3)).tocsr()
    k1 = (1j * (k3 @ l2 - l2 @ k3)).tocsr()
    k2 = (-1j * (k3 @ l1 - l1 @ k3)).tocsr()
    return m1, m2, m3, k1, k2, k3


def conjugation_matrix(band_limit):
    """Signed permutation P with (P c)_lm = (-1)^m c_{l,-m}; P^2 = identity.

    Complex conjugation of a symbol acts on coefficients as P composed with
    entrywise conjugation.
    """
    n = num_coefficients(band_limit)
    p = sp.lil_matrix((n, n))
    for l in range(band_limit + 1):
        for m in range(-l, l + 1):
            p[flat_index(l, m), flat_index(l, -m)] = (-1.0) ** m
    return p.tocsr().astype(complex)


def apply_conjugation(c):
    """Coefficients of conj(W) given coefficients of W (antilinear)."""
    c = np.asarray(c, dtype=complex)
    band = band_limit_of(c.size)
    out = np.empty_like(c)
    for l in range(band + 1):
        for m in range(-l, l + 1):
            out[flat_index(l, m)] = (-1.0) ** m * np.conj(c[flat_index(l, -m)])
    return out


def conjugated_operator(op, band_limit):
    """The conjugated operator C O C (linear part: P conj(O) P)."""
    p = conjugation_matrix(band_limit)
    if sp.issparse(op):
        return (p @ op.conj() @ p).tocsr()
    return np.asarray(p @ np.conj(op) @ p)


def operator_imag(op, band_limit):
    """Im(O) = (O - C O C)/(2i) as a linear operator on coefficients."""
    return (op - conjugated_operator(op, band_limit)) / 2j


def operator_real(op, band_limit):
    """Re(O) = (O + C O C)/2."""
    return (op + conjugated_operator(op, band_limit)) / 2.0


def is_real_symbol(c, tol=1e-12):
    c = np.asarray(c, dtype=complex)
    return bool(np.max(np.abs(apply_conjugation(c) - c)) <= tol)


def write_grid_csv(path, grid, values):
    """Grid CSV: header theta,phi,value_re,value_im; theta-major rows;
    17 significant digits."""
    values = np.asarray(values, dtype=complex)
    if values.shape != (grid.n_theta, grid.n_phi):
        raise ValueError("values shape does not match grid")
    lines = ["theta,phi,value_re,value_im"]
    for i, th in enumerate(grid.thetas):
        for j, ph in enumerate(grid.phis):
            v = values[i, j]
            lines.append(f"{th:.17g},{ph:.17g},{v.real:.17g},{v.imag:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
