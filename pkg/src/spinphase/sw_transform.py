"""Operator <-> phase-space symbol maps for a spin on the sphere.

A (2S+1)x(2S+1) operator A maps to coefficients of its symbol
W_A = sum c_lm Y_lm via c_lm = sqrt(4pi/(2S+1)) w_l^{-sigma} Tr(T_lm^dag A),
where w_l is the (positive) stretched Clebsch-Gordan weight and sigma in
[-1, 1] labels the operator ordering (0 symmetric, +1 normal, -1
antinormal).  The inverse multiplies by w_l^{+sigma}.  Pairing a symbol at
sigma with one at -sigma under the normalized measure (2S+1)/(4pi) dOmega
reproduces Hilbert-space traces exactly.
"""

import functools
import math

import numpy as np

from . import sphere_ops, su2_algebra

SYMMETRIC = 0.0
NORMAL = 1.0
ANTINORMAL = -1.0


def validate_sigma(sigma):
    sigma = float(sigma)
    if not -1.0 <= sigma <= 1.0 or not math.isfinite(sigma):
        raise ValueError(f"ordering parameter must lie in [-1, 1], got {sigma}")
    return sigma


def measure_constant(ctx):
    """Normalization (2S+1)/(4pi) of the phase-space measure."""
    return (ctx.twice_s + 1) / (4.0 * math.pi)


def cg_weight(ctx, l):
    """Stretched coefficient <S,S; l,0 | S,S>; strictly positive for l <= 2S."""
    if l != int(l) or not 0 <= l <= ctx.twice_s:
        raise ValueError(f"l must be an integer in [0, 2S], got {l!r}")
    w = su2_algebra.clebsch_gordan(
        ctx.twice_s, ctx.twice_s, 2 * int(l), 0, ctx.twice_s, ctx.twice_s
    )
    if w <= 0.0:
        raise RuntimeError(f"stretched CG weight not positive at l={l}: {w}")
    return w


@functools.lru_cache(maxsize=32)
def _tensor_structure(twice_s):
    """Per flat (l,m): column indices and values of T_lm's single diagonal.

    T_lm is nonzero only at (col - m, col); caching the value arrays keeps
    both transform directions O(hilbert_dim) per coefficient.
    """
    ctx = su2_algebra.SpinContext(twice_s)
    structure = []
    for l in range(ctx.band_limit + 1):
        for m in range(-l, l + 1):
            t = su2_algebra.tensor_operator(ctx, l, m)
            cols = np.arange(max(0, m), min(ctx.hilbert_dim, ctx.hilbert_dim + m))
            vals = t[cols - m, cols]
            structure.append((m, cols, vals))
    return structure


@functools.lru_cache(maxsize=64)
def _weight_table(twice_s):
    ctx = su2_algebra.SpinContext(twice_s)
    return np.array([cg_weight(ctx, l) for l in range(ctx.band_limit + 1)])


def _weight_powers(ctx, exponent):
    # w_l^exponent via logs; weights are positive so this is safe
    return np.exp(exponent * np.log(_weight_table(ctx.twice_s)))


def operator_to_symbol(a, sigma, ctx):
    """Symbol coefficients of operator a at ordering sigma."""
    sigma = validate_sigma(sigma)
    a = np.asarray(a, dtype=complex)
    if a.shape != (ctx.hilbert_dim, ctx.hilbert_dim):
        raise ValueError(f"operator shape {a.shape} does not match 2S+1 = {ctx.hilbert_dim}")
    scale = math.sqrt(4.0 * math.pi / (ctx.twice_s + 1))
    wpow = _weight_powers(ctx, -sigma)
    l_of, _ = sphere_ops.lm_arrays(ctx.band_limit)
    c = np.empty(ctx.symbol_dim, dtype=complex)
    for idx, (m, cols, vals) in enumerate(_tensor_structure(ctx.twice_s)):
        c[idx] = scale * wpow[l_of[idx]] * np.dot(vals.conj(), a[cols - m, cols])
    return c


def symbol_to_operator(c, sigma, ctx):
    """Operator with symbol coefficients c at ordering sigma (exact inverse)."""
    sigma = validate_sigma(sigma)
    c = np.asarray(c, dtype=complex)
    if c.size != ctx.symbol_dim:
        raise ValueError(
            f"coefficient length {c.size} does not match (2S+1)^2 = {ctx.symbol_dim}"
        )
    scale = math.sqrt(4.0 * math.pi / (ctx.twice_s + 1))
    wpow = _weight_powers(ctx, sigma)
    l_of, _ = sphere_ops.lm_arrays(ctx.band_limit)
    a = np.zeros((ctx.hilbert_dim, ctx.hilbert_dim), dtype=complex)
    for idx, (m, cols, vals) in enumerate(_tensor_structure(ctx.twice_s)):
        a[cols - m, cols] += (wpow[l_of[idx]] * c[idx] / scale) * vals
    return a


def switch_ordering(c, sigma_from, sigma_to, ctx):
    """Re-express coefficients at a different ordering: factor w_l^{from-to}."""
    sigma_from = validate_sigma(sigma_from)
    sigma_to = validate_sigma(sigma_to)
    c = np.asarray(c, dtype=complex)
    if c.size != ctx.symbol_dim:
        raise ValueError("coefficient length does not match context")
    l_of, _ = sphere_ops.lm_arrays(ctx.band_limit)
    return c * _weight_powers(ctx, sigma_from - sigma_to)[l_of]


def kernel_eval(ctx, sigma, theta, phi):
    """Phase-space kernel Delta^(sigma)(theta, phi) as a Hermitian matrix.

    Tr(A Delta^(sigma)(x)) reproduces the symbol of A at x.
    """
    sigma = validate_sigma(sigma)
    scale = math.sqrt(4.0 * math.pi / (ctx.twice_s + 1))
    wpow = _weight_powers(ctx, -sigma)
    l_of, _ = sphere_ops.lm_arrays(ctx.band_limit)
    delta = np.zeros((ctx.hilbert_dim, ctx.hilbert_dim), dtype=complex)
    for idx, (m, cols, vals) in enumerate(_tensor_structure(ctx.twice_s)):
        l = l_of[idx]
        y = sphere_ops.ylm_eval(l, m, theta, phi)
        delta[cols - m, cols] += scale * wpow[l] * np.conj(y) * vals
    return delta


def expectation(c_a, c_rho, ctx):
    """Tr(A rho) from the symbol of A at sigma and of rho at -sigma.

    (2S+1)/(4pi) sum_lm (-1)^m c_A,lm c_rho,l,-m; exact for dual orderings.
    """
    c_a = np.asarray(c_a, dtype=complex)
    c_rho = np.asarray(c_rho, dtype=complex)
    if c_a.size != ctx.symbol_dim or c_rho.size != ctx.symbol_dim:
        raise ValueError("coefficient length does not match context")
    return measure_constant(ctx) * np.vdot(sphere_ops.apply_conjugation(c_rho), c_a)


def symbol_trace(c, ctx):
    """Tr(A) from any-ordering coefficients: (2S+1) c_00 / sqrt(4pi)."""
    c = np.asarray(c, dtype=complex)
    if c.size != ctx.symbol_dim:
        raise ValueError("coefficient length does not match context")
    return (ctx.twice_s + 1) * c[0] / math.sqrt(4.0 * math.pi)
