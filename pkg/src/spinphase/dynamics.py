"""Time evolution generators on symbol coefficients, their Hilbert-space
oracle, classical (large-S) generators, integrators, and observables.

Sign conventions are anchored to d(rho)/dt = -i[H, rho]: the unitary
generator on coefficients is 2 Im(H_hat) with Im(O) = (O - C O C)/(2i),
which for H = -B3 S3 gives <S1> + i<S2> proportional to exp(-i B3 t).
Dissipation follows the weak-coupling form with coupling operator F,
rate gamma and temperature T; the small parameter gamma/(S T) is
reported, never enforced.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from . import bopp, sphere_ops, sw_transform
from .su2_algebra import rotation_z, spin_matrices

EXPM_DIM_LIMIT = 4096

_EPS = [(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0),
        (0, 2, 1, -1.0), (2, 1, 0, -1.0), (1, 0, 2, -1.0)]


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """H = -sum_jk d_jk S_j S_k - sum_j b_j S_j with real symmetric d."""

    d: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if d.shape != (3, 3) or b.shape != (3,):
            raise ValueError("d must be 3x3 and b length 3")
        if np.max(np.abs(d - d.T)) > 1e-14:
            raise ValueError("d must be symmetric to 1e-14")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "b", b)

    def to_expression(self):
        expr = [(-self.d[j, k], (j + 1, k + 1))
                for j in range(3) for k in range(3) if self.d[j, k] != 0]
        expr += [(-self.b[j], (j + 1,)) for j in range(3) if self.b[j] != 0]
        return expr


@dataclass(frozen=True)
class BathSpec:
    """Coupling operator F (polynomial expression), rate gamma, temperature."""

    coupling: tuple
    gamma: float
    temperature: float

    def __post_init__(self):
        object.__setattr__(self, "coupling", tuple(bopp.validate_expression(self.coupling)))
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError("gamma must be finite and >= 0")
        if not (math.isfinite(self.temperature) and self.temperature > 0):
            raise ValueError("temperature must be finite and > 0")

    def validity_ratio(self, ctx):
        """gamma/(S T): weak-coupling diagnostic, reported but never blocking."""
        return self.gamma / (ctx.s * self.temperature)


def _require_hermitian_expression(expr, ctx, what):
    a = bopp.expression_to_matrix(expr, ctx)
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.conj().T)) > 1e-12 * scale:
        raise ValueError(f"{what} must be Hermitian")
    return a


def unitary_generator(h_expr, sigma, ctx):
    """Generator 2 Im(H_hat) of d(rho)/dt = -i[H, rho] on symbol coefficients."""
    _require_hermitian_expression(h_expr, ctx, "Hamiltonian")
    h_hat = bopp.evaluate_expression(h_expr, sigma, ctx)
    return (2.0 * sphere_ops.operator_imag(h_hat, ctx.band_limit)).tocsr()


def quadratic_generator(qh, sigma, ctx):
    """Generator for H = -d_jk S_j S_k - b_j S_j assembled termwise.

    i sum_j b_j L_j + 2i sum_jk d_jk L_j (M_k F1 + K_k F2); agrees with the
    unitary_generator route to rounding because shell truncation commutes
    with every L_j commutator.
    """
    if not isinstance(qh, QuadraticHamiltonian):
        qh = QuadraticHamiltonian(*qh)
    coeffs = bopp.bopp_coefficients(ctx, sigma)
    L = ctx.band_limit
    f1d = bopp.shell_diagonal(L, coeffs.f1)
    f2d = bopp.shell_diagonal(L, coeffs.f2)
    l_ops = sphere_ops.angular_operators(L)[:3]
    m1, m2, m3, k1, k2, k3 = sphere_ops.position_operators(L)
    r_ops = [m1 @ f1d + k1 @ f2d, m2 @ f1d + k2 @ f2d, m3 @ f1d + k3 @ f2d]
    n = ctx.symbol_dim
    gen = sp.csr_matrix((n, n), dtype=complex)
    for j in range(3):
        if qh.b[j] != 0:
            gen = gen + 1j * qh.b[j] * l_ops[j]
        for k in range(3):
            if qh.d[j, k] != 0:
                gen = gen + 2j * qh.d[j, k] * (l_ops[j] @ r_ops[k])
    return gen.tocsr()


def qfp_generator(h_expr, bath, sigma, ctx):
    """Dissipative generator: 2 Im(H) + 4 gamma T Im(F)^2 - 2 gamma Im(F) Im([H,F])."""
    _require_hermitian_expression(h_expr, ctx, "Hamiltonian")
    _require_hermitian_expression(bath.coupling, ctx, "coupling operator")
    L = ctx.band_limit
    h_hat = bopp.evaluate_expression(h_expr, sigma, ctx)
    f_hat = bopp.evaluate_expression(bath.coupling, sigma, ctx)
    im_h = sphere_ops.operator_imag(h_hat, L)
    im_f = sphere_ops.operator_imag(f_hat, L)
    im_g = sphere_ops.operator_imag(h_hat @ f_hat - f_hat @ h_hat, L)
    gen = 2.0 * im_h
    gen = gen + 4.0 * bath.gamma * bath.temperature * (im_f @ im_f)
    gen = gen - 2.0 * bath.gamma * (im_f @ im_g)
    return gen.tocsr()


def bilinear_lambda(ctx, gamma, xi):
    """Diffusion matrix S gamma xi_j xi_k of the isotropic bilinear coupling."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (3,):
        raise ValueError("xi must be a real 3-vector")
    return ctx.s * gamma * np.outer(xi, xi)


def _cross_multiplication(vec_ops, const):
    """Operators for the components of (v x const), v given componentwise."""
    n = vec_ops[0].shape[0]
    out = [sp.csr_matrix((n, n), dtype=complex) for _ in range(3)]
    for a, b, c, sign in _EPS:
        if const[c] != 0:
            out[a] = out[a] + sign * const[c] * vec_ops[b]
    return out


def isotropic_bilinear_generator(b, xi, gamma, temperature, sigma, ctx):
    """Bilinear-coupling generator written in effective-field form.

    (i/S) sum_k L_k B_eff,k
    - (i/S) sum_kj L_k Lam_kj [ (m x B_eff)_j + (M x B_eff)_j - i T L_j ]
    with B_eff = S b, Lam = S gamma xi xi^T and the vector operator
    M_a = (1/S)(M_a (F1 - S) + K_a F2), which is O(1/S).  Equals
    qfp_generator for H = -b.S, F = xi.S up to rounding.
    """
    if not (math.isfinite(gamma) and gamma >= 0):
        raise ValueError("gamma must be finite and >= 0")
    if not (math.isfinite(temperature) and temperature > 0):
        raise ValueError("temperature must be finite and > 0")
    b = np.asarray(b, dtype=float)
    s = ctx.s
    L = ctx.band_limit
    n = ctx.symbol_dim
    coeffs = bopp.bopp_coefficients(ctx, sigma)
    f1d = bopp.shell_diagonal(L, coeffs.f1)
    f2d = bopp.shell_diagonal(L, coeffs.f2)
    l_ops = sphere_ops.angular_operators(L)[:3]
    m1, m2, m3, k1, k2, k3 = sphere_ops.position_operators(L)
    m_mult = [m1, m2, m3]
    k_mult = [k1, k2, k3]
    eye = sp.identity(n, dtype=complex, format="csr")
    m_vec = [(m_mult[a] @ (f1d - s * eye) + k_mult[a] @ f2d) / s for a in range(3)]
    b_eff = s * b
    lam = bilinear_lambda(ctx, gamma, xi)
    cross_m = _cross_multiplication(m_mult, b_eff)
    cross_v = _cross_multiplication(m_vec, b_eff)
    gen = sp.csr_matrix((n, n), dtype=complex)
    for k in range(3):
        if b_eff[k] != 0:
            gen = gen + (1j / s) * b_eff[k] * l_ops[k]
        for j in range(3):
            if lam[k, j] == 0:
                continue
            inner = cross_m[j] + cross_v[j] - 1j * temperature * l_ops[j]
            gen = gen - (1j / s) * lam[k, j] * (l_ops[k] @ inner)
    return gen.tocsr()


# --- Hilbert-space oracle -------------------------------------------------

def master_rhs(rho, h, f, gamma, temperature):
    """d(rho)/dt of the weak-coupling master equation (matrix in, matrix out).

    -i[H,rho] - gamma T ([F, F rho] + h.c.) + (gamma/2)([F, [H,F] rho] + h.c.)
    written out term by term; the trace of the result vanishes identically
    and Hermiticity of rho is preserved.
    """
    comm = h @ rho - rho @ h
    anti = f @ f @ rho + rho @ f @ f - 2.0 * (f @ rho @ f)
    g = h @ f - f @ h
    drift = f @ g @ rho - g @ rho @ f - rho @ g @ f + f @ rho @ g
    return -1j * comm - gamma * temperature * anti + 0.5 * gamma * drift


def vec_density(rho):
    """Column-stacked vectorization."""
    return np.asarray(rho, dtype=complex).flatten(order="F")


def unvec_density(v):
    n = math.isqrt(v.size)
    if n * n != v.size:
        raise ValueError("vector length is not a perfect square")
    return np.asarray(v, dtype=complex).reshape((n, n), order="F")


def master_liouvillian(h, f, gamma, temperature):
    """Matrix of master_rhs on column-stacked rho: vec(A X B) = (B^T k A) vec(X)."""
    h = np.asarray(h, dtype=complex)
    f = np.asarray(f, dtype=complex)
    n = h.shape[0]
    eye = np.eye(n)
    g = h @ f - f @ h
    ff = f @ f
    out = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    out -= gamma * temperature * (
        np.kron(eye, ff) + np.kron(ff.T, eye) - 2.0 * np.kron(f.T, f)
    )
    out += 0.5 * gamma * (
        np.kron(eye, f @ g) - np.kron(f.T, g)
        - np.kron((g @ f).T, eye) + np.kron(g.T, f)
    )
    return out


def master_stationary_state(h, f, gamma, temperature):
    """Null vector of the master generator as a unit-trace Hermitian matrix."""
    liou = master_liouvillian(h, f, gamma, temperature)
    w, v = la.eig(liou)
    rho = unvec_density(v[:, np.argmin(np.abs(w))])
    rho = (rho + rho.conj().T) / 2.0
    return rho / np.trace(rho).real


# --- classical generators -------------------------------------------------

def _validate_poly(poly):
    out = []
    for item in poly:
        coeff, expo = item
        expo = tuple(int(e) for e in expo)
        if len(expo) != 3 or any(e < 0 for e in expo):
            raise ValueError(f"monomial exponents {expo!r} invalid")
        out.append((float(coeff), expo))
    return out


def poly_gradient(poly):
    """Componentwise gradient of a polynomial in (m1, m2, m3)."""
    poly = _validate_poly(poly)
    grads = ([], [], [])
    for coeff, expo in poly:
        for a in range(3):
            if expo[a] > 0:
                lowered = tuple(e - (1 if i == a else 0) for i, e in enumerate(expo))
                grads[a].append((coeff * expo[a], lowered))
    return grads


def poly_multiplication_operator(poly, band_limit):
    """Band-limited multiplication operator for a polynomial in m (lossy top shells)."""
    poly = _validate_poly(poly)
    n = sphere_ops.num_coefficients(band_limit)
    m1, m2, m3, _, _, _ = sphere_ops.position_operators(band_limit)
    out = sp.csr_matrix((n, n), dtype=complex)
    eye = sp.identity(n, dtype=complex, format="csr")
    for coeff, expo in poly:
        term = eye
        for op, e in zip((m1, m2, m3), expo):
            for _ in range(e):
                term = term @ op
        out = out + coeff * term
    return out


def classical_generators(h_poly, lam, temperature, band_limit, s):
    """(liouville, fokker_planck) for classical spin dynamics at band limit L.

    The classical Hamiltonian is a polynomial in m; B_eff = -grad H.
    liouville = (i/S) sum_k L_k B_eff,k
    fokker_planck adds -(i/S) sum_kj L_k Lam_kj [(m x B_eff)_j - i T L_j].
    exp(-H/T) is stationary under fokker_planck for linear H.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (3, 3):
        raise ValueError("lam must be 3x3")
    if not (math.isfinite(temperature) and temperature > 0):
        raise ValueError("temperature must be finite and > 0")
    if not (math.isfinite(s) and s > 0):
        raise ValueError("s must be finite and > 0")
    grads = poly_gradient(h_poly)
    b_ops = [poly_multiplication_operator([(-c, e) for c, e in g], band_limit)
             for g in grads]
    l_ops = sphere_ops.angular_operators(band_limit)[:3]
    m_ops = sphere_ops.position_operators(band_limit)[:3]
    n = sphere_ops.num_coefficients(band_limit)
    liou = sp.csr_matrix((n, n), dtype=complex)
    for k in range(3):
        liou = liou + (1j / s) * (l_ops[k] @ b_ops[k])
    cross = [sp.csr_matrix((n, n), dtype=complex) for _ in range(3)]
    for a, b, c, sign in _EPS:
        cross[a] = cross[a] + sign * (m_ops[b] @ b_ops[c])
    fp = liou
    for k in range(3):
        for j in range(3):
            if lam[k, j] == 0:
                continue
            inner = cross[j] - 1j * temperature * l_ops[j]
            fp = fp - (1j / s) * lam[k, j] * (l_ops[k] @ inner)
    return liou.tocsr(), fp.tocsr()


# --- states, integration, observables -------------------------------------

def coherent_state(ctx, theta0, phi0):
    """Density matrix of the spin coherent state at (theta0, phi0)."""
    _, s2, _ = spin_matrices(ctx)
    u = rotation_z(ctx, phi0) @ la.expm(-1j * theta0 * s2)
    ket = u[:, 0]  # rotated highest-weight state
    return np.outer(ket, ket.conj())


@dataclass
class EvolutionResult:
    times: np.ndarray
    states: np.ndarray
    s1: np.ndarray = None
    s2: np.ndarray = None
    s3: np.ndarray = None
    trace: np.ndarray = None
    purity: np.ndarray = None


def _expm_propagator(gen, dt):
    a = gen.toarray() if sp.issparse(gen) else np.asarray(gen, dtype=complex)
    if a.shape[0] > EXPM_DIM_LIMIT:
        raise ValueError(f"expm limited to dimension {EXPM_DIM_LIMIT}, got {a.shape[0]}")
    try:
        w, v = la.eig(a)
        vinv = la.inv(v)
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(np.abs(v @ (w[:, None] * vinv) - a)) <= 1e-10 * scale:
            return v @ (np.exp(w * dt)[:, None] * vinv)
    except la.LinAlgError:
        pass
    return la.expm(a * dt)  # defective or ill-conditioned spectrum


def integrate(gen, y0, t_end, dt, method="rk4", ctx=None, sigma=None, kind=None):
    """Propagate dy/dt = G y (matrix G) or dy/dt = f(y) (callable, rk4 only).

    dt is adjusted to divide t_end evenly.  States at every step are kept.
    kind "symbol" or "density" attaches spin observables, trace and purity
    (needs ctx, and sigma for symbols).  Non-finite states abort with a
    diagnostic.
    """
    if t_end <= 0 or dt <= 0:
        raise ValueError("t_end and dt must be positive")
    n_steps = max(1, int(round(t_end / dt)))
    dt_used = t_end / n_steps
    y = np.asarray(y0, dtype=complex)
    states = [y.copy()]

    if method == "rk4":
        if callable(gen):
            rhs = gen
        else:
            mat = gen

            def rhs(state):
                return mat @ state

        for step in range(n_steps):
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * dt_used * k1)
            k3 = rhs(y + 0.5 * dt_used * k2)
            k4 = rhs(y + dt_used * k3)
            y = y + (dt_used / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y.view(float))):
                raise RuntimeError(
                    f"non-finite state at t = {(step + 1) * dt_used:.6g} "
                    f"(step {step + 1}/{n_steps}, dt = {dt_used:.6g})"
                )
            states.append(y.copy())
    elif method == "expm":
        if callable(gen):
            raise ValueError("expm needs a generator matrix, not a callable")
        prop = _expm_propagator(gen, dt_used)
        for step in range(n_steps):
            y = prop @ y
            if not np.all(np.isfinite(y.view(float))):
                raise RuntimeError(
                    f"non-finite state at t = {(step + 1) * dt_used:.6g} "
                    f"(step {step + 1}/{n_steps}, dt = {dt_used:.6g})"
                )
            states.append(y.copy())
    else:
        raise ValueError(f"unknown method {method!r}")

    times = dt_used * np.arange(n_steps + 1)
    states = np.array(states)
    result = EvolutionResult(times=times, states=states)
    if kind == "symbol":
        if ctx is None or sigma is None:
            raise ValueError("symbol observables need ctx and sigma")
        _attach_symbol_observables(result, ctx, sigma)
    elif kind == "density":
        if ctx is None:
            raise ValueError("density observables need ctx")
        _attach_density_observables(result, ctx)
    elif kind is not None:
        raise ValueError(f"unknown kind {kind!r}")
    return result


def _attach_symbol_observables(result, ctx, sigma):
    sigma = sw_transform.validate_sigma(sigma)
    smats = spin_matrices(ctx)
    duals = [sw_transform.operator_to_symbol(sm, -sigma, ctx) for sm in smats]
    nt = result.times.size
    obs = np.empty((nt, 5))
    for i in range(nt):
        c = result.states[i]
        for k in range(3):
            obs[i, k] = sw_transform.expectation(duals[k], c, ctx).real
        obs[i, 3] = sw_transform.symbol_trace(c, ctx).real
        dual_c = sw_transform.switch_ordering(c, sigma, -sigma, ctx)
        obs[i, 4] = sw_transform.expectation(c, dual_c, ctx).real
    result.s1, result.s2, result.s3 = obs[:, 0], obs[:, 1], obs[:, 2]
    result.trace, result.purity = obs[:, 3], obs[:, 4]


def _attach_density_observables(result, ctx):
    smats = spin_matrices(ctx)
    nt = result.times.size
    obs = np.empty((nt, 5))
    for i in range(nt):
        state = result.states[i]
        rho = state if state.ndim == 2 else unvec_density(state)
        for k in range(3):
            obs[i, k] = np.trace(smats[k] @ rho).real
        obs[i, 3] = np.trace(rho).real
        obs[i, 4] = np.trace(rho @ rho).real
    result.s1, result.s2, result.s3 = obs[:, 0], obs[:, 1], obs[:, 2]
    result.trace, result.purity = obs[:, 3], obs[:, 4]


def write_trajectory_csv(path, result):
    """Trajectory CSV: t,Sx,Sy,Sz,trace,purity at 17 significant digits."""
    if result.s1 is None:
        raise ValueError("result carries no observables")
    lines = ["t,Sx,Sy,Sz,trace,purity"]
    for i, t in enumerate(result.times):
        lines.append(
            f"{t:.17g},{result.s1[i]:.17g},{result.s2[i]:.17g},"
            f"{result.s3[i]:.17g},{result.trace[i]:.17g},{result.purity[i]:.17g}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# --- classical-limit scans -------------------------------------------------

def _submatrix(gen, l_test):
    n = sphere_ops.num_coefficients(l_test)
    dense = gen.toarray() if sp.issparse(gen) else np.asarray(gen)
    return dense[:n, :n]


def classical_limit_scan(mode, twice_s_values, sigma, l_test,
                         b=None, xi=None, gamma=None, temperature=None):
    """Deviation-vs-S scan for the classical limit; returns dict with
    s_values, deviations and the fitted log-log slope.

    Modes:
      "unitary": quadratic generator (d = 0) against the classical
        Liouville generator for B_eff = S b; deviation vanishes identically.
      "bilinear": bilinear-coupling generator against the classical
        Fokker-Planck generator, relative operator-norm deviation on the
        l <= l_test block; decays like 1/S.
      "asymptotics": relative sup deviation between the exact shell tables
        (f1, f2) and their large-S approximations over l <= l_test.  The
        deviation is measured relative to the exact values (f2 itself is
        O(1/S), so its relative error is the O(1/S^2) quantity of interest).
    """
    from .su2_algebra import SpinContext

    sigma = sw_transform.validate_sigma(sigma)
    if not twice_s_values:
        raise ValueError("twice_s_values must be non-empty")
    if l_test > min(int(t) for t in twice_s_values) - 2:
        raise ValueError(
            f"l_test = {l_test} exceeds min(2S) - 2 = "
            f"{min(int(t) for t in twice_s_values) - 2}; the truncated top "
            "shells would contaminate the compared block")
    s_values = []
    deviations = []
    for twice_s in twice_s_values:
        ctx = SpinContext(twice_s)
        s_values.append(ctx.s)
        if mode == "asymptotics":
            coeffs = bopp.bopp_coefficients(ctx, sigma)
            worst = 0.0
            for l in range(min(l_test, ctx.band_limit) + 1):
                a1, a2 = bopp.asymptotic_coefficients(ctx, sigma, l)
                for exact, approx in ((coeffs.f1[l], a1), (coeffs.f2[l], a2)):
                    denom = max(abs(exact), 1e-300)
                    worst = max(worst, abs(exact - approx) / denom)
            deviations.append(worst)
            continue
        if b is None:
            raise ValueError(f"mode {mode!r} needs a field vector b")
        h_poly = [(-ctx.s * float(b[k]), tuple(1 if i == k else 0 for i in range(3)))
                  for k in range(3) if b[k] != 0]
        if mode == "unitary":
            quantum = quadratic_generator(
                QuadraticHamiltonian(np.zeros((3, 3)), np.asarray(b, float)), sigma, ctx)
            classical = classical_generators(
                h_poly, np.zeros((3, 3)), 1.0, ctx.band_limit, ctx.s)[0]
        elif mode == "bilinear":
            if xi is None or gamma is None or temperature is None:
                raise ValueError("bilinear mode needs xi, gamma, temperature")
            quantum = isotropic_bilinear_generator(b, xi, gamma, temperature, sigma, ctx)
            lam = bilinear_lambda(ctx, gamma, xi)
            classical = classical_generators(
                h_poly, lam, temperature, ctx.band_limit, ctx.s)[1]
        else:
            raise ValueError(f"unknown scan mode {mode!r}")
        q_sub = _submatrix(quantum, l_test)
        c_sub = _submatrix(classical, l_test)
        deviations.append(
            np.linalg.norm(q_sub - c_sub, 2) / np.linalg.norm(c_sub, 2))
    s_values = np.asarray(s_values, dtype=float)
    deviations = np.asarray(deviations, dtype=float)
    if np.all(deviations > 1e-13):
        slope = float(np.polyfit(np.log(s_values), np.log(deviations), 1)[0])
    else:
        slope = float("nan")  # deviations at rounding level: no scaling law
    return {"s_values": s_values, "deviations": deviations, "slope": slope}
