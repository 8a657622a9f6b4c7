"""Evaluable complex functions: the handle abstraction and built-in targets.

Built-ins: factored rational functions, the 3x3 transcendental matrix
determinant, the plasma dispersion function, and the 3x3 gyrokinetic
dispersion determinant for bi-Maxwellian species.
"""

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.special import ive

from . import kernels
from .errors import EvaluationOverflowError, InvalidInputError

SQRT_PI = math.sqrt(math.pi)

SYMMETRY_NONE = "none"
SYMMETRY_CONJUGATE_PAIR = "conjugate-pair"

#: |z| beyond which plasma_Z accuracy is no longer validated against oracles.
PLASMA_Z_VALIDATED_RADIUS = 20.0


class FunctionHandle:
    """A deterministic, vectorized complex function with bookkeeping.

    ``evaluator`` maps a 1-d complex ndarray to a same-length ndarray.  The
    handle counts evaluations (thread-safe) and converts non-finite results
    into a signaled ``EvaluationOverflowError`` instead of returning them.
    ``symmetry`` declares a known root symmetry: "conjugate-pair" means the
    root set is closed under z -> -conj(z).
    """

    def __init__(self, name: str, evaluator, symmetry: str = SYMMETRY_NONE):
        if symmetry not in (SYMMETRY_NONE, SYMMETRY_CONJUGATE_PAIR):
            raise InvalidInputError(f"unknown symmetry {symmetry!r}")
        self.name = name
        self.symmetry = symmetry
        self._evaluator = evaluator
        self._count = 0
        self._lock = threading.Lock()
        self.accuracy_warning = False

    @property
    def evaluation_count(self) -> int:
        return self._count

    def reset_count(self):
        with self._lock:
            self._count = 0

    def __call__(self, z):
        arr = np.asarray(z, dtype=complex)
        flat = np.atleast_1d(arr).ravel()
        with np.errstate(all="ignore"):
            values = np.asarray(self._evaluator(flat), dtype=complex)
        with self._lock:
            self._count += flat.size
        bad = ~np.isfinite(values)
        if np.any(bad):
            where = flat[bad][0]
            raise EvaluationOverflowError(
                f"{self.name} overflowed or returned non-finite value at "
                f"z = {complex(where)!r}",
                where=complex(where),
            )
        if arr.ndim == 0:
            return complex(values[0])
        return values.reshape(arr.shape)

    def close(self):
        """Release external resources, if any.  No-op for in-process handles."""

    def __repr__(self):
        return f"FunctionHandle({self.name!r}, symmetry={self.symmetry!r})"


def _check_finite_complex(value, what):
    value = complex(value)
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise InvalidInputError(f"{what} must be finite")
    return value


@dataclass(frozen=True)
class RationalSpec:
    """Factored rational function: lists of (location, multiplicity) pairs."""

    zeros: tuple = ()
    poles: tuple = ()

    def __post_init__(self):
        norm_z = tuple((_check_finite_complex(loc, "zero location"), int(m))
                       for loc, m in self.zeros)
        norm_p = tuple((_check_finite_complex(loc, "pole location"), int(m))
                       for loc, m in self.poles)
        for _, mult in norm_z + norm_p:
            if mult < 1:
                raise InvalidInputError("multiplicities must be positive integers")
        locations = [loc for loc, _ in norm_z + norm_p]
        for i in range(len(locations)):
            for j in range(i + 1, len(locations)):
                if locations[i] == locations[j]:
                    raise InvalidInputError(
                        f"duplicate root location {locations[i]!r}"
                    )
        object.__setattr__(self, "zeros", norm_z)
        object.__setattr__(self, "poles", norm_p)

    def root_list(self):
        """(location, signed multiplicity) pairs; poles carry negative sign."""
        out = [(loc, m) for loc, m in self.zeros]
        out += [(loc, -m) for loc, m in self.poles]
        return out


def make_rational(spec: RationalSpec, name: str = "rational") -> FunctionHandle:
    """Handle computing the factored product; no coefficient expansion.

    Evaluating exactly at a pole divides by zero and surfaces as a signaled
    overflow from the handle.
    """
    zeros = spec.zeros
    poles = spec.poles

    def evaluator(z):
        out = np.ones_like(z)
        for loc, mult in zeros:
            out = out * (z - loc) ** mult
        for loc, mult in poles:
            out = out / (z - loc) ** mult
        return out

    return FunctionHandle(name, evaluator)


def _as_3x3(matrix, what):
    arr = np.asarray(matrix, dtype=float)
    if arr.shape != (3, 3):
        raise InvalidInputError(f"{what} must be a 3x3 real matrix")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{what} entries must be finite")
    return arr


@dataclass(frozen=True)
class Nlevp3Spec:
    """Matrices of the transcendental eigenproblem det((e^l - 1)A2 + l^2 A1 - A0)."""

    a0: tuple
    a1: tuple
    a2: tuple

    def __post_init__(self):
        for name in ("a0", "a1", "a2"):
            arr = _as_3x3(getattr(self, name), name)
            object.__setattr__(self, name, tuple(map(tuple, arr.tolist())))

    def arrays(self):
        return (np.asarray(self.a0), np.asarray(self.a1), np.asarray(self.a2))


def _det3(m):
    """Closed-form cofactor expansion; entries are arrays broadcast over z."""
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def make_nlevp3(spec: Nlevp3Spec, name: str = "nlevp3") -> FunctionHandle:
    a0, a1, a2 = spec.arrays()

    def evaluator(lam):
        g = np.exp(lam) - 1.0
        q = lam * lam
        m = [[g * a2[i, j] + q * a1[i, j] - a0[i, j] for j in range(3)]
             for i in range(3)]
        return _det3(m)

    return FunctionHandle(name, evaluator)


def plasma_Z(z):
    """Plasma dispersion function Z(z) = i*sqrt(pi)*w(z), scalar or array.

    Relative accuracy is ~1e-13 for |z| <= 20 except in the inherently
    cancellation-limited neighbourhoods of Z's own zeros, where absolute
    accuracy stays at roundoff level.
    """
    return 1j * SQRT_PI * kernels.faddeeva_w(z)


def make_plasma_z(name: str = "plasma_Z") -> FunctionHandle:
    """Handle for Z(z).  Sets ``accuracy_warning`` once evaluated past the
    validated radius |z| = 20."""

    handle_ref = []

    def evaluator(z):
        if np.any(np.abs(z) > PLASMA_Z_VALIDATED_RADIUS):
            handle_ref[0].accuracy_warning = True
        return plasma_Z(z)

    handle = FunctionHandle(name, evaluator, symmetry=SYMMETRY_CONJUGATE_PAIR)
    handle_ref.append(handle)
    return handle


def gamma_flr(j: int, b):
    """Scaled Bessel combination I_j(b)*exp(-b) for j in {0, 1}, b >= 0.

    Uses the exponentially scaled Bessel evaluation throughout, so there is
    no overflow for b up to (well past) 1e4.
    """
    if j not in (0, 1):
        raise InvalidInputError("j must be 0 or 1")
    arr = np.asarray(b, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise InvalidInputError("b must be nonnegative and finite")
    out = ive(j, arr)
    if np.ndim(b) == 0:
        return float(out)
    return out


def _one_minus_gamma0_over_b(b: float) -> float:
    """(1 - I_0(b) e^{-b}) / b with a series branch for small b.

    The direct form loses relative accuracy to cancellation as b -> 0; the
    Taylor coefficients below keep the error under ~1e-14 for b < 0.05.
    """
    if b > 0.05:
        return (1.0 - float(ive(0, b))) / b
    coeffs = (1.0, -3.0 / 4.0, 5.0 / 12.0, -35.0 / 192.0, 21.0 / 320.0,
              -77.0 / 3840.0, 143.0 / 26880.0, -143.0 / 114688.0)
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * b + c
    return acc


@dataclass(frozen=True)
class GyrokineticParams:
    """Inputs for the gyrokinetic dispersion determinant.

    ``a_i`` and ``a_e`` follow the source convention
    a_s = (T_par,s / T_perp,s)**2 - 1, so T ratios enter through
    sqrt(1 + a_s); ``tau`` is T_par,e / T_par,i and ``mass_ratio`` is
    m_i / m_e.
    """

    beta_i_perp: float
    b_i: float
    tau: float
    a_i: float = 0.0
    a_e: float = 0.0
    mass_ratio: float = 1836.0

    def __post_init__(self):
        if not (self.beta_i_perp > 0 and math.isfinite(self.beta_i_perp)):
            raise InvalidInputError("beta_i_perp must be positive")
        if not (self.b_i >= 0 and math.isfinite(self.b_i)):
            raise InvalidInputError("b_i must be nonnegative")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise InvalidInputError("tau must be positive")
        if not (self.mass_ratio > 0 and math.isfinite(self.mass_ratio)):
            raise InvalidInputError("mass_ratio must be positive")
        for name in ("a_i", "a_e"):
            a = getattr(self, name)
            if not math.isfinite(a) or 1.0 + a <= 0.0:
                raise InvalidInputError(f"1 + {name} must be positive")


def derived_parameters(params: GyrokineticParams) -> dict:
    """Species quantities derived from the normalized inputs.

    Derivations, from beta_perp(par) = 8 pi N0 T_perp(par) / B**2,
    xi_s = omega / |k_par| v_ts_par, Omega = omega / |k_par| v_A, and
    b_s = k_perp**2 rho_ts_perp**2 / 2 with v_ts_par**2 = 2 T_par,s / m_s
    and rho_ts_perp = v_ts_perp * m_s c / (|q_s| B):

      (v_A / v_ti_par)**2 = B**2/(4 pi N0 m_i) * m_i/(2 T_par,i)
                          = 1/beta_i_par            =>  xi_i = Omega / sqrt(beta_i_par)
      xi_e / xi_i = v_ti_par / v_te_par = sqrt(m_e T_par,i / (m_i T_par,e))
                                                    =>  xi_e = xi_i / sqrt(mass_ratio * tau)
      T_par/T_perp = sqrt(1 + a_s)                  =>  beta_s_par = beta_s_perp * sqrt(1 + a_s)
      beta_e_par / beta_i_par = tau                 =>  beta_e_perp = tau * beta_i_par / sqrt(1 + a_e)
      b_e / b_i = (T_perp,e m_e) / (T_perp,i m_i)   =>  b_e = b_i * tau * sqrt(1+a_i) / (mass_ratio * sqrt(1+a_e))
    """
    sq_ai = math.sqrt(1.0 + params.a_i)
    sq_ae = math.sqrt(1.0 + params.a_e)
    beta_i_par = params.beta_i_perp * sq_ai
    beta_e_par = params.tau * beta_i_par
    beta_e_perp = beta_e_par / sq_ae
    b_e = params.b_i * params.tau * sq_ai / (params.mass_ratio * sq_ae)
    return {
        "beta_i_par": beta_i_par,
        "beta_e_par": beta_e_par,
        "beta_e_perp": beta_e_perp,
        "b_e": b_e,
        "xi_i_factor": 1.0 / math.sqrt(beta_i_par),
        "xi_e_over_xi_i": 1.0 / math.sqrt(params.mass_ratio * params.tau),
    }


def make_gyrokinetic(params: GyrokineticParams, name: str = "gyrokinetic") -> FunctionHandle:
    """Determinant of the 3x3 gyrokinetic dispersion system as f(Omega).

    The determinant is exposed raw: the 1/Omega**2 structure of the field
    coupling can contribute genuine poles, which the locator reports with
    negative multiplicity rather than suppressing.
    """
    d = derived_parameters(params)
    g0i = float(ive(0, params.b_i))
    g1i = float(ive(1, params.b_i))
    g0e = float(ive(0, d["b_e"]))
    g1e = float(ive(1, d["b_e"]))
    # Firehose stability term sigma_k = 1 - sum_s beta_perp a_s (1-Gamma0)/(2 b_s).
    sigma_k = 1.0 - 0.5 * (
        params.beta_i_perp * params.a_i * _one_minus_gamma0_over_b(params.b_i)
        + d["beta_e_perp"] * params.a_e * _one_minus_gamma0_over_b(d["b_e"])
    )
    if abs(sigma_k) < 1e-12:
        raise InvalidInputError(
            f"firehose term sigma_k = {sigma_k:.3e} vanishes for these parameters"
        )
    for label, value in (("Gamma0_i", g0i), ("Gamma1_i", g1i),
                         ("Gamma0_e", g0e), ("Gamma1_e", g1e)):
        if not math.isfinite(value):
            raise InvalidInputError(f"{label} is not finite")

    ai, ae = params.a_i, params.a_e
    tau = params.tau
    beta_i_perp = params.beta_i_perp
    beta_i_par = d["beta_i_par"]
    beta_e_perp = d["beta_e_perp"]
    xi_i_factor = d["xi_i_factor"]
    xi_ratio = d["xi_e_over_xi_i"]
    v2 = sigma_k * (1.0 + ai) * params.b_i

    def evaluator(omega):
        xi_i = omega * xi_i_factor
        xi_e = xi_i * xi_ratio
        zi = plasma_Z(xi_i)
        ze = plasma_Z(xi_e)
        xzi = xi_i * zi
        xze = xi_e * ze
        q1 = -(
            (1.0 + xzi * g0i) + ai * (1.0 - g0i)
            + ((1.0 + xze * g0e) + ae * (1.0 - g0e)) / tau
        )
        q3 = ((g0i - g1i) / (1.0 + ai) * (ai - xzi)
              - (g0e - g1e) / (1.0 + ae) * (ae - xze))
        v1 = -((1.0 + ai) * (1.0 - g0i) + (1.0 + ae) * (1.0 - g0e) / tau)
        v3 = (g0i - g1i) - (g0e - g1e)
        a3 = (-1.0
              + beta_i_perp / (1.0 + ai) * (g0i - g1i) * (xzi - ai)
              + beta_e_perp / (1.0 + ae) * (g0e - g1e) * (xze - ae))
        m11 = v1 + v2 / (omega * omega)
        half_beta = 0.5 * beta_i_par
        det = _det3([
            [q1, v1, q3],
            [v1, m11, v3],
            [-half_beta * q3, -half_beta * v3, a3],
        ])
        return np.broadcast_to(det, omega.shape).astype(complex) if np.ndim(det) == 0 else det

    return FunctionHandle(name, evaluator, symmetry=SYMMETRY_CONJUGATE_PAIR)
