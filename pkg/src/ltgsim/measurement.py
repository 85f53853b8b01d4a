"""Two-qubit output state, coincidence counting and width calibration.

The channel leaves the populations of HH and VV at 1/2 and multiplies the
HH-VV coherence by p * Gamma(t), where p in [0, 1] is the purity of the
initial state (p = 1 is the Bell state).  Detection behind 45/135-degree
polarizers turns the real part of the coherence into coincidence-count
contrast:

    p++ = (1 + p Re Gamma) / 4      rate N++ = N0 (1 + p Re Gamma)
    p+- = (1 - p Re Gamma) / 4      rate N+- = N0 (1 - p Re Gamma)
    visibility V = |N++ - N+-| / (N++ + N+-) = p |Re Gamma|

The correlated-pixel calibration imprints a static rectangular phase
pattern (+-pi/4 every n_r pixels) on both mask halves, shifts the second
half by h, and reads the visibility V(h).  The contrast of V(h) falls as
the kernel width w_cp blurs the pattern, which makes it an estimator of
w_cp once compared against a simulated contrast-versus-width curve.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .optics import NumericalError
from .rtn import SeedSpec
from .slm import CorrelationKernel, KernelParams, build_kernel, phasor_sum

_PLUS_PLUS = 0.5 * np.array([1.0, 1.0, 1.0, 1.0])
_PLUS_MINUS = 0.5 * np.array([1.0, -1.0, 1.0, -1.0])

_SIGMA_Y2 = np.array(
    [[0, 0, 0, -1],
     [0, 0, 1, 0],
     [0, 1, 0, 0],
     [-1, 0, 0, 0]], dtype=float
)  # sigma_y (x) sigma_y in the {HH, HV, VH, VV} basis


@dataclass
class TwoQubitState:
    """4x4 density matrix in the {HH, HV, VH, VV} polarization basis."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError("density matrix must be 4x4")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
            raise ValueError("density matrix must be Hermitian within 1e-12")
        if abs(np.trace(rho).real - 1.0) > 1e-12:
            raise ValueError("density matrix must have unit trace within 1e-12")
        if np.linalg.eigvalsh(rho).min() < -1e-10:
            raise ValueError("density matrix must be positive semidefinite")
        self.rho = rho


def build_state(p: float, gamma_value: complex) -> TwoQubitState:
    """Dephased two-qubit state with purity p and coherence factor Gamma."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("purity p must lie in [0, 1]")
    if abs(gamma_value) > 1.0 + 1e-9:
        raise ValueError("|Gamma| must not exceed 1")
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = rho[3, 3] = 0.5
    rho[0, 3] = 0.5 * p * gamma_value
    rho[3, 0] = np.conj(rho[0, 3])
    return TwoQubitState(rho)


def concurrence(state: TwoQubitState) -> float:
    """Wootters concurrence of an arbitrary two-qubit state.

    Independent of the dephasing-channel structure; serves as the oracle
    for E(t) = |Gamma(t)| on the states this package produces.  Uses the
    Hermitian form sqrt(rho) rho~ sqrt(rho), whose eigensolve is
    backward-stable (the plain product rho rho~ is non-Hermitian and
    loses half the digits near degenerate spectra).
    """
    rho = state.rho
    evals, vecs = np.linalg.eigh(rho)
    sqrt_rho = (vecs * np.sqrt(np.clip(evals, 0.0, None))) @ vecs.conj().T
    # The Wootters lambdas are the singular values of
    # sqrt(rho) (sy x sy) sqrt(rho)* (sy x sy): singular values carry
    # absolute (not square-rooted) rounding error near zero.
    a = sqrt_rho @ _SIGMA_Y2 @ sqrt_rho.conj() @ _SIGMA_Y2
    lams = np.linalg.svd(a, compute_uv=False)
    return float(max(0.0, lams[0] - lams[1] - lams[2] - lams[3]))


def detection_probabilities(state: TwoQubitState) -> tuple[float, float]:
    """(p++, p+-): projections onto |++> and |+-> at unit efficiency."""
    p_pp = float((_PLUS_PLUS @ state.rho @ _PLUS_PLUS).real)
    p_pm = float((_PLUS_MINUS @ state.rho @ _PLUS_MINUS).real)
    return p_pp, p_pm


@dataclass
class CountRecord:
    """Coincidence rates (per second) in the two polarizer settings."""

    n_pp: float
    n_pm: float
    n0: float
    acquisition_s: float
    repeats: int

    def __post_init__(self):
        if self.n_pp < 0 or self.n_pm < 0:
            raise ValueError("count rates cannot be negative")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


def simulate_counts(
    probs: tuple[float, float],
    n0: float,
    acquisition_s: float = 8.0,
    repeats: int = 4,
    seed: SeedSpec = SeedSpec(0),
    shot_noise: bool = True,
) -> CountRecord:
    """Coincidence rates from detection probabilities.

    The rate scale n0 absorbs the source brightness and every collection
    efficiency, so rates are n0 * (1 +- p Re Gamma) = 4 * n0 * prob.
    With ``shot_noise`` each repeat draws Poisson counts over the
    acquisition window; rates are averaged over repeats in index order.
    """
    if n0 <= 0:
        raise ValueError("n0 must be positive")
    expected = 4.0 * n0 * np.asarray(probs, dtype=float)
    if np.any(expected < 0):
        raise ValueError("negative expected rate; check probabilities")
    if shot_noise:
        rng = seed.generator()
        counts = rng.poisson(expected[None, :] * acquisition_s, size=(repeats, 2))
        rates = counts.mean(axis=0) / acquisition_s
    else:
        rates = expected
    return CountRecord(float(rates[0]), float(rates[1]), n0, acquisition_s, repeats)


def visibility(record: CountRecord) -> float:
    """|N++ - N+-| / (N++ + N+-); undefined when both rates vanish."""
    total = record.n_pp + record.n_pm
    if total <= 0:
        raise ValueError("visibility undefined: zero total counts")
    return abs(record.n_pp - record.n_pm) / total


def rect_phase_pattern(n_pixels: int, n_r: int = 5, amplitude: float = np.pi / 4) -> np.ndarray:
    """Static mask phases switching +-amplitude every n_r pixels."""
    if n_r < 1:
        raise ValueError("n_r must be >= 1")
    steps = np.arange(n_pixels) // n_r
    return amplitude * np.where(steps % 2 == 0, 1.0, -1.0)


@dataclass
class CalibrationResult:
    """Outcome of the correlated-pixel calibration."""

    h_values: np.ndarray
    v_of_h: np.ndarray
    fitted_amplitude: float
    fitted_offset: float
    vis_of_v: float
    vis_uncertainty: float
    w_cp_estimate: float
    w_cp_uncertainty: float
    curve_w: np.ndarray = field(default_factory=lambda: np.empty(0))
    curve_vis: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        if not 0.0 <= self.vis_of_v <= 1.0:
            raise ValueError("visibility contrast must lie in [0, 1]")


def _visibility_of_pattern_contrast(
    kernel: CorrelationKernel,
    p: float,
    n_r: int,
    h_values: np.ndarray,
    n0: float,
    acquisition_s: float,
    repeats: int,
    seed: Optional[SeedSpec],
) -> tuple[np.ndarray, float, float, float]:
    """V(h) for the rectangular pattern, its sine fit and contrast.

    ``seed=None`` computes noise-free visibilities p * |Re Gamma(h)|.
    Returns (V(h), amplitude, offset, rms residual of the sine fit).
    """
    n_pix = kernel.weights.shape[0]
    pattern = rect_phase_pattern(n_pix, n_r)[:, None]
    v = np.empty(h_values.size)
    for i, h in enumerate(h_values):
        g = phasor_sum(kernel, pattern, pattern, delta=int(h))[0]
        re = float(np.clip(g.real, -1.0, 1.0))
        p_pp = 0.25 * (1.0 + p * re)
        p_pm = 0.25 * (1.0 - p * re)
        if seed is None:
            v[i] = p * abs(re)
        else:
            rec = simulate_counts(
                (p_pp, p_pm), n0, acquisition_s, repeats,
                seed=SeedSpec(seed.master_seed, seed.stream_index + 1 + i),
                shot_noise=True,
            )
            v[i] = visibility(rec)
    # Linear LSQ sine of period 2 * n_r in h.
    basis = np.column_stack(
        [np.ones(h_values.size),
         np.cos(np.pi * h_values / n_r),
         np.sin(np.pi * h_values / n_r)]
    )
    coef, _, _, _ = np.linalg.lstsq(basis, v, rcond=None)
    offset = float(coef[0])
    amplitude = float(np.hypot(coef[1], coef[2]))
    resid = v - basis @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    return v, amplitude, offset, rms


def calibrate_wcp(
    kernel_params: KernelParams,
    p: float = 0.927,
    n_r: int = 5,
    h_values: Optional[np.ndarray] = None,
    n0: float = 250.0,
    acquisition_s: float = 8.0,
    repeats: int = 4,
    shot_noise: bool = True,
    seed: SeedSpec = SeedSpec(0),
    curve_range: tuple[float, float] = (0.5, 10.0),
    curve_samples: int = 20,
) -> CalibrationResult:
    """Estimate the correlated-pixel width from pattern-contrast data.

    ``kernel_params.w_cp`` plays the role of the unknown true width: the
    measurement leg simulates V(h) under it (with shot noise by default,
    averaging ``repeats`` acquisitions of ``acquisition_s`` per point).
    The estimation leg builds a noise-free contrast-versus-width curve
    over ``curve_range`` with the same beam width and order, fits a cubic
    polynomial, and inverts it at the measured contrast.  Uncertainty
    combines the sine-fit scatter with the polynomial residual, both
    divided by the local curve slope.
    """
    if h_values is None:
        h_values = np.arange(-10, 10)
    h_values = np.asarray(h_values, dtype=int)

    true_kernel = build_kernel(kernel_params)
    v, amplitude, offset, rms = _visibility_of_pattern_contrast(
        true_kernel, p, n_r, h_values, n0, acquisition_s, repeats,
        seed if shot_noise else None,
    )
    if offset <= 0:
        raise NumericalError("sine fit returned a non-positive offset")
    vis = amplitude / offset
    npts = h_values.size
    sigma_amp = rms * np.sqrt(2.0 / npts)
    sigma_off = rms / np.sqrt(npts)
    vis_sigma = vis * np.sqrt(
        (sigma_amp / max(amplitude, 1e-12)) ** 2 + (sigma_off / offset) ** 2
    )

    # Simulated calibration curve (noise-free) and cubic fit.
    curve_w = np.linspace(curve_range[0], curve_range[1], curve_samples)
    curve_vis = np.empty(curve_samples)
    for i, w in enumerate(curve_w):
        k = build_kernel(
            KernelParams(w_cp=float(w), w_p=kernel_params.w_p,
                         n=kernel_params.n, geometry=kernel_params.geometry)
        )
        _, a_i, c_i, _ = _visibility_of_pattern_contrast(
            k, p, n_r, h_values, n0, acquisition_s, repeats, None
        )
        curve_vis[i] = a_i / c_i
    poly = np.polynomial.Polynomial.fit(curve_w, curve_vis, deg=3)
    poly_rms = float(np.sqrt(np.mean((poly(curve_w) - curve_vis) ** 2)))

    w_est = _invert_monotone(poly, vis, curve_range)
    slope = abs(poly.deriv()(w_est))
    if slope < 1e-9:
        raise NumericalError("calibration curve is flat at the inversion point")
    w_sigma = float(np.sqrt(vis_sigma**2 + poly_rms**2) / slope)

    return CalibrationResult(
        h_values=h_values,
        v_of_h=v,
        fitted_amplitude=amplitude,
        fitted_offset=offset,
        vis_of_v=float(np.clip(vis, 0.0, 1.0)),
        vis_uncertainty=float(vis_sigma),
        w_cp_estimate=float(w_est),
        w_cp_uncertainty=w_sigma,
        curve_w=curve_w,
        curve_vis=curve_vis,
    )


def _invert_monotone(poly, target: float, w_range: tuple[float, float]) -> float:
    """Root of poly(w) = target on the decreasing branch inside w_range."""
    lo, hi = w_range
    grid = np.linspace(lo, hi, 400)
    vals = poly(grid) - target
    sign_change = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
    if sign_change.size == 0:
        # Target beyond the curve: clamp to the nearer endpoint.
        return lo if abs(vals[0]) < abs(vals[-1]) else hi
    i = sign_change[0]
    a, b = grid[i], grid[i + 1]
    fa, fb = vals[i], vals[i + 1]
    return float(a - fa * (b - a) / (fb - fa))
