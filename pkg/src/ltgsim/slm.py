"""Pixel encoding of noise on a 1D phase mask and the kernel-sum coherence.

The mask has two halves of ``pixels_per_half`` pixels (default 320 each).
Half 1 carries qubit 1 with pixels j = 0..319 at positions x1 = d*j; half
2 carries qubit 2 with pixels k = 320..639 at positions x2 = d*(640-k),
so equal offsets from the reference pixels (j0, k0) face each other
spatially.  A pair distribution over pixel offsets,

    weights[j,k] ~ exp(-2*|dj-dk|^n / w_cp^n)
                   * exp(-2*dj^2 / w_p^2) * exp(-2*dk^2 / w_p^2),
    dj = j - j0,  dk = k - k0,

(unit sum; super-Gaussian order n even) encodes the beam envelope w_p and
the photon-pair correlation width w_cp, both in pixels.

Noise enters as a phase field phi(offset, t) built from telegraph-noise
trajectories, constant over blocks of ``n_rep`` consecutive offsets.  The
dephasing channel puts *twice* the noise phase between the polarization
components of each photon (the sigma_z eigenvalues differ by 2), so the
coherence factor read out by the kernel sum is

    Gamma(delta, t) = sum_jk weights[j,k]
                      * exp(2i * (phi1(dj, t) + phi2(dk + delta, t))).

With one shared field and delta = 0 this realizes the common-environment
limit <e^{4i phi}>; shifting by delta >= n_rep (or using independent
fields) decorrelates the two halves toward the independent-environment
limit <e^{2i phi}>^2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .rtn import RtnParams, SeedSpec, Trajectory, phase_on_grid, sample_trajectory
from .series import KERNEL_SUM, CoherenceSeries


@dataclass(frozen=True)
class MaskGeometry:
    """Pixel layout of the two mask halves.

    ``j0`` / ``k0`` are the reference (central) pixels of each half, in
    mask numbering; they may be fractional to model a beam center sitting
    off the pixel center by a sub-pixel amount.
    """

    pixels_per_half: int = 320
    pixel_width_d: float = 100e-6
    j0: float = 160.0
    k0: float = 480.0

    def __post_init__(self):
        n = self.pixels_per_half
        if n < 1:
            raise ValueError("pixels_per_half must be positive")
        if not 0 <= self.j0 < n:
            raise ValueError(f"j0 must lie in [0, {n})")
        if not n <= self.k0 < 2 * n:
            raise ValueError(f"k0 must lie in [{n}, {2 * n})")

    def x1(self, j) -> np.ndarray:
        """Position of half-1 pixel j."""
        return self.pixel_width_d * np.asarray(j, dtype=float)

    def x2(self, k) -> np.ndarray:
        """Position of half-2 pixel k (axis runs opposite to half 1)."""
        return self.pixel_width_d * (2.0 * self.pixels_per_half - np.asarray(k, dtype=float))

    def offsets1(self) -> np.ndarray:
        """dj = j - j0 for every half-1 pixel, in array order."""
        return np.arange(self.pixels_per_half, dtype=float) - self.j0

    def offsets2(self) -> np.ndarray:
        """dk = k - k0 for every half-2 pixel, in array order."""
        return np.arange(self.pixels_per_half, dtype=float) + self.pixels_per_half - self.k0


@dataclass(frozen=True)
class KernelParams:
    """Pair-distribution parameters: correlation width, beam width, order."""

    w_cp: float
    w_p: float
    n: int = 2
    geometry: MaskGeometry = field(default_factory=MaskGeometry)

    def __post_init__(self):
        if self.w_cp <= 0 or self.w_p <= 0:
            raise ValueError("w_cp and w_p must be positive")
        if self.n < 2 or self.n % 2 != 0:
            raise ValueError(
                f"super-Gaussian order n must be a positive even integer, got {self.n}; "
                "odd orders make the correlation factor sign-ambiguous"
            )


@dataclass
class CorrelationKernel:
    """Normalized pixel-pair weights |f_jk|^2 (rows: half 1, cols: half 2)."""

    weights: np.ndarray
    params: KernelParams

    def __post_init__(self):
        w = self.weights
        if np.any(w < 0):
            raise ValueError("kernel weights must be non-negative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("kernel weights must sum to 1 within 1e-12")

    def marginal1(self) -> np.ndarray:
        """Mass per half-1 pixel."""
        return self.weights.sum(axis=1)

    def marginal2(self) -> np.ndarray:
        """Mass per half-2 pixel."""
        return self.weights.sum(axis=0)


def build_kernel(params: KernelParams) -> CorrelationKernel:
    """Evaluate and normalize the pair distribution on the pixel grid."""
    geo = params.geometry
    dj = geo.offsets1()[:, None]
    dk = geo.offsets2()[None, :]
    corr = np.exp(-2.0 * np.abs(dj - dk) ** params.n / params.w_cp**params.n)
    envelope = np.exp(-2.0 * dj**2 / params.w_p**2) * np.exp(-2.0 * dk**2 / params.w_p**2)
    w = corr * envelope
    total = w.sum()
    if total <= 0:
        raise ValueError("kernel has no support on the mask")
    return CorrelationKernel(w / total, params)


@dataclass
class PhaseField:
    """Noise phases phi(offset, t) on one mask half.

    ``phi[i, g]`` is the noise phase at offset index i (offset i - n/2
    relative to the reference pixel) and grid time ``times[g]``.  The
    field is constant within blocks of ``n_rep`` consecutive offsets;
    ``block_index[i]`` maps offsets to the backing trajectory in
    ``trajectories``.
    """

    phi: np.ndarray
    times: np.ndarray
    n_rep: int
    block_index: np.ndarray
    trajectories: list
    geometry: MaskGeometry
    balanced: bool
    params: dict = field(default_factory=dict)

    def n_blocks(self) -> int:
        return len(self.trajectories)

    def trajectory_for_offset(self, i: int) -> Trajectory:
        return self.trajectories[self.block_index[i]]


def build_phase_field(
    gamma: float,
    times: np.ndarray,
    n_rep: int,
    geometry: MaskGeometry = MaskGeometry(),
    seed: SeedSpec = SeedSpec(0),
    balanced: bool = False,
    p_plus: float = 0.5,
) -> PhaseField:
    """Sample a blockwise-constant noise phase field for one mask half.

    Unbalanced: ceil(n_pixels / n_rep) independent trajectories, block b
    covering offsets [b*n_rep, (b+1)*n_rep); 320 not divisible by n_rep
    leaves a truncated final block.

    Balanced: blocks are mirrored in (phi, -phi) pairs, with the mirror
    placed half a mask away (offset i + n_pixels/2 carries -phi of offset
    i).  The half-mask separation keeps *adjacent* blocks independent, so
    small delta shifts see unbiased statistics, and the per-pixel phase
    sum is exactly zero at every time, which is what keeps the kernel-sum
    coherence real in the ideal-ensemble sense.
    """
    times = np.asarray(times, dtype=float)
    if n_rep < 1:
        raise ValueError("n_rep must be >= 1")
    n_pix = geometry.pixels_per_half
    if balanced and n_pix % 2:
        raise ValueError("balanced fields need an even number of pixels per half")
    t_max = float(times.max()) if times.size else 1.0
    params = RtnParams(gamma=gamma, t_max=t_max, p_plus=p_plus)

    span = n_pix // 2 if balanced else n_pix
    n_indep = -(-span // n_rep)  # ceil
    base = [sample_trajectory(params, SeedSpec(seed.master_seed, seed.stream_index + 1 + b))
            for b in range(n_indep)]
    # Stream derivation: block b of field stream s uses stream s+1+b, so a
    # field consumes streams [s+1, s+1+n_blocks).  Callers building several
    # independent fields must space their stream indices by at least the
    # block count (a stride of 1000 is ample for any n_rep >= 1).

    if balanced:
        trajectories = base + [tr.mirrored() for tr in base]
        block_half = np.repeat(np.arange(n_indep), n_rep)[:span]
        block_index = np.concatenate([block_half, block_half + n_indep])
    else:
        trajectories = base
        block_index = np.repeat(np.arange(n_indep), n_rep)[:n_pix]

    phi_blocks = np.empty((len(trajectories), times.size))
    for b, tr in enumerate(trajectories):
        phi_blocks[b] = phase_on_grid(tr, times)
    phi = phi_blocks[block_index]

    return PhaseField(
        phi=phi,
        times=times,
        n_rep=n_rep,
        block_index=block_index,
        trajectories=trajectories,
        geometry=geometry,
        balanced=balanced,
        params={
            "gamma": gamma,
            "n_rep": n_rep,
            "balanced": balanced,
            "p_plus": p_plus,
            "master_seed": seed.master_seed,
            "stream_index": seed.stream_index,
        },
    )


def phasor_sum(
    kernel: CorrelationKernel,
    slm_phases1: np.ndarray,
    slm_phases2: np.ndarray,
    delta: int = 0,
) -> np.ndarray:
    """Kernel-weighted sum of phasors of literal mask phases.

    ``slm_phases*`` have shape (pixels, T); half 2 is read at offset
    index i + delta.  Pixel pairs whose shifted index falls off the mask
    are dropped *without* renormalizing: photons addressed past the mask
    edge are simply lost.  With the default beam width (w_p = 20 out of
    320 pixels) the lost mass is far below float precision.

    The (j, k) contraction runs in deterministic row-major order
    (single-threaded einsum), which the bit-reproducibility contract
    relies on.
    """
    n_pix = kernel.weights.shape[0]
    if slm_phases1.shape[0] != n_pix or slm_phases2.shape[0] != n_pix:
        raise ValueError("phase arrays do not match the kernel pixel count")
    if slm_phases1.shape[1] != slm_phases2.shape[1]:
        raise ValueError("phase arrays must share one time grid")
    shifted = np.arange(n_pix) + int(delta)
    ok = (shifted >= 0) & (shifted < n_pix)
    if not ok.any():
        raise ValueError(f"shift delta={delta} moves every pixel off the mask")
    z1 = np.exp(1j * slm_phases1)                 # (n_pix, T)
    z2 = np.exp(1j * slm_phases2[shifted[ok]])    # (n_ok, T)
    m = np.einsum("jk,kt->jt", kernel.weights[:, ok], z2, optimize=False)
    return (z1 * m).sum(axis=0)


def kernel_coherence(
    kernel: CorrelationKernel,
    field1: PhaseField,
    field2: PhaseField,
    delta: int = 0,
) -> CoherenceSeries:
    """Coherence factor Gamma(delta, t) of the pixel-encoded channel.

    The mask phase imprinted per pixel is twice the noise phase (see the
    module docstring), so each pixel pair contributes
    exp(2i*(phi1 + phi2)).  Passing ``field2 = field1`` writes one phase
    function across both halves; ``delta`` shifts the half-2 phase array
    in pixels.
    """
    if field1.geometry != kernel.params.geometry or field2.geometry != kernel.params.geometry:
        raise ValueError("kernel and phase fields must share one mask geometry")
    if field1.times.shape != field2.times.shape or not np.array_equal(
        field1.times, field2.times
    ):
        raise ValueError("phase fields must share one time grid")
    values = phasor_sum(kernel, 2.0 * field1.phi, 2.0 * field2.phi, delta)
    return CoherenceSeries(
        field1.times,
        values,
        KERNEL_SUM,
        params={
            "delta": int(delta),
            "w_cp": kernel.params.w_cp,
            "w_p": kernel.params.w_p,
            "n": kernel.params.n,
            "n_rep": field1.n_rep,
            "shared_field": field2 is field1,
            **{k: field1.params.get(k) for k in ("gamma", "balanced", "master_seed", "stream_index")},
        },
    )


def transition_sweep_delta(
    gamma: float,
    deltas: Sequence[int],
    kernel_params: KernelParams,
    times: np.ndarray,
    n_rep: int = 3,
    seed: SeedSpec = SeedSpec(0),
    balanced: bool = True,
) -> list[CoherenceSeries]:
    """Gamma(delta, t) for each shift, sharing one phase field.

    The field (and hence the noise realizations) is fixed across the
    sweep; delta is the only variable.  Decreasing delta to zero walks
    the channel from independent-looking environments to one common
    environment.
    """
    kernel = build_kernel(kernel_params)
    fld = build_phase_field(
        gamma, times, n_rep, kernel_params.geometry, seed, balanced=balanced
    )
    return [kernel_coherence(kernel, fld, fld, delta=d) for d in deltas]


def transition_sweep_spectral(
    gamma: float,
    spectral_widths_nm: Sequence[float],
    optics_model,
    times: np.ndarray,
    n_rep: int = 3,
    geometry: MaskGeometry = MaskGeometry(),
    seed: SeedSpec = SeedSpec(0),
    balanced: bool = True,
) -> list[CoherenceSeries]:
    """Gamma(0, t) for each spectral width, sharing one phase field.

    ``optics_model`` maps a spectral width in nm to kernel parameters
    (w_cp, n, w_p) via ``lookup(width_nm)`` -- see
    :class:`ltgsim.optics.WcpTable`.  Raises a range error outside the
    calibrated table.  The shift is fixed at zero; widening the spectrum
    grows w_cp past the block size n_rep, so the two qubits stop seeing
    the same phase blocks and the channel slides toward the
    independent-environment limit.
    """
    fld = build_phase_field(gamma, times, n_rep, geometry, seed, balanced=balanced)
    out = []
    for width in spectral_widths_nm:
        w_cp, order, w_p = optics_model.lookup(width)
        kernel = build_kernel(KernelParams(w_cp=w_cp, w_p=w_p, n=order, geometry=geometry))
        series = kernel_coherence(kernel, fld, fld, delta=0)
        series.params["spectral_width_nm"] = float(width)
        out.append(series)
    return out
