"""
Qubit absorption spectrum S(omega) = int C(t) e^{i omega t} dt, C(t) = <sigma_-(t) sigma_+(0)>_ss,
computed with the quantum regression theorem in the (static) squeezed frame.

The regression pseudo-state chi(t) = e^{L t} (sigma_+ rho_ss) is stepped with a single precomputed
propagator e^{L dt}; C(t) = Tr[sigma_- chi(t)]. The correlation is demodulated at the band centre
before the FFT, so the sampling step only has to resolve the band width.
"""
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import scipy.linalg
import scipy.signal

from cqed.dynamics import build_liouvillian, steady_state
from cqed.exceptions import ConfigError, DecayWarning
from cqed.model import FrameSnapshot, ModelParams, hamiltonian_squeezed_parts
from cqed.operators import DensityMatrix, HilbertSpec, composite_operators


@dataclass(frozen=True)
class SpectrumSettings:
    """
    :param center: demodulation frequency, defaults to delta_q
    :param span: half width of the frequency window around the centre, defaults to
    20 max(kappa, gamma, g_tilde)
    :param t_max: longest correlation time, defaults to 4 ln(1 / decay_ratio) / min(kappa, gamma)
    :param decay_ratio: the correlation is followed until |C(t)| <= decay_ratio |C(0)|
    :param padding: zero padding factor of the FFT
    """
    center: Optional[float] = None
    span: Optional[float] = None
    t_max: Optional[float] = None
    decay_ratio: float = 1e-6
    padding: int = 4

    def __post_init__(self):
        if self.span is not None and not self.span > 0:
            raise ConfigError("The spectrum span must be positive, got %r" % self.span)
        if not 0 < self.decay_ratio < 1:
            raise ConfigError("decay_ratio must lie in (0, 1), got %r" % self.decay_ratio)
        if int(self.padding) != self.padding or self.padding < 1:
            raise ConfigError("padding must be a positive integer, got %r" % self.padding)


@dataclass
class SpectrumResult:
    omegas: np.ndarray
    values: np.ndarray
    steady_state: DensityMatrix
    achieved_decay: float
    correlation_time: float
    metadata: Dict[str, float] = field(default_factory=dict)

    def normalized(self) -> np.ndarray:
        """ S(omega) scaled so that max |S| = 1 (the overall scale is not physical). """
        peak = np.max(np.abs(self.values))
        if peak == 0:
            return self.values
        return self.values / peak


@dataclass(frozen=True)
class Peak:
    position: float
    height: float
    fwhm: float


def _default_span(params: ModelParams, snap: FrameSnapshot) -> float:
    span = 20 * max(params.kappa, params.gamma, snap.g_tilde)
    if span <= 0:
        raise ConfigError("Cannot pick a spectral window when kappa, gamma and g all vanish")
    return span


def _default_t_max(params: ModelParams, decay_ratio: float) -> float:
    rates = [rate for rate in (params.kappa, params.gamma) if rate > 0]
    if not rates:
        raise ConfigError("The correlation function never decays without dissipation")
    return 4 * math.log(1 / decay_ratio) / min(rates)


def absorption_spectrum(params: ModelParams, snap: FrameSnapshot, space: HilbertSpec,
                        settings: SpectrumSettings = SpectrumSettings()) -> SpectrumResult:
    if snap.r_dot != 0:
        raise ConfigError("The absorption spectrum needs a static drive (r_dot = 0)",
                          r_dot=snap.r_dot)
    h_rabi, h_err, _ = hamiltonian_squeezed_parts(snap, params, space)
    ops = composite_operators(space)
    # Squeezed vacuum is injected into the cavity, so both baths look like vacuum in this frame
    jumps = [(op, rate) for op, rate in ((ops["a"], params.kappa),
                                         (ops["sigma_minus"], params.gamma)) if rate > 0]
    liouvillian = build_liouvillian(h_rabi + h_err, jumps)
    rho_ss = steady_state(liouvillian)

    center = params.delta_q if settings.center is None else settings.center
    span = settings.span or _default_span(params, snap)
    t_max = settings.t_max or _default_t_max(params, settings.decay_ratio)
    dt = math.pi / span

    # Regression: chi(0) = sigma_+ rho_ss, C(t) = Tr[sigma_- chi(t)] = vec(sigma_-^T) . vec(chi)
    chi = (ops["sigma_plus"].entries @ rho_ss.entries).reshape(-1)
    readout = ops["sigma_minus"].entries.T.reshape(-1)
    propagator = scipy.linalg.expm(liouvillian.matrix * dt)

    correlation = [readout @ chi]
    threshold = settings.decay_ratio * abs(correlation[0])
    n_max = int(math.ceil(t_max / dt))
    while abs(correlation[-1]) > threshold and len(correlation) <= n_max:
        chi = propagator @ chi
        correlation.append(readout @ chi)
    correlation = np.array(correlation)
    times = dt * np.arange(len(correlation))
    achieved = float(abs(correlation[-1]) / abs(correlation[0])) if correlation[0] != 0 else 0.0
    if achieved > settings.decay_ratio:
        warnings.warn(DecayWarning("The correlation decayed only to %.2e of its initial value by "
                                   "t_max=%g" % (achieved, t_max), achieved=achieved, t_max=t_max),
                      stacklevel=2)

    # One-sided transform of the demodulated correlation, then S = F + F^* since C(-t) = C(t)^*
    demodulated = correlation * np.exp(1j * center * times)
    demodulated[0] *= 0.5
    n_fft = 1 << int(math.ceil(math.log2(settings.padding * len(demodulated))))
    one_sided = dt * n_fft * np.fft.ifft(demodulated, n_fft)
    values = np.fft.fftshift(one_sided + one_sided.conj())
    offsets = np.fft.fftshift(2 * np.pi * np.fft.fftfreq(n_fft, dt))

    return SpectrumResult(
        omegas=center + offsets,
        values=values,
        steady_state=rho_ss,
        achieved_decay=achieved,
        correlation_time=float(times[-1]),
        metadata={"center": center, "span": span, "dt": dt, "samples": len(correlation)},
    )


def find_peaks(result: SpectrumResult, prominence=0.05) -> List[Peak]:
    """
    Peaks of the normalized |S(omega)|, sorted by frequency. Positions are refined with a
    parabola through the three samples around each maximum; widths are taken at half prominence.
    """
    magnitude = np.abs(result.normalized())
    indices, _ = scipy.signal.find_peaks(magnitude, prominence=prominence)
    if indices.size == 0:
        return []
    widths = scipy.signal.peak_widths(magnitude, indices, rel_height=0.5)[0]
    step = result.omegas[1] - result.omegas[0]

    peaks = []
    for index, width in zip(indices, widths):
        position = result.omegas[index]
        if 0 < index < len(magnitude) - 1:
            left, mid, right = magnitude[index - 1: index + 2]
            curvature = left - 2 * mid + right
            if curvature != 0:
                position += 0.5 * (left - right) / curvature * step
        peaks.append(Peak(float(position), float(magnitude[index]), float(width * step)))
    return peaks
