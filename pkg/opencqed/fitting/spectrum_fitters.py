"""Shot-noise weighted fits of broadband cavity spectra, DIT scans and linewidth-versus-detuning curves.

Every model works on internally rescaled parameters of order one and maps the result back to SI units, propagating
the covariance.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray

from opencqed.common import GHZ
from opencqed.exceptions import NoConvergenceError, SingularJacobianError
from opencqed.fitting.general_fitter import FitModel, FitResult, fit_weighted, shot_noise_sigma
from opencqed.scattering import Geometry
from opencqed.spectra import BroadbandModel, Coefficients, DitModel, SampledSpectrum

logger = logging.getLogger(__name__)

MIN_BROADBAND_POINTS = 7
MIN_LINESHAPE_POINTS = 3
# Minimal significance, in standard deviations, of a broadband peak amplitude.
PEAK_SIGNIFICANCE = 3.0
UNIDENTIFIABLE = "unidentifiable"

LinewidthPoint = tuple[float, float, float]


class BroadbandFitModel(FitModel):
    """Lorentzian plus quadratic background in units of the initial linewidth, x = (f - f_ref) / kappa_ref."""

    param_names = ("amplitude_a", "u0", "k", "b0", "b1", "b2")

    def __init__(self, baseline: float) -> None:
        self.baseline = baseline

    def evaluate(self, x: NDArray[np.float64], p: NDArray[np.float64]) -> NDArray[np.float64]:
        a, u0, k, b0, b1, b2 = p
        t = x - u0
        h = k**2 / 4
        return np.asarray(a * h / (t**2 + h) + b0 + b1 * t + b2 * t**2 + self.baseline, dtype=np.float64)

    def jacobian(self, x: NDArray[np.float64], p: NDArray[np.float64]) -> NDArray[np.float64]:
        a, u0, k, _, b1, b2 = p
        t = x - u0
        h = k**2 / 4
        denominator = t**2 + h
        lorentzian = h / denominator
        return np.stack(
            [
                lorentzian,
                a * 2 * h * t / denominator**2 - b1 - 2 * b2 * t,
                a * (k / 2) * t**2 / denominator**2,
                np.ones_like(t),
                t,
                t**2,
            ],
            axis=1,
        )


class DitFitModel(FitModel):
    """Two-level DIT model with frequencies in GHz and the cavity held fixed.

    y = (|S(x)|^2 + r0 + r1 x + r2 x^2) (fp0 + fp1 u + fp2 u^2), with u = x - Delta.
    """

    param_names = ("g", "gamma", "delta", "fp0", "fp1", "fp2")

    def __init__(
        self, kappa_i: float, kappa_c: float, gamma_d: float, bg_ratio: Coefficients, geometry: Geometry
    ) -> None:
        self.kappa_i = kappa_i
        self.kappa_c = kappa_c
        self.gamma_d = gamma_d
        self.bg_ratio = bg_ratio
        self.geometry = geometry

    def _amplitudes(
        self, x: NDArray[np.float64], p: NDArray[np.float64]
    ) -> tuple[NDArray[np.complex128], NDArray[np.complex128], NDArray[np.complex128], NDArray[np.complex128]]:
        g, gamma, delta = p[:3]
        kappa = self.kappa_i + 2 * self.kappa_c
        cavity = 1j * x - kappa / 2
        internal = 1j * x - self.kappa_i / 2
        emitter = 1j * (x - delta) - (gamma + self.gamma_d) / 2
        return cavity, internal, emitter, cavity * emitter + g**2

    def _transmission(self, x: NDArray[np.float64], p: NDArray[np.float64]) -> NDArray[np.complex128]:
        g = p[0]
        _, internal, emitter, denominator = self._amplitudes(x, p)
        if self.geometry == Geometry.DROP:
            return np.asarray(self.kappa_c * emitter / denominator)
        return np.asarray((internal * emitter + g**2) / denominator)

    def _background(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        r0, r1, r2 = self.bg_ratio
        return r0 + r1 * x + r2 * x**2

    def evaluate(self, x: NDArray[np.float64], p: NDArray[np.float64]) -> NDArray[np.float64]:
        fp0, fp1, fp2 = p[3:]
        u = x - p[2]
        level = np.abs(self._transmission(x, p)) ** 2 + self._background(x)
        return np.asarray(level * (fp0 + fp1 * u + fp2 * u**2), dtype=np.float64)

    def jacobian(self, x: NDArray[np.float64], p: NDArray[np.float64]) -> NDArray[np.float64]:
        g = p[0]
        fp0, fp1, fp2 = p[3:]
        cavity, internal, emitter, denominator = self._amplitudes(x, p)
        s = self._transmission(x, p)
        d2 = denominator**2
        if self.geometry == Geometry.DROP:
            ds_dg = -2 * g * self.kappa_c * emitter / d2
            ds_ddelta = -1j * self.kappa_c * g**2 / d2
            ds_dgamma = -self.kappa_c * g**2 / (2 * d2)
        else:
            ds_dg = 2 * g * (cavity - internal) * emitter / d2
            ds_ddelta = -1j * g**2 * (internal - cavity) / d2
            ds_dgamma = (g**2 / 2) * (cavity - internal) / d2

        def intensity_derivative(ds: NDArray[np.complex128]) -> NDArray[np.float64]:
            return np.asarray(2 * np.real(np.conj(s) * ds), dtype=np.float64)

        u = x - p[2]
        envelope = fp0 + fp1 * u + fp2 * u**2
        level = np.abs(s) ** 2 + self._background(x)
        return np.stack(
            [
                intensity_derivative(ds_dg) * envelope,
                intensity_derivative(ds_dgamma) * envelope,
                intensity_derivative(ds_ddelta) * envelope - level * (fp1 + 2 * fp2 * u),
                level,
                level * u,
                level * u**2,
            ],
            axis=1,
        )


class LineshapeFitModel(FitModel):
    """gamma_eff(Delta) = gamma + gamma_cav (kappa^2 / 4) / (Delta^2 + kappa^2 / 4), in GHz."""

    def __init__(self, kappa_fixed: float | None) -> None:
        self.kappa_fixed = kappa_fixed
        self.param_names = ("gamma", "gamma_cav") if kappa_fixed is not None else ("gamma", "gamma_cav", "kappa")

    def _kappa(self, p: NDArray[np.float64]) -> float:
        return float(p[2]) if self.kappa_fixed is None else self.kappa_fixed

    def evaluate(self, x: NDArray[np.float64], p: NDArray[np.float64]) -> NDArray[np.float64]:
        h = self._kappa(p) ** 2 / 4
        return np.asarray(p[0] + p[1] * h / (x**2 + h), dtype=np.float64)

    def jacobian(self, x: NDArray[np.float64], p: NDArray[np.float64]) -> NDArray[np.float64]:
        kappa = self._kappa(p)
        h = kappa**2 / 4
        columns = [np.ones_like(x), h / (x**2 + h)]
        if self.kappa_fixed is None:
            columns.append(p[1] * x**2 / (x**2 + h) ** 2 * (kappa / 2))
        return np.stack(columns, axis=1)


def _check_peak(spec: SampledSpectrum, init: BroadbandModel, sigma: NDArray[np.float64]) -> None:
    """Rejects spectra without a significant peak of the initial shape above a quadratic background."""
    t = (spec.frequencies - init.f0) / init.kappa
    design = np.stack([0.25 / (t**2 + 0.25), np.ones_like(t), t, t**2], axis=1) / sigma[:, None]
    target = (spec.counts - init.baseline) / sigma
    coefficients, *_ = np.linalg.lstsq(design, target, rcond=None)
    try:
        variance = np.linalg.inv(design.T @ design)[0, 0]
    except np.linalg.LinAlgError as exc:
        msg = "the frequency grid cannot separate the peak from the background"
        raise SingularJacobianError(msg) from exc
    if not abs(coefficients[0]) > PEAK_SIGNIFICANCE * math.sqrt(variance):
        msg = "no significant cavity peak: the linewidth kappa is unidentifiable"
        raise SingularJacobianError(msg)


def fit_broadband(spec: SampledSpectrum, init: BroadbandModel) -> FitResult:
    """Fits a Lorentzian cavity peak on a quadratic background, assuming shot-noise uncertainties.

    Args:
        spec: measured spectrum.
        init: initial guess; its baseline is held fixed.

    Returns:
        Fit with parameters ``amplitude_a``, ``f0``, ``kappa``, ``b0``, ``b1``, ``b2`` in counts and Hz, and the derived
        quality factor ``q``.
    """
    if len(spec) < MIN_BROADBAND_POINTS:
        msg = f"a broadband fit needs at least {MIN_BROADBAND_POINTS} points, got {len(spec)}"
        raise NoConvergenceError(msg)
    sigma = shot_noise_sigma(spec.counts)
    _check_peak(spec, init, sigma)

    f_ref, kappa_ref = init.f0, init.kappa
    x = (spec.frequencies - f_ref) / kappa_ref
    p0 = [init.amplitude_a, 0.0, 1.0, init.b0, init.b1 * kappa_ref, init.b2 * kappa_ref**2]
    scaled = fit_weighted(BroadbandFitModel(init.baseline), x, spec.counts, sigma, p0)
    if scaled.params["k"] < 0:
        scaled = _negate(scaled, "k")

    fit = scaled.linear_map(
        ("amplitude_a", "f0", "kappa", "b0", "b1", "b2"),
        [0.0, f_ref, 0.0, 0.0, 0.0, 0.0],
        np.diag([1.0, kappa_ref, kappa_ref, 1.0, 1 / kappa_ref, 1 / kappa_ref**2]),
    )
    if not abs(fit["amplitude_a"]) > PEAK_SIGNIFICANCE * fit.sigma("amplitude_a"):
        msg = "fitted peak amplitude is compatible with zero: the linewidth kappa is unidentifiable"
        raise SingularJacobianError(msg)

    f0, kappa = fit["f0"], fit["kappa"]
    fit = fit.with_derived("q", f0 / kappa, {"f0": 1 / kappa, "kappa": -f0 / kappa**2})
    logger.info("broadband fit: f0=%.6g Hz, kappa=%.4g Hz, Q=%.5g", f0, kappa, fit["q"])
    return fit


def fit_dit(
    spec: SampledSpectrum,
    fixed: tuple[float, float, Coefficients],
    init: DitModel,
) -> FitResult:
    """Fits a DIT scan with the cavity frequency, linewidth and background ratio held at their broadband values.

    The intrinsic-to-coupling split of the linewidth and the emitter dephasing are taken from ``init``.

    Args:
        spec: measured DIT spectrum, frequencies in Hz.
        fixed: ``(f0, kappa, bg_ratio)`` from a prior broadband fit; the ratio coefficients are per Hz of detuning.
        init: initial guess of the emitter parameters and Fabry-Perot envelope.

    Returns:
        Fit with parameters ``g``, ``gamma``, ``delta``, ``fp0``, ``fp1``, ``fp2`` in Hz and counts, and the derived
        cooperativity ``c``. Flagged ``unidentifiable`` when sigma(g) / g > 1.
    """
    f0, kappa, bg_ratio = fixed
    if kappa <= 0:
        msg = "the fixed cavity linewidth must be positive"
        raise ValueError(msg)
    rates = init.sys.rates
    coupling_share = rates.kappa_c / rates.kappa_total
    kappa_c = kappa * coupling_share
    model = DitFitModel(
        kappa_i=(kappa - 2 * kappa_c) / GHZ,
        kappa_c=kappa_c / GHZ,
        gamma_d=rates.gamma_d / GHZ,
        bg_ratio=(bg_ratio[0], bg_ratio[1] * GHZ, bg_ratio[2] * GHZ**2),
        geometry=init.geometry,
    )
    x = (spec.frequencies - f0) / GHZ
    fp0, fp1, fp2 = init.fp
    p0 = [rates.g / GHZ, rates.gamma / GHZ, rates.detuning / GHZ, fp0, fp1 * GHZ, fp2 * GHZ**2]
    scaled = fit_weighted(model, x, spec.counts, shot_noise_sigma(spec.counts), p0)
    if scaled.params["g"] < 0:
        scaled = _negate(scaled, "g")

    fit = scaled.linear_map(
        DitFitModel.param_names,
        np.zeros(6),
        np.diag([GHZ, GHZ, GHZ, 1.0, 1 / GHZ, 1 / GHZ**2]),
    )
    g, gamma = fit["g"], fit["gamma"]
    fit = fit.with_derived(
        "c", 4 * g**2 / (kappa * gamma), {"g": 8 * g / (kappa * gamma), "gamma": -4 * g**2 / (kappa * gamma**2)}
    )
    if not fit.sigma("g") < abs(g):
        logger.warning("DIT fit cannot resolve the coupling: g=%.3g Hz, sigma=%.3g Hz", g, fit.sigma("g"))
        fit = fit.with_flags(UNIDENTIFIABLE)
    logger.info("DIT fit: g=%.4g Hz, gamma=%.4g Hz, C=%.4g", g, gamma, fit["c"])
    return fit


def fit_lineshape_vs_detuning(
    linewidths: Sequence[LinewidthPoint],
    kappa_fixed: float | None,
    kappa_init: float | None = None,
) -> FitResult:
    """Fits the cavity-enhanced linewidth of an emitter as it is tuned across the cavity.

    Args:
        linewidths: ``(Delta, gamma_eff, sigma)`` triples in Hz.
        kappa_fixed: cavity linewidth to hold fixed, or None to fit it as well.
        kappa_init: initial guess of a free linewidth, defaults to twice the largest detuning.

    Returns:
        Fit with ``gamma`` and ``gamma_cav`` (and ``kappa`` when free), and derived ``c = gamma_cav / gamma`` and
        ``g = sqrt(gamma_cav kappa / 4)``.
    """
    data = np.asarray(linewidths, dtype=np.float64).reshape(-1, 3)
    model = LineshapeFitModel(None if kappa_fixed is None else kappa_fixed / GHZ)
    if data.shape[0] < max(MIN_LINESHAPE_POINTS, model.n_params):
        msg = f"a lineshape fit needs at least {max(MIN_LINESHAPE_POINTS, model.n_params)} detuning points"
        raise NoConvergenceError(msg)
    x, y, sigma = data[:, 0] / GHZ, data[:, 1] / GHZ, data[:, 2] / GHZ

    floor = float(y.min())
    p0 = [floor, max(float(y.max()) - floor, floor)]
    if kappa_fixed is None:
        p0.append((2 * float(np.abs(x).max()) if kappa_init is None else kappa_init / GHZ) or 1.0)
    scaled = fit_weighted(model, x, y, sigma, p0)
    if kappa_fixed is None and scaled.params["kappa"] < 0:
        scaled = _negate(scaled, "kappa")

    fit = scaled.linear_map(model.param_names, np.zeros(model.n_params), GHZ * np.eye(model.n_params))
    gamma, gamma_cav = fit["gamma"], fit["gamma_cav"]
    kappa = fit["kappa"] if kappa_fixed is None else kappa_fixed
    fit = fit.with_derived("c", gamma_cav / gamma, {"gamma": -gamma_cav / gamma**2, "gamma_cav": 1 / gamma})
    g = math.sqrt(max(gamma_cav, 0.0) * kappa / 4)
    if g > 0:
        gradient = {"gamma_cav": g / (2 * gamma_cav)}
        if kappa_fixed is None:
            gradient["kappa"] = g / (2 * kappa)
        fit = fit.with_derived("g", g, gradient)
    logger.info("lineshape fit: gamma=%.4g Hz, gamma_cav=%.4g Hz, C=%.3g", gamma, gamma_cav, fit["c"])
    return fit


def _negate(fit: FitResult, name: str) -> FitResult:
    """Flips the sign of a parameter that enters the model squared."""
    names = list(fit.params)
    signs = np.array([-1.0 if n == name else 1.0 for n in names])
    return fit.linear_map(names, np.zeros(len(names)), np.diag(signs))
