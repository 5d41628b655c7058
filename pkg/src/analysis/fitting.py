"""Rate extraction by least squares in transformed coordinates."""

from typing import Literal, Sequence

import numpy as np
from scipy import stats

from src.core.errors import InsufficientDataError
from src.models.datatypes import RateFit

MIN_SAMPLES = 8
MIN_DECADES = 1.0

RateModel = Literal["power", "log-power"]


def fit_rate(
    times: Sequence[float],
    values: Sequence[float],
    model: RateModel = "power",
    shift: float = 0.0,
    confidence: float = 0.95,
) -> RateFit:
    """Fit ``values`` against ``times``.

    ``power`` regresses ``log y`` on ``log(t + shift)``; ``log-power`` regresses
    ``log y`` on ``log log(2 + t)``.

    Args:
        times: Sample times.
        values: Positive samples.
        model: ``"power"`` or ``"log-power"``.
        shift: Time offset of the power model (1.0 gives ``(1 + t)`` rates).
        confidence: Two-sided level of the exponent interval.

    Returns:
        RateFit with exponent, prefactor, RMS residual of the transformed fit
        and a Student-t confidence interval.

    Raises:
        InsufficientDataError: fewer than 8 samples or less than one decade of ``t``.
        ValueError: nonpositive values or unknown model.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.size != y.size:
        raise ValueError(f"fit_rate: {t.size} times vs {y.size} values")
    if t.size < MIN_SAMPLES:
        raise InsufficientDataError(f"fit_rate: {t.size} samples, need {MIN_SAMPLES}")
    positive_t = t[t > 0]
    if positive_t.size < 2 or np.log10(positive_t.max() / positive_t.min()) < MIN_DECADES - 1e-12:
        raise InsufficientDataError("fit_rate: samples span less than one decade in t")
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise ValueError("fit_rate: values must be finite and positive")

    if model == "power":
        x = np.log(t + shift)
    elif model == "log-power":
        x = np.log(np.log(2.0 + t))
    else:
        raise ValueError(f"fit_rate: unknown model {model!r}")

    ly = np.log(y)
    reg = stats.linregress(x, ly)
    resid = ly - (reg.intercept + reg.slope * x)
    half = stats.t.ppf(0.5 * (1.0 + confidence), t.size - 2) * reg.stderr
    return RateFit(
        model=model,
        exponent=float(reg.slope),
        prefactor=float(np.exp(reg.intercept)),
        rms_residual=float(np.sqrt(np.mean(resid ** 2))),
        ci_low=float(reg.slope - half),
        ci_high=float(reg.slope + half),
        n_samples=int(t.size),
        t_min=float(t.min()),
        t_max=float(t.max()),
        shift=float(shift if model == "power" else 0.0),
    )


def tail_window(times: Sequence[float], decades: float) -> np.ndarray:
    """Boolean mask of the final ``decades`` of positive times.

    The window opens at the last sample at or below ``t_max * 10**-decades``
    so that it spans the full ``decades`` whenever the samples reach back that far.
    """
    t = np.asarray(times, dtype=float)
    if t.size == 0 or t.max() <= 0:
        return np.zeros(t.shape, dtype=bool)
    edge = t.max() * 10.0 ** (-decades) * (1.0 + 1e-12)
    earlier = t[(t > 0) & (t <= edge)]
    start = earlier.max() if earlier.size else t[t > 0].min()
    return t >= start
