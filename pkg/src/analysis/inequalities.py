"""Discrete checks of the functional inequalities behind the decay estimates.

All ratio tests run on mean-zero fields so that negative powers of the
fractional Laplacian are well defined. An inequality with an unknown constant
is "verified" by a finite ensemble maximum that is stable under grid
refinement, never by comparison with a fixed constant.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.analysis.norms import lp_norm
from src.core.errors import ExponentError
from src.core.logger import logger
from src.models.datatypes import EnsembleResult, EnsembleSpec, Field, GridSpec, Verdict
from src.numerics import spectral
from src.providers.ensembles import FieldEnsemble

# Fraction of |f|**(q/2) energy in the top third of modes above which SV results are flagged.
ALIASING_FRACTION = 1e-2
SV_FLOOR = 1e-9
REFINEMENT_TOLERANCE = 0.1

Profile = Callable[[np.ndarray, np.ndarray], np.ndarray]


# ── Stroock-Varopoulos ────────────────────────────────────────────────────────

def sv_terms(f: Field, q: float, alpha: float) -> Tuple[float, float]:
    """Both sides of ``int |f|**(q-2) f Lambda**alpha f >= (2/q) ||Lambda**(alpha/2) |f|**(q/2)||**2``.

    ``Lambda**s`` is the multiplier ``|k|**s``; at ``alpha = 0`` it is the identity.
    """
    if q < 2.0 or not 0.0 <= alpha <= 2.0:
        raise ExponentError(f"sv_terms: need q >= 2 and alpha in [0, 2], got q={q}, alpha={alpha}")
    grid = f.grid
    values = spectral.as_physical(f)
    abs_f = np.abs(values)
    lifted = spectral.as_physical(spectral.fractional_laplacian(f, alpha))
    lhs = grid.cell_area * float(np.sum(abs_f ** (q - 2.0) * values * lifted))

    power = Field.from_physical(grid, abs_f ** (0.5 * q))
    _aliasing_warning(power, q)
    rhs = 2.0 / q * spectral.spectral_l2_norm(spectral.fractional_laplacian(power, 0.5 * alpha)) ** 2
    return lhs, rhs


def sv_gap(f: Field, q: float, alpha: float) -> float:
    """``LHS - RHS`` of the Stroock-Varopoulos inequality; nonnegative up to round-off."""
    lhs, rhs = sv_terms(f, q, alpha)
    return lhs - rhs


def _aliasing_warning(power: Field, q: float) -> None:
    grid = power.grid
    energy = np.abs(spectral.as_spectral(power)) ** 2
    top = np.abs(grid.mode_index) > grid.n / 3.0
    outer = np.logical_or.outer(top, top)
    total = energy.sum()
    if total > 0 and energy[outer].sum() > ALIASING_FRACTION * total:
        logger.warning(
            f"sv_terms: ALIASING |f|**{q / 2:g} keeps {energy[outer].sum() / total:.2%} "
            f"of its energy in the top third of modes (n={grid.n})"
        )


# ── ratio tests ───────────────────────────────────────────────────────────────

def hls_ratio(f: Field, sigma: float, p: float) -> float:
    """``||Lambda**(-sigma) f||_{p*} / ||f||_p`` with ``1/p* = 1/p - sigma/2``.

    Raises:
        ExponentError: unless ``0 < sigma < 2`` and ``1 < p < 2/sigma``.
        MeanNotZeroError: ``f`` has a nonzero mean.
    """
    if not 0.0 < sigma < 2.0 or not 1.0 < p < 2.0 / sigma:
        raise ExponentError(f"hls_ratio: need 0 < sigma < 2 and 1 < p < 2/sigma, got sigma={sigma}, p={p}")
    p_star = 1.0 / (1.0 / p - 0.5 * sigma)
    potential = spectral.fractional_laplacian(f, -sigma)
    return lp_norm(potential, p_star) / lp_norm(f, p)


def gn_ratio(f: Field, sigma: float, s: float, p1: float, p2: float, p: Optional[float] = None) -> float:
    """``||Lambda**sigma f||_p / (||f||_{p1}**(1-theta) ||Lambda**s f||_{p2}**theta)``, ``theta = sigma/s``.

    ``p`` follows from ``1/p = (1 - theta)/p1 + theta/p2``; a given ``p`` must match it.

    Raises:
        ExponentError: ``0 <= sigma < s < 2`` violated or ``p`` inconsistent.
    """
    if not 0.0 <= sigma < s < 2.0:
        raise ExponentError(f"gn_ratio: need 0 <= sigma < s < 2, got sigma={sigma}, s={s}")
    theta = sigma / s
    inv_p = (1.0 - theta) / p1 + theta / p2
    if p is not None and abs(1.0 / p - inv_p) > 1e-12:
        raise ExponentError(f"gn_ratio: 1/p = {1.0 / p:.6g} but the exponent relation gives {inv_p:.6g}")
    p = np.inf if inv_p == 0.0 else 1.0 / inv_p
    lhs = lp_norm(spectral.fractional_laplacian(f, sigma), p)
    rhs = lp_norm(f, p1) ** (1.0 - theta) * lp_norm(spectral.fractional_laplacian(f, s), p2) ** theta
    return lhs / rhs


def _reciprocal(x: float) -> float:
    return 0.0 if np.isinf(x) else 1.0 / x


def _holder(p: float, a: float, b: float) -> bool:
    return abs(_reciprocal(p) - _reciprocal(a) - _reciprocal(b)) <= 1e-12


def kato_ponce_ratio(
    f: Field,
    g: Field,
    s: float,
    p: float = 2.0,
    p1: float = np.inf,
    p2: float = 2.0,
    p3: float = 2.0,
    p4: float = np.inf,
) -> float:
    """``||[Lambda**s, g] f||_p`` over ``||grad g||_{p1} ||Lambda**(s-1) f||_{p2} + ||Lambda**s g||_{p3} ||f||_{p4}``.

    A vanishing commutator over a vanishing right side (constant ``g``) gives 0.

    Raises:
        ExponentError: ``s <= 0`` or a Holder relation fails.
    """
    if not s > 0.0:
        raise ExponentError(f"kato_ponce_ratio: s must be positive, got {s}")
    if not (_holder(p, p1, p2) and _holder(p, p3, p4)):
        raise ExponentError(f"kato_ponce_ratio: Holder relations fail for p={p}, ({p1}, {p2}), ({p3}, {p4})")
    grid = f.grid
    fv, gv = spectral.as_physical(f), spectral.as_physical(g)
    product = Field.from_physical(grid, fv * gv)
    lifted_f = spectral.as_physical(spectral.fractional_laplacian(f, s))
    commutator = spectral.as_physical(spectral.fractional_laplacian(product, s)) - gv * lifted_f
    lhs = lp_norm(Field.from_physical(grid, commutator), p)

    g1, g2 = (spectral.as_physical(d) for d in spectral.gradient(g))
    grad_norm = lp_norm(Field.from_physical(grid, np.hypot(g1, g2)), p1)
    rhs = (grad_norm * lp_norm(spectral.fractional_laplacian(f, s - 1.0, project_mean=True), p2)
           + lp_norm(spectral.fractional_laplacian(g, s), p3) * lp_norm(f, p4))
    if rhs == 0.0:
        scale = lp_norm(product, p) + 1e-300
        return 0.0 if lhs <= 1e-12 * scale else float("inf")
    return lhs / rhs


# ── weight commutator ─────────────────────────────────────────────────────────

def _laplacian_fd(func: Profile, xi: np.ndarray, h: float) -> np.ndarray:
    x1, x2 = xi[..., 0], xi[..., 1]
    centre = func(x1, x2)
    ring = func(x1 + h, x2) + func(x1 - h, x2) + func(x1, x2 + h) + func(x1, x2 - h)
    return (ring - 4.0 * centre) / (h * h)


def _gradient_fd(func: Profile, xi: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    x1, x2 = xi[..., 0], xi[..., 1]
    return ((func(x1 + h, x2) - func(x1 - h, x2)) / (2.0 * h),
            (func(x1, x2 + h) - func(x1, x2 - h)) / (2.0 * h))


def _commutator_sides(F: Profile, alpha: float, xi: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """``[|xi|**alpha, -Lap]F`` by differences, and ``alpha**2 |xi|**(a-2) F + 2 alpha |xi|**(a-2) xi.grad F``."""
    def weighted(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        return np.hypot(x1, x2) ** alpha * F(x1, x2)

    x1, x2 = xi[..., 0], xi[..., 1]
    r = np.hypot(x1, x2)
    lhs = _laplacian_fd(weighted, xi, h) - r ** alpha * _laplacian_fd(F, xi, h)
    d1, d2 = _gradient_fd(F, xi, h)
    rhs = alpha * alpha * r ** (alpha - 2.0) * F(x1, x2) + 2.0 * alpha * r ** (alpha - 2.0) * (x1 * d1 + x2 * d2)
    return lhs, rhs


def _sides(F: Profile, alpha: float, xi: np.ndarray, h: float, richardson: bool) -> Tuple[np.ndarray, np.ndarray]:
    lhs, rhs = _commutator_sides(F, alpha, xi, h)
    if not richardson:
        return lhs, rhs
    lhs_half, rhs_half = _commutator_sides(F, alpha, xi, 0.5 * h)
    return (4.0 * lhs_half - lhs) / 3.0, (4.0 * rhs_half - rhs) / 3.0


def weight_commutator_check(
    F: Profile,
    alpha: float,
    xi0: Sequence[float],
    h: float = 1e-3,
    richardson: bool = False,
) -> float:
    """Relative mismatch of the weight-commutator identity at ``xi0``.

    Both sides use central differences of step ``h`` (``O(h**2)``);
    ``richardson=True`` combines ``h`` and ``h/2`` for ``O(h**4)``.

    Raises:
        ValueError: ``xi0`` within ``10 h`` of the origin for ``alpha < 2``.
    """
    xi = np.asarray(xi0, dtype=float)
    if alpha < 2.0 and np.hypot(*xi) < 10.0 * h:
        raise ValueError(f"weight_commutator_check: |xi0|={np.hypot(*xi):.3g} too close to the origin for h={h}")
    lhs, rhs = _sides(F, alpha, xi, h, richardson)
    return float(abs(lhs - rhs) / max(abs(rhs), abs(lhs), 1e-300))


def weight_commutator_asymmetry(
    F: Profile,
    alpha: float,
    radius: float = 1.0,
    h: float = 1e-2,
    n_angles: int = 8,
) -> float:
    """Angular spread of the commutator of a radial profile on the circle ``|xi| = radius``.

    Both sides are radial, so the differenced commutator should not depend on
    the angle; Richardson extrapolation removes the leading anisotropy of the
    five-point stencil.
    """
    angles = 2.0 * np.pi * np.arange(n_angles) / n_angles + 0.1
    xi = radius * np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    lhs, _ = _sides(F, alpha, xi, h, richardson=True)
    return float((lhs.max() - lhs.min()) / np.abs(lhs).mean())


# ── ensembles ─────────────────────────────────────────────────────────────────

MemberTest = Callable[[FieldEnsemble, int, GridSpec], float]


def evaluate_ensemble(
    name: str,
    ensemble: FieldEnsemble,
    grid: GridSpec,
    test: MemberTest,
    params: Optional[Dict[str, Any]] = None,
    jobs: int = 1,
) -> EnsembleResult:
    """Apply ``test`` to every member; results keep member order whatever ``jobs`` is."""
    ids = list(range(len(ensemble)))
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        values = list(pool.map(lambda i: float(test(ensemble, i, grid)), ids))
    arr = np.asarray(values)
    summary = {"max": float(arr.max()), "mean": float(arr.mean()), "min": float(arr.min())}
    return EnsembleResult(name, dict(params or {}, n=grid.n), ids, values, summary)


def refinement_check(
    name: str,
    ensemble: FieldEnsemble,
    test: MemberTest,
    sizes: Sequence[int] = (128, 256),
    params: Optional[Dict[str, Any]] = None,
    jobs: int = 1,
    tolerance: float = REFINEMENT_TOLERANCE,
) -> Tuple[List[EnsembleResult], Verdict]:
    """Ensemble maxima on the coarsest and finest grid; PASS iff they differ by at most ``tolerance``."""
    results = [evaluate_ensemble(name, ensemble, GridSpec(n, ensemble.spec.box_length), test, params, jobs)
               for n in sizes]
    coarse, fine = results[0].summary["max"], results[-1].summary["max"]
    delta = abs(fine - coarse) / abs(coarse) if coarse else float("inf")
    for res in results:
        res.summary.update({"max_coarse": coarse, "max_fine": fine, "refinement_delta": delta})
    passed = bool(np.isfinite(fine) and delta <= tolerance)
    logger.info(f"refinement_check: {name} max {coarse:.6g} (n={sizes[0]}) vs {fine:.6g} (n={sizes[-1]})")
    return results, Verdict(f"{name}_refinement", passed, delta, 0.0, tolerance)


def sv_ensemble(
    ensemble: FieldEnsemble,
    grid: GridSpec,
    q: float,
    alpha: float,
    jobs: int = 1,
    floor: float = SV_FLOOR,
) -> Tuple[EnsembleResult, Verdict]:
    """Relative gaps ``gap / |LHS|`` over the ensemble; PASS iff all are ``>= -floor``."""
    def test(ens: FieldEnsemble, i: int, g: GridSpec) -> float:
        lhs, rhs = sv_terms(ens.member(i, g), q, alpha)
        return (lhs - rhs) / abs(lhs) if lhs else 0.0

    result = evaluate_ensemble(f"sv_q{q:g}_a{alpha:g}", ensemble, grid, test, {"q": q, "alpha": alpha}, jobs)
    worst = result.summary["min"]
    return result, Verdict(result.name, bool(worst >= -floor), worst, 0.0, floor)


def run_inequality_suite(
    settings: Dict[str, Any],
    seed: int = 0,
    jobs: int = 1,
    tolerances: Optional[Dict[str, float]] = None,
) -> Tuple[List[EnsembleResult], List[Verdict]]:
    """Stroock-Varopoulos sweep, HLS/GN/Kato-Ponce refinement stability and the weight commutator.

    ``settings`` keys (all optional): ``count``, ``ratio_count``, ``sizes``,
    ``qs``, ``alphas``, ``hls`` (sigma, p), ``gn`` (sigma, s, p1, p2),
    ``kato_ponce`` (s list and exponents), ``commutator`` (alpha, xi0, h).
    """
    tol = {"sv": SV_FLOOR, "refinement": REFINEMENT_TOLERANCE, "commutator": 1e-6, "asymmetry": 1e-8}
    tol.update(tolerances or {})
    sizes = tuple(settings.get("sizes", (128, 256)))
    results: List[EnsembleResult] = []
    verdicts: List[Verdict] = []

    sv_members = FieldEnsemble(EnsembleSpec(seed=seed, count=int(settings.get("count", 1000))))
    sv_grid = GridSpec(sizes[0], sv_members.spec.box_length)
    for q in settings.get("qs", (3.0, 4.0, 6.0)):
        for alpha in settings.get("alphas", (0.5, 1.0, 1.5)):
            res, verdict = sv_ensemble(sv_members, sv_grid, float(q), float(alpha), jobs, tol["sv"])
            results.append(res)
            verdicts.append(verdict)

    ratio_members = FieldEnsemble(EnsembleSpec(seed=seed + 1, count=int(settings.get("ratio_count", 500))))
    hls = {"sigma": 1.0, "p": 4.0 / 3.0, **settings.get("hls", {})}
    gn = {"sigma": 0.5, "s": 1.5, "p1": 2.0, "p2": 2.0, **settings.get("gn", {})}
    kp = {"s": [0.5, 1.0, 1.5], "p": 2.0, "p1": np.inf, "p2": 2.0, "p3": 2.0, "p4": np.inf,
          **settings.get("kato_ponce", {})}

    tests: List[Tuple[str, MemberTest, Dict[str, Any]]] = [
        ("hls", lambda e, i, g: hls_ratio(e.member(i, g), hls["sigma"], hls["p"]), hls),
        ("gn", lambda e, i, g: gn_ratio(e.member(i, g), gn["sigma"], gn["s"], gn["p1"], gn["p2"]), gn),
    ]
    for s in kp["s"]:
        tests.append((f"kato_ponce_s{s:g}", _kato_test(float(s), kp), {**kp, "s": s}))
    for name, test, params in tests:
        res, verdict = refinement_check(name, ratio_members, test, sizes, params, jobs, tol["refinement"])
        results.extend(res)
        verdicts.append(verdict)

    cm = {"alpha": 1.0, "xi0": (1.0, 0.0), "h": 1e-3, **settings.get("commutator", {})}
    err = weight_commutator_check(_gaussian_profile, cm["alpha"], cm["xi0"], cm["h"])
    verdicts.append(Verdict("weight_commutator", bool(err <= tol["commutator"]), err, 0.0, tol["commutator"]))
    spread = weight_commutator_asymmetry(_gaussian_profile, cm["alpha"])
    verdicts.append(Verdict("weight_commutator_radial", bool(spread <= tol["asymmetry"]), spread, 0.0,
                            tol["asymmetry"]))
    return results, verdicts


def _kato_test(s: float, kp: Dict[str, Any]) -> MemberTest:
    def test(ens: FieldEnsemble, i: int, g: GridSpec) -> float:
        f, h = ens.pair(i, g)
        return kato_ponce_ratio(f, h, s, kp["p"], kp["p1"], kp["p2"], kp["p3"], kp["p4"])
    return test


def _gaussian_profile(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    return np.exp(-(x1 * x1 + x2 * x2) / 16.0)
