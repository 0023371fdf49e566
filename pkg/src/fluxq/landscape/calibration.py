"""Crosstalk inference from a fixed-probe |S21| map.

The qubit spectrum is invariant under a small group of flux transformations:
mirror ``phi_t -> -phi_t``, mirror ``phi_b -> 2 - phi_b`` and the glide
``(phi_t, phi_b) -> (phi_t + 1/2, phi_b +- 1)`` (a sign flip of alpha is a
half-quantum tilt shift). A candidate crosstalk map is scored by how well
the low-|S21| region, carried into flux coordinates, overlaps its own images
under these operations. The mirrors fix the offsets and the off-diagonal
terms; the glide fixes the two scales. Each operation may be composed
with a lattice translation (period 1 in ``phi_t``, 2 in ``phi_b``); the
translate that keeps the most images on the map is picked once at the
initial guess, so windows centred anywhere in the flux plane work.

The region membership is a logistic step centred on the 10th percentile of
|S21| rather than a hard threshold, and off-grid images are evaluated by
cubic spline interpolation, which keeps the objective continuous for the
simplex search.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage, optimize

from .fluxmap import FluxMap
from .readout import CrosstalkMatrix

FluxOp = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]

SYMMETRY_OPS: dict[str, FluxOp] = {
    "mirror_t": lambda t, b: (-t, b),
    "mirror_b": lambda t, b: (t, 2.0 - b),
    "glide_up": lambda t, b: (t + 0.5, b + 1.0),
    "glide_down": lambda t, b: (t + 0.5, b - 1.0),
}

MIN_OVERLAP = 0.05
SPLINE_ORDER = 3
# images closer than this many cells to the border are dropped (spline edge error)
EDGE_MARGIN = 2.0
# (phi_t, phi_b) translations leaving the spectrum unchanged
LATTICE_SHIFTS = [(m, 2 * n) for n in (0, -1, 1) for m in (0, -1, 1)]


class CalibrationError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class CalibrationResult:
    xtalk: CrosstalkMatrix
    objective: float
    initial_objective: float
    per_op: dict[str, float]
    n_evaluations: int
    restarts: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def improvement(self) -> float:
        if self.objective == 0:
            return float("inf")
        return self.initial_objective / self.objective

    def to_dict(self) -> dict:
        return {
            "crosstalk": self.xtalk.to_dict(),
            "objective": self.objective,
            "initial_objective": self.initial_objective,
            "improvement": self.improvement,
            "per_op": self.per_op,
            "n_evaluations": self.n_evaluations,
            "restarts": self.restarts,
            **self.diagnostics,
        }


class AsymmetryObjective:
    """Mean over symmetry operations of ``1 - IoU(region, image of region)``."""

    def __init__(
        self,
        fmap: FluxMap,
        quantile: float = 0.10,
        softness: float = 1.0,
        ops: dict[str, FluxOp] | None = None,
        nan_margin: int = 2,
        blur: float = 0.0,
        edge: float = EDGE_MARGIN,
    ):
        if fmap.rows.name != "i_b" or fmap.cols.name != "i_t":
            raise ValueError("expected a map with rows i_b and columns i_t")
        self.fmap = fmap
        self.ops = dict(ops or SYMMETRY_OPS)
        s = fmap.values
        nan = np.isnan(s)
        if nan.all():
            raise CalibrationError("map has no valid cells")
        lo, thr, hi = np.nanquantile(s, [0.02, quantile, 0.20])
        self.threshold = float(thr)
        self.width = float(softness * (hi - lo)) or 1e-12
        filled = np.where(nan, np.nanmax(s), s)
        if blur > 0:
            filled = ndimage.gaussian_filter(filled, blur, mode="nearest")
        self._coef = ndimage.spline_filter(filled, order=SPLINE_ORDER)
        self._bad = ndimage.binary_dilation(nan, iterations=nan_margin) if nan.any() else nan
        self._has_nan = bool(nan.any())
        self._member = self._membership(filled)
        i_t, i_b = np.meshgrid(fmap.cols.values, fmap.rows.values)
        self._i_t = i_t
        self._i_b = i_b
        self.edge = float(edge)
        self._fixed: dict[str, int] = {}
        self._record: dict[str, int] = {}
        self.evaluations = 0

    def _membership(self, s: np.ndarray) -> np.ndarray:
        z = np.clip((s - self.threshold) / self.width, -50, 50)
        return 1.0 / (1.0 + np.exp(z))

    def region(self) -> np.ndarray:
        """Hard low-|S21| region (cells at or below the threshold)."""
        return np.nan_to_num(self.fmap.values, nan=np.inf) <= self.threshold

    def fix_translations(self, xtalk: CrosstalkMatrix) -> dict[str, tuple[int, int]]:
        """Freeze, per op, the lattice translate chosen at ``xtalk``.

        Left free, the choice can switch mid-search and make the objective
        jump; frozen, every op is one fixed flux map and stays continuous.
        """
        self._fixed = {}
        chosen = self.translations(xtalk)
        self._fixed = {name: LATTICE_SHIFTS.index(v) for name, v in chosen.items()}
        return chosen

    def translations(self, xtalk: CrosstalkMatrix) -> dict[str, tuple[int, int]]:
        """Lattice translate used by each op at ``xtalk``."""
        self._record = {}
        self.per_op(xtalk)
        return {name: LATTICE_SHIFTS[k] for name, k in self._record.items()}

    def per_op(self, xtalk: CrosstalkMatrix) -> dict[str, float]:
        fm = self.fmap
        phi_t, phi_b = xtalk.fluxes(self._i_t, self._i_b)
        inv = np.linalg.inv(xtalk.m)
        # an op composed with a lattice translation is again a symmetry;
        # each op uses the translate keeping the most images on the map
        shifts = np.array(LATTICE_SHIFTS, dtype=float) @ inv.T
        d_ct = shifts[:, 0, None] / fm.cols.step
        d_cb = shifts[:, 1, None] / fm.rows.step
        lo, hi_t, hi_b = self.edge, fm.cols.count - 1 - self.edge, fm.rows.count - 1 - self.edge
        good = ~self._bad.ravel()
        member = self._member.ravel()
        out = {}
        for name, op in self.ops.items():
            t2, b2 = op(phi_t, phi_b)
            j_t, j_b = xtalk.currents(t2, b2)
            ct = (j_t.ravel() - fm.cols.start) / fm.cols.step + d_ct
            cb = (j_b.ravel() - fm.rows.start) / fm.rows.step + d_cb
            ok = (ct >= lo) & (ct <= hi_t) & (cb >= lo) & (cb <= hi_b) & good
            k = self._fixed.get(name)
            if k is None:
                k = int(np.argmax(ok.sum(axis=1)))
            self._record[name] = k
            ok, ct, cb = ok[k], ct[k], cb[k]
            if ok.sum() < MIN_OVERLAP * good.size:
                out[name] = 1.0
                continue
            coords = [cb[ok], ct[ok]]
            m1 = member[ok]
            s2 = ndimage.map_coordinates(self._coef, coords, order=SPLINE_ORDER, prefilter=False)
            if self._has_nan:
                # drop images whose interpolation stencil touches a bad cell
                i0, j0 = np.floor(coords[0]).astype(int), np.floor(coords[1]).astype(int)
                bad = self._bad
                keep = ~(bad[i0, j0] | bad[i0 + 1, j0] | bad[i0, j0 + 1] | bad[i0 + 1, j0 + 1])
                m1, s2 = m1[keep], s2[keep]
            m2 = self._membership(s2)
            union = np.maximum(m1, m2).sum()
            out[name] = 1.0 - float(np.minimum(m1, m2).sum() / union) if union > 0 else 1.0
        return out

    def __call__(self, xtalk: CrosstalkMatrix) -> float:
        self.evaluations += 1
        return float(np.mean(list(self.per_op(xtalk).values())))


def count_closed_regions(fmap: FluxMap, quantile: float = 0.10) -> int:
    """Connected low-|S21| components that do not touch the map border."""
    s = np.nan_to_num(fmap.values, nan=np.inf)
    thr = np.nanquantile(fmap.values, quantile)
    labels, n = ndimage.label(s <= thr)
    border = set(np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]])))
    return sum(1 for k in range(1, n + 1) if k not in border)


def canonical_offset(offset: np.ndarray, reference: np.ndarray, reach: int = 3) -> np.ndarray:
    """Representative of ``offset`` modulo the lattice ``(1/2, 0)``, ``(0, 1)`` nearest ``reference``.

    The symmetry group is normalized by these translations, so the
    objective cannot tell such offsets apart.
    """
    best, best_d = np.asarray(offset, dtype=float), np.inf
    for k in range(-reach, reach + 1):
        for m in range(-reach, reach + 1):
            cand = offset + np.array([0.5 * m, float(k)])
            d = float(np.hypot(*(cand - reference)))
            if d < best_d - 1e-12:
                best, best_d = cand, d
    return best


def _candidate(x: np.ndarray, base: CrosstalkMatrix) -> CrosstalkMatrix:
    # flux-space correction: phi -> (1 + E) phi + delta, applied on top of the guess
    a = np.eye(2) + x[:4].reshape(2, 2)
    return CrosstalkMatrix(a @ base.m, a @ base.offset + x[4:6])


# off-diagonal flux corrections tried when the guess itself leads nowhere;
# a diagonal guess misses M @ diag(M)^-1 by up to about +-1.2 off the diagonal
_SKEW_LEVELS = (-1.0, -0.6, -0.3, 0.0, 0.3, 0.6, 1.0)
_SKEW_STARTS = [(a, b) for a in _SKEW_LEVELS for b in _SKEW_LEVELS if (a, b) != (0.0, 0.0)]


def _simplex_search(
    fun: Callable[[np.ndarray], float],
    x0: np.ndarray,
    step: float,
    max_restarts: int,
    max_iter: int,
) -> tuple[np.ndarray, float, int]:
    x, best = np.asarray(x0, dtype=float), fun(x0)
    restarts = 0
    for k in range(max_restarts):
        h = step * 0.5**k
        simplex = np.vstack([x] + [x + h * e for e in np.eye(x.size)])
        res = optimize.minimize(
            fun,
            x,
            method="Nelder-Mead",
            options={"initial_simplex": simplex, "xatol": 1e-5, "fatol": 1e-8, "maxiter": max_iter},
        )
        restarts += 1
        improved = res.fun < best - 1e-9
        if res.fun <= best:
            x, best = res.x, float(res.fun)
        if not improved and k > 0:
            break
    return x, best, restarts


def infer_crosstalk(
    fmap: FluxMap,
    initial_guess: CrosstalkMatrix,
    *,
    max_objective: float = 0.05,
    max_restarts: int = 4,
    step: float = 0.05,
    max_iter: int = 2000,
    softness: float = 1.0,
    coarse_blur: float = 2.0,
    accept_objective: float = 0.01,
    max_starts: int = 8,
) -> CalibrationResult:
    """Fit the crosstalk matrix and offsets by Nelder-Mead on the asymmetry objective.

    The search runs in flux-space correction coordinates relative to
    ``initial_guess``. A first pass on a Gaussian-blurred copy of the map
    (``coarse_blur`` cells) widens the basin; the second pass on the map
    itself is restarted from the incumbent with a halved simplex until it
    stops improving. If the result is still above ``accept_objective`` the
    search is repeated from a ring of skewed starting points and the best
    fit is kept; at most ``max_starts`` of those are run, in order of
    their blurred objective. Offsets come back as the lattice representative
    nearest the guess (see :func:`canonical_offset`).

    Raises :class:`CalibrationError` when the map holds no closed low-|S21|
    contour or when the final objective exceeds ``max_objective``.
    """
    if count_closed_regions(fmap) < 1:
        raise CalibrationError("degenerate map: no closed low-|S21| contour")
    objective = AsymmetryObjective(fmap, softness=softness)

    def wrap(obj: AsymmetryObjective) -> Callable[[np.ndarray], float]:
        def fun(x: np.ndarray) -> float:
            try:
                cand = _candidate(x, initial_guess)
            except ValueError:
                return 2.0
            return obj(cand)

        return fun

    translations = objective.fix_translations(initial_guess)
    fine = wrap(objective)
    coarse = None
    if coarse_blur > 0:
        blurred = AsymmetryObjective(fmap, softness=2.0 * softness, blur=coarse_blur)
        blurred.fix_translations(initial_guess)
        coarse = wrap(blurred)
    initial = fine(np.zeros(6))

    def run(x0: np.ndarray) -> tuple[np.ndarray, float, int]:
        if coarse is not None:
            x0, _, _ = _simplex_search(coarse, x0, 2.0 * step, 2, max_iter)
        return _simplex_search(fine, x0, step, max_restarts, max_iter)

    # the guess first; if that lands in a poor local minimum, restart from
    # skewed guesses (off-diagonal flux corrections of either sign), most
    # promising first
    x, best, restarts = run(np.zeros(6))
    starts = 1
    if best > accept_objective:
        ranked = [np.array([0.0, e01, e10, 0.0, 0.0, 0.0]) for e01, e10 in _SKEW_STARTS]
        if coarse is not None:
            ranked.sort(key=coarse)
        for x0 in ranked[:max_starts]:
            xs, fs, rs = run(x0)
            starts += 1
            restarts += rs
            if fs < best:
                x, best = xs, fs
            if best <= accept_objective:
                break
    evaluations = objective.evaluations

    xtalk = _candidate(x, initial_guess)
    xtalk = CrosstalkMatrix(xtalk.m, canonical_offset(xtalk.offset, initial_guess.offset))
    result = CalibrationResult(
        xtalk=xtalk,
        objective=best,
        initial_objective=initial,
        per_op=objective.per_op(xtalk),
        n_evaluations=evaluations,
        restarts=restarts,
        diagnostics={
            "threshold": objective.threshold,
            "membership_width": objective.width,
            "closed_regions": count_closed_regions(fmap),
            "starts": starts,
            "translations": {k: list(v) for k, v in translations.items()},
        },
    )
    if best > max_objective:
        raise CalibrationError(
            f"calibration failed: objective {best:.4g} > {max_objective:g}",
            diagnostics=result.to_dict(),
        )
    return result
