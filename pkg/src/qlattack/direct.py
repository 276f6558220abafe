"""Constrained DIRECT maximizer over a hypercube centered on the seed point.

The search box is built so the seed ``x_A`` sits exactly at the center of the
unit cube; the first point evaluated is therefore ``x_A`` itself, which is
always feasible.  Candidates are mapped to feature space with
``x = x_A + (2u - 1) * half_extent`` on the active dimensions; dimensions with
zero half-extent are frozen at ``x_A``.

Objective and constraint callables are vectorized: they receive an ``(m, d)``
array of feature-space points and return ``(m,)`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_LEVEL = 25  # side 3**-25 ~ 1e-12; such rectangles are no longer divided


class InfeasibleStepError(RuntimeError):
    """No feasible center was found within the evaluation budget."""


@dataclass(frozen=True)
class SearchBox:
    """Feature-space box around ``center_point`` mapped onto the unit cube.

    The cube center u = 0.5 maps to ``center_point`` exactly.  Each half of
    the cube is mapped linearly onto its own side of the box, so the box may
    extend further below the center than above it (or the reverse).
    """

    lower: np.ndarray
    upper: np.ndarray
    center_point: np.ndarray

    @property
    def below(self) -> np.ndarray:
        return self.center_point - self.lower

    @property
    def above(self) -> np.ndarray:
        return self.upper - self.center_point

    @property
    def half_extent(self) -> np.ndarray:
        return np.maximum(self.below, self.above)

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.half_extent > 0)

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.half_extent > 0))

    def to_features(self, U: np.ndarray) -> np.ndarray:
        """Map unit-cube coordinates over the active dimensions to feature space."""
        U = np.atleast_2d(U)
        X = np.repeat(self.center_point[None, :], len(U), axis=0)
        act = self.active
        step = 2.0 * U - 1.0
        scale = np.where(step < 0, self.below[act], self.above[act])
        X[:, act] = self.center_point[act] + step * scale
        return X


BOX_MODES = ("symmetric", "reach")


def build_search_box(x_A, C: float, bounds, mode: str = "symmetric") -> SearchBox:
    """Box centered on ``x_A`` that holds the L1 ball of radius C.

    ``symmetric`` clips every dimension to the nearer bound so the box is
    symmetric about x_A; a seed on a bound face freezes that dimension.
    ``reach`` clips each side to its own bound, so a zero feature can still
    grow up to min(C, upper bound).
    """
    if not C > 0:
        raise ValueError(f"budget C must be positive, got {C}")
    if mode not in BOX_MODES:
        raise ValueError(f"mode must be one of {BOX_MODES}, got {mode!r}")
    x_A = np.asarray(x_A, dtype=float).ravel()
    lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), x_A.shape) for b in bounds)
    if np.any(x_A < lo) or np.any(x_A > hi):
        raise ValueError("x_A lies outside the feature bounds")
    if mode == "symmetric":
        h = np.minimum(np.minimum(x_A - lo, hi - x_A), C)
        return SearchBox(lower=x_A - h, upper=x_A + h, center_point=x_A.copy())
    return SearchBox(lower=np.maximum(lo, x_A - C), upper=np.minimum(hi, x_A + C), center_point=x_A.copy())


@dataclass(frozen=True)
class Rectangle:
    center: np.ndarray  # unit-cube coordinates
    levels: np.ndarray  # side along dim i is 3**-levels[i]
    value: float  # -inf when the center is infeasible (surrogate assigned at selection)
    feasible: bool
    index: int  # creation order

    @property
    def half_sides(self) -> np.ndarray:
        return 0.5 * 3.0 ** (-self.levels.astype(float))

    @property
    def size(self) -> float:
        return float(np.linalg.norm(self.half_sides))

    @property
    def volume(self) -> float:
        return float(np.prod(3.0 ** (-self.levels.astype(float))))

    @property
    def size_key(self) -> tuple:
        # Equal multisets of levels give exactly equal sizes.
        return tuple(sorted(self.levels.tolist()))


@dataclass
class DirectState:
    rectangles: list[Rectangle] = field(default_factory=list)
    best_feasible_value: float = -np.inf
    best_feasible_point: np.ndarray | None = None  # unit-cube coordinates
    evaluation_count: int = 0
    n_created: int = 0

    def add(self, rect: Rectangle):
        self.rectangles.append(rect)
        if rect.feasible and rect.value > self.best_feasible_value:
            self.best_feasible_value = rect.value
            self.best_feasible_point = rect.center

    def worst_feasible_value(self) -> float | None:
        vals = [r.value for r in self.rectangles if r.feasible]
        return min(vals) if vals else None

    def effective_values(self) -> np.ndarray:
        """Center values with the infeasible-center surrogate filled in."""
        worst = self.worst_feasible_value()
        surrogate = 0.0 if worst is None else worst - abs(worst) * 1e-2 - 1e-6
        return np.array([r.value if r.feasible else surrogate for r in self.rectangles])

    def total_volume(self) -> float:
        return float(sum(r.volume for r in self.rectangles))


def _evaluate(U, objective, constraint):
    feasible = np.asarray(constraint(U), dtype=bool)
    values = np.full(len(U), -np.inf)
    if feasible.any():
        values[feasible] = np.asarray(objective(U[feasible]), dtype=float)
    return values, feasible


def trisect(rect: Rectangle, objective, constraint, start_index: int = 0):
    """Divide ``rect`` along its longest sides.

    ``objective`` and ``constraint`` act on unit-cube coordinates.  Returns
    ``(middle, children)`` where ``middle`` keeps the parent's center and
    ``children`` holds the two new rectangles per split dimension.  The
    dimension whose new pair has the best value is split first and so keeps
    the largest pieces; ties go to the lower dimension index.
    """
    lmin = rect.levels.min()
    dims = np.flatnonzero(rect.levels == lmin)
    delta = 3.0 ** (-float(lmin) - 1.0)
    U = np.empty((2 * len(dims), len(rect.center)))
    for j, i in enumerate(dims):
        U[2 * j] = rect.center
        U[2 * j, i] -= delta
        U[2 * j + 1] = rect.center
        U[2 * j + 1, i] += delta
    values, feasible = _evaluate(U, objective, constraint)
    pair_best = np.maximum(values[0::2], values[1::2])
    order = sorted(range(len(dims)), key=lambda j: (-pair_best[j], dims[j]))

    levels = rect.levels.copy()
    children = []
    idx = start_index
    for j in order:
        levels[dims[j]] += 1
        for k in (2 * j, 2 * j + 1):
            children.append(Rectangle(U[k], levels.copy(), float(values[k]), bool(feasible[k]), idx))
            idx += 1
    middle = Rectangle(rect.center, levels.copy(), rect.value, rect.feasible, rect.index)
    return middle, children


def hull_select(sizes, values, best_value, eps_direct=1e-4) -> list[int]:
    """Positions ``a`` for which some K > 0 gives
    ``values[a] + K*sizes[a] >= values[j] + K*sizes[j]`` for all j and
    ``values[a] + K*sizes[a] >= best_value + eps_direct*|best_value|``."""
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    target = best_value + eps_direct * abs(best_value)
    out = []
    for a in range(len(sizes)):
        same = sizes == sizes[a]
        if np.any(values[same] > values[a]):
            continue
        smaller = sizes < sizes[a]
        larger = sizes > sizes[a]
        k_lo = np.max((values[smaller] - values[a]) / (sizes[a] - sizes[smaller]), initial=0.0)
        if larger.any():
            k_hi = np.min((values[a] - values[larger]) / (sizes[larger] - sizes[a]))
            if not (k_hi > 0 and k_hi >= k_lo):
                continue
            if values[a] + k_hi * sizes[a] < target:
                continue
        out.append(a)
    return out


def potentially_optimal(state: DirectState, eps_direct: float = 1e-4) -> list[int]:
    """Indices (into ``state.rectangles``) of potentially optimal rectangles,
    for maximization, in deterministic processing order."""
    rects = state.rectangles
    if not rects:
        raise ValueError("no rectangles to select from")
    values = state.effective_values()
    groups: dict[tuple, int] = {}
    for pos, r in enumerate(rects):
        if r.levels.min() >= MAX_LEVEL:
            continue
        key = r.size_key
        cur = groups.get(key)
        if cur is None or (values[pos], -r.index) > (values[cur], -rects[cur].index):
            groups[key] = pos
    if not groups:
        return []
    cand = sorted(groups.values(), key=lambda p: -rects[p].size)
    sizes = np.array([rects[p].size for p in cand])
    vals = values[cand]
    fbest = state.best_feasible_value if np.isfinite(state.best_feasible_value) else vals.max()
    chosen = [cand[a] for a in hull_select(sizes, vals, fbest, eps_direct)]
    chosen.sort(key=lambda p: (-rects[p].size, -values[p], rects[p].index))
    return chosen


def run_direct(objective, constraint, n_dims: int, budget: int = 500, eps_direct: float = 1e-4,
               callback=None) -> DirectState:
    """DIRECT on the unit cube ``[0, 1]^n_dims`` (maximization).

    ``budget`` caps the number of center evaluations, feasible or not.
    ``callback(state)`` runs after every iteration.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    state = DirectState()
    c0 = np.full((1, n_dims), 0.5)
    v0, f0 = _evaluate(c0, objective, constraint)
    state.add(Rectangle(c0[0], np.zeros(n_dims, dtype=int), float(v0[0]), bool(f0[0]), 0))
    state.evaluation_count = 1
    state.n_created = 1
    if n_dims == 0:
        return state

    while state.evaluation_count < budget:
        selected = potentially_optimal(state, eps_direct)
        divided = False
        replacements = {}
        for pos in selected:
            rect = state.rectangles[pos]
            cost = 2 * int(np.count_nonzero(rect.levels == rect.levels.min()))
            if state.evaluation_count + cost > budget:
                break
            middle, children = trisect(rect, objective, constraint, state.n_created)
            replacements[pos] = middle
            for child in children:
                state.add(child)
            state.n_created += len(children)
            state.evaluation_count += cost
            divided = True
        for pos, middle in replacements.items():
            state.rectangles[pos] = middle
        if callback is not None:
            callback(state)
        if not divided:
            break
    return state


def maximize(acq, constraint, box: SearchBox, budget: int = 500, eps_direct: float = 1e-4):
    """Best feasible point (feature space) found by DIRECT inside ``box``."""
    def objective_u(U):
        return acq(box.to_features(U))

    def constraint_u(U):
        return constraint(box.to_features(U))

    state = run_direct(objective_u, constraint_u, box.n_active, budget, eps_direct)
    if state.best_feasible_point is None:
        raise InfeasibleStepError(
            f"no feasible center among {state.evaluation_count} DIRECT evaluations"
        )
    return box.to_features(state.best_feasible_point)[0]


def l1_constraint(x_A, C: float, tol: float = 0.0):
    """Vectorized ``||x - x_A||_1 <= C`` check."""
    x_A = np.asarray(x_A, dtype=float)

    def constraint(X):
        return np.abs(np.atleast_2d(X) - x_A).sum(axis=1) <= C + tol

    return constraint
