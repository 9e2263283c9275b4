"""Ambiguity sets of transition kernels in structured representations.

A stage model describes the set of kernels nature may pick from at one
decision stage. Every class exposes the same small interface:

* ``state_pieces(instance, t, s)`` lists the convex pieces of the set of
  conditional rows available at state ``s``, each as an array of extreme
  points with shape ``(k, n_actions, n_next)``;
* ``extreme_kernels(instance, t, ...)`` enumerates whole stage kernels built
  from one vertex per independent component;
* ``sample_kernels(instance, t, resolution, ...)`` walks a convex-weight grid
  inside each independent component.

Geometry is done with vertex lists and LP membership only; hulls are never
computed explicitly.
"""

from __future__ import annotations

import itertools
from math import comb
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DimensionError, EnumerationCapError, ValidationError
from .grid import dedup_rows, guarded_product_size, simplex_grid
from .lp import LinearProgram, in_hull, solve_lp
from .validation import PROB_TOL, simplex_violation

DEFAULT_CAP = 10 ** 6
MEMBER_TOL = 1e-8


class Polytope:
    """Convex polytope given by vertices or by ``A x <= b, E x == f``.

    Halfspace polytopes are converted to vertices on first use by brute-force
    active-set enumeration, which is fine in the handful of dimensions used
    here and keeps every later computation on the same vertex-list path.
    """

    def __init__(self, vertices=None, *, A=None, b=None, E=None, f=None, cap=DEFAULT_CAP):
        self._cap = cap
        if vertices is not None:
            V = np.array(vertices, dtype=float, ndmin=2)
            if V.shape[0] == 0:
                raise ValidationError("vertex list is empty")
            if not np.all(np.isfinite(V)):
                raise ValidationError("vertex list has non-finite coordinates")
            self._vertices = V
            self.halfspaces = None
            self.dim = V.shape[1]
            return
        if A is None and E is None:
            raise ValidationError("polytope needs vertices or halfspaces")
        d = np.array(A if A is not None else E, dtype=float, ndmin=2).shape[1]
        A = np.zeros((0, d)) if A is None else np.array(A, dtype=float, ndmin=2)
        b = np.zeros(0) if b is None else np.asarray(b, dtype=float).ravel()
        E = np.zeros((0, d)) if E is None else np.array(E, dtype=float, ndmin=2)
        f = np.zeros(0) if f is None else np.asarray(f, dtype=float).ravel()
        if A.shape != (b.size, d) or E.shape != (f.size, d):
            raise DimensionError("halfspace rows and right-hand sides disagree")
        self.halfspaces = (A, b, E, f)
        self._vertices = None
        self.dim = d

    @classmethod
    def from_halfspaces(cls, A=None, b=None, E=None, f=None):
        return cls(A=A, b=b, E=E, f=f)

    @property
    def is_vertex_list(self):
        return self.halfspaces is None

    def is_feasible(self):
        if self.is_vertex_list:
            return True
        A, b, E, f = self.halfspaces
        lp = LinearProgram(np.zeros(self.dim), A, b, E, f, [(None, None)] * self.dim)
        return solve_lp(lp).optimal

    def is_bounded(self):
        """Probe boundedness by minimizing and maximizing every coordinate."""
        if self.is_vertex_list:
            return True
        A, b, E, f = self.halfspaces
        for i in range(self.dim):
            for sign in (1.0, -1.0):
                c = np.zeros(self.dim)
                c[i] = sign
                res = solve_lp(LinearProgram(c, A, b, E, f, [(None, None)] * self.dim))
                if res.status != "optimal":
                    return False
        return True

    @property
    def vertices(self):
        if self._vertices is None:
            self._vertices = self._enumerate_vertices()
        return self._vertices

    def _enumerate_vertices(self):
        A, b, E, f = self.halfspaces
        if not self.is_feasible():
            raise ValidationError("halfspace polytope is empty")
        if not self.is_bounded():
            raise ValidationError("halfspace polytope is unbounded")
        d = self.dim
        rank_e = np.linalg.matrix_rank(E) if E.size else 0
        need = d - rank_e
        m = A.shape[0]
        if comb(m, need) > self._cap:
            raise EnumerationCapError("active sets", comb(m, need), self._cap)
        found = []
        scale = 1.0 + float(np.max(np.abs(np.concatenate([b, f])), initial=0.0))
        for rows in itertools.combinations(range(m), need):
            M = np.vstack([E, A[list(rows)]])
            rhs = np.concatenate([f, b[list(rows)]])
            if np.linalg.matrix_rank(M) < d:
                continue
            x, *_ = np.linalg.lstsq(M, rhs, rcond=None)
            if np.abs(M @ x - rhs).max(initial=0.0) > 1e-9 * scale:
                continue
            if A.size and np.any(A @ x - b > 1e-9 * scale):
                continue
            found.append(x)
        if not found:
            raise ValidationError("halfspace polytope has no vertices")
        V = dedup_rows(np.array(found), decimals=10)
        return np.round(V, 14) + 0.0

    def maximize(self, direction):
        """Maximum of ``direction @ x`` over the polytope and a maximizing vertex."""
        V = self.vertices
        scores = V @ np.asarray(direction, dtype=float)
        j = int(np.argmax(scores))
        return float(scores[j]), V[j]

    def contains(self, x, tol=MEMBER_TOL):
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dim:
            raise DimensionError(f"point of dimension {x.size} tested against a {self.dim}-dimensional polytope")
        if not self.is_vertex_list:
            A, b, E, f = self.halfspaces
            ok = True
            if A.size:
                ok &= bool(np.all(A @ x - b <= tol))
            if E.size:
                ok &= bool(np.all(np.abs(E @ x - f) <= tol))
            return ok
        return in_hull(self.vertices, x, tol)

    def __repr__(self):
        if self.is_vertex_list:
            return f"Polytope(vertices={self._vertices.tolist()})"
        return f"Polytope(halfspaces, dim={self.dim})"


class UnionOfPolytopes:
    """Finite union of polytopes of a common dimension.

    ``shape`` optionally records how flat points fold back into
    ``(n_actions, n_next)`` rows.
    """

    def __init__(self, pieces, shape=None):
        pieces = [p if isinstance(p, Polytope) else Polytope(p) for p in pieces]
        if not pieces:
            raise ValidationError("a union needs at least one piece")
        dims = {p.dim for p in pieces}
        if len(dims) != 1:
            raise DimensionError(f"pieces have mixed dimensions {sorted(dims)}")
        self.pieces = pieces
        self.dim = dims.pop()
        self.shape = shape

    def __len__(self):
        return len(self.pieces)

    def __iter__(self):
        return iter(self.pieces)

    def pooled_vertices(self):
        return dedup_rows(np.vstack([p.vertices for p in self.pieces]))

    def contains(self, x, tol=MEMBER_TOL):
        return any(p.contains(x, tol) for p in self.pieces)

    def folded_pieces(self):
        if self.shape is None:
            raise DimensionError("union has no row shape")
        return [p.vertices.reshape(-1, *self.shape) for p in self.pieces]


def _component_grid(vertices, resolution):
    """Convex-weight grid inside the hull of ``vertices`` (k, ...)."""
    V = np.asarray(vertices, dtype=float)
    if V.shape[0] == 1:
        return V
    W = simplex_grid(V.shape[0], resolution)
    return dedup_rows(np.tensordot(W, V, axes=1))


def _full_mask(instance, t, states):
    if states is None:
        return np.ones(instance.n_states(t), dtype=bool)
    return np.asarray(states, dtype=bool)


class StageModel:
    """Common interface of the per-stage ambiguity representations."""

    kind = "abstract"
    # True when the set factors as a product over states (nature's choice at
    # one state does not constrain another).
    state_rectangular = False

    def state_pieces(self, instance, t, s):
        raise NotImplementedError

    def components(self, instance, t, mask):
        """Independent components ``(vertices, assemble)`` of the stage set."""
        raise NotImplementedError

    # Generic behaviour built on ``components``: every stage kernel is
    # assembled from one point per component.

    def count_extreme(self, instance, t, states=None):
        mask = _full_mask(instance, t, states)
        comps, _ = self.components(instance, t, mask)
        total = 1
        for c in comps:
            total *= len(c)
        return total

    def extreme_kernels(self, instance, t, states=None, cap=DEFAULT_CAP):
        mask = _full_mask(instance, t, states)
        comps, assemble = self.components(instance, t, mask)
        guarded_product_size([len(c) for c in comps], f"extreme kernels at stage {t + 1}", cap)
        return [assemble(choice) for choice in itertools.product(*comps)]

    def sample_kernels(self, instance, t, resolution, states=None, cap=DEFAULT_CAP):
        mask = _full_mask(instance, t, states)
        comps, assemble = self.components(instance, t, mask)
        grids = [self._grid(c, resolution) for c in comps]
        guarded_product_size([len(g) for g in grids], f"kernel samples at stage {t + 1}", cap)
        return [assemble(choice) for choice in itertools.product(*grids)]

    def _grid(self, component, resolution):
        return list(_component_grid(np.array(component), resolution))

    def marginal(self, instance, t, s):
        shape = (instance.n_actions(t, s), instance.n_states(t + 1))
        pieces = [Polytope(p.reshape(p.shape[0], -1)) for p in self.state_pieces(instance, t, s)]
        return UnionOfPolytopes(pieces, shape)

    def supports(self, instance, t):
        out = []
        for s in range(instance.n_states(t)):
            pts = np.concatenate(self.state_pieces(instance, t, s), axis=0)
            out.append(np.any(np.abs(pts) > PROB_TOL, axis=0))
        return out

    def validate(self, instance, t):
        out = []
        nN = instance.n_states(t + 1)
        for s in range(instance.n_states(t)):
            where = instance.label(t, s)
            try:
                pieces = self.state_pieces(instance, t, s)
            except (ValidationError, DimensionError) as exc:
                out.append(f"{where}: {exc}")
                continue
            for piece in pieces:
                if piece.ndim != 3 or piece.shape[1:] != (instance.n_actions(t, s), nN):
                    out.append(f"{where}: rows of shape {piece.shape[1:]}, expected {(instance.n_actions(t, s), nN)}")
                    break
                bad = None
                for v in piece:
                    for a, row in enumerate(v):
                        problem = simplex_violation(row)
                        if problem:
                            bad = f"({t + 1}, {instance.states[t][s]}, {instance.actions[t][s][a]}): {problem}"
                            break
                    if bad:
                        break
                if bad:
                    out.append(bad)
                    break
        return out


class SaRect(StageModel):
    """Independent polytope of next-state distributions per (state, action).

    ``sets[s][a]`` is a :class:`Polytope` over the next-stage simplex.
    """

    kind = "sa_rect"
    state_rectangular = True

    def __init__(self, sets):
        self.sets = [[p if isinstance(p, Polytope) else Polytope(p) for p in row] for row in sets]

    def action_vertices(self, s, a):
        return self.sets[s][a].vertices

    def state_pieces(self, instance, t, s):
        self._check_shape(instance, t, s)
        per_action = [self.sets[s][a].vertices for a in range(instance.n_actions(t, s))]
        combos = [np.stack(c) for c in itertools.product(*per_action)]
        return [np.array(combos)]

    def _check_shape(self, instance, t, s):
        if len(self.sets) != instance.n_states(t) or len(self.sets[s]) != instance.n_actions(t, s):
            raise DimensionError(f"stage {t + 1}: sets do not match the state/action layout")
        for a, p in enumerate(self.sets[s]):
            if p.dim != instance.n_states(t + 1):
                raise DimensionError(f"{instance.label(t, s)} action {a}: polytope dimension {p.dim}")

    def components(self, instance, t, mask):
        keys = [(s, a) for s in range(instance.n_states(t)) for a in range(instance.n_actions(t, s))]
        comps = []
        for s, a in keys:
            comps.append(list(self.sets[s][a].vertices) if mask[s] else [self.sets[s][a].vertices[0]])

        def assemble(choice):
            rows = {k: r for k, r in zip(keys, choice)}
            return [np.array([rows[(s, a)] for a in range(instance.n_actions(t, s))])
                    for s in range(instance.n_states(t))]

        return comps, assemble

    def supports(self, instance, t):
        return [np.array([np.any(self.sets[s][a].vertices > PROB_TOL, axis=0)
                          for a in range(instance.n_actions(t, s))])
                for s in range(instance.n_states(t))]

    def validate(self, instance, t):
        out = []
        nN = instance.n_states(t + 1)
        if len(self.sets) != instance.n_states(t):
            return [f"stage {t + 1}: sets for {len(self.sets)} of {instance.n_states(t)} states"]
        for s in range(instance.n_states(t)):
            if len(self.sets[s]) != instance.n_actions(t, s):
                out.append(f"{instance.label(t, s)}: sets for {len(self.sets[s])} of {instance.n_actions(t, s)} actions")
                continue
            for a in range(instance.n_actions(t, s)):
                where = f"({t + 1}, {instance.states[t][s]}, {instance.actions[t][s][a]})"
                p = self.sets[s][a]
                if p.dim != nN:
                    out.append(f"{where}: dimension {p.dim}, expected {nN}")
                    continue
                try:
                    V = p.vertices
                except ValidationError as exc:
                    out.append(f"{where}: {exc}")
                    continue
                for v in V:
                    problem = simplex_violation(v)
                    if problem:
                        out.append(f"{where}: vertex {np.round(v, 12).tolist()} {problem}")
                        break
        return out


class SRect(StageModel):
    """Per-state union of polytopes in the joint (action x next-state) space.

    ``sets[s]`` is a :class:`UnionOfPolytopes` of flattened
    ``(n_actions, n_next)`` points, or a list of pieces each given as an
    array of shape ``(k, n_actions, n_next)``.
    """

    kind = "s_rect"
    state_rectangular = True

    def __init__(self, sets):
        self.sets = []
        for u in sets:
            if isinstance(u, UnionOfPolytopes):
                self.sets.append(u)
            else:
                pieces = [np.asarray(p, dtype=float) for p in u]
                shape = pieces[0].shape[1:]
                self.sets.append(UnionOfPolytopes([p.reshape(p.shape[0], -1) for p in pieces], shape))

    def state_pieces(self, instance, t, s):
        if len(self.sets) != instance.n_states(t):
            raise DimensionError(f"stage {t + 1}: sets for {len(self.sets)} of {instance.n_states(t)} states")
        shape = (instance.n_actions(t, s), instance.n_states(t + 1))
        u = self.sets[s]
        if u.dim != shape[0] * shape[1]:
            raise DimensionError(f"{instance.label(t, s)}: joint dimension {u.dim}, expected {shape[0] * shape[1]}")
        return [p.vertices.reshape(-1, *shape) for p in u.pieces]

    def components(self, instance, t, mask):
        comps = []
        for s in range(instance.n_states(t)):
            pieces = self.state_pieces(instance, t, s)
            pooled = dedup_rows(np.concatenate(pieces, axis=0))
            comps.append(list(pooled) if mask[s] else [pooled[0]])
        return comps, list

    def sample_kernels(self, instance, t, resolution, states=None, cap=DEFAULT_CAP):
        # Samples stay inside one piece at a time so no point leaves the union.
        mask = _full_mask(instance, t, states)
        per_state = []
        for s in range(instance.n_states(t)):
            pieces = self.state_pieces(instance, t, s)
            if not mask[s]:
                per_state.append([pieces[0][0]])
                continue
            pts = np.concatenate([_component_grid(p, resolution) for p in pieces], axis=0)
            per_state.append(list(dedup_rows(pts)))
        guarded_product_size([len(g) for g in per_state], f"kernel samples at stage {t + 1}", cap)
        return [list(c) for c in itertools.product(*per_state)]


class RRect(StageModel):
    """Kernels ``P(.|s,a) = sum_i kappa[s][a, i] w_i`` with ``w_i`` from factor sets.

    ``factors[i]`` is an array of candidate vectors (rows) for ``w_i``; the
    choice of ``w_i`` is shared by every state and action, which couples them.
    ``coefficients[s]`` has shape ``(n_actions, n_factors)`` and is nonnegative.
    """

    kind = "r_rect"

    def __init__(self, factors, coefficients):
        self.factors = [np.array(W, dtype=float, ndmin=2) for W in factors]
        self.coefficients = [np.array(k, dtype=float, ndmin=2) for k in coefficients]

    def used_factors(self, s):
        return [i for i in range(len(self.factors)) if np.any(self.coefficients[s][:, i] != 0)]

    def rows(self, s, choice):
        """Rows at state ``s`` for one chosen vector per factor."""
        W = np.stack(choice)
        return self.coefficients[s] @ W

    def state_pieces(self, instance, t, s):
        self._check_shape(instance, t, s)
        used = self.used_factors(s)
        kappa = self.coefficients[s][:, used]
        pts = []
        for choice in itertools.product(*[self.factors[i] for i in used]):
            pts.append(kappa @ np.stack(choice) if used else np.zeros((kappa.shape[0], instance.n_states(t + 1))))
        return [dedup_rows(np.array(pts))]

    def _check_shape(self, instance, t, s):
        nN = instance.n_states(t + 1)
        if len(self.coefficients) != instance.n_states(t):
            raise DimensionError(f"stage {t + 1}: coefficients for {len(self.coefficients)} of {instance.n_states(t)} states")
        k = self.coefficients[s]
        if k.shape != (instance.n_actions(t, s), len(self.factors)):
            raise DimensionError(f"{instance.label(t, s)}: coefficient block shape {k.shape}")
        for i, W in enumerate(self.factors):
            if W.shape[1] != nN:
                raise DimensionError(f"factor {i + 1} has dimension {W.shape[1]}, expected {nN}")

    def components(self, instance, t, mask):
        comps = [list(W) for W in self.factors]

        def assemble(choice):
            W = np.stack(choice)
            return [self.coefficients[s] @ W for s in range(instance.n_states(t))]

        return comps, assemble

    def best_factors(self, direction):
        """Per factor, the vector maximizing ``w @ direction`` (first on ties)."""
        return [W[int(np.argmax(W @ direction))] for W in self.factors]

    def validate(self, instance, t):
        out = []
        for s, k in enumerate(self.coefficients):
            if np.any(k < 0):
                out.append(f"{instance.label(t, s)}: negative factor coefficient")
        return out + super().validate(instance, t)


class SrRect(StageModel):
    """Minkowski blend ``beta * s_part + (1 - beta) * r_part``."""

    kind = "sr_rect"

    def __init__(self, beta, s_part: SRect, r_part: RRect):
        self.beta = float(beta)
        self.s_part = s_part
        self.r_part = r_part

    @property
    def state_rectangular(self):
        return self.beta == 1.0

    def state_pieces(self, instance, t, s):
        r_pts = self.r_part.state_pieces(instance, t, s)[0]
        out = []
        for piece in self.s_part.state_pieces(instance, t, s):
            blends = self.beta * piece[:, None] + (1.0 - self.beta) * r_pts[None, :]
            out.append(dedup_rows(blends.reshape(-1, *piece.shape[1:])))
        return out

    def components(self, instance, t, mask):
        s_comps, s_asm = self.s_part.components(instance, t, mask)
        r_comps, r_asm = self.r_part.components(instance, t, mask)
        n_s = len(s_comps)
        b = self.beta

        def assemble(choice):
            ks = s_asm(choice[:n_s])
            kr = r_asm(choice[n_s:])
            return [b * x + (1.0 - b) * y for x, y in zip(ks, kr)]

        return s_comps + r_comps, assemble

    def sample_kernels(self, instance, t, resolution, states=None, cap=DEFAULT_CAP):
        ks = self.s_part.sample_kernels(instance, t, resolution, states, cap)
        kr = self.r_part.sample_kernels(instance, t, resolution, states, cap)
        guarded_product_size([len(ks), len(kr)], f"kernel samples at stage {t + 1}", cap)
        b = self.beta
        return [[b * x + (1.0 - b) * y for x, y in zip(p, q)] for p in ks for q in kr]

    def validate(self, instance, t):
        if not 0.0 <= self.beta <= 1.0:
            return [f"stage {t + 1}: blend weight {self.beta} outside [0, 1]"]
        out = [v for v in self.r_part.validate(instance, t) if "negative" in v]
        return out + super().validate(instance, t)


class FiniteKernelSet(StageModel):
    """Explicit list of stage kernels, optionally closed under convex combination.

    With ``hull=False`` the set is exactly the listed kernels, so the marginal
    at a state is a finite point set and each point is its own piece. With
    ``hull=True`` the set is their convex hull.
    """

    kind = "finite"

    def __init__(self, kernels, hull=False):
        self.kernels = [[np.array(b, dtype=float, ndmin=2) for b in k] for k in kernels]
        if not self.kernels:
            raise ValidationError("kernel list is empty")
        self.hull = bool(hull)

    @property
    def state_rectangular(self):
        return len(self.kernels) == 1

    def state_pieces(self, instance, t, s):
        for k in self.kernels:
            if len(k) != instance.n_states(t):
                raise DimensionError(f"stage {t + 1}: kernel with {len(k)} state blocks")
        pts = dedup_rows(np.array([k[s] for k in self.kernels]))
        if self.hull:
            return [pts]
        return [p[None] for p in pts]

    def components(self, instance, t, mask):
        return [list(range(len(self.kernels)))], lambda choice: self.kernels[choice[0]]

    def sample_kernels(self, instance, t, resolution, states=None, cap=DEFAULT_CAP):
        if not self.hull or len(self.kernels) == 1:
            return list(self.kernels)
        W = simplex_grid(len(self.kernels), resolution)
        guarded_product_size([len(W)], f"kernel samples at stage {t + 1}", cap)
        out = []
        for w in W:
            out.append([sum(wi * k[s] for wi, k in zip(w, self.kernels)) for s in range(instance.n_states(t))])
        return out


class Singleton(StageModel):
    """A single known kernel."""

    kind = "singleton"
    state_rectangular = True

    def __init__(self, kernel):
        self.kernel = [np.array(b, dtype=float, ndmin=2) for b in kernel]

    def state_pieces(self, instance, t, s):
        if len(self.kernel) != instance.n_states(t):
            raise DimensionError(f"stage {t + 1}: kernel with {len(self.kernel)} state blocks")
        return [self.kernel[s][None]]

    def components(self, instance, t, mask):
        return [[0]], lambda choice: self.kernel


# ---------------------------------------------------------------------------
# Module-level operations


def _stage(model, t):
    return model[t] if isinstance(model, (list, tuple)) else model


def validate_model(model, instance, t):
    """Violations of stage ``t`` of ``model``; empty when every extreme kernel is valid."""
    return _stage(model, t).validate(instance, t)


def require_valid_model(model, instance):
    if len(model) != instance.horizon:
        raise ValidationError(f"ambiguity model covers {len(model)} stages, instance has {instance.horizon}")
    problems = []
    for t, stage in enumerate(model):
        problems += stage.validate(instance, t)
    if problems:
        raise ValidationError("invalid ambiguity model: " + "; ".join(problems), problems)
    return model


def enumerate_extreme_kernels(model, instance, t, cap=DEFAULT_CAP, states=None):
    return _stage(model, t).extreme_kernels(instance, t, states, cap)


def marginalize_statewise(model, instance, t, s):
    return _stage(model, t).marginal(instance, t, s)


def s_rect_enlargement(model, instance, t=None):
    """State-rectangular model with the same per-state marginals.

    With ``t`` given, returns the stage model; otherwise maps every stage.
    """
    if t is None:
        return [s_rect_enlargement(model, instance, k) for k in range(instance.horizon)]
    stage = _stage(model, t)
    if isinstance(stage, SRect):
        return stage
    return SRect([stage.marginal(instance, t, s) for s in range(instance.n_states(t))])


def compose_sr(beta, s_part, r_part, instance=None, t=None):
    """Blend an s-rectangular and an r-rectangular part; validated when an instance is given."""
    model = SrRect(beta, s_part, r_part)
    if instance is not None:
        stages = range(instance.horizon) if t is None else [t]
        problems = [v for k in stages for v in model.validate(instance, k)]
        if problems:
            raise ValidationError("invalid blend: " + "; ".join(problems), problems)
    return model


@dataclass
class ProductProbe:
    """Outcome of testing whether a state marginal is a product over actions."""

    is_product: bool
    witness: Optional[np.ndarray] = None
    checked: int = 0


def sa_product_probe(model, instance, t, s, cap=DEFAULT_CAP):
    """Stitch per-action rows from different marginal points and test membership.

    A marginal that is the product of its per-action projections contains
    every stitched point; the first stitched point that fails LP membership is
    returned as a witness.
    """
    marg = marginalize_statewise(model, instance, t, s)
    pts = marg.pooled_vertices().reshape(-1, *marg.shape)
    per_action = [dedup_rows(pts[:, a, :]) for a in range(marg.shape[0])]
    guarded_product_size([len(r) for r in per_action], "stitched rows", cap)
    checked = 0
    for rows in itertools.product(*per_action):
        point = np.stack(rows)
        checked += 1
        if not marg.contains(point.ravel()):
            return ProductProbe(False, point, checked)
    return ProductProbe(True, None, checked)


def states_product_probe(stage, instance, t, cap=DEFAULT_CAP, tol=MEMBER_TOL):
    """Stitch state blocks from different extreme kernels and test membership in the stage set.

    Only meaningful for sets given by a hull of kernels; returns a
    :class:`ProductProbe` whose witness is the stitched kernel.
    """
    kernels = stage.extreme_kernels(instance, t, cap=cap)
    flat = np.array([np.concatenate([b.ravel() for b in k]) for k in kernels])
    flat = dedup_rows(flat)
    nS = instance.n_states(t)
    per_state = [dedup_rows(np.array([k[s] for k in kernels])) for s in range(nS)]
    guarded_product_size([len(p) for p in per_state], "stitched kernels", cap)
    checked = 0
    for blocks in itertools.product(*per_state):
        checked += 1
        point = np.concatenate([b.ravel() for b in blocks])
        if not in_hull(flat, point, tol):
            return ProductProbe(False, list(blocks), checked)
    return ProductProbe(True, None, checked)
