"""Layered forest and tree categories of an algebraic pattern.

A forest of length n is a chain of n composable active morphisms; a tree
additionally ends at an elementary object.  A morphism of forests over a
monotone map phi is a tuple of levelwise inerts with all squares commuting
in the base.  Everything is truncated at a chain-length bound N; operations
that would need deeper trees fail loudly with TruncationEscape.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from .fincat import FinCategory, FinFunctor, SizeGuardError, enc
from .pattern import Pattern, PatternError, active_chains, levelwise_inerts
from .verdicts import Verdict


class TruncationEscape(Exception):
    pass


def monotone_maps(m: int, n: int):
    """All monotone maps [m] -> [n] as value tuples of length m+1."""
    return [tuple(t) for t in
            itertools.combinations_with_replacement(range(n + 1), m + 1)]


def is_convex(phi: tuple, n: int) -> bool:
    """n-convex: no jump from below n-1 directly to n."""
    for l in range(len(phi) - 1):
        if phi[l] < n - 1 and phi[l + 1] == n:
            return False
    return True


def t_k(phi: tuple, k: int, n: int) -> tuple:
    """The n-convex replacement T_k(phi): insert k+1 copies of n-1 at the jump."""
    if is_convex(phi, n):
        return phi
    l = next(l for l in range(len(phi) - 1)
             if phi[l] < n - 1 and phi[l + 1] == n)
    return phi[:l + 1] + (n - 1,) * (k + 1) + phi[l + 1:]


@dataclass(frozen=True)
class Forest:
    """A chain of n composable actives, tracked with its object sequence."""
    chain: tuple          # active morphism ids; empty for n = 0
    objs: tuple           # n+1 object ids

    @property
    def n(self) -> int:
        return len(self.objs) - 1

    def key(self) -> str:
        if not self.chain:
            return f"0;{self.objs[0]}"
        return f"{self.n};" + ">".join(self.chain)

    def sub(self, phi: tuple, P: Pattern) -> "Forest":
        """The pullback chain along phi: composites of segments."""
        cat = P.cat
        objs = tuple(self.objs[v] for v in phi)
        chain = []
        for a in range(len(phi) - 1):
            i, j = phi[a], phi[a + 1]
            m = cat.id_of(self.objs[i])
            for step in self.chain[i:j]:
                m = cat.compose(step, m)
            chain.append(m)
        return Forest(tuple(chain), objs)


def forest_of_chain(P: Pattern, chain: tuple, obj: str | None = None) -> Forest:
    cat = P.cat
    if not chain:
        assert obj is not None
        return Forest((), (obj,))
    objs = [cat.src(chain[0])]
    for a in chain:
        objs.append(cat.tgt(a))
    return Forest(tuple(chain), tuple(objs))


class TreeCat:
    """The truncated tree category Omega[O] <= N with decoded morphisms."""

    def __init__(self, P: Pattern, N: int, max_trees: int = 4096,
                 max_morphisms: int = 65536):
        if N < 1:
            raise TruncationEscape("chain bound must be at least 1")
        self.pattern = P
        self.N = N
        cat = P.cat
        self.trees: dict[str, Forest] = {}
        for e in P.elementary:
            self.trees[f"0;{e}"] = Forest((), (e,))
        for n in range(1, N + 1):
            for ch in active_chains(P, n):
                f = forest_of_chain(P, ch)
                if f.objs[-1] in P.elementary:
                    self.trees[f.key()] = f
        if len(self.trees) > max_trees:
            raise SizeGuardError(f"{len(self.trees)} trees > {max_trees}")
        self.mor: dict[str, tuple] = {}      # id -> (phi, levels)
        mors: dict[str, tuple[str, str]] = {}
        self._hom_cache: dict = {}
        names: dict[tuple, str] = {}
        keys = sorted(self.trees)
        for k1 in keys:
            f1 = self.trees[k1]
            for k2 in keys:
                f2 = self.trees[k2]
                for phi, levels in self._raw_hom(f1, f2):
                    mid = _mor_name(phi, levels, k1, k2)
                    mors[mid] = (k1, k2)
                    self.mor[mid] = (phi, levels)
                    names[(phi, levels, k1, k2)] = mid
            if len(mors) > max_morphisms:
                raise SizeGuardError("tree category exceeds morphism guard")
        self._names = names
        ids = {}
        for k, f in self.trees.items():
            phi = tuple(range(f.n + 1))
            levels = tuple(cat.id_of(x) for x in f.objs)
            ids[k] = _mor_name(phi, levels, k, k)

        def comp(gm, fm):
            phi, levels = self.compose_raw(self.mor[fm], self.mor[gm])
            return _mor_name(phi, levels, mors[fm][0], mors[gm][1])

        # structural generators: levelwise maps over the identity, cartesian
        # maps over arbitrary phi, and maps whose cartesian factorization
        # escapes the truncation; composition associativity is inherited
        # from the validated base pattern and the simplex category
        hint = []
        for mid, (phi, levels) in self.mor.items():
            src_k, tgt_k = mors[mid]
            n_src = self.trees[src_k].n
            identity_phi = phi == tuple(range(n_src + 1))
            sub = self.trees[tgt_k].sub(phi, P)
            cartesian = all(P.cat.is_identity(v) for v in levels)
            if identity_phi or cartesian or sub.key() not in self.trees:
                hint.append(mid)
        self.omega = FinCategory(self.trees, mors, ids, comp,
                                 name=f"Omega[{P.name}]<= {N}",
                                 max_morphisms=max_morphisms,
                                 generators_hint=hint,
                                 assoc_mode="inherited")

    # -- raw forest homs ---------------------------------------------------
    def _raw_hom(self, f1: Forest, f2: Forest):
        """All (phi, levels): f1 -> f2 = maps of forests over phi."""
        P = self.pattern
        out = []
        for phi in monotone_maps(f1.n, f2.n):
            sub = f2.sub(phi, P)
            for levels in levelwise_inerts(P, sub.chain, sub.objs,
                                           f1.chain, f1.objs):
                out.append((phi, levels))
        return out

    def forest_hom(self, tree_key: str, forest: Forest) -> list[tuple]:
        """Hom_Phi(tree, forest) as (phi, levels) pairs, cached."""
        key = (tree_key, forest.key())
        if key not in self._hom_cache:
            self._hom_cache[key] = self._raw_hom(self.trees[tree_key], forest)
        return self._hom_cache[key]

    def compose_raw(self, fm: tuple, gm: tuple) -> tuple:
        """Composite of (phi1, v): A -> B with (phi2, u): B -> C."""
        P = self.pattern
        cat = P.cat
        phi1, v = fm
        phi2, u = gm
        phi = tuple(phi2[a] for a in phi1)
        levels = tuple(cat.compose(v[i], u[phi1[i]]) for i in range(len(phi1)))
        return (phi, levels)

    def mor_id(self, phi: tuple, levels: tuple, src: str, tgt: str) -> str:
        return self._names[(phi, levels, src, tgt)]

    def roots_and_corollas(self) -> list[str]:
        return [k for k, f in self.trees.items() if f.n <= 1]


def _mor_name(phi, levels, src, tgt):
    return (f"w[{'.'.join(map(str, phi))}&{'&'.join(levels)}&{src}>{tgt}]")


_TC_CACHE: dict = {}


def build_tree_category(P: Pattern, N: int, **kw) -> TreeCat:
    key = (id(P), P.name, N, tuple(sorted(kw.items())))
    if key not in _TC_CACHE:
        _TC_CACHE[key] = TreeCat(P, N, **kw)
    return _TC_CACHE[key]


@dataclass
class ForestCat:
    cat: FinCategory
    forests: dict
    mor: dict
    to_delta: FinFunctor


def build_forest_category(P: Pattern, N: int, max_forests: int = 2048,
                          max_morphisms: int = 65536) -> ForestCat:
    """The full forest category Phi[O] <= N with its projection to Delta <= N."""
    if N < 1:
        raise TruncationEscape("chain bound must be at least 1")
    cat = P.cat
    forests: dict[str, Forest] = {}
    for x in cat.objects:
        forests[f"0;{x}"] = Forest((), (x,))
    for n in range(1, N + 1):
        for ch in active_chains(P, n):
            f = forest_of_chain(P, ch)
            forests[f.key()] = f
    if len(forests) > max_forests:
        raise SizeGuardError(f"{len(forests)} forests > {max_forests}")
    tmp = object.__new__(TreeCat)
    tmp.pattern = P
    tmp.N = N
    tmp.trees = forests
    tmp._hom_cache = {}
    mors, mor = {}, {}
    for k1, f1 in forests.items():
        for k2, f2 in forests.items():
            for phi, levels in TreeCat._raw_hom(tmp, f1, f2):
                mid = _mor_name(phi, levels, k1, k2)
                mors[mid] = (k1, k2)
                mor[mid] = (phi, levels)
        if len(mors) > max_morphisms:
            raise SizeGuardError("forest category exceeds morphism guard")
    ids = {}
    for k, f in forests.items():
        ids[k] = _mor_name(tuple(range(f.n + 1)),
                           tuple(cat.id_of(x) for x in f.objs), k, k)

    def comp(gm, fm):
        phi, levels = TreeCat.compose_raw(tmp, mor[fm], mor[gm])
        return _mor_name(phi, levels, mors[fm][0], mors[gm][1])

    phi_cat = FinCategory(forests, mors, ids, comp, name=f"Phi[{P.name}]<= {N}",
                          max_morphisms=max_morphisms, assoc_mode="inherited")
    delta = _delta_category(N)
    to_delta = FinFunctor(
        phi_cat, delta,
        {k: f"[{forests[k].n}]" for k in forests},
        {m: _delta_mor_name(mor[m][0], forests[mors[m][0]].n, forests[mors[m][1]].n)
         for m in mors},
        name="q", validate=True)
    return ForestCat(phi_cat, forests, mor, to_delta)


@lru_cache(maxsize=None)
def _delta_category(N: int) -> FinCategory:
    """The truncated simplex category Delta <= N."""
    objs = [f"[{n}]" for n in range(N + 1)]
    mors = {}
    data = {}
    for m in range(N + 1):
        for n in range(N + 1):
            for phi in monotone_maps(m, n):
                mid = _delta_mor_name(phi, m, n)
                mors[mid] = (f"[{m}]", f"[{n}]")
                data[mid] = phi

    def comp(gm, fm):
        phi1 = data[fm]
        phi2 = data[gm]
        phi = tuple(phi2[a] for a in phi1)
        return _delta_mor_name(phi, len(phi1) - 1,
                               int(mors[gm][1][1:-1]))

    ids = {f"[{n}]": _delta_mor_name(tuple(range(n + 1)), n, n)
           for n in range(N + 1)}
    return FinCategory(objs, mors, ids, comp, name=f"Delta<= {N}")


def _delta_mor_name(phi, m, n):
    return f"D[{m}>{n}:{','.join(map(str, phi))}]"


# -- pattern structure on the tree category -----------------------------------

def tree_pattern_structure(tc: TreeCat) -> Pattern:
    """The inert/active pattern on Omega[O]^op with roots and corollas elementary.

    Validation of this pattern is the computational proof that the two
    classes form a factorization system on the truncation.
    """
    P = tc.pattern
    isos = P.cat.isos()
    inert, active = [], []
    for mid, (phi, levels) in tc.mor.items():
        if all(phi[i + 1] == phi[i] + 1 for i in range(len(phi) - 1)):
            inert.append(mid)
        src_n = len(phi) - 1
        tgt = tc.omega.tgt(mid)
        tgt_n = tc.trees[tgt].n
        if phi[0] == 0 and phi[-1] == tgt_n and all(v in isos for v in levels):
            active.append(mid)
    op = tc.omega.opposite()
    elementary = tc.roots_and_corollas()
    return Pattern(op, inert, active, elementary,
                   name=f"Omega[{P.name}]^op,nat",
                   weak_middle_uniqueness=P.weak_middle_uniqueness)


def check_active_last_level_iso(tc: TreeCat) -> Verdict:
    """All levels iso iff the last level is iso (for endpoint-preserving phi)."""
    P = tc.pattern
    isos = P.cat.isos()
    for mid, (phi, levels) in tc.mor.items():
        tgt_n = tc.trees[tc.omega.tgt(mid)].n
        if phi[0] == 0 and phi[-1] == tgt_n:
            if (levels[-1] in isos) != all(v in isos for v in levels):
                return Verdict.failed(mid)
    return Verdict.passed()


# -- slices and the Lambda subcategory ----------------------------------------

@dataclass
class SliceOfTrees:
    cat: FinCategory
    maps: dict           # object id -> morphism id of Omega into the target
    convex: dict         # object id -> bool


def omega_slice(tc: TreeCat, target: str, convex_only: bool = False) -> SliceOfTrees:
    """The slice Omega[O]_{/[n;t]}, optionally restricted to n-convex maps."""
    om = tc.omega
    n = tc.trees[target].n
    objs, convex = {}, {}
    for m in om.morphisms_to(target):
        phi = tc.mor[m][0]
        c = is_convex(phi, n)
        if convex_only and not c:
            continue
        objs[f"<{m}>"] = m
        convex[f"<{m}>"] = c
    mors = {}
    mdata = {}
    for o1, u1 in objs.items():
        for o2, u2 in objs.items():
            src1 = om.src(u1)
            for w in om.hom(src1, om.src(u2)):
                if om.compose(u2, w) == u1:
                    mid = f"({w}:{o1}>{o2})"
                    mors[mid] = (o1, o2)
                    mdata[mid] = w
    ids = {o: f"({om.id_of(om.src(u))}:{o}>{o})" for o, u in objs.items()}

    def comp(gm, fm):
        w = om.compose(mdata[gm], mdata[fm])
        return f"({w}:{mors[fm][0]}>{mors[gm][1]})"

    cat = FinCategory(objs, mors, ids, comp, name=f"slice(/{target})",
                      max_objects=4096, max_morphisms=200000)
    return SliceOfTrees(cat, objs, convex)


def lambda_slice(tc: TreeCat, target: str) -> SliceOfTrees:
    """Lambda[O]_{/[n;t]}: the full subcategory of the slice on n-convex maps."""
    return omega_slice(tc, target, convex_only=True)


# -- functoriality -------------------------------------------------------------

class ClassViolation(Exception):
    pass


def omega_functor(F: FinFunctor, tc_src: TreeCat, tc_tgt: TreeCat) -> FinFunctor:
    """The induced functor Omega[F] on tree categories of a pattern map."""
    P, Q = tc_src.pattern, tc_tgt.pattern
    for m in P.inert:
        if m not in P.cat.overflow and F.on_mor(m) not in Q.inert:
            raise ClassViolation(("inert", m))
    for m in P.active:
        if m not in P.cat.overflow and F.on_mor(m) not in Q.active:
            raise ClassViolation(("active", m))
    for e in P.elementary:
        if F.on_obj(e) not in Q.elementary:
            raise ClassViolation(("elementary", e))
    obj_map = {}
    for k, f in tc_src.trees.items():
        img = Forest(tuple(F.on_mor(a) for a in f.chain),
                     tuple(F.on_obj(x) for x in f.objs))
        if img.key() not in tc_tgt.trees:
            raise TruncationEscape(img.key())
        obj_map[k] = img.key()
    mor_map = {}
    for mid, (phi, levels) in tc_src.mor.items():
        src, tgt = tc_src.omega.src(mid), tc_src.omega.tgt(mid)
        img_levels = tuple(F.on_mor(v) for v in levels)
        mor_map[mid] = tc_tgt.mor_id(phi, img_levels, obj_map[src], obj_map[tgt])
    return FinFunctor(tc_src.omega, tc_tgt.omega, obj_map, mor_map,
                      name=f"Omega[{F.name}]")


def hom_fiber_counts_match(tc: TreeCat, lc1_by_n: dict) -> Verdict:
    """Cross-check: Hom over phi agrees with Hom_{O_m}(phi^* t, s)."""
    P = tc.pattern
    for k1, f1 in tc.trees.items():
        for k2, f2 in tc.trees.items():
            per_phi: dict[tuple, int] = {}
            for m in tc.omega.hom(k1, k2):
                per_phi[tc.mor[m][0]] = per_phi.get(tc.mor[m][0], 0) + 1
            for phi in monotone_maps(f1.n, f2.n):
                sub = f2.sub(phi, P)
                direct = sum(1 for _ in levelwise_inerts(
                    P, sub.chain, sub.objs, f1.chain, f1.objs))
                if per_phi.get(phi, 0) != direct:
                    return Verdict.failed((k1, k2, phi))
    return Verdict.passed()
