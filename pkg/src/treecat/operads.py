"""One-color operads over span truncations, and the grid counterexample.

Operations are leaf-labeled terms over the generators, taken up to the
relation congruence; a morphism over a span is a per-column family of
operations, taken up to the copy permutations of equal matrix cells (the
quotient that keeps strict associativity after skeletalization).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .fincat import FinCategory, FinFunctor, SizeGuardError, chain_poset, \
    discrete_category, enc, product_category
from .pattern import Pattern, span_matrix, _mat_name
from .trees import TreeCat
from .segal import PresheafError
from .verdicts import Verdict


# -- labeled terms ---------------------------------------------------------------

def leaf(i):
    return ("leaf", i)


def node(gen, children):
    return ("op", gen, tuple(children))


def term_arity(t) -> int:
    if t[0] == "leaf":
        return 1
    return sum(term_arity(c) for c in t[2])


def term_leaves(t):
    if t[0] == "leaf":
        return [t[1]]
    out = []
    for c in t[2]:
        out.extend(term_leaves(c))
    return out


def relabel(t, perm: dict):
    if t[0] == "leaf":
        return leaf(perm[t[1]])
    return node(t[1], [relabel(c, perm) for c in t[2]])


def subst(outer, inners):
    """Graft inner terms onto the leaves of the outer term, in slot order.

    Leaves are relabeled 1..total in composition order (outer slot major).
    """
    offsets = []
    total = 0
    for it in inners:
        offsets.append(total)
        total += term_arity(it)

    def rec(t):
        if t[0] == "leaf":
            slot = t[1] - 1
            it = inners[slot]
            perm = {l: l + offsets[slot] for l in term_leaves(it)}
            # inner leaves are canonical 1..k, shift into place
            return relabel(it, {i: i + offsets[slot]
                                for i in range(1, term_arity(it) + 1)})
        return node(t[1], [rec(c) for c in t[2]])

    return rec(outer)


@dataclass(frozen=True)
class OperadPresentation:
    name: str
    generators: tuple      # (name, arity) pairs
    relations: tuple       # (term, term) pairs with equal arity

    def to_json(self):
        return {"name": self.name,
                "generators": [list(g) for g in self.generators],
                "relations": [[enc(a), enc(b)] for a, b in self.relations]}


class SmallOperad:
    """Operations by arity up to a bound, with the relation congruence."""

    def __init__(self, pres: OperadPresentation, max_arity: int,
                 term_cap: int = 4000):
        self.pres = pres
        self.max_arity = max_arity
        self._ops: dict[int, list] = {}
        self._canon: dict = {}
        terms = {n: set() for n in range(max_arity + 1)}
        terms[1].add(leaf(1))
        # grow terms by top-level generator application until stable
        changed = True
        while changed:
            changed = False
            for gname, ar in pres.generators:
                pools = [sorted(itertools.chain.from_iterable(
                    terms[a] for a in range(max_arity + 1)), key=enc)
                    for _ in range(ar)]
                for combo in itertools.product(*pools) if ar else [()]:
                    total = sum(term_arity(c) for c in combo)
                    if total > max_arity:
                        continue
                    outer = node(gname, [leaf(i + 1) for i in range(ar)])
                    t = subst(outer, list(combo)) if ar else node(gname, [])
                    if t not in terms[total]:
                        terms[total].add(t)
                        changed = True
                        if sum(len(v) for v in terms.values()) > term_cap:
                            raise SizeGuardError("operad term enumeration cap")
        # orbit closure under leaf permutations, then relation congruence
        full = {n: set() for n in terms}
        for n, ts in terms.items():
            for t in ts:
                for p in itertools.permutations(range(1, n + 1)):
                    full[n].add(relabel(t, dict(zip(range(1, n + 1), p))))
        classes = self._congruence(full)
        for n in full:
            reps = sorted({classes[t] for t in full[n]}, key=enc)
            self._ops[n] = reps
        self._classes = classes

    def _congruence(self, full):
        parent = {}
        for n in full:
            for t in full[n]:
                parent[t] = t

        def find(t):
            while parent[t] != t:
                parent[t] = parent[parent[t]]
                t = parent[t]
            return t

        def union(a, b):
            ra, rb = find(a), find(b)
            if ra != rb:
                lo, hi = (ra, rb) if enc(ra) <= enc(rb) else (rb, ra)
                parent[hi] = lo

        changed = True
        while changed:
            changed = False
            for lhs, rhs in self.pres.relations:
                n = term_arity(lhs)
                for p in itertools.permutations(range(1, n + 1)):
                    pm = dict(zip(range(1, n + 1), p))
                    a, b = relabel(lhs, pm), relabel(rhs, pm)
                    if a in parent and b in parent and find(a) != find(b):
                        union(a, b)
                        changed = True
            # substitution closure: rewriting subterms to their class
            # representatives must stay in the class
            snapshot = {t: find(t) for t in parent}
            for t in list(parent):
                rt = _rewrite2(t, snapshot)
                if rt in parent and find(rt) != find(t):
                    union(rt, t)
                    changed = True
        return {t: find(t) for t in parent}

    def ops(self, n: int) -> list:
        if n > self.max_arity:
            raise SizeGuardError("arity beyond bound")
        return self._ops.get(n, [])

    def canon(self, t):
        return self._classes[t]


def _rewrite2(t, classes):
    if t[0] == "leaf":
        return t
    kids = tuple(_rewrite2(c, classes) for c in t[2])
    cand = ("op", t[1], kids)
    return classes.get(cand, cand)


# -- the span-side total category -------------------------------------------------

def _column_slots(mat, j):
    """Apex elements of column j in canonical (row, copy) order."""
    slots = []
    for i, row in enumerate(mat):
        for c in range(row[j]):
            slots.append((i, c))
    return slots


def _cell_canonical(op, mat, j, operad):
    """Minimize over copy permutations within equal cells of column j."""
    slots = _column_slots(mat, j)
    groups = {}
    for idx, (i, c) in enumerate(slots):
        groups.setdefault(i, []).append(idx + 1)
    best = None
    pergroup = [itertools.permutations(g) for g in groups.values()]
    for combo in itertools.product(*pergroup):
        perm = {}
        for orig, new in zip([x for g in groups.values() for x in g],
                             [x for g in combo for x in g]):
            perm[orig] = new
        cand = operad.canon(relabel(op, perm)) if \
            relabel(op, perm) in operad._classes else relabel(op, perm)
        key = enc(cand)
        if best is None or key < enc(best):
            best = cand
    return best


def operad_algebrad(pres: OperadPresentation, span: Pattern,
                    max_morphisms: int = 20000):
    """The total category of a one-color operad over a span truncation."""
    cat = span.cat
    K = len(cat.objects) - 1
    operad = SmallOperad(pres, K)
    objs = {f"c{n}": n for n in range(K + 1)}
    mors = {}
    mdata = {}
    for mid in cat.morphisms:
        if mid in cat.overflow:
            mors[f"t[{mid}]"] = (f"c{cat.src(mid)}", f"c{cat.tgt(mid)}")
            mdata[f"t[{mid}]"] = (mid, None)
            continue
        m, n, mat = span_matrix(mid)
        col_ops = []
        ok = True
        for j in range(n):
            s = sum(mat[i][j] for i in range(m))
            uniq = []
            seen = set()
            for o in operad.ops(s):
                c = _cell_canonical(o, mat, j, operad)
                if enc(c) not in seen:
                    seen.add(enc(c))
                    uniq.append(c)
            col_ops.append(sorted(uniq, key=enc))
        for fam in itertools.product(*col_ops) if n else [()]:
            name = f"t[{mid}|{enc(fam)}]"
            mors[name] = (f"c{m}", f"c{n}")
            mdata[name] = (mid, fam)
        if len(mors) > max_morphisms:
            raise SizeGuardError("operad algebrad exceeds morphism guard")
    ids = {}
    for n in range(K + 1):
        mid = cat.id_of(str(n))
        fam = tuple(leaf(1) for _ in range(n))
        ids[f"c{n}"] = f"t[{mid}|{enc(fam)}]"

    overflow_names = [nm for nm, (mid, fam) in mdata.items() if fam is None]

    def comp(gm, fm):
        mid1, fam1 = mdata[fm]
        mid2, fam2 = mdata[gm]
        mid = cat.compose(mid2, mid1)
        if fam1 is None or fam2 is None or mid in cat.overflow:
            return f"t[{mid if mid in cat.overflow else 'ovf[' + str(objs[mors[fm][0]]) + '>' + str(objs[mors[gm][1]]) + ']'}]"
        m1, n1, A = span_matrix(mid1)
        _n1, k1, B = span_matrix(mid2)
        _m, _k, Cmat = span_matrix(mid)
        fam = []
        for kcol in range(k1):
            outer = fam2[kcol]
            slots2 = _column_slots(B, kcol)
            inners = [fam1[j] for (j, _c) in slots2]
            composed = subst(outer, inners)
            # composition order: slots2-major, inner slots minor; relabel to
            # the canonical (row, copy) order of the composite column
            comp_order = []
            for (j, c2) in slots2:
                for (i, c1) in _column_slots(A, j):
                    comp_order.append((i, j, c1, c2))
            canon_order = sorted(range(len(comp_order)),
                                 key=lambda t: (comp_order[t][0],
                                                comp_order[t][1],
                                                comp_order[t][2],
                                                comp_order[t][3]))
            rank = {old + 1: new + 1
                    for new, old in enumerate(canon_order)}
            inv = {}
            for pos, old in enumerate(canon_order):
                inv[old + 1] = pos + 1
            relabeled = relabel(composed, inv)
            canon = operad.canon(relabeled) if relabeled in operad._classes \
                else relabeled
            fam.append(_cell_canonical(canon, Cmat, kcol, operad))
        return f"t[{mid}|{enc(tuple(fam))}]"

    total = FinCategory(objs, mors, ids, comp, overflow=overflow_names,
                        name=f"Op({pres.name})", max_morphisms=max_morphisms)
    proj = FinFunctor(total, cat,
                      {f"c{n}": str(n) for n in range(K + 1)},
                      {nm: mdata[nm][0] for nm in mors}, name="op-proj")
    return proj, total, operad


# -- the Theorem B search -----------------------------------------------------------

def presentation_catalog(max_gens: int = 2, max_rels: int = 2):
    """One-color presentations with <= 2 generators and <= 2 relations.

    Mixed nullary/positive-arity sets whose free term count explodes are
    skipped by the term cap inside the enumeration.
    """
    b, b2 = leaf(1), leaf(2)
    bb = node("g0", [leaf(1), leaf(2)])
    assoc_l = node("g0", [node("g0", [leaf(1), leaf(2)]), leaf(3)])
    assoc_r = node("g0", [leaf(1), node("g0", [leaf(2), leaf(3)])])
    comm = (node("g0", [leaf(1), leaf(2)]), node("g0", [leaf(2), leaf(1)]))
    gen_sets = [
        (("g0", 3),),
        (("g0", 0),),
        (("g0", 2),),
        (("g0", 2), ("g1", 3)),
        (("g0", 0), ("g1", 0)),
        (("g0", 2), ("g1", 2)),
    ]
    rel_sets = [(), ((assoc_l, assoc_r),), (comm,), ((assoc_l, assoc_r), comm)]
    out = []
    for gs in gen_sets[:max_gens * 3]:
        for rs in rel_sets[:max_rels + 2]:
            if any(term_arity(l) > 3 for l, _ in rs):
                continue
            if rs and not any(a == 2 for _n, a in gs):
                continue
            out.append(OperadPresentation(
                f"P(gens={enc(gs)};rels={len(rs)})", gs, tuple(rs)))
    return out


def search_cc_failing_operad(span: Pattern, tier: str = "witness"):
    """First presentation in the catalog whose algebrad fails CC, with a log."""
    from .expo import check_cc
    log = []
    for pres in presentation_catalog():
        try:
            proj, total, operad = operad_algebrad(pres, span)
        except SizeGuardError as e:
            log.append({"presentation": pres.to_json(), "skipped": str(e)})
            continue
        rep = check_cc(proj, span, tier=tier)
        verdict = rep.overall()
        log.append({"presentation": pres.to_json(),
                    "cc": verdict.status,
                    "witness": str(verdict.witness)[:200]})
        if verdict.status == "Fail":
            return pres, rep, log
    return None, None, log


# -- the grid counterexample --------------------------------------------------------

def grid_graphs(delta_pattern: Pattern):
    """The two parallel-pair graphs of the grid counterexample and the map.

    The source graph has the 4 x 3 grid of objects (a [3]-chain in each of
    three columns) with [2]-indexed cells over each column pair; the target
    is the 3 x 3 grid; the map collapses the middle vertical step.
    """
    from .expo import graph_object
    cols = discrete_category(["k0", "k1", "k2"])
    pairs = discrete_category(["q01", "q12"])
    a0 = product_category(chain_poset(3), cols)
    a1 = product_category(chain_poset(2), pairs)
    b0 = product_category(chain_poset(2), cols)
    b1 = product_category(chain_poset(2), pairs)

    def pairfun(C, D, vert: dict, col: dict, name):
        obj_map = {}
        mor_map = {}
        for o in C.objects:
            v, c = _unpair(o)
            obj_map[o] = f"({vert[v]},{col[c]})"
        for m in C.morphisms:
            mv, mc = _unpair(m)
            mor_map[m] = f"({_poset_map(mv, vert)},{col_mor(mc, col)})"
        return FinFunctor(C, D, obj_map, mor_map, name=name)

    def col_mor(mc, col):
        # morphisms of a discrete category are identities id_x
        x = mc[3:]
        return f"id_{col[x]}"

    d1 = {"0": "0", "1": "2", "2": "3"}      # skip 1
    d2 = {"0": "0", "1": "1", "2": "3"}      # skip 2
    s_col = {"q01": "k0", "q12": "k1"}
    t_col = {"q01": "k1", "q12": "k2"}
    idv = {"0": "0", "1": "1", "2": "2"}
    s1 = {"0": "0", "1": "1", "2": "1", "3": "2"}

    GA = {"src": pairfun(a1, a0, d1, s_col, "sA"),
          "tgt": pairfun(a1, a0, d2, t_col, "tA")}
    GB = {"src": pairfun(b1, b0, idv, s_col, "sB"),
          "tgt": pairfun(b1, b0, idv, t_col, "tB")}

    el = None
    from .expo import elementary_category
    el = elementary_category(delta_pattern)
    legs = sorted(m for m in el.morphisms if not el.is_identity(m))
    assert len(legs) == 2
    # the 0-vertex inclusion reads off sources, the 1-vertex reads targets
    GAobj = graph_object(delta_pattern, {"[0]": a0, "[1]": a1},
                         {legs[0]: GA["src"], legs[1]: GA["tgt"]})
    GBobj = graph_object(delta_pattern, {"[0]": b0, "[1]": b1},
                         {legs[0]: GB["src"], legs[1]: GB["tgt"]})
    f0 = pairfun(a0, b0, s1, {"k0": "k0", "k1": "k1", "k2": "k2"}, "f0")
    from .fincat import identity_functor
    f1 = identity_functor(a1)
    return GAobj, GBobj, {"[0]": f0, "[1]": f1}


def _unpair(s):
    depth = 0
    for i, ch in enumerate(s):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        elif ch == "," and depth == 1:
            return s[1:i], s[i + 1:-1]
    raise ValueError(s)


def _poset_map(mv, vert):
    a, b = mv.split("<=")
    return f"{vert[a]}<={vert[b]}"
