import pytest

from treecat.fincat import FinCategory, FinFunctor, chain_poset, discrete_category
from treecat.pattern import Pattern, builtin
from treecat.trees import build_tree_category, forest_of_chain, Forest
from treecat.segal import (
    AlgebradPresentation,
    check_algebrad,
    check_complete,
    check_presheaf,
    check_segal,
    coproduct,
    fiber_product,
    forest_presheaf,
    gamma_presheaf,
    hom_maps,
    inclusion_map,
    istar_value,
    nerve,
    presheaf_iso,
    product,
    pushout,
    realize,
    representable,
    sliced_hom,
    spine,
    sub_presheaf,
    terminal_presheaf,
    PresheafError,
    PresheafMap,
    SetPresheaf,
)


@pytest.fixture(scope="module")
def term():
    return builtin("terminal")


@pytest.fixture(scope="module")
def tc3(term):
    return build_tree_category(term, 3)


def algebrad_of_category(C: FinCategory, P: Pattern):
    """A category as an algebrad over the terminal pattern."""
    proj = FinFunctor(C, P.cat, {x: "*" for x in C.objects},
                      {m: "id" for m in C.morphisms}, validate=False)
    verdicts, pres = check_algebrad(proj, P)
    assert all(verdicts.values()), {k: v.to_json() for k, v in verdicts.items()}
    return pres


def test_representable_is_presheaf(tc3):
    for k in tc3.trees:
        y = representable(tc3, k)
        y._validate()


def test_representables_are_segal_over_terminal(tc3):
    # terminal pattern is atomically robust: all representables complete Segal
    for k in tc3.trees:
        y = representable(tc3, k)
        assert check_segal(y)
        assert check_complete(y)


def test_forest_presheaf_of_tree_matches_representable(tc3):
    k = sorted(tc3.trees)[0]
    f = tc3.trees[k]
    fp = forest_presheaf(tc3, f)
    y = representable(tc3, k)
    for kk in tc3.trees:
        assert len(fp.values[kk]) == len(y.values[kk])


def test_spine_is_subpresheaf(tc3):
    k3 = [k for k, f in tc3.trees.items() if f.n == 3][0]
    sp = spine(tc3, k3)
    y = representable(tc3, k3)
    for kk in tc3.trees:
        assert set(sp.values[kk]) <= set(y.values[kk])
    # spine of [3] over the point: 3 segments glued at 2 vertices
    k0 = [k for k, f in tc3.trees.items() if f.n == 0][0]
    k1 = [k for k, f in tc3.trees.items() if f.n == 1][0]
    assert len(sp.values[k3]) < len(y.values[k3])


def test_nerve_of_poset_is_complete_segal(term, tc3):
    pres = algebrad_of_category(chain_poset(2), term)
    X = nerve(pres, tc3)
    # value at [1] counts the morphisms of the poset
    k1 = [k for k, f in tc3.trees.items() if f.n == 1][0]
    assert len(X.values[k1]) == 6
    assert check_segal(X)
    assert check_complete(X)


def test_nerve_of_walking_iso_fails_completeness(term, tc3):
    iso_cat = FinCategory(
        ["a", "b"],
        {"ia": ("a", "a"), "ib": ("b", "b"), "f": ("a", "b"), "g": ("b", "a")},
        {"a": "ia", "b": "ib"},
        {("g", "f"): "ia", ("f", "g"): "ib"})
    pres = algebrad_of_category(iso_cat, term)
    X = nerve(pres, tc3)
    assert check_segal(X)
    assert not check_complete(X)


def test_empty_presheaf_complete(tc3):
    E = SetPresheaf(tc3, {}, {}, validate=False)
    assert check_segal(E)
    assert check_complete(E)


def test_presheaf_with_extra_segal_element_fails(term, tc3):
    pres = algebrad_of_category(chain_poset(1), term)
    X = nerve(pres, tc3)
    k2 = [k for k, f in tc3.trees.items() if f.n == 2][0]
    values = {k: list(X.values[k]) for k in X.values}
    junk = ("junk",)
    values[k2] = values[k2] + [junk]
    action = {m: dict(X.action[m]) for m in X.action}
    om = tc3.omega
    for m in om.morphisms:
        if om.tgt(m) == k2:
            # degenerate junk to an arbitrary existing value
            phi = tc3.mor[m][0]
            src = om.src(m)
            action[m] = dict(action[m])
            action[m][junk] = X.values[src][0] if X.values[src] else None
    Y = SetPresheaf(tc3, values, action, validate=False)
    assert not check_segal(Y)


def test_check_presheaf_negative(tc3):
    y = representable(tc3, sorted(tc3.trees)[0])
    raw = y.to_json()
    # break one composite in the action table
    data = {"values": {k: list(vs) for k, vs in raw["values"].items()},
            "action": raw["action"]}
    om = tc3.omega
    target = None
    for e in data["action"]:
        if e["map"] and not om.is_identity(e["mor"]):
            vals = sorted(e["map"])
            if len(set(e["map"].values())) > 1:
                target = e
                break
    if target is not None:
        ks = sorted(target["map"])
        vs = sorted(set(target["map"].values()))
        target["map"][ks[0]] = vs[1] if target["map"][ks[0]] == vs[0] else vs[0]
        with pytest.raises(PresheafError):
            check_presheaf(tc3, data)


def test_product_and_terminal(tc3, term):
    pres = algebrad_of_category(chain_poset(1), term)
    X = nerve(pres, tc3)
    T = terminal_presheaf(tc3)
    XT = product(X, T)
    for k in tc3.trees:
        assert len(XT.values[k]) == len(X.values[k])


def test_sliced_hom_sections(tc3, term):
    pres = algebrad_of_category(chain_poset(1), term)
    X = nerve(pres, tc3)
    T = terminal_presheaf(tc3)
    tmapX = PresheafMap(X, T, {k: {v: "*" for v in X.values[k]}
                               for k in tc3.trees})
    tmapT = PresheafMap(T, T, {k: {"*": "*"} for k in tc3.trees})
    sections = sliced_hom(T, tmapT, X, tmapX)
    # sections of N([1]) -> 1 are the "constant" natural families:
    # one per idempotent-consistent choice; for the poset nerve this is
    # the set of objects mapped compatibly, i.e. 2 constants
    assert len(sections) == len(hom_maps(T, X))


def test_hom_coproduct_product_rule(tc3, term):
    presA = algebrad_of_category(chain_poset(1), term)
    A = nerve(presA, tc3)
    B = terminal_presheaf(tc3)
    X = nerve(algebrad_of_category(chain_poset(2), term), tc3)
    AB = coproduct([A, B])
    assert len(hom_maps(AB, X)) == len(hom_maps(A, X)) * len(hom_maps(B, X))


def test_pushout_of_presheaves(tc3):
    k1 = [k for k, f in tc3.trees.items() if f.n == 1][0]
    k0 = [k for k, f in tc3.trees.items() if f.n == 0][0]
    y1 = representable(tc3, k1)
    y0 = representable(tc3, k0)
    # two copies of [1] glued along the common vertex d0
    om = tc3.omega
    d0 = [m for m in om.hom(k0, k1)
          if tc3.mor[m][0] == (1,)][0]
    f = PresheafMap(y0, y1, {k: {u: om.compose(d0, u) for u in y0.values[k]}
                             for k in tc3.trees}).validate()
    d1 = [m for m in om.hom(k0, k1) if tc3.mor[m][0] == (0,)][0]
    g = PresheafMap(y0, y1, {k: {u: om.compose(d1, u) for u in y0.values[k]}
                             for k in tc3.trees}).validate()
    P, inb, inc = pushout(f, g)
    assert len(P.values[k0]) == 2 * len(y1.values[k0]) - len(y0.values[k0])


def test_istar_value_matches_rkan_squares(term, tc3):
    """Presheaves on trees extend to forests satisfying the slice formula."""
    pres = algebrad_of_category(chain_poset(1), term)
    X = nerve(pres, tc3)
    P = term
    f2 = forest_of_chain(P, ("id", "id"))
    vals = istar_value(X, f2)
    k2 = [k for k, f in tc3.trees.items() if f.n == 2][0]
    # over the terminal pattern every forest is a tree, so i_* adds nothing
    assert len(vals) == len(X.values[k2])


# -- algebrad checks --------------------------------------------------------------

def test_identity_algebrad(term):
    verdicts, pres = check_algebrad(
        FinFunctor(term.cat, term.cat, {"*": "*"}, {"id": "id"}), term)
    assert all(verdicts.values())


def test_missing_cocartesian_lift_detected(term):
    # empty fiber over the unique object: condition 1 fails
    empty = discrete_category([])
    proj = FinFunctor(empty, term.cat, {}, {}, validate=False)
    verdicts, pres = check_algebrad(proj, term)
    assert pres is None or len(pres.total.objects) == 0 or verdicts


def test_nerve_realize_roundtrip_small(term, tc3):
    for C in [chain_poset(0), chain_poset(1), chain_poset(2),
              discrete_category(["u", "v"])]:
        pres = algebrad_of_category(C, term)
        X = nerve(pres, tc3)
        back = realize(X)
        assert len(back.total.objects) == len(C.objects)
        assert len(back.total.morphisms) == len(C.morphisms)
        X2 = nerve(back, tc3)
        assert presheaf_iso(X, X2) is not None


def test_realize_refuses_low_truncation(term):
    tc2 = build_tree_category(term, 2)
    pres = algebrad_of_category(chain_poset(1), term)
    X = nerve(pres, tc2)
    from treecat.trees import TruncationEscape
    with pytest.raises(TruncationEscape):
        realize(X)


def test_realize_rejects_incomplete(term, tc3):
    iso_cat = FinCategory(
        ["a", "b"],
        {"ia": ("a", "a"), "ib": ("b", "b"), "f": ("a", "b"), "g": ("b", "a")},
        {"a": "ia", "b": "ib"},
        {("g", "f"): "ia", ("f", "g"): "ib"})
    pres = algebrad_of_category(iso_cat, term)
    X = nerve(pres, tc3)
    with pytest.raises(PresheafError):
        realize(X)
