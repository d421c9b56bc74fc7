import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ctxseg import (
    ContextKind,
    EmptyContextError,
    InvalidParameterError,
    InvalidTargetSetError,
    LengthMismatchError,
    PartitionMatrix,
    Tier,
    UpdateParams,
    bhattacharyya_distance,
    context_distance,
    has_converged,
    identify_configuration,
    propagate_sweep,
    update_membership,
)

from conftest import make_graph

# membership vectors with known tiers (K=4, classes per the mammogram KB order)
HCD_BG = (0.85, 0.05, 0.05, 0.05)
HCD_MUSCLE = (0.05, 0.85, 0.05, 0.05)
HCD_FATTY = (0.05, 0.05, 0.85, 0.05)
MCD_FATTY = (0.15, 0.05, 0.45, 0.35)
MCD_BG = (0.45, 0.35, 0.15, 0.05)
LCD_BG = (0.4, 0.35, 0.15, 0.1)

PARAMS = UpdateParams()


def unit_vectors(k=4):
    return arrays(np.float64, k, elements=st.floats(1e-9, 1.0)).map(lambda v: v / v.sum())


# ---------------------------------------------------------------------------
# Bhattacharyya distance
# ---------------------------------------------------------------------------

def test_bhattacharyya_identical():
    assert bhattacharyya_distance([0.5, 0.5], [0.5, 0.5]) == 0.0


def test_bhattacharyya_disjoint_support():
    assert bhattacharyya_distance([1.0, 0.0], [0.0, 1.0]) == 1.0


def test_bhattacharyya_crossed_pair():
    expected = math.sqrt(1 - (math.sqrt(0.16) + math.sqrt(0.16)))
    assert bhattacharyya_distance([0.8, 0.2], [0.2, 0.8]) == pytest.approx(
        expected, abs=1e-12
    )
    assert expected == pytest.approx(math.sqrt(0.2), abs=1e-12)


def test_bhattacharyya_length_mismatch():
    with pytest.raises(LengthMismatchError):
        bhattacharyya_distance([0.5, 0.5], [0.3, 0.3, 0.4])


@given(p=unit_vectors(), q=unit_vectors())
@settings(max_examples=300, deadline=None)
def test_bhattacharyya_properties(p, q):
    d = bhattacharyya_distance(p, q)
    assert 0.0 <= d <= 1.0
    assert d == bhattacharyya_distance(q, p)
    assert bhattacharyya_distance(p, p) <= 1e-12


# ---------------------------------------------------------------------------
# context distance
# ---------------------------------------------------------------------------

def test_context_distance_is_arithmetic_mean():
    g = make_graph([MCD_FATTY, HCD_FATTY, HCD_MUSCLE], [(0, 1), (0, 2)])
    d1 = bhattacharyya_distance(MCD_FATTY, HCD_FATTY)
    d2 = bhattacharyya_distance(MCD_FATTY, HCD_MUSCLE)
    assert context_distance(g, 0) == pytest.approx((d1 + d2) / 2, abs=1e-15)


def test_context_distance_identical_member():
    g = make_graph([HCD_FATTY, HCD_FATTY], [(0, 1)])
    assert context_distance(g, 0) == 0.0


def test_context_distance_empty_context():
    g = make_graph([MCD_FATTY, LCD_BG], [(0, 1)])
    with pytest.raises(EmptyContextError):
        context_distance(g, 0)


# ---------------------------------------------------------------------------
# configuration identification (the four context cases)
# ---------------------------------------------------------------------------

def test_homogeneous_similar(mammo_kb):
    g = make_graph(
        [MCD_FATTY, HCD_FATTY, HCD_FATTY],
        [(0, 1), (0, 2)],
        intensities=[0.43, 0.40, 0.42],
    )
    case = identify_configuration(g, 0, mammo_kb, PARAMS)
    assert case.kind == ContextKind.HOM_SIMILAR
    assert case.target_classes == {2}  # the context's own class


def test_homogeneous_dissimilar_all_hcd(mammo_kb):
    g = make_graph(
        [MCD_FATTY, HCD_FATTY, HCD_FATTY],
        [(0, 1), (0, 2)],
        intensities=[0.75, 0.42, 0.44],
    )
    case = identify_configuration(g, 0, mammo_kb, PARAMS)
    assert case.kind == ContextKind.HOM_DISSIMILAR_ALL_HCD
    assert case.target_classes == {3}  # Dense_tissue is includable inside Fatty_tissue


def test_homogeneous_dissimilar_mixed(mammo_kb):
    g = make_graph(
        [LCD_BG, HCD_FATTY, MCD_FATTY],
        [(0, 1), (0, 2)],
        intensities=[0.75, 0.42, 0.44],
    )
    case = identify_configuration(g, 0, mammo_kb, PARAMS)
    assert case.kind == ContextKind.HOM_DISSIMILAR_MIXED
    # everything that may neighbor Fatty_tissue
    assert case.target_classes == {0, 1, 3}


def test_heterogeneous(mammo_kb):
    g = make_graph(
        [MCD_FATTY, HCD_BG, HCD_FATTY],
        [(0, 1), (0, 2)],
        intensities=[0.5, 0.05, 0.45],
    )
    case = identify_configuration(g, 0, mammo_kb, PARAMS)
    assert case.kind == ContextKind.HETEROGENEOUS
    assert case.lc_classes == {0, 2}
    assert case.target_classes == {1}  # Muscle sits between Background and Fatty_tissue


def test_heterogeneous_no_matching_configuration(mammo_kb):
    g = make_graph(
        [MCD_FATTY, HCD_BG, HCD_MUSCLE, HCD_FATTY],
        [(0, 1), (0, 2), (0, 3)],
        intensities=[0.5, 0.05, 0.9, 0.45],
    )
    case = identify_configuration(g, 0, mammo_kb, PARAMS)
    assert case.kind == ContextKind.HETEROGENEOUS
    assert case.target_classes == set()


def test_identify_empty_context(mammo_kb):
    g = make_graph([MCD_FATTY, LCD_BG], [(0, 1)])
    with pytest.raises(EmptyContextError):
        identify_configuration(g, 0, mammo_kb, PARAMS)


# ---------------------------------------------------------------------------
# membership update rule
# ---------------------------------------------------------------------------

def test_update_worked_example():
    v = np.array([0.4, 0.3, 0.2, 0.1])
    out = update_membership(v, {0}, 0.5)
    # transfer 0.4*0.5/4 = 0.05 to class 0, 0.05/3 from each of the others
    assert out == pytest.approx([0.45, 0.3 - 0.05 / 3, 0.2 - 0.05 / 3, 0.1 - 0.05 / 3],
                                abs=1e-12)
    assert out.sum() == pytest.approx(1.0, abs=1e-12)


def test_update_distance_one_is_identity():
    v = np.array([0.4, 0.3, 0.2, 0.1])
    out = update_membership(v, {1}, 1.0)
    assert np.array_equal(out, v)


def test_update_clamps_and_renormalizes():
    v = np.array([0.97, 0.01, 0.01, 0.01])
    out = update_membership(v, {1}, 0.0)
    assert np.all(out >= 0.0)
    assert out.sum() == pytest.approx(1.0, abs=1e-12)
    assert out[1] > v[1]


def test_update_negative_degree_case():
    # large transfer drives small degrees below zero before the clamp
    v = np.array([0.94, 0.02, 0.02, 0.02])
    out = update_membership(v, {0}, 0.0)
    assert np.all(out >= 0.0)
    assert out.sum() == pytest.approx(1.0, abs=1e-12)


def test_update_rejects_bad_target_sets():
    v = np.array([0.4, 0.3, 0.2, 0.1])
    with pytest.raises(InvalidTargetSetError):
        update_membership(v, set(), 0.5)
    with pytest.raises(InvalidTargetSetError):
        update_membership(v, {0, 1, 2, 3}, 0.5)


@given(v=unit_vectors(), d=st.floats(0.0, 1.0), n_targets=st.integers(1, 3))
@settings(max_examples=300, deadline=None)
def test_update_conserves_normalization(v, d, n_targets):
    out = update_membership(v, set(range(n_targets)), d)
    assert out.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(out >= 0.0)
    assert np.all(out <= 1.0 + 1e-12)


def test_update_multi_target_gross_gain():
    # every target class gains its own transfer before paying for the others
    v = np.array([0.4, 0.3, 0.2, 0.1])
    out = update_membership(v, {0, 1}, 0.0)
    assert out.sum() == pytest.approx(1.0, abs=1e-12)
    assert out[2] < v[2] and out[3] < v[3]
    assert out[0] > v[0] and out[1] > v[1]


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def test_sweep_all_hcd_is_noop(mammo_kb):
    vs = [HCD_BG, HCD_FATTY, HCD_MUSCLE]
    g = make_graph(vs, [(0, 1), (1, 2)])
    before = [g.regions[i].membership.copy() for i in range(3)]
    change = propagate_sweep(g, PartitionMatrix(g), mammo_kb, PARAMS)
    assert change == 0.0
    for i in range(3):
        assert np.array_equal(g.regions[i].membership, before[i])


def test_sweep_hcd_rows_bitwise_untouched(mammo_kb):
    g = make_graph(
        [MCD_FATTY, HCD_FATTY, HCD_FATTY],
        [(0, 1), (0, 2)],
        intensities=[0.43, 0.40, 0.42],
    )
    kept = [g.regions[i].membership for i in (1, 2)]
    propagate_sweep(g, PartitionMatrix(g), mammo_kb, PARAMS)
    assert g.regions[1].membership is kept[0]
    assert g.regions[2].membership is kept[1]


def test_sweep_similar_context_raises_pc_degree(mammo_kb):
    g = make_graph(
        [MCD_FATTY, HCD_FATTY, HCD_FATTY],
        [(0, 1), (0, 2)],
        intensities=[0.43, 0.40, 0.42],
    )
    before = g.regions[0].membership.copy()
    change = propagate_sweep(g, PartitionMatrix(g), mammo_kb, PARAMS)
    assert g.regions[0].membership[2] > before[2]
    assert change > 0


def test_sweep_is_synchronous(mammo_kb):
    # two MCD neighbors update each other against pre-sweep vectors
    g = make_graph(
        [MCD_FATTY, MCD_BG],
        [(0, 1)],
        intensities=[0.45, 0.44],
    )
    v0, v1 = g.regions[0].membership.copy(), g.regions[1].membership.copy()
    propagate_sweep(g, PartitionMatrix(g), mammo_kb, PARAMS)
    # expected: each uses the other's old vector
    d01 = bhattacharyya_distance(v0, v1)
    exp0 = update_membership(v0, {0}, d01)  # LC of 0 is {1}, PC(1)=Background, similar
    exp1 = update_membership(v1, {2}, d01)
    assert g.regions[0].membership == pytest.approx(exp0, abs=1e-15)
    assert g.regions[1].membership == pytest.approx(exp1, abs=1e-15)


def test_sweep_order_invariance_under_relabeling(mammo_kb):
    vs = [MCD_FATTY, HCD_FATTY, MCD_BG, LCD_BG]
    edges = [(0, 1), (0, 2), (2, 3), (1, 3)]
    ints = [0.45, 0.42, 0.1, 0.12]
    g1 = make_graph(vs, edges, intensities=ints)
    # same topology with region ids reversed
    perm = {0: 3, 1: 2, 2: 1, 3: 0}
    g2 = make_graph(
        [vs[3], vs[2], vs[1], vs[0]],
        [(perm[a], perm[b]) for a, b in edges],
        intensities=[ints[3], ints[2], ints[1], ints[0]],
    )
    c1 = propagate_sweep(g1, PartitionMatrix(g1), mammo_kb, PARAMS)
    c2 = propagate_sweep(g2, PartitionMatrix(g2), mammo_kb, PARAMS)
    assert c1 == pytest.approx(c2, abs=1e-15)
    for i in range(4):
        assert g1.regions[i].membership == pytest.approx(
            g2.regions[perm[i]].membership, abs=1e-15
        )


def test_sweep_threaded_matches_serial(mammo_kb):
    vs = [MCD_FATTY, HCD_FATTY, MCD_BG, LCD_BG, HCD_MUSCLE]
    edges = [(0, 1), (0, 2), (2, 3), (1, 3), (3, 4)]
    ints = [0.45, 0.42, 0.1, 0.12, 0.9]
    g1 = make_graph(vs, edges, intensities=ints)
    g2 = make_graph(vs, edges, intensities=ints)
    c1 = propagate_sweep(g1, PartitionMatrix(g1), mammo_kb, UpdateParams(threads=1))
    c2 = propagate_sweep(g2, PartitionMatrix(g2), mammo_kb, UpdateParams(threads=3))
    assert c1 == c2
    for i in range(5):
        assert np.array_equal(g1.regions[i].membership, g2.regions[i].membership)


def test_sweep_skips_regions_without_context(mammo_kb):
    g = make_graph([MCD_FATTY, LCD_BG], [(0, 1)])
    v0 = g.regions[0].membership.copy()
    change = propagate_sweep(g, PartitionMatrix(g), mammo_kb, PARAMS)
    # region 1's LC is {0} (MCD), so it updates; region 0 has no context
    assert np.array_equal(g.regions[0].membership, v0)
    assert change >= 0.0


def test_sweep_tiers_recomputed(mammo_kb):
    g = make_graph(
        [MCD_FATTY, HCD_FATTY, HCD_FATTY],
        [(0, 1), (0, 2)],
        intensities=[0.43, 0.40, 0.42],
    )
    params = UpdateParams(convergence_eps=1e-9, max_inner_iterations=500)
    pm = PartitionMatrix(g)
    for _ in range(200):
        if propagate_sweep(g, pm, mammo_kb, params) < params.convergence_eps:
            break
    assert g.regions[0].tier == Tier.HCD  # repeatedly reinforced into a seed


# ---------------------------------------------------------------------------
# convergence predicate and parameter validation
# ---------------------------------------------------------------------------

def test_has_converged():
    assert has_converged(0.0, PARAMS)
    assert not has_converged(1e-3, PARAMS)
    assert has_converged(9.9e-5, PARAMS)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"similarity_threshold": 0.0},
        {"similarity_threshold": 1.0},
        {"convergence_eps": 0.0},
        {"match_policy": "fuzzy"},
        {"threads": 0},
        {"max_inner_iterations": -1},
    ],
)
def test_invalid_update_params(kwargs):
    with pytest.raises(InvalidParameterError):
        UpdateParams(**kwargs)
