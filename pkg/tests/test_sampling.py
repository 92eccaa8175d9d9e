from __future__ import annotations

import numpy as np
import pytest

from malle_random.errors import OracleFailure, ValidationError
from malle_random.groups import parse_group
from malle_random.model import build_profile, rng_for
from malle_random.sampling import (ExactSampler, LazyNormalWalk, ProductReplacement, VectorGroup,
                                   WalkParams, make_sampler, separating_columns, total_variation)


@pytest.fixture(scope="module")
def c3_profile():
    return build_profile(parse_group("C3"), "inf,2,3,5", engine="generic")


def test_closure_size(c3_profile):
    E = c3_profile.e_sampler
    assert E.exact and E.size == 81


def test_closure_cap(c3_profile):
    vg = c3_profile.vg
    assert vg.closure(c3_profile.gen_vectors, cap=10) is None
    assert not make_sampler(vg, c3_profile.gen_vectors, cap=10).exact


def test_exact_sampler_uniform(c3_profile):
    E = c3_profile.e_sampler
    d = E.draw(rng_for(1, 0), 20000)
    assert total_variation(d, E.elements) < 0.05


def test_product_replacement_small():
    P = build_profile(parse_group("C2"), "inf,3", engine="generic")
    pr = ProductReplacement(P.vg, P.gen_vectors)
    d = pr.draw(rng_for(3, 0), 20000)
    assert total_variation(d, P.e_sampler.elements) < 0.05


def test_projection_consistency(c3_profile):
    pr = ProductReplacement(c3_profile.vg, c3_profile.gen_vectors, WalkParams(chains=16))
    full = pr.draw(rng_for(4, 0), 100)
    cols = np.array([0, 5, 17])
    part = pr.draw(rng_for(4, 0), 100, cols)
    assert np.array_equal(full[:, cols], part)


def test_separating_columns(c3_profile):
    E = c3_profile.e_sampler.elements
    cols = separating_columns(E)
    assert len(np.unique(E[:, cols], axis=0)) == len(E)
    assert len(cols) < E.shape[1]


def test_tv_rejects_foreign_draws(c3_profile):
    E = c3_profile.e_sampler.elements
    bad = np.full((1, E.shape[1]), 1, dtype=E.dtype)
    if any((bad == e).all() for e in E):
        pytest.skip("constant vector happens to lie in E")
    with pytest.raises(OracleFailure):
        total_variation(bad, E)


def test_walk_params():
    assert WalkParams().resolved(3).rack == 10
    with pytest.raises(ValidationError):
        WalkParams(rack=2).resolved(5)


def test_lazy_walk_stays_in_subgroup():
    G = parse_group("S3")
    vg = VectorGroup(G)
    gens = np.array([[G.idx("(1 2)")], [G.idx("(1 2 3)")]], dtype=vg.dtype)
    E = ExactSampler(vg.closure(gens))
    walk = LazyNormalWalk(vg, E, np.zeros((0, 1), dtype=vg.dtype), steps=10)
    d = walk.draw(rng_for(0, 0), 500)
    A3 = {G.idx(x) for x in ("()", "(1 2 3)", "(1 3 2)")}
    assert set(d[:, 0].tolist()) == A3
