"""Split-merge proposal: reciprocity of the two directions, support limits."""

import numpy as np
import pytest

from mfm import (
    Geometric,
    ModelConfig,
    PartitionState,
    UniformBounded,
    prepare_chain_tables,
    split_merge_move,
)
from mfm.gibbs import PyChain

NEG_INF = float("-inf")


def make_cfg(prior=Geometric(0.1)):
    return ModelConfig(m=0.0, c=1.0, alpha=2.0, gamma=1.0,
                       count_prior=prior, dim=1, beta=1.0)


def two_blob_data():
    rng = np.random.default_rng(123)
    a = rng.normal(-5.0, 0.2, (6, 1))
    b = rng.normal(5.0, 0.2, (6, 1))
    return np.ascontiguousarray(np.concatenate([a, b]))


def make_chain(data, labels, cfg, seed):
    state = PartitionState.from_labels(data, labels, cfg, cfg.beta)
    tables = prepare_chain_tables(cfg, state.n)
    return PyChain(state, data, cfg, tables, np.random.Generator(np.random.PCG64(seed)))


def test_split_and_merge_are_reciprocal():
    # an accepted split, then the reversing merge proposed from the same seed:
    # the two launch trajectories replay each other, so the proposal density
    # is shared and the acceptance ratios are exact negations
    cfg = make_cfg()
    data = two_blob_data()
    ch = make_chain(data, np.zeros(12, dtype=int), cfg, seed=31)
    dbg_split = {}
    accepted = ch.split_merge(4, anchors=(0, 7), debug=dbg_split)
    assert accepted and dbg_split["kind"] == "split"
    assert ch.t == 2
    ch.state.audit(data, cfg)

    ch2 = PyChain(ch.state, data, cfg, ch.tables, np.random.Generator(np.random.PCG64(31)))
    dbg_merge = {}
    ch2.split_merge(4, anchors=(0, 7), debug=dbg_merge)
    assert dbg_merge["kind"] == "merge"
    assert dbg_split["log_q"] == pytest.approx(dbg_merge["log_q"], abs=1e-12)
    assert dbg_split["log_prior"] + dbg_merge["log_prior"] == pytest.approx(0.0, abs=1e-12)
    assert dbg_split["log_ratio"] + dbg_merge["log_ratio"] == pytest.approx(0.0, abs=1e-9)


def test_split_separates_planted_blobs():
    cfg = make_cfg()
    data = two_blob_data()
    ch = make_chain(data, np.zeros(12, dtype=int), cfg, seed=31)
    dbg = {}
    ch.split_merge(4, anchors=(0, 7), debug=dbg)
    assert dbg["n_a"] + dbg["n_b"] == 12
    assert dbg["log_ratio"] > 0  # overwhelming likelihood gain
    assert sorted(np.bincount(ch.state.z[ch.state.z >= 0]).tolist(), reverse=True)[:2] == [6, 6]
    key = ch.state.partition_key()
    assert key == (0,) * 6 + (1,) * 6


def test_merge_absorbs_and_compacts():
    cfg = make_cfg()
    rng = np.random.default_rng(5)
    data = np.ascontiguousarray(rng.normal(0, 0.3, (9, 1)))
    # three clusters of overlapping points: merging two of them should accept
    labels = [0, 0, 0, 1, 1, 1, 2, 2, 2]
    merged = False
    for seed in range(40):
        ch = make_chain(data, labels, cfg, seed=seed)
        dbg = {}
        if ch.split_merge(3, anchors=(0, 3), debug=dbg):
            assert dbg["kind"] == "merge"
            assert ch.t == 2
            ch.state.audit(data, cfg)
            merged = True
            break
    assert merged


def test_bounded_prior_autorejects_split_at_kmax():
    cfg = make_cfg(prior=UniformBounded(1))
    data = two_blob_data()
    ch = make_chain(data, np.zeros(12, dtype=int), cfg, seed=0)
    before = ch.state.partition_key()
    dbg = {}
    assert not ch.split_merge(4, anchors=(0, 7), debug=dbg)
    assert dbg["kind"] == "split"
    assert dbg["log_ratio"] == NEG_INF
    assert ch.state.partition_key() == before
    assert ch.t == 1


def test_single_point_move_is_noop():
    cfg = make_cfg()
    data = np.array([[1.0]])
    ch = make_chain(data, [0], cfg, seed=0)
    assert not ch.split_merge(3)


def test_entry_point_and_random_anchors():
    cfg = make_cfg()
    data = two_blob_data()
    state = PartitionState.from_labels(data, np.zeros(12, dtype=int), cfg, 1.0)
    tables = prepare_chain_tables(cfg, 12)
    rng = np.random.Generator(np.random.PCG64(7))
    n_acc = 0
    for _ in range(30):
        n_acc += 1 if split_merge_move(state, data, cfg, tables, rng) else 0
        state.audit(data, cfg)
    assert n_acc >= 1  # blob structure found without planted anchors
    assert state.partition_key().count(0) in (6, 12 - 6, 12)


def test_moves_preserve_integrity_under_stress():
    cfg = make_cfg()
    rng = np.random.default_rng(17)
    data = np.ascontiguousarray(rng.normal(0, 2.0, (15, 1)))
    ch = make_chain(data, rng.integers(0, 4, 15), cfg, seed=44)
    for _ in range(200):
        ch.split_merge(3)
    ch.state.audit(data, cfg)
