from __future__ import annotations

import numpy as np
import pytest

from igbench._seeding import derive_seed
from igbench.evaluator import grid_search, make_split, subdivide
from igbench.graph import generate_sbm
from igbench.guard import AccuracyOracle
from igbench.models import PropLin
from igbench.overtuning import plain_evaluate, sweep_validation_size, validutil, validutil_partial

BASE = {"depth": 1, "lr": 0.5, "epochs": 60, "l2": 0.0, "dropout": 0.3}
GRID = {"depth": [1], "epochs": [60], "l2": [0.0, 5e-3], "lr": [0.5]}


class ConstantOracle(AccuracyOracle):
    def score(self, predictions):
        super().score(predictions)
        return 0.5


@pytest.fixture(scope="module")
def setup():
    g = generate_sbm([40, 40], 0.1, 0.03, 16, 1.0, 3, signal_noise=1.0)
    split = subdivide(make_split(g, 0.25, 3), 0.5, 3)
    return g, split


def _run(setup, **kw):
    g, s = setup
    return validutil_partial(PropLin(), g, s.train, s.valid, s.unlabeled, BASE, GRID, 1, **kw)


def test_query_and_read_audit(setup):
    g, s = setup
    r = validutil(PropLin(), g, s.train, s.valid, s.unlabeled, BASE, GRID, 1)
    t = s.valid.size
    assert r.state.t == t and r.state.budget == t
    assert r.state.search_queries == t * g.k
    assert r.state.query_count == t * g.k + 2
    assert r.state.label_reads == 0
    assert r.state.candidate_acc.shape == (t, g.k)
    assert np.all(r.state.per_node_chosen_acc == r.state.candidate_acc.max(axis=1))


def test_pseudo_labels_only_move_on_strict_gain(setup):
    st = _run(setup, budget=10).state
    for i in range(10):
        init, chosen = st.initial_predictions[i], st.pseudo_labels[i]
        if chosen != init:
            assert st.candidate_acc[i, chosen] > st.candidate_acc[i, init]
            assert chosen == int(np.argmax(st.candidate_acc[i]))


def test_budget_zero_is_plain_grid_search(setup):
    g, s = setup
    r = _run(setup, budget=0)
    acc, hp = plain_evaluate(PropLin(), g, s.train, s.valid, s.unlabeled, GRID, 1)
    assert (r.test_accuracy, r.final_hparams) == (acc, hp)
    assert np.array_equal(r.state.pseudo_labels, r.state.initial_predictions)
    # same winner as the evaluator's grid search under the same seed
    assert grid_search(PropLin(), GRID, g, s, derive_seed(1, "final"))[0] == hp


def test_full_budget_equals_validutil(setup):
    g, s = setup
    a = _run(setup, budget=s.valid.size)
    b = validutil(PropLin(), g, s.train, s.valid, s.unlabeled, BASE, GRID, 1)
    assert a.test_accuracy == b.test_accuracy
    assert np.array_equal(a.state.pseudo_labels, b.state.pseudo_labels)


def test_budget_out_of_range(setup):
    with pytest.raises(ValueError):
        _run(setup, budget=setup[1].valid.size + 1)


def test_constant_oracle_keeps_predictions(setup):
    g, s = setup
    oracle = ConstantOracle(np.asarray(g.labels), np.sort(s.valid))
    st = _run(setup, budget=s.valid.size, oracle=oracle).state
    assert np.array_equal(st.pseudo_labels, st.initial_predictions)


def test_non_strict_adopts_ties(setup):
    g, s = setup
    oracle = ConstantOracle(np.asarray(g.labels), np.sort(s.valid))
    st = _run(setup, budget=s.valid.size, oracle=oracle, strict=False).state
    # every candidate ties, so >= moves each node to the lowest class id
    assert np.all(st.pseudo_labels == 0)
    assert np.any(st.initial_predictions != 0)


def test_single_class_graph():
    g = generate_sbm([30], 0.2, 0.0, 2, 1.0, 0)
    s = subdivide(make_split(g, 0.3, 0), 0.5, 0)
    r = validutil(PropLin(), g, s.train, s.valid, s.unlabeled, BASE, GRID, 0)
    assert r.test_accuracy == 1.0
    assert r.state.search_queries == s.valid.size
    assert np.all(r.state.pseudo_labels == 0)


def test_budget_curve_runs(setup):
    accs = [_run(setup, budget=b).test_accuracy for b in (0, 5, 10)]
    assert all(0 <= a <= 1 for a in accs)


def test_sweep_full_size_matches_direct_search(setup):
    g, s = setup
    grid = {"depth": [0, 1], "epochs": [40]}
    rep = sweep_validation_size(PropLin(), grid, g, s, [5, s.valid.size], [0, 1])
    labels = np.asarray(g.labels)
    for j, seed in enumerate([0, 1]):
        hp, _ = grid_search(PropLin(), grid, g, s, derive_seed(seed, "sweep"))
        m = PropLin()
        fitted = m.fit(g, s.train, labels[s.train], hp, derive_seed(derive_seed(seed, "sweep"), "grid"))
        expected = np.mean(m.predict(fitted, s.unlabeled) == labels[s.unlabeled])
        assert rep.rows[1].accuracies[j] == expected
        assert rep.rows[1].winners[j] == hp
    assert rep.sizes == [5, s.valid.size]
    assert "size\tmean_accuracy" in rep.to_tsv()


def test_sweep_rejects_bad_sizes(setup):
    g, s = setup
    with pytest.raises(ValueError):
        sweep_validation_size(PropLin(), GRID, g, s, [5, 5], [0])
    with pytest.raises(ValueError):
        sweep_validation_size(PropLin(), GRID, g, s, [s.valid.size + 1], [0])


def test_spearman_undefined_for_flat_curve():
    from igbench.overtuning import SweepReport, SweepRow

    flat = SweepReport("m", [SweepRow(s, {}, 0.5, 0.0) for s in (1, 2, 3)], [0])
    assert np.isnan(flat.spearman())
    rising = SweepReport("m", [SweepRow(s, {}, a, 0.0) for s, a in ((1, 0.1), (2, 0.3), (3, 0.2))], [0])
    assert rising.spearman() == pytest.approx(0.5)
