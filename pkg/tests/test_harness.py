import warnings

import numpy as np
import pytest

from cphealth import completion
from cphealth.completion import Completer, CompleterConfig, Prediction
from cphealth.core import HealthCube, ObservationMask, slice_disease
from cphealth.correlation import spatial_profile
from cphealth.errors import DegenerateSynthetic, InsufficientHistory, InvalidConfig, InvalidProportion
from cphealth.geo import build_pair_groups, distance_matrix
from cphealth.harness import ExperimentSpec, mae, rmse, run_experiment
from cphealth.synthetic import SyntheticSpec, generate_synthetic

FAST = CompleterConfig(nmf_iters=60, tucker_iters=40)


class TruthPlus(Completer):
    """Returns the stored value plus a fixed offset; reads the target on purpose."""

    offset = 0.0

    def predict(self, cube, mask, targets=None, neighbors=None, config=None):
        idx = np.argwhere(targets)
        return Prediction(idx, cube.values[tuple(idx.T)] + self.offset)


class Oracle(TruthPlus):
    name = "oracle"


class Off(TruthPlus):
    name = "off"
    offset = 0.01


@pytest.fixture
def fake_completers(monkeypatch):
    monkeypatch.setitem(completion.COMPLETERS, "oracle", Oracle)
    monkeypatch.setitem(completion.COMPLETERS, "off", Off)


@pytest.fixture(scope="module")
def synth():
    return generate_synthetic(SyntheticSpec(n_regions=30, n_diseases=3, n_years=6, seed=1))


def test_metric_examples():
    assert rmse([0.1, 0.2], [0.1, 0.22]) == pytest.approx(0.02 / np.sqrt(2), abs=1e-15)
    assert mae([0.1, 0.2], [0.1, 0.22]) == pytest.approx(0.01, abs=1e-15)
    assert rmse([], []) is None and mae([], []) is None


def test_oracle_and_constant_offset(synth, fake_completers):
    cube, mask, cat = synth
    spec = ExperimentSpec(cube.years[-1], proportions=(0.3,), completers=("oracle", "off"), seeds=(0,))
    rep = run_experiment(cube, mask, cat, spec)
    for r in rep.select(completer="oracle"):
        assert r["rmse"] == 0 and r["mae"] == 0
    for r in rep.select(completer="off"):
        assert r["mae"] == pytest.approx(0.01, abs=1e-12) and r["rmse"] == pytest.approx(0.01, abs=1e-12)


def test_hidden_count_and_native_missing(synth, fake_completers):
    cube, mask, cat = synth
    m = np.array(mask.mask)
    m[0, 1, -1] = False  # natively missing in the target year
    spec = ExperimentSpec(cube.years[-1], proportions=(0.5,), completers=("oracle",), seeds=(2,))
    rep = run_experiment(cube, ObservationMask(m), cat, spec)
    from cphealth.selection import select_random
    sel = select_random(30, 0.5, seed=2 * 1000 + 500).mask()
    hidden = ~sel
    expect = {code: int((hidden & m[:, d, -1]).sum()) for d, code in enumerate(cube.diseases)}
    expect["ALL"] = sum(expect.values())
    for r in rep.records:
        assert r["n_scored"] == expect[r["disease"]]


def test_full_proportion_gives_null_metrics(synth):
    cube, mask, cat = synth
    spec = ExperimentSpec(cube.years[-1], proportions=(1.0,), completers=("ucf",), seeds=(0,))
    for r in run_experiment(cube, mask, cat, spec).records:
        assert r["n_scored"] == 0 and r["rmse"] is None and r["mae"] is None


def test_records_invariants(synth):
    cube, mask, cat = synth
    spec = ExperimentSpec(cube.years[-1], proportions=(0.2, 0.6), completers=("ucf", "icf", "blend", "nmf", "hotd"),
                          selection_methods=("random", "rmdc", "qcb"), seeds=(0,), completer_config=FAST)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = run_experiment(cube, mask, cat, spec)
    assert len(rep.records) == 2 * 5 * 3 * (3 + 1)
    for r in rep.records:
        assert r["rmse"] >= r["mae"] >= 0


def test_history_isolation(synth):
    cube, mask, cat = synth
    t = cube.years[-2]
    spec = ExperimentSpec(t, proportions=(0.3, 0.7), completers=("ucf", "icf", "blend", "nmf", "hotd"),
                          selection_methods=("random", "rmdc", "qcb"), seeds=(4,), completer_config=FAST)
    keep = range(cube.year_index(t) + 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        full = run_experiment(cube, mask, cat, spec)
    # replace the future with garbage and also drop it entirely
    garbage = np.array(cube.values)
    garbage[:, :, -1] = 0.77
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        poisoned = run_experiment(cube.with_values(garbage), mask, cat, spec)
        cut = run_experiment(cube.take_years(keep), mask.take_years(keep), cat, spec)
    assert full.records == poisoned.records == cut.records


class Spy(Completer):
    name = "spy"
    seen: list = []

    def predict(self, cube, mask, targets=None, neighbors=None, config=None):
        Spy.seen.append(np.nonzero(mask.mask[:, 0, -1])[0].tolist())
        idx = np.argwhere(targets)
        return Prediction(idx, np.zeros(len(idx)))


def test_target_year_truth_not_used_for_selection(synth, monkeypatch):
    cube, mask, cat = synth
    monkeypatch.setitem(completion.COMPLETERS, "spy", Spy)
    spec = ExperimentSpec(cube.years[-1], proportions=(0.3,), completers=("spy",),
                          selection_methods=("rmdc", "qcb"), seeds=(0,))
    Spy.seen = []
    run_experiment(cube, mask, cat, spec)
    first = Spy.seen
    v = np.array(cube.values)
    v[:, :, -1] = np.random.default_rng(0).uniform(0, 0.2, v[:, :, -1].shape)
    Spy.seen = []
    run_experiment(cube.with_values(v), mask, cat, spec)
    assert Spy.seen == first and len(first) == 2


def test_parallel_matches_serial(synth):
    cube, mask, cat = synth
    spec = ExperimentSpec(cube.years[-1], proportions=(0.2, 0.5), completers=("ucf", "hotd"),
                          selection_methods=("random", "rmdc"), seeds=(0, 1), completer_config=FAST)
    a = run_experiment(cube, mask, cat, spec, workers=1)
    b = run_experiment(cube, mask, cat, spec, workers=2)
    assert a.records == b.records and a.provenance == b.provenance


def test_longitudinal_mode(synth):
    cube, mask, cat = synth
    spec = ExperimentSpec(cube.years[-3], proportions=(0.4,), completers=("icf",), seeds=(0,), longitudinal=True)
    rep = run_experiment(cube, mask, cat, spec)
    assert sorted({r["target_year"] for r in rep.records}) == list(cube.years[-3:])
    assert all(r["mae"] is not None for r in rep.records)


def test_errors(synth):
    cube, mask, cat = synth
    with pytest.raises(InsufficientHistory):
        run_experiment(cube, mask, cat, ExperimentSpec(cube.years[0], completers=("ucf",)))
    with pytest.raises(InvalidConfig):
        run_experiment(cube, mask, cat, ExperimentSpec(1900, completers=("ucf",)))
    with pytest.raises(InvalidProportion):
        ExperimentSpec(2015, proportions=(0.0,))
    with pytest.raises(InvalidConfig):
        ExperimentSpec(2015, selection_methods=("greedy",))


def test_provenance_echo(synth):
    cube, mask, cat = synth
    spec = ExperimentSpec(cube.years[-1], proportions=(0.5,), completers=("ucf",))
    prov = run_experiment(cube, mask, cat, spec).provenance
    assert prov["experiment"] == spec.to_dict()
    assert prov["version"]


# ---------------------------------------------------------------- synthetic generator

def test_synthetic_constant_cube():
    spec = SyntheticSpec(n_regions=10, n_diseases=2, n_years=4, noise=0.0, rho=0.0,
                         base_rates=(0.05, 0.1), amplitudes=(0.0, 0.0))
    cube, mask, _ = generate_synthetic(spec)
    assert np.all(cube.values[:, 0] == 0.05) and np.all(cube.values[:, 1] == 0.1)
    assert mask.mask.all()


def test_synthetic_deterministic_and_bounded():
    a = generate_synthetic(SyntheticSpec(seed=5, n_regions=40))
    b = generate_synthetic(SyntheticSpec(seed=5, n_regions=40))
    assert a[0].values.tobytes() == b[0].values.tobytes()
    assert a[2] == b[2]
    assert (a[0].values >= 0).all() and (a[0].values <= 1).all()


def test_synthetic_box_extent():
    _, _, cat = generate_synthetic(SyntheticSpec(seed=0))
    d = distance_matrix(cat)
    assert d.max() <= 50 * np.sqrt(2) + 1e-6


def test_synthetic_degenerate_warning():
    spec = SyntheticSpec(n_regions=5, n_diseases=1, n_years=2, base_rates=(2.0,), amplitudes=(0.0,), noise=0.0)
    with pytest.warns(DegenerateSynthetic):
        generate_synthetic(spec)


def test_synthetic_spatial_decay():
    near, far = [], []
    for seed in range(10):
        cube, mask, cat = generate_synthetic(SyntheticSpec(seed=seed, length_scale_km=10, noise=0.0005))
        groups = build_pair_groups(cat)
        m = slice_disease(cube, mask, cube.diseases[2])
        prof = spatial_profile(m, groups)
        near.append(prof.values["AD"][1])
        far.append(prof.values["AD"][19])
        # cross-check one group against direct pairwise evaluation
        pairs = groups.groups[19]
        direct = np.mean([np.abs(m.values[i] - m.values[j]).mean() for i, j in pairs])
        assert prof.values["AD"][19] == pytest.approx(direct, rel=1e-12)
    assert np.mean(far) > np.mean(near)
