import math

import numpy as np
import pytest

from sdda.autodiff.tensor import Tape
from sdda.exceptions import DivergenceError, GridSearchError, MissingClassError, NonFiniteError, ShapeError, \
    TruncatedPayloadError
from sdda.losses.mmd import mmd_loss
from sdda.metrics.evaluate import evaluate
from sdda.rng import SeedBank
from sdda.train.checkpoint import load_checkpoint, save_checkpoint
from sdda.train.gridsearch import GridCell, grid_axes, grid_search, repeat_training, select_best
from sdda.train.siamese import SiameseTrainer, train_siamese, train_vanilla


def _assert_same_params(a, b):
    assert list(a) == list(b)
    for name in a:
        np.testing.assert_array_equal(a.values[name], b.values[name])
    for name in a.buffers:
        np.testing.assert_array_equal(a.buffers[name], b.buffers[name])


def test_zero_tradeoffs_reduce_to_vanilla_training(tiny_sessions, tiny_spec, tiny_train_cfg):
    source, target = tiny_sessions
    cfg = tiny_train_cfg.model_copy(update={"use_preproc_invariants": False, "use_center": True, "use_mmd": True,
                                            "lambda1": 0.0, "lambda2": 0.0})
    siamese_store, siamese_record = train_siamese(source, target.without_labels(), tiny_spec, cfg)
    vanilla_store, vanilla_record = train_vanilla(source, tiny_spec, cfg)
    assert siamese_record.loss_trace() == vanilla_record.loss_trace()
    assert siamese_record.stage1_epochs == vanilla_record.stage1_epochs
    _assert_same_params(siamese_store, vanilla_store)


def test_training_is_deterministic(tiny_sessions, tiny_spec, tiny_train_cfg):
    source, target = tiny_sessions
    store_a, record_a = train_siamese(source, target, tiny_spec, tiny_train_cfg)
    store_b, record_b = train_siamese(source, target, tiny_spec, tiny_train_cfg)
    _assert_same_params(store_a, store_b)
    assert record_a.model_dump(exclude={"wall_time_s"}) == record_b.model_dump(exclude={"wall_time_s"})


def test_different_seeds_differ(tiny_sessions, tiny_spec, tiny_train_cfg):
    source, target = tiny_sessions
    _, record_a = train_siamese(source, target, tiny_spec, tiny_train_cfg)
    _, record_b = train_siamese(source, target, tiny_spec, tiny_train_cfg.model_copy(update={"seed": 8}))
    assert record_a.loss_trace() != record_b.loss_trace()


def test_record_shape(tiny_sessions, tiny_spec, tiny_train_cfg):
    source, target = tiny_sessions
    _, record = train_siamese(source, target, tiny_spec, tiny_train_cfg, target_eval=target)
    assert record.status == "completed"
    assert 1 <= record.stage1_epochs <= tiny_train_cfg.max_epochs_stage1
    assert record.stage2_epochs <= tiny_train_cfg.max_epochs_stage2
    assert len(record.epochs) == record.stage1_epochs + record.stage2_epochs
    assert all(e.center_loss is not None and e.mmd_loss is not None for e in record.epochs)
    assert record.best_epoch is not None and record.best_val_loss is not None
    assert 0.0 <= record.final["target_acc"] <= 1.0
    frame = record.to_frame()
    assert len(frame) == len(record.epochs)
    assert set(frame["stage"]) <= {1, 2}


def test_full_schedule_without_early_stopping(tiny_sessions, tiny_spec, tiny_train_cfg):
    source, target = tiny_sessions
    cfg = tiny_train_cfg.model_copy(update={"early_stopping": False, "patience": 1})
    _, record = train_siamese(source, target, tiny_spec, cfg)
    assert record.stage1_epochs == cfg.max_epochs_stage1
    assert record.stage2_epochs == cfg.max_epochs_stage2


def test_track_target_fills_every_epoch(tiny_sessions, tiny_spec, tiny_train_cfg):
    source, target = tiny_sessions
    cfg = tiny_train_cfg.model_copy(update={"track_target": True})
    _, record = train_siamese(source, target.without_labels(), tiny_spec, cfg, target_eval=target)
    assert all(e.target_acc is not None for e in record.epochs)
    _, untracked = train_siamese(source, target, tiny_spec, tiny_train_cfg, target_eval=target)
    assert all(e.target_acc is None for e in untracked.epochs)


def test_vanilla_has_no_adaptation_terms(tiny_sessions, tiny_spec, tiny_train_cfg):
    source, _ = tiny_sessions
    _, record = train_vanilla(source, tiny_spec, tiny_train_cfg)
    assert all(e.center_loss is None and e.mmd_loss is None for e in record.epochs)
    assert record.config["use_mmd"] is False


def test_missing_class_is_rejected(tiny_sessions, tiny_spec, tiny_train_cfg):
    source, target = tiny_sessions
    only_zero = source.subset(np.flatnonzero(source.labels == 0))
    with pytest.raises(MissingClassError) as info:
        train_siamese(only_zero, target, tiny_spec, tiny_train_cfg)
    assert info.value.details["classes"] == [1]


def test_unlabeled_source_is_rejected(tiny_sessions, tiny_spec, tiny_train_cfg):
    source, target = tiny_sessions
    with pytest.raises(MissingClassError):
        train_siamese(source.without_labels(), target, tiny_spec, tiny_train_cfg)


def test_mmd_needs_a_target(tiny_sessions, tiny_spec, tiny_train_cfg):
    source, _ = tiny_sessions
    with pytest.raises(ShapeError):
        SiameseTrainer(tiny_spec, tiny_train_cfg).fit(source, None)


def test_input_shape_must_match_the_model(tiny_sessions, tiny_spec, tiny_train_cfg):
    source, target = tiny_sessions
    narrow = target.replace(trials=target.trials[:, :3])
    with pytest.raises(ShapeError):
        train_siamese(source, narrow, tiny_spec, tiny_train_cfg)


def test_snapshot_restore_round_trip(tiny_sessions, tiny_spec, tiny_train_cfg):
    source, target = tiny_sessions
    trainer = SiameseTrainer(tiny_spec, tiny_train_cfg)
    saved = trainer.snapshot()
    before = {name: trainer.store.values[name].copy() for name in trainer.store}
    centers = trainer.bank.centers.copy()
    trainer.run_epoch(source, np.arange(source.n_trials), target)
    assert any(not np.array_equal(before[n], trainer.store.values[n]) for n in before)
    trainer.restore(saved)
    for name in before:
        np.testing.assert_array_equal(trainer.store.values[name], before[name])
    np.testing.assert_array_equal(trainer.bank.centers, centers)
    assert trainer.optimizer.state.step == 0


def test_mmd_vanishes_when_both_domains_see_the_same_batch(tiny_sessions, tiny_spec, tiny_train_cfg):
    source, target = tiny_sessions
    trainer = SiameseTrainer(tiny_spec, tiny_train_cfg)
    trainer.run_epoch(source, np.arange(source.n_trials), target)
    batch = source.trials[:8]
    trainer.mmd_source_dropout = SeedBank(11).generator("shared")
    trainer.target_dropout = SeedBank(11).generator("shared")
    with Tape():
        hs, ht = trainer.mmd_embeddings(batch, batch.copy())
        ld = mmd_loss(hs, ht, trainer.cfg.mmd_bandwidth, trainer.cfg.mmd_kernel_factors)
    np.testing.assert_array_equal(hs.data, ht.data)
    assert abs(ld.item()) < 1e-12


def test_mmd_branches_do_not_touch_batch_norm_statistics(tiny_sessions, tiny_spec, tiny_train_cfg):
    source, target = tiny_sessions
    trainer = SiameseTrainer(tiny_spec, tiny_train_cfg)
    before = {name: buffer.copy() for name, buffer in trainer.store.buffers.items()}
    with Tape():
        trainer.mmd_embeddings(source.trials[:8], target.trials[:8])
    for name, buffer in before.items():
        np.testing.assert_array_equal(trainer.store.buffers[name], buffer)


def test_non_finite_loss_becomes_divergence(tiny_sessions, tiny_spec, tiny_train_cfg, monkeypatch):
    source, target = tiny_sessions

    def exploding(*args, **kwargs):
        raise NonFiniteError("loss is nan", component="softmax")

    monkeypatch.setattr("sdda.train.siamese.total_loss", exploding)
    with pytest.raises(DivergenceError) as info:
        train_siamese(source, target, tiny_spec, tiny_train_cfg)
    assert info.value.record.status == "diverged"
    assert "nan" in info.value.record.failure


# grid search


def _cell(l1, l2, accs):
    return GridCell(lambda1=l1, lambda2=l2, accuracies=accs)


def test_select_best_breaks_ties_toward_small_lambdas():
    cells = [_cell(1.0, 0.1, [0.8]), _cell(2.0, 0.05, [0.8]), _cell(0.2, 0.05, [0.8]), _cell(0.0, 0.0, [0.7])]
    best = select_best(cells)
    assert (best.lambda1, best.lambda2) == (0.2, 0.05)


def test_select_best_skips_failed_cells():
    cells = [_cell(0.0, 0.0, [None, None]), _cell(1.0, 0.2, [0.6, None])]
    assert cells[0].mean != cells[0].mean
    assert select_best(cells).lambda1 == 1.0
    assert cells[1].mean == pytest.approx(0.6)


def test_select_best_all_failed():
    with pytest.raises(GridSearchError):
        select_best([_cell(0.0, 0.0, [None]), _cell(1.0, 0.0, [])])


def test_grid_axes_collapse_under_ablation(tiny_train_cfg):
    cfg = tiny_train_cfg.model_copy(update={"lambda1_grid": (0.0, 1.0), "lambda2_grid": (0.0, 0.2)})
    assert grid_axes(cfg) == ((0.0, 1.0), (0.0, 0.2))
    assert grid_axes(cfg.with_ablations(["no-center"])) == ((0.0,), (0.0, 0.2))
    assert grid_axes(cfg.with_ablations(["no-mmd"])) == ((0.0, 1.0), (0.0,))


def test_grid_search_layout_and_zero_cell(tiny_sessions, tiny_spec, tiny_train_cfg):
    source, target = tiny_sessions
    cfg = tiny_train_cfg.model_copy(update={"lambda1_grid": (0.0, 1.0), "lambda2_grid": (0.0, 0.2)})
    result = grid_search(source, target, tiny_spec, cfg)
    frame = result.to_frame()
    assert frame.shape == (2, 2)
    assert list(frame.index) == [0.0, 1.0] and list(frame.columns) == [0.0, 0.2]
    assert result.oracle_selection
    assert len(result.cells) == 4 and all(len(c.accuracies) == 1 for c in result.cells)
    assert result.best_accuracy == pytest.approx(np.nanmax(frame.to_numpy()))
    vanilla_store, _ = train_vanilla(source, tiny_spec, cfg)
    assert frame.loc[0.0, 0.0] == pytest.approx(evaluate(vanilla_store, tiny_spec, target).accuracy)


def test_repeat_training_uses_consecutive_seeds(tiny_sessions, tiny_spec, tiny_train_cfg):
    source, target = tiny_sessions
    cfg = tiny_train_cfg.model_copy(update={"repetitions": 2})
    runs = repeat_training(source, target.without_labels(), tiny_spec, cfg, target_eval=target)
    assert [record.seed for _, record, _ in runs] == [7, 8]
    assert all(report is not None and not math.isnan(report.accuracy) for _, _, report in runs)


# checkpoints


def test_checkpoint_round_trip(tiny_sessions, tiny_spec, tiny_train_cfg, tmp_path):
    source, target = tiny_sessions
    trainer = SiameseTrainer(tiny_spec, tiny_train_cfg)
    trainer.run_epoch(source, np.arange(source.n_trials), target)
    path = save_checkpoint(tmp_path / "model.ckpt", tiny_spec, trainer.store, trainer.bank)
    spec, store, bank = load_checkpoint(path)
    assert spec == tiny_spec
    _assert_same_params(store, trainer.store)
    assert store.groups == trainer.store.groups
    np.testing.assert_array_equal(bank.centers, trainer.bank.centers)
    assert bank.rate == trainer.bank.rate
    np.testing.assert_array_equal(evaluate(store, spec, target).confusion,
                                  evaluate(trainer.store, tiny_spec, target).confusion)


def test_truncated_checkpoint(tiny_spec, tiny_train_cfg, tmp_path):
    trainer = SiameseTrainer(tiny_spec, tiny_train_cfg)
    path = save_checkpoint(tmp_path / "model.ckpt", tiny_spec, trainer.store)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(TruncatedPayloadError):
        load_checkpoint(path)
