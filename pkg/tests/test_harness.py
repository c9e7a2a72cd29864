import numpy as np
import pytest

from thzris.dataset import SplitSpec, build_dataset, split
from thzris.harness import (
    BeamStats,
    EpochStats,
    Examples,
    HeatmapCell,
    Metrics,
    TrainSettings,
    boundary_columns,
    evaluate,
    emit_report,
    heatmap_adjacent_beam_diffs,
    make_examples,
    per_beam_stats,
    region_accuracy,
    render_figures,
    topk_accuracy,
    train,
)
from thzris.seqmodel import params_dict


@pytest.fixture(scope="module")
def splits(shadowed_model, shadowed_grid):
    rng = np.random.default_rng(321)
    data = build_dataset(shadowed_model.scene, shadowed_grid, 240, rng,
                         n_bs_beams=8, n_ris_beams=16, seed=321)
    return split(data, SplitSpec(0.7, shuffle_seed=5))


def quick_settings(**kw):
    base = dict(n_bs_beams=8, n_ris_beams=16, hidden_size=10, embed_dim=8,
                epochs=2, batch_size=32, seed=7)
    base.update(kw)
    return TrainSettings(**base)


class TestMakeExamples:
    def test_window_7_labels_step_8(self, splits):
        train_data, _ = splits
        ex = make_examples(train_data.sequences, window=7)
        seq = train_data.sequences[0]
        assert np.array_equal(ex.positions[0], [s.position for s in seq.steps[:7]])
        assert np.array_equal(ex.beams[0], [s.serving_beam for s in seq.steps[:7]])
        step8 = seq.steps[7]
        expected = step8.beam_bs if step8.link == 1 else step8.beam_ris
        assert ex.beam_label[0] == expected
        assert ex.link_label[0] == step8.link
        assert tuple(ex.label_position[0]) == step8.position

    def test_window_9_labels_step_10(self, splits):
        train_data, _ = splits
        ex = make_examples(train_data.sequences, window=9)
        step10 = train_data.sequences[0].steps[9]
        assert ex.link_label[0] == step10.link
        assert ex.positions.shape[1] == 9

    def test_window_10_rejected(self, splits):
        train_data, _ = splits
        with pytest.raises(ValueError):
            make_examples(train_data.sequences, window=10)


class TestTopK:
    def test_k_equals_c_is_one(self):
        rng = np.random.default_rng(0)
        logits = rng.standard_normal((20, 6))
        labels = rng.integers(0, 6, size=20)
        assert topk_accuracy(logits, labels, 6) == 1.0

    def test_one_hot_k1(self):
        labels = np.array([0, 3, 2])
        logits = np.zeros((3, 4))
        logits[np.arange(3), labels] = 1.0
        assert topk_accuracy(logits, labels, 1) == 1.0

    def test_hand_ranked_two_thirds(self):
        # Label ranks (1st, 4th, 2nd); top-3 catches two of three.
        logits = np.array([
            [5.0, 1.0, 0.0, 0.0, 0.0],
            [1.0, 5.0, 4.0, 3.0, 0.0],
            [4.0, 5.0, 1.0, 0.0, 0.0],
        ])
        labels = np.zeros(3, dtype=int)
        assert topk_accuracy(logits, labels, 3) == pytest.approx(2 / 3)
        assert topk_accuracy(logits, labels, 1) == pytest.approx(1 / 3)

    def test_ties_prefer_lower_index(self):
        logits = np.zeros((1, 5))
        assert topk_accuracy(logits, np.array([2]), 3) == 1.0
        assert topk_accuracy(logits, np.array([2]), 2) == 0.0
        assert topk_accuracy(logits, np.array([4]), 4) == 0.0
        assert topk_accuracy(logits, np.array([1]), 2) == 1.0

    def test_bad_k(self):
        with pytest.raises(ValueError):
            topk_accuracy(np.zeros((2, 4)), np.zeros(2, dtype=int), 0)
        with pytest.raises(ValueError):
            topk_accuracy(np.zeros((2, 4)), np.zeros(2, dtype=int), 5)

    def test_nesting(self):
        rng = np.random.default_rng(1)
        logits = rng.standard_normal((50, 8))
        labels = rng.integers(0, 8, size=50)
        accs = [topk_accuracy(logits, labels, k) for k in (1, 3, 5)]
        assert accs[0] <= accs[1] <= accs[2]


class TestPerBeamStats:
    def test_perfect_prediction(self):
        labels = np.array([4, 4, 4, 9])
        stats = per_beam_stats(labels.copy(), labels)
        assert stats[4] == BeamStats(mean_pred=4.0, stderr=0.0, count=3)
        assert stats[9] == BeamStats(mean_pred=9.0, stderr=0.0, count=1)

    def test_two_point_spread(self):
        # predictions {49, 51} for groundtruth 50: mean 50, stderr 1
        stats = per_beam_stats(np.array([49, 51]), np.array([50, 50]))
        assert stats[50].mean_pred == pytest.approx(50.0)
        assert stats[50].stderr == pytest.approx(1.0)

    def test_unseen_beam_omitted(self):
        stats = per_beam_stats(np.array([1, 2]), np.array([1, 1]))
        assert set(stats) == {1}

    def test_singleton_stderr_zero(self):
        stats = per_beam_stats(np.array([7]), np.array([3]))
        assert stats[3].stderr == 0.0


class TestTrain:
    def test_zero_epochs_initial_metrics(self, splits):
        run = train(*splits, quick_settings(epochs=0))
        assert run.epoch_log == []
        assert 0.0 <= run.final_metrics.topk[1] <= 1.0
        assert run.final_metrics.topk[1] <= run.final_metrics.topk[3] <= run.final_metrics.topk[5]

    def test_fixed_seed_identical_logs(self, splits):
        run1 = train(*splits, quick_settings(epochs=2))
        run2 = train(*splits, quick_settings(epochs=2))
        assert run1.epoch_log == run2.epoch_log
        p1, p2 = params_dict(run1.beam_model), params_dict(run2.beam_model)
        for k in p1:
            assert np.array_equal(p1[k], p2[k])

    def test_epochs_contiguous_from_one(self, splits):
        run = train(*splits, quick_settings(epochs=3))
        assert [r.epoch for r in run.epoch_log] == [1, 2, 3]

    def test_loss_decreases_and_overfits_small_subset(self, splits):
        # Smoke-scale overfit: the cramped test grid has near-duplicate
        # windows, so this asserts strong memorization rather than the exact
        # 100% that the full-size acceptance run checks.
        from thzris.dataset import Dataset
        train_data, val_data = splits
        subset = Dataset(8, 16, 0, train_data.sequences[:40])
        settings = quick_settings(epochs=150, batch_size=8, hidden_size=20,
                                  embed_dim=50, seed=3)
        run = train(subset, subset, settings)
        assert run.epoch_log[-1].train_loss < 0.2 * run.epoch_log[0].train_loss
        ex = make_examples(subset.sequences, settings.window)
        final = evaluate(run.beam_model, run.link_model, ex)
        assert final.topk[1] >= 0.9
        assert final.link_accuracy == 1.0

    def test_nan_aborts_with_diagnostic(self, splits):
        train_data, val_data = splits
        settings = quick_settings(epochs=1)
        import thzris.harness as hz

        orig = hz.init_model

        def poisoned(*args, **kw):
            model = orig(*args, **kw)
            model.head_b[0] = np.nan
            return model

        hz.init_model = poisoned
        try:
            with pytest.raises(RuntimeError, match="diverged"):
                train(train_data, val_data, settings)
        finally:
            hz.init_model = orig

    def test_best_checkpoint_tracks_top1(self, splits):
        run = train(*splits, quick_settings(epochs=3))
        best = max(run.epoch_log, key=lambda r: r.val_top1)
        assert run.epoch_log[run.best_epoch - 1].val_top1 == best.val_top1


class TestEvaluate:
    def test_metric_structure(self, splits):
        run = train(*splits, quick_settings(epochs=1))
        m = run.final_metrics
        assert set(m.topk) == {1, 3, 5}
        assert m.topk[1] <= m.topk[3] <= m.topk[5]
        assert 0.0 <= m.link_accuracy <= 1.0
        for s in m.per_beam.values():
            assert s.stderr >= 0.0 and s.count >= 1
            assert 0.0 <= s.mean_pred <= 15.0

    def test_heatmap_rows_are_visited_cells(self, splits):
        train_data, val_data = splits
        run = train(train_data, val_data, quick_settings(epochs=1))
        ex = make_examples(val_data.sequences, 7)
        cells = {(p[0], p[1]) for p in map(tuple, ex.label_position)}
        assert len(run.final_metrics.heatmap) == len(cells)


class TestReports:
    def test_files_written_and_stable(self, splits, shadowed_grid, tmp_path):
        train_data, val_data = splits
        run = train(train_data, val_data, quick_settings(epochs=2))
        ex = make_examples(val_data.sequences, 7)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        emit_report(run, run.final_metrics, shadowed_grid, out1, val_examples=ex)
        emit_report(run, run.final_metrics, shadowed_grid, out2, val_examples=ex)
        for name in ("epochs.csv", "perbeam.csv", "heatmap.csv", "regions.csv"):
            assert (out1 / name).exists()
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        for name in ("epochs.svg", "perbeam.svg", "heatmap.svg"):
            assert (out1 / name).stat().st_size > 0

    def test_headers_exact(self, splits, shadowed_grid, tmp_path):
        train_data, val_data = splits
        run = train(train_data, val_data, quick_settings(epochs=1))
        ex = make_examples(val_data.sequences, 7)
        emit_report(run, run.final_metrics, shadowed_grid, tmp_path, val_examples=ex)
        assert (tmp_path / "epochs.csv").read_text().splitlines()[0] == \
            "epoch,train_loss,val_top1,val_top3,val_top5,link_acc"
        assert (tmp_path / "perbeam.csv").read_text().splitlines()[0] == \
            "beam,count,mean_pred,stderr"
        assert (tmp_path / "heatmap.csv").read_text().splitlines()[0] == \
            "x,y,gt_beam,pred_beam,link"
        assert (tmp_path / "regions.csv").read_text().splitlines()[0] == \
            "region,count,beam_top1,link_acc"

    def test_empty_metrics_header_only(self, splits, tmp_path):
        run = train(*splits, quick_settings(epochs=0))
        empty = Metrics(topk={1: 0.0, 3: 0.0, 5: 0.0}, link_accuracy=0.0,
                        per_beam={}, heatmap=())
        emit_report(run, empty, None, tmp_path)
        assert (tmp_path / "epochs.csv").read_text() == \
            "epoch,train_loss,val_top1,val_top3,val_top5,link_acc\n"
        assert (tmp_path / "perbeam.csv").read_text() == "beam,count,mean_pred,stderr\n"
        assert (tmp_path / "heatmap.csv").read_text() == "x,y,gt_beam,pred_beam,link\n"
        assert not (tmp_path / "regions.csv").exists()

    def test_render_figures_from_csvs(self, splits, tmp_path):
        run = train(*splits, quick_settings(epochs=1))
        emit_report(run, run.final_metrics, None, tmp_path)
        (tmp_path / "epochs.svg").unlink()
        render_figures(tmp_path)
        assert (tmp_path / "epochs.svg").stat().st_size > 0


class TestRegions:
    def test_boundary_columns_straddle_transition(self, shadowed_grid):
        cols = boundary_columns(shadowed_grid, band_width=1)
        assert cols, "mixed scene must have a transition band"
        nx, ny, nz = shadowed_grid.grid_counts
        assert len(cols) < nx * ny

    def test_region_counts_partition(self, splits, shadowed_grid):
        train_data, val_data = splits
        run = train(train_data, val_data, quick_settings(epochs=1))
        ex = make_examples(val_data.sequences, 7)
        regions = region_accuracy(run.beam_model, run.link_model, ex, shadowed_grid)
        assert regions["los"]["count"] + regions["nlos"]["count"] == len(ex)
        for r in regions.values():
            assert 0.0 <= r["beam_top1"] <= 1.0
            assert 0.0 <= r["link_acc"] <= 1.0


def test_heatmap_adjacency_diffs():
    cells = [
        HeatmapCell(0.0, 0.0, gt_beam=5, pred_beam=5, link=1),
        HeatmapCell(1.0, 0.0, gt_beam=6, pred_beam=6, link=1),
        HeatmapCell(2.0, 0.0, gt_beam=9, pred_beam=9, link=0),  # other link: skipped
        HeatmapCell(0.0, 1.0, gt_beam=5, pred_beam=5, link=1),
    ]
    diffs = heatmap_adjacent_beam_diffs(cells, dx=1.0, dy=1.0)
    assert sorted(diffs) == [0, 1]
