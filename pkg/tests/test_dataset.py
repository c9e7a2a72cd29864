import numpy as np
import pytest

from thzris.beams import Link
from thzris.dataset import (
    Dataset,
    DatasetFormatError,
    SplitSpec,
    Step,
    TrajectorySequence,
    build_dataset,
    read_dataset,
    split,
    write_dataset,
)


@pytest.fixture(scope="module")
def small_dataset(shadowed_model, shadowed_grid):
    rng = np.random.default_rng(123)
    return build_dataset(shadowed_model.scene, shadowed_grid, 200, rng,
                         n_bs_beams=8, n_ris_beams=16, seed=123)


class TestBuildDataset:
    def test_shapes_and_bounds(self, small_dataset):
        assert len(small_dataset.sequences) == 200
        for seq in small_dataset.sequences:
            assert len(seq.steps) == 10
            for step in seq.steps:
                assert 0 <= step.serving_beam < 8 + 16

    def test_deterministic(self, shadowed_model, shadowed_grid, small_dataset):
        again = build_dataset(shadowed_model.scene, shadowed_grid, 200,
                              np.random.default_rng(123), n_bs_beams=8, n_ris_beams=16,
                              seed=123)
        assert again == small_dataset

    def test_no_buildings_all_direct(self):
        from conftest import build_small_model
        from thzris.beams import label_grid
        lm = build_small_model(buildings=())
        lg = label_grid(lm)
        data = build_dataset(lm.scene, lg, 1, np.random.default_rng(0),
                             n_bs_beams=8, n_ris_beams=16)
        assert all(step.link == 1 for step in data.sequences[0].steps)

    def test_both_classes_present(self, small_dataset):
        links = [s.link for seq in small_dataset.sequences for s in seq.steps]
        assert 0 < sum(links) < len(links)

    def test_link_fraction_matches_shadow(self, shadowed_model, shadowed_grid, small_dataset):
        # Steps labeled assisted exactly when the landing cell is BS-shadowed.
        from thzris.scene import grid_position, line_of_sight
        scene = shadowed_model.scene
        by_pos = {}
        for idx in scene.grid.indices():
            pos = tuple(float(v) for v in grid_position(scene.grid, idx))
            by_pos[pos] = line_of_sight(scene, scene.bs_position, pos)
        for seq in small_dataset.sequences:
            for step in seq.steps:
                assert step.link == int(by_pos[step.position])


class TestSplit:
    def test_sizes(self, small_dataset):
        train, val = split(small_dataset, SplitSpec(0.7, shuffle_seed=1))
        assert len(train.sequences) == 140
        assert len(val.sequences) == 60

    def test_sizes_floor(self, small_dataset):
        ten = Dataset(8, 16, 0, small_dataset.sequences[:10])
        train, val = split(ten, SplitSpec(0.7, shuffle_seed=1))
        assert len(train.sequences) == 7 and len(val.sequences) == 3

    def test_partition(self, small_dataset):
        train, val = split(small_dataset, SplitSpec(0.7, shuffle_seed=1))
        train_ids = {s.seq_id for s in train.sequences}
        val_ids = {s.seq_id for s in val.sequences}
        assert train_ids.isdisjoint(val_ids)
        assert train_ids | val_ids == {s.seq_id for s in small_dataset.sequences}

    def test_seed_controls_permutation(self, small_dataset):
        a = split(small_dataset, SplitSpec(0.7, shuffle_seed=1))
        b = split(small_dataset, SplitSpec(0.7, shuffle_seed=1))
        c = split(small_dataset, SplitSpec(0.7, shuffle_seed=2))
        assert a == b
        assert [s.seq_id for s in a[0].sequences] != [s.seq_id for s in c[0].sequences]


class TestRoundTrip:
    def test_exact(self, small_dataset, tmp_path):
        path = tmp_path / "data.txt"
        write_dataset(small_dataset, path)
        assert read_dataset(path) == small_dataset

    def test_empty_dataset(self, tmp_path):
        path = tmp_path / "empty.txt"
        empty = Dataset(8, 16, 7, ())
        write_dataset(empty, path)
        back = read_dataset(path)
        assert back == empty
        assert path.read_text() == "thzris-dataset v1 |F|=8 |P|=16 seed=7\n"

    def test_single_sequence(self, small_dataset, tmp_path):
        one = Dataset(8, 16, 123, small_dataset.sequences[:1])
        path = tmp_path / "one.txt"
        write_dataset(one, path)
        assert read_dataset(path) == one

    def test_write_is_byte_stable(self, small_dataset, tmp_path):
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        write_dataset(small_dataset, p1)
        write_dataset(small_dataset, p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestParseErrors:
    def header(self):
        return "thzris-dataset v1 |F|=8 |P|=16 seed=0"

    def test_truncated_record_names_sequence(self, small_dataset, tmp_path):
        path = tmp_path / "cut.txt"
        write_dataset(small_dataset, path)
        lines = path.read_text().splitlines()
        # Drop one step from the second record (seq_id 1).
        parts = lines[2].split(";")
        lines[2] = ";".join(parts[:-1])
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetFormatError, match=r"sequence 1"):
            read_dataset(path)

    def test_error_carries_line_number(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text(self.header() + "\n0;garbage\n")
        with pytest.raises(DatasetFormatError, match=r":2:"):
            read_dataset(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "vers.txt"
        path.write_text("thzris-dataset v9 |F|=8 |P|=16 seed=0\n")
        with pytest.raises(DatasetFormatError, match="version"):
            read_dataset(path)

    def test_not_a_dataset(self, tmp_path):
        path = tmp_path / "noise.txt"
        path.write_text("hello world\n")
        with pytest.raises(DatasetFormatError):
            read_dataset(path)


def test_step_validation():
    with pytest.raises(ValueError):
        Step(position=(0, 0, 0), link=1, beam_bs=None, beam_ris=2, serving_beam=2)
    with pytest.raises(ValueError):
        Step(position=(0, 0, 0), link=0, beam_bs=1, beam_ris=None, serving_beam=1)
    with pytest.raises(ValueError):
        Step(position=(0, 0, 0), link=2, beam_bs=1, beam_ris=None, serving_beam=1)


def test_sequence_validation(small_dataset):
    steps = small_dataset.sequences[0].steps
    with pytest.raises(ValueError, match="10 steps"):
        TrajectorySequence(seq_id=0, steps=steps[:9])


def test_serving_beam_bound_checked():
    step = Step(position=(0, 0, 0), link=1, beam_bs=30, beam_ris=None, serving_beam=30)
    base = Step(position=(1, 0, 0), link=1, beam_bs=0, beam_ris=None, serving_beam=0)
    chain = [step] + [
        Step(position=(1 + i, 0, 0), link=1, beam_bs=0, beam_ris=None, serving_beam=0)
        for i in range(9)
    ]
    seq = TrajectorySequence(seq_id=0, steps=tuple(chain))
    with pytest.raises(ValueError, match="serving beam"):
        Dataset(n_bs_beams=8, n_ris_beams=16, seed=0, sequences=(seq,))


def test_split_fraction_validated():
    with pytest.raises(ValueError):
        SplitSpec(train_fraction=1.0)
