import numpy as np
import pytest

from conftest import write_dataset_dir
from fsgnn.data import (
    DatasetError,
    dataset_hash,
    ingestion_report,
    load_dataset,
    make_random_split,
    parse_edge_file,
    parse_node_file,
    parse_split_file,
    split_fractions_by_class,
    write_edge_file,
    write_node_file,
    write_split_file,
)
from fsgnn.graph import homophily_ratio
from fsgnn.rng import RngStream
from fsgnn.synthetic import random_bundle


class TestParseNodeFile:
    def test_two_line_example(self, tmp_path):
        p = tmp_path / "nodes.txt"
        p.write_text("node_id\tfeature\tlabel\n0\t1,0\t0\n1\t0,1\t1\n")
        features, labels = parse_node_file(p)
        assert np.array_equal(features, [[1.0, 0.0], [0.0, 1.0]])
        assert np.array_equal(labels, [0, 1])

    def test_duplicate_id_named(self, tmp_path):
        p = tmp_path / "nodes.txt"
        rows = "".join(f"{i}\t1,0\t0\n" for i in [0, 1, 2, 3, 4, 5])
        p.write_text("header\n" + rows + "5\t0,1\t1\n")
        with pytest.raises(DatasetError, match="duplicate node id 5"):
            parse_node_file(p)

    def test_non_contiguous_ids(self, tmp_path):
        p = tmp_path / "nodes.txt"
        p.write_text("header\n0\t1,0\t0\n2\t0,1\t1\n")
        with pytest.raises(DatasetError, match="missing id 1"):
            parse_node_file(p)

    def test_malformed_line_reports_number(self, tmp_path):
        p = tmp_path / "nodes.txt"
        p.write_text("header\n0\t1,0\t0\nbroken line\n")
        with pytest.raises(DatasetError, match="nodes.txt:3"):
            parse_node_file(p)

    def test_inconsistent_width(self, tmp_path):
        p = tmp_path / "nodes.txt"
        p.write_text("header\n0\t1,0\t0\n1\t1,0,1\t1\n")
        with pytest.raises(DatasetError, match="expected 2"):
            parse_node_file(p)

    def test_real_valued_features(self, tmp_path):
        p = tmp_path / "nodes.txt"
        p.write_text("header\n0\t0.25,-1.5\t3\n1\t1e-3,2.0\t4\n")
        features, labels = parse_node_file(p)
        assert features[1, 0] == 1e-3 and labels.tolist() == [3, 4]


class TestParseEdgeFile:
    def test_single_pair(self, tmp_path):
        p = tmp_path / "edges.txt"
        p.write_text("src\tdst\n0\t1\n")
        assert parse_edge_file(p).tolist() == [[0, 1]]

    def test_empty_body_rejected(self, tmp_path):
        p = tmp_path / "edges.txt"
        p.write_text("src\tdst\n")
        with pytest.raises(DatasetError, match="no edges"):
            parse_edge_file(p)

    def test_malformed_line(self, tmp_path):
        p = tmp_path / "edges.txt"
        p.write_text("src\tdst\n0\t1\n0 1\n")
        with pytest.raises(DatasetError, match="edges.txt:3"):
            parse_edge_file(p)


class TestParseSplitFile:
    def test_valid(self, tmp_path):
        p = tmp_path / "split.txt"
        p.write_text("train: 0 1\nval: 2\ntest: 3 4\n")
        split = parse_split_file(p, 5)
        assert split.train_idx.tolist() == [0, 1]
        assert split.val_idx.tolist() == [2]
        assert split.test_idx.tolist() == [3, 4]

    def test_overlap_rejected(self, tmp_path):
        p = tmp_path / "split.txt"
        p.write_text("train: 0 2\nval: 2\ntest: 3\n")
        with pytest.raises(DatasetError, match="both train and val"):
            parse_split_file(p, 5)

    def test_out_of_range_rejected(self, tmp_path):
        p = tmp_path / "split.txt"
        p.write_text("train: 0\nval: 1\ntest: 9\n")
        with pytest.raises(DatasetError, match="out of range"):
            parse_split_file(p, 5)

    def test_bad_prefix(self, tmp_path):
        p = tmp_path / "split.txt"
        p.write_text("train: 0\nvalidation: 1\ntest: 2\n")
        with pytest.raises(DatasetError, match="val:"):
            parse_split_file(p, 5)

    def test_roundtrip(self, tmp_path):
        labels = np.array([0, 1] * 10)
        split = make_random_split(labels, seed=3)
        p = tmp_path / "split.txt"
        write_split_file(p, split)
        loaded = parse_split_file(p, labels.size)
        for (_, a), (_, b) in zip(split.sets(), loaded.sets()):
            assert np.array_equal(a, b)


class TestMakeRandomSplit:
    def test_balanced_48_32_20(self):
        labels = np.repeat([0, 1], 50)
        split = make_random_split(labels, (0.48, 0.32, 0.20), seed=0)
        fracs = split_fractions_by_class(labels, split)
        for cls in ("0", "1"):
            assert fracs[cls]["train"] == pytest.approx(0.48)
            assert fracs[cls]["val"] == pytest.approx(0.32)
            assert fracs[cls]["test"] == pytest.approx(0.20)

    def test_same_seed_identical(self):
        labels = np.arange(60) % 3
        a = make_random_split(labels, seed=7)
        b = make_random_split(labels, seed=7)
        for (_, x), (_, y) in zip(a.sets(), b.sets()):
            assert np.array_equal(x, y)

    def test_different_seed_differs(self):
        labels = np.arange(60) % 3
        a = make_random_split(labels, seed=7)
        b = make_random_split(labels, seed=8)
        assert not np.array_equal(a.train_idx, b.train_idx)

    def test_small_class_rejected(self):
        labels = np.array([0, 0, 0, 1, 1])
        with pytest.raises(DatasetError, match="class 1"):
            make_random_split(labels, seed=0)

    def test_uneven_classes_all_sets_nonempty(self):
        # 251 nodes over 5 classes, sizes like the small web datasets
        rng = RngStream(5)
        labels = np.concatenate([np.full(s, c) for c, s in enumerate([10, 25, 60, 70, 86])])
        labels = labels[rng.permutation(labels.size)]
        split = make_random_split(labels, seed=1)
        fracs = split_fractions_by_class(labels, split)
        for cls, row in fracs.items():
            assert all(v > 0 for v in row.values()), (cls, row)

    def test_remainder_goes_to_test(self):
        labels = np.array([0] * 7 + [1] * 7)
        split = make_random_split(labels, (0.48, 0.32, 0.20), seed=0)
        # per class of 7: floor(3.36)=3 train, floor(2.24)=2 val, 2 test
        assert split.train_idx.size == 6 and split.val_idx.size == 4
        assert split.test_idx.size == 4


class TestLoadDataset:
    def test_roundtrip_lossless(self, tmp_path):
        bundle = random_bundle(num_nodes=14, num_classes=3, seed=2)
        d = write_dataset_dir(tmp_path, bundle)
        loaded = load_dataset(d)
        assert np.array_equal(loaded.features, bundle.features)
        assert np.array_equal(loaded.graph.labels, bundle.graph.labels)
        assert np.array_equal(loaded.graph.edge_pairs(), bundle.graph.edge_pairs())
        # second serialization round trips identically
        d2 = write_dataset_dir(tmp_path, loaded, name="again")
        again = load_dataset(d2)
        assert np.array_equal(again.features, loaded.features)
        assert np.array_equal(again.graph.col_indices, loaded.graph.col_indices)

    def test_missing_edge_file_named(self, tmp_path):
        d = tmp_path / "broken"
        d.mkdir()
        write_node_file(d / "nodes.txt", np.eye(2), np.array([0, 1]))
        with pytest.raises(DatasetError, match="out1_graph_edges.txt"):
            load_dataset(d)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DatasetError, match="does not exist"):
            load_dataset(tmp_path / "nope")

    def test_label_remap_contiguous(self, tmp_path):
        d = tmp_path / "remap"
        d.mkdir()
        write_node_file(d / "nodes.txt", np.eye(3), np.array([5, 9, 2]))
        write_edge_file(d / "edges.txt", [(0, 1), (1, 2)])
        bundle = load_dataset(d)
        assert bundle.label_map == {2: 0, 5: 1, 9: 2}
        assert bundle.graph.labels.tolist() == [1, 2, 0]
        assert bundle.num_classes == 3

    def test_edge_id_out_of_range_blamed_on_file(self, tmp_path):
        d = tmp_path / "badedge"
        d.mkdir()
        write_node_file(d / "nodes.txt", np.eye(2), np.array([0, 1]))
        write_edge_file(d / "edges.txt", [(0, 7)])
        with pytest.raises(DatasetError, match="edges.txt"):
            load_dataset(d)


class TestReportsAndHashing:
    def test_ingestion_report_fields(self, tmp_path):
        bundle = random_bundle(num_nodes=16, num_classes=2, seed=3)
        split = make_random_split(bundle.graph.labels, seed=0)
        report = ingestion_report(bundle, split)
        assert report["nodes"] == 16
        assert report["edges"] == bundle.graph.num_edges
        assert report["classes"] == 2
        assert report["homophily_ratio"] == homophily_ratio(bundle.graph)
        for row in report["split_fractions"].values():
            assert sum(row.values()) == pytest.approx(1.0)

    def test_dataset_hash_sensitive_to_features(self):
        a = random_bundle(seed=4)
        b = random_bundle(seed=4)
        assert dataset_hash(a) == dataset_hash(b)
        features = b.features.copy()
        features[0, 0] += 1.0
        from dataclasses import replace

        c = replace(b, features=features)
        assert dataset_hash(c) != dataset_hash(a)


class TestFuzzRejection:
    @pytest.mark.parametrize(
        "content",
        [
            "",
            "header\n\x00\x01\x02\n",
            "header\n0\t1,0\n",
            "header\n0\t1,0\t0\t9\n",
            "header\nzero\t1,0\t0\n",
            "header\n0\tone,two\t0\n",
        ],
    )
    def test_bad_node_files(self, tmp_path, content):
        p = tmp_path / "nodes.txt"
        p.write_text(content)
        with pytest.raises(DatasetError):
            parse_node_file(p)

    @pytest.mark.parametrize(
        "content",
        ["", "header\n", "header\n0\n", "header\n0\tx\n"],
    )
    def test_bad_edge_files(self, tmp_path, content):
        p = tmp_path / "edges.txt"
        p.write_text(content)
        with pytest.raises(DatasetError):
            parse_edge_file(p)

    @pytest.mark.parametrize(
        "content",
        ["", "train: 0\n", "train: 0\nval: 1\ntest: x\n", "test: 0\nval: 1\ntrain: 2\n"],
    )
    def test_bad_split_files(self, tmp_path, content):
        p = tmp_path / "split.txt"
        p.write_text(content)
        with pytest.raises(DatasetError):
            parse_split_file(p, 5)
