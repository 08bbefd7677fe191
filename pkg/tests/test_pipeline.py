import json

import numpy as np
import pytest

from bilink import pipeline
from bilink.cli import EXIT_OK, EXIT_RUNTIME, main
from bilink.graph import chronological_split
from bilink.synthetic import SyntheticSpec, write_dataset
from bilink.training import VariantConfig

FAST = dict(pretrain_epochs=3, decoder_epochs=5, input_dim=12, hidden_dim=12,
            output_dim=8, decoder_hidden_dims=(12, 6))


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    return write_dataset(SyntheticSpec(n_u=25, n_v=25, n_edges=300,
                                       weight_skew=3, seed=11), out)


def _load(paths):
    return pipeline.load_dataset(paths["edges"], paths["u_features"],
                                 paths["v_features"])


def test_worker_pool_matches_sequential(dataset, tmp_path):
    graph, ds_hash = _load(dataset)
    cfg = VariantConfig(**FAST)
    seq = pipeline.run_dataset(graph, cfg, [42, 43], tmp_path / "seq", ds_hash,
                               workers=1, save_checkpoints=False)
    par = pipeline.run_dataset(graph, cfg, [42, 43], tmp_path / "par", ds_hash,
                               workers=2, save_checkpoints=False)
    assert seq.per_seed == par.per_seed
    assert ((tmp_path / "seq" / "report.json").read_bytes()
            == (tmp_path / "par" / "report.json").read_bytes())


def test_failed_seed_recorded_others_proceed(dataset, tmp_path, monkeypatch):
    graph, ds_hash = _load(dataset)
    cfg = VariantConfig(**FAST)
    real = pipeline.run_seed

    def flaky(split, cfg_, seed):
        if seed == 43:
            raise RuntimeError("synthetic failure for seed 43")
        return real(split, cfg_, seed)

    monkeypatch.setattr(pipeline, "run_seed", flaky)
    pipeline.run_dataset(graph, cfg, [42, 43, 44], tmp_path, ds_hash)
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["seeds"] == [42, 44]
    assert report["failures"][0]["seed"] == 43
    assert "synthetic failure" in report["failures"][0]["error"]
    assert len(report["per_seed"]) == 2
    assert not (tmp_path / "seed_43").exists()


def test_dataset_hash_tracks_contents(dataset, tmp_path):
    _, h1 = _load(dataset)
    _, h2 = _load(dataset)
    assert h1 == h2
    other = write_dataset(SyntheticSpec(n_u=25, n_v=25, n_edges=300,
                                        weight_skew=3, seed=12), tmp_path)
    _, h3 = _load(other)
    assert h3 != h1


def test_runtime_failure_exit_code(capsys):
    code = main(["inspect-checkpoint", "/no/such/file.npz"])
    assert code == EXIT_RUNTIME
    assert "runtime failure" in capsys.readouterr().err


def test_split_reused_across_seeds_is_unmutated(dataset):
    graph, _ = _load(dataset)
    split = chronological_split(graph)
    before = split.train.edges.u.copy()
    pipeline.run_seed(split, VariantConfig(**FAST), 42)
    pipeline.run_seed(split, VariantConfig(**FAST), 43)
    np.testing.assert_array_equal(split.train.edges.u, before)
