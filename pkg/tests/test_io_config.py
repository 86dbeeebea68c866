import json

import numpy as np
import pytest

from gdflab import config as cfgmod
from gdflab import io
from gdflab.nn import discriminator_spec, init_params
from gdflab.theory import ProbabilityEstimate


def test_samples_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    dumps = [(1, rng.normal(size=(5, 2))), (500, rng.normal(size=(3, 2)) * 1e-300)]
    path = tmp_path / "s.csv"
    io.write_samples_csv(path, dumps)
    back = io.read_samples_csv(path)
    assert list(back) == [1, 500]
    for it, arr in dumps:
        assert np.array_equal(back[it], arr)
    assert path.read_text().splitlines()[0] == "iter,x,y"


@pytest.mark.parametrize("text", [
    "", "a,b,c\n1,2,3\n", "iter,x,y\n1,2\n", "iter,x,y\n1,abc,3\n", "iter,x,y\n1,nan,3\n", "iter,x,y\n",
])
def test_malformed_samples_csv(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(io.SchemaError):
        io.read_samples_csv(path)


def test_missing_csv_is_schema_error(tmp_path):
    with pytest.raises(io.SchemaError):
        io.read_samples_csv(tmp_path / "nope.csv")


def test_json_sorted_and_rejects_non_finite(tmp_path):
    text = io.dumps_json({"b": np.float64(1.5), "a": np.arange(2)})
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [0, 1], "b": 1.5}
    with pytest.raises(io.SchemaError):
        io.dumps_json({"x": float("nan")})


def test_atomic_write_leaves_no_temp_files(tmp_path):
    io.atomic_write_text(tmp_path / "sub" / "f.txt", "hello")
    assert (tmp_path / "sub" / "f.txt").read_text() == "hello"
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.txt"]


def test_sweep_csv(tmp_path):
    rows = [(8, ProbabilityEstimate(0.25, 0.01, 100, 0.2)), (16, ProbabilityEstimate(0.0, 0.0, 100, None))]
    io.write_sweep_csv(tmp_path / "w.csv", rows)
    lines = (tmp_path / "w.csv").read_text().splitlines()
    assert lines == ["param,estimate,std_error,exact", "8,0.25,0.01,0.20000000000000001", "16,0,0,"]


def test_checkpoint_round_trip(tmp_path):
    spec = discriminator_spec()
    params = init_params(spec, np.random.default_rng(1))
    io.save_checkpoint(tmp_path / "d.npz", spec, params, seed=7, step=42)
    spec2, params2, header = io.load_checkpoint(tmp_path / "d.npz")
    assert spec2 == spec
    assert header["seed"] == 7 and header["step"] == 42
    for a, b in zip(params.arrays(), params2.arrays()):
        assert np.array_equal(a, b)


def test_checkpoint_rejects_foreign_npz(tmp_path):
    np.savez(tmp_path / "x.npz", header=np.array(json.dumps({"format": "other"})))
    with pytest.raises(io.SchemaError):
        io.load_checkpoint(tmp_path / "x.npz")


def test_config_round_trip(tmp_path):
    text = cfgmod.default_config_text()
    path = tmp_path / "c.yaml"
    path.write_text(text)
    cfg = cfgmod.load(path)
    assert cfgmod.dumps(cfg) == text
    assert cfg.mixture_spec().K == 8
    assert cfg.seeds() == list(range(10))


def test_config_overrides():
    cfg = cfgmod.load(None, ["train.iterations=3", "train.penalty=gdf", "mixture.weights=[0.86,0.02,0.02,0.02,0.02,0.02,0.02,0.02]", "trials=2"])
    assert cfg.train.iterations == 3 and cfg.train.penalty == "gdf"
    assert cfg.mixture_spec().weights[0] == 0.86
    assert cfg.seeds() == [0, 1]


@pytest.mark.parametrize("overrides,match", [
    (["train.foo=1"], "unknown key train.foo"),
    (["bogus=1"], "unknown key bogus"),
    (["eval.samples=0"], "positive"),
    (["mixture.kind=spiral"], "unknown kind"),
    (["train.batch_size=1"], "batch_size"),
    (["trials"], "key=value"),
    (["schema_version=9"], "schema_version"),
])
def test_config_errors(overrides, match):
    with pytest.raises(cfgmod.ConfigError, match=match):
        cfgmod.load(None, overrides)


def test_output_dir_from_env(monkeypatch):
    monkeypatch.setenv(cfgmod.OUTPUT_ENV, "/tmp/elsewhere")
    assert str(cfgmod.load(None).resolved_output_dir()) == "/tmp/elsewhere"
    assert str(cfgmod.load(None, ["output_dir=x"]).resolved_output_dir()) == "x"


def test_shipped_configs_load():
    root = __import__("pathlib").Path(__file__).resolve().parent.parent / "configs"
    default = cfgmod.load(root / "ring8.yaml")
    assert cfgmod.dumps(default) == cfgmod.default_config_text()
    extreme = cfgmod.load(root / "ring8_extreme.yaml")
    assert extreme.mixture_spec().weights.tolist() == [0.86] + [0.02] * 7
    assert extreme.train == default.train


def test_atomic_write_uses_umask_permissions(tmp_path):
    import os
    old = os.umask(0o022)
    try:
        io.atomic_write_text(tmp_path / "p.txt", "x")
    finally:
        os.umask(old)
    assert (tmp_path / "p.txt").stat().st_mode & 0o777 == 0o644
