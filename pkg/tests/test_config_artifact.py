import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from amesbench import artifact, config, models

SMALL = {
    "linreg": {},
    "forest": {"n_estimators": 5, "max_depth": 4, "max_features": 2, "seed": 3},
    "boost": {"n_rounds": 8, "max_depth": 3, "subsample": 0.8, "seed": 4},
    "svr": {"C": 2.0, "gamma": 0.3},
    "mlp": {"hidden_sizes": (6, 3), "activation": "tanh", "max_iter": 30, "seed": 5},
}

TEXT = """
[experiment]
format = 1
data = houses.csv   ; relative to the config
target_transform = identity
seed = 17
folds = 4
models = linreg, boost

[boost]
max_depth = 3
learning_rate = 0.05

[boost.grid]
max_depth = 2, 4

[mlp]
hidden_sizes = 50-20

[forest.grid]
max_depth = none, 8
"""


def test_parse_examples(tmp_path):
    cfg = config.parse_config(TEXT, base_dir=str(tmp_path))
    assert cfg.data == str(tmp_path / "houses.csv")
    assert (cfg.seed, cfg.folds, cfg.target_transform) == (17, 4, "identity")
    assert cfg.models == ("linreg", "boost")
    assert cfg.params["boost"] == {"max_depth": 3, "learning_rate": 0.05}
    assert cfg.params["mlp"]["hidden_sizes"] == (50, 20)
    assert cfg.grids["boost"] == {"max_depth": [2, 4]}
    assert cfg.grids["forest"]["max_depth"] == [None, 8]
    mc = cfg.model_config("boost")
    assert mc["seed"] == config.derive_seed(17, "boost") and mc["max_depth"] == 3
    assert cfg.grid("boost")["seed"] == [mc["seed"]]


def test_dump_parse_roundtrip(tmp_path):
    cfg = config.parse_config(TEXT, base_dir=str(tmp_path))
    again = config.parse_config(config.dump_config(cfg), base_dir=str(tmp_path))
    assert again == cfg
    default = config.ExperimentConfig()
    assert config.parse_config(config.dump_config(default)) == default


@pytest.mark.parametrize("text", [
    "[experiment]\ncolour = red\n",
    "[boost]\ndepth = 3\n",
    "[catboost]\nx = 1\n",
    "[experiment]\nformat = 2\n",
    "[experiment]\nmodels = linreg, knn\n",
    "[forest]\nbootstrap = maybe\n",
    "[experiment]\nfolds = 1\n",
])
def test_bad_configs_rejected(text):
    with pytest.raises(config.ConfigError):
        config.parse_config(text)


def test_seed_streams_are_distinct_and_stable():
    seeds = {s: config.derive_seed(0, s) for s in config.STREAMS}
    assert len(set(seeds.values())) == len(seeds)
    assert seeds == {s: config.derive_seed(0, s) for s in config.STREAMS}
    assert config.derive_seed(1, "boost") != seeds["boost"]


def test_default_grids_contain_the_family_defaults():
    for kind, grid in config.DEFAULT_GRIDS.items():
        defaults = models.family(kind).defaults
        for key, vals in grid.items():
            assert defaults[key] in vals, (kind, key)


def fitted(kind):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 3))
    y = X @ [1.0, -0.5, 0.2] + 0.1 * rng.normal(size=40)
    est = models.fit_model(kind, SMALL[kind], X, y, ["a", "b", "c"])
    pre = {"schema_digest": "abc", "target_transform": "log1p", "columns": ["a", "b", "c"]}
    meta = {"seed": 7, "timestamp": "2020-01-01T00:00:00Z", "r2": 0.5}
    return artifact.ModelArtifact(kind, est, pre, meta), rng.normal(size=(15, 3))


@pytest.mark.parametrize("kind", models.MODEL_ORDER)
def test_save_load_predict_is_bit_exact(kind, tmp_path):
    art, Q = fitted(kind)
    path = tmp_path / f"{kind}.amb"
    artifact.save_model(art, path)
    back = artifact.load_model(path)
    assert back.kind == kind and back.metadata == art.metadata
    assert back.preprocessing == art.preprocessing
    np.testing.assert_array_equal(back.predict(Q), art.predict(Q))
    assert artifact.to_bytes(back) == artifact.to_bytes(art)


def test_truncated_and_corrupted_files():
    blob = artifact.to_bytes(fitted("boost")[0])
    with pytest.raises(artifact.ChecksumError):
        artifact.from_bytes(blob[:-5])
    with pytest.raises(artifact.ChecksumError):
        artifact.from_bytes(blob[: len(blob) // 2])
    flipped = bytearray(blob)
    flipped[40] ^= 0xFF
    with pytest.raises(artifact.ChecksumError):
        artifact.from_bytes(bytes(flipped))
    with pytest.raises(artifact.ArtifactError):
        artifact.from_bytes(b"NOTMODEL" + blob[8:])


def test_unknown_version_rejected():
    blob = artifact.to_bytes(fitted("linreg")[0])
    old = blob[:8] + struct.pack("<I", 0) + blob[12:]
    with pytest.raises(artifact.VersionError):
        artifact.from_bytes(old)


payload_values = st.recursive(
    st.none() | st.booleans() | st.integers(-2**53, 2**53) | st.text(max_size=5)
    | st.floats(allow_nan=False),
    lambda inner: st.lists(inner, max_size=3) | st.dictionaries(st.text(max_size=3), inner, max_size=3),
    max_leaves=10,
)


@given(payload_values, st.lists(st.floats(allow_nan=False), max_size=6))
def test_payload_roundtrip(value, arr):
    obj = {"v": value, "a": np.array(arr, dtype=float), "m": np.arange(6.0).reshape(2, 3)}
    back = artifact.unpack_payload(artifact.pack_payload(obj))
    assert back["v"] == value
    np.testing.assert_array_equal(back["a"], obj["a"])
    np.testing.assert_array_equal(back["m"], obj["m"])
