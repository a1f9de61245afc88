import numpy as np
import pytest
import torch

from cfadapter import data, resample, train
from cfadapter.models import (ConditionalGenerator, ConditionalVAE, Critic,
                              GanSpec, ParentCodec, VaeSpec)


@pytest.fixture(scope="module")
def ds(workspace):
    return data.load(workspace / "test.cfds")


def test_cfds_reader(ds):
    assert ds.shape == (28, 28, 3)
    assert len(ds) == 2000
    assert [p.name for p in ds.parents] == ["digit", "hue"]
    assert ds.parents[0].kind == "discrete" and ds.parents[0].cardinality == 10
    assert ds.parents[1].kind == "continuous"
    assert 0.0 <= ds.pixels.min() and ds.pixels.max() <= 1.0
    assert ds.values[:, 0].max() <= 9


def test_cfds_reader_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.cfds"
    bad.write_bytes(b"NOPE!\n" + b"\x00" * 30)
    with pytest.raises(ValueError, match="CFDS1"):
        data.load(bad)


def test_parent_codec(ds):
    codec = ParentCodec(ds.parents)
    assert codec.dim == 10 + 3
    vec = codec.encode(np.array([[3, 0.25]]))
    assert vec.shape == (1, 13)
    assert vec[0, 3] == 1.0 and vec[0].sum() == pytest.approx(
        1.0 + 0.25 + np.sin(np.pi / 2) + np.cos(np.pi / 2), abs=1e-6)


def test_resample_breaks_dependence(workspace):
    ds = data.load(workspace / "train.cfds")
    rng = np.random.default_rng(0)
    idx = resample.resample_indices(ds, 4000, rng)
    assert idx.min() >= 0 and idx.max() < len(ds)
    hue_bins = np.clip((ds.values[idx, 1] * 5).astype(int), 0, 4)
    digits = ds.values[idx, 0].astype(int)
    table = np.zeros((10, 5))
    np.add.at(table, (digits, hue_bins), 1)
    expected = table.sum(1, keepdims=True) @ table.sum(0, keepdims=True) / table.sum()
    chi2 = ((table - expected) ** 2 / np.maximum(expected, 1e-9)).sum()
    assert chi2 < 36 * 2.5  # far from a dependent table's blow-up


def test_vae_shapes_and_seeded_determinism(ds):
    codec = ParentCodec(ds.parents)
    torch.manual_seed(0)
    model = ConditionalVAE(ds.shape, codec.dim, VaeSpec(width=16, dense=64))
    model.eval()
    x = train._to_torch_pixels(ds.pixels[:4])
    cond = codec.encode(ds.values[:4])
    out1 = model.counterfactual(x, cond, cond, seed=7)
    out2 = model.counterfactual(x, cond, cond, seed=7)
    other = model.counterfactual(x, cond, cond, seed=8)
    assert out1.shape == (4, 3, 28, 28)
    assert torch.equal(out1, out2)
    assert not torch.equal(out1, other)
    assert float(out1.min()) >= 0.0 and float(out1.max()) <= 1.0


def test_vae_elbo_improves_on_tiny_run(workspace, tmp_path):
    result = train.train_vae(workspace / "test.cfds", VaeSpec(width=16, dense=64),
                             steps=120, seed=0, out_path=tmp_path / "v.pt",
                             batch_size=64, log_every=0)
    assert result["elbo_end"] > result["elbo_start"]
    model, parents, shape = train.load_artifact(tmp_path / "v.pt")
    assert shape == (28, 28, 3)
    assert [p.name for p in parents] == ["digit", "hue"]


def test_vae_memorizes_single_image(ds, tmp_path):
    # degenerate 1-image dataset: reconstruction approaches the input
    one = data.Dataset(ds.parents, ds.values[:1].repeat(64, 0),
                       ds.pixels[:1].repeat(64, 0))
    path = tmp_path / "one.cfds"
    _write_cfds(one, path)
    result = train.train_vae(path, VaeSpec(width=16, dense=64, latent=8),
                             steps=250, seed=1, out_path=tmp_path / "m.pt",
                             batch_size=32, log_every=0)
    model, _, _ = train.load_artifact(tmp_path / "m.pt")
    l1 = train.null_intervention_l1(model, one, n=8, seed=0)
    assert l1 < 3.0, l1


def test_vae_same_seed_same_history(workspace, tmp_path):
    kw = dict(steps=40, seed=3, batch_size=32, log_every=0)
    a = train.train_vae(workspace / "test.cfds", VaeSpec(width=16, dense=64),
                        out_path=tmp_path / "a.pt", **kw)
    b = train.train_vae(workspace / "test.cfds", VaeSpec(width=16, dense=64),
                        out_path=tmp_path / "b.pt", **kw)
    assert a["history"] == b["history"]


def test_gan_one_step_output_valid(ds, tmp_path, workspace):
    history = train.train_gan(workspace / "test.cfds",
                              GanSpec(width=16, dense=64, composition_weight=1.0),
                              steps=1, seed=0, out_path=tmp_path / "g.pt",
                              batch_size=32, log_every=0)
    assert len(history["d"]) == 1
    model, _, shape = train.load_artifact(tmp_path / "g.pt")
    codec = ParentCodec(ds.parents)
    x = train._to_torch_pixels(ds.pixels[:3])
    cond = codec.encode(ds.values[:3])
    out = model.counterfactual(x, cond, cond, seed=0)
    assert out.shape == (3, 3, 28, 28)
    assert float(out.min()) >= 0.0 and float(out.max()) <= 1.0


def test_spec_validation():
    with pytest.raises(ValueError):
        VaeSpec(beta=0.0)
    with pytest.raises(ValueError):
        VaeSpec(latent=0)
    with pytest.raises(ValueError):
        VaeSpec(likelihood="poisson")
    with pytest.raises(ValueError):
        GanSpec(composition_weight=-1.0)


def _write_cfds(ds: data.Dataset, path) -> None:
    """Writer for test fixtures (the adapter itself only reads)."""
    import struct
    n = len(ds)
    h, w, c = ds.shape
    with open(path, "wb") as f:
        f.write(b"CFDS1\n")
        f.write(struct.pack("<IIIII", 1, n, h, w, c))
        f.write(struct.pack("<H", len(ds.parents)))
        for p in ds.parents:
            name = p.name.encode()
            if p.kind == "discrete":
                f.write(struct.pack("<BH", 0, len(name)) + name)
                f.write(struct.pack("<I", p.cardinality))
            else:
                f.write(struct.pack("<BH", 1, len(name)) + name)
                f.write(struct.pack("<dd", p.lower, p.upper))
        f.write(ds.values.astype("<f8").tobytes())
        f.write(ds.pixels.astype("<f4").tobytes())
        f.write(struct.pack("<B", 0))
