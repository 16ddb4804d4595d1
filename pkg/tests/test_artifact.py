import numpy as np

from lisa import gplm, spectral
from lisa.artifact import ModelBundle, load_model, save_model


def test_roundtrip_bit_identical(tmp_path, lorenz_models):
    enc, dec, train, test = lorenz_models
    bundle = ModelBundle(enc, dec, {"idx": np.arange(5)}, {"seed": 3, "note": "x"})
    path = save_model(tmp_path / "m" / "model.npz", bundle)
    back = load_model(path)
    assert back.provenance == {"seed": 3, "note": "x"}
    assert np.array_equal(back.extras["idx"], np.arange(5))
    assert back.encoder.kernel == enc.kernel and back.decoder.kernel == dec.kernel
    W = np.stack([test[i:i + 20] for i in range(0, 200, 7)])
    z0 = spectral.encode_batch(enc, W)
    z1 = spectral.encode_batch(back.encoder, W)
    assert np.array_equal(z0, z1)
    m0, v0 = gplm.predict_batch(dec, z0)
    m1, v1 = gplm.predict_batch(back.decoder, z1)
    assert np.array_equal(m0, m1) and np.array_equal(v0, v1)


def test_saving_twice_gives_identical_bytes(tmp_path, lorenz_models):
    enc, dec, _, _ = lorenz_models
    a = save_model(tmp_path / "a.npz", ModelBundle(enc, dec))
    b = save_model(tmp_path / "b.npz", ModelBundle(load_model(a).encoder, load_model(a).decoder))
    za, zb = np.load(a), np.load(b)
    assert za.files == zb.files
    assert all(np.array_equal(za[k], zb[k]) for k in za.files)
