import numpy as np
import pytest

from macsvm.data import ParseError, gen_spirals
from macsvm.features import RbfCenters, RbfMapParams
from macsvm.model_io import FORMAT_VERSION, ModelFile, load_model, save_model
from macsvm.svm import BinarySvm, OvaSvm
from macsvm.training import TrainConfig, TrainedModel, collapse, train_mac


def random_model(rng, K=3, L=2, M=5, D=4, linear=False):
    if linear:
        centers = None
        M = D
    else:
        centers = RbfCenters(rng.standard_normal((M, D)), sigma=abs(rng.normal()) + 0.5)
    W = rng.standard_normal((L, M))
    machines = [BinarySvm(w=rng.standard_normal(L), b=float(rng.normal()),
                          C=float(abs(rng.normal()) + 1.0)) for _ in range(K)]
    model = TrainedModel(map=RbfMapParams(centers=centers, W=W, lam=1e-3),
                         svms=OvaSvm(machines=machines, class_count=K),
                         collapsed=(None, None),
                         metadata={"stop_reason": "stages_exhausted", "seed": 7})
    model.collapsed = collapse(model)
    return model


def assert_models_equal(a, b):
    assert np.array_equal(a.map.W, b.map.W)
    assert a.map.lam == b.map.lam
    if a.map.centers is None:
        assert b.map.centers is None
    else:
        assert np.array_equal(a.map.centers.C, b.map.centers.C)
        assert a.map.centers.sigma == b.map.centers.sigma
    assert a.svms.class_count == b.svms.class_count
    for ma, mb in zip(a.svms.machines, b.svms.machines):
        assert np.array_equal(ma.w, mb.w)
        assert ma.b == mb.b and ma.C == mb.C
    assert np.array_equal(a.collapsed[0], b.collapsed[0])
    assert np.array_equal(a.collapsed[1], b.collapsed[1])
    assert a.metadata == b.metadata


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    mf = ModelFile(model=random_model(rng), labels=["a", "b", "c"],
                   config={"C": 10.0, "sigma": 0.3, "seed": 0})
    p = tmp_path / "m.model"
    save_model(mf, str(p))
    back = load_model(str(p))
    assert_models_equal(mf.model, back.model)
    assert back.labels == ["a", "b", "c"]
    assert back.config == {"C": 10.0, "sigma": 0.3, "seed": 0}
    assert back.standardize_mean is None


def test_round_trip_is_idempotent_on_disk(tmp_path):
    rng = np.random.default_rng(1)
    mf = ModelFile(model=random_model(rng, K=2, L=3, M=7, D=2),
                   labels=["neg", "pos"], config={"lam": 1e-4})
    p1, p2 = tmp_path / "a.model", tmp_path / "b.model"
    save_model(mf, str(p1))
    save_model(load_model(str(p1)), str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_awkward_floats_survive(tmp_path):
    rng = np.random.default_rng(2)
    model = random_model(rng)
    # values hex notation must carry exactly
    model.map.W[0, 0] = 0.1
    model.map.W[0, 1] = -0.0
    model.map.W[1, 0] = 5e-324               # smallest subnormal
    model.svms.machines[0].b = 1.0 + 2 ** -52
    model.collapsed = collapse(model)
    mf = ModelFile(model=model, labels=["0", "1", "2"], config={})
    p = tmp_path / "m.model"
    save_model(mf, str(p))
    back = load_model(str(p))
    assert back.model.map.W[0, 0] == 0.1
    assert np.signbit(back.model.map.W[0, 1])
    assert back.model.map.W[1, 0] == 5e-324
    assert back.model.svms.machines[0].b == 1.0 + 2 ** -52


def test_config_floats_lossless(tmp_path):
    rng = np.random.default_rng(3)
    cfg = {"C": 1.0 / 3.0, "sigma": "auto", "steps": 12, "nested": {"x": 0.2}}
    mf = ModelFile(model=random_model(rng), labels=["a", "b", "c"], config=cfg)
    p = tmp_path / "m.model"
    save_model(mf, str(p))
    back = load_model(str(p))
    assert back.config["C"] == 1.0 / 3.0
    assert back.config["sigma"] == "auto"
    assert back.config["steps"] == 12
    assert back.config["nested"]["x"] == 0.2


def test_no_decimal_float_text(tmp_path):
    rng = np.random.default_rng(4)
    mf = ModelFile(model=random_model(rng), labels=["a", "b", "c"],
                   config={"C": 10.0})
    p = tmp_path / "m.model"
    save_model(mf, str(p))
    body = p.read_text()
    for line in body.splitlines():
        key = line.split(" ", 1)[0]
        if key in ("center", "map_row", "svm_w", "collapsed_row", "collapsed_b",
                   "svm", "lam", "sigma"):
            rest = line.split(" ", 1)[1]
            for tok in rest.split():
                if tok in ("C", "b") or tok.isdigit():
                    continue
                assert tok.startswith(("0x", "-0x", "inf", "-inf", "nan")), line


def test_standardizer_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    mf = ModelFile(model=random_model(rng), labels=["a", "b", "c"], config={},
                   standardize_mean=rng.standard_normal(4),
                   standardize_scale=np.abs(rng.standard_normal(4)) + 0.1)
    p = tmp_path / "m.model"
    save_model(mf, str(p))
    back = load_model(str(p))
    assert np.array_equal(back.standardize_mean, mf.standardize_mean)
    assert np.array_equal(back.standardize_scale, mf.standardize_scale)


def test_linear_mode_file_has_no_centers(tmp_path):
    rng = np.random.default_rng(6)
    mf = ModelFile(model=random_model(rng, linear=True), labels=["a", "b", "c"],
                   config={})
    p = tmp_path / "m.model"
    save_model(mf, str(p))
    body = p.read_text()
    assert "center " not in body
    assert "sigma " not in body
    back = load_model(str(p))
    assert back.model.map.centers is None
    assert_models_equal(mf.model, back.model)


def test_trained_model_round_trip_predicts_identically(tmp_path):
    ds = gen_spirals(2, 80, seed=0)
    cfg = TrainConfig(latent_dim=2, basis_count=20, sigma=0.3, mu_max_stages=2,
                      inner_max_iters=5, seed=0)
    model, _ = train_mac(cfg, ds)
    mf = ModelFile(model=model, labels=["0", "1"], config={"seed": 0})
    p = tmp_path / "m.model"
    save_model(mf, str(p))
    back = load_model(str(p))
    from macsvm.training import predict_collapsed
    assert np.array_equal(predict_collapsed(model, ds.X),
                          predict_collapsed(back.model, ds.X))


def test_version_mismatch_rejected(tmp_path):
    rng = np.random.default_rng(7)
    mf = ModelFile(model=random_model(rng), labels=["a", "b", "c"], config={})
    p = tmp_path / "m.model"
    save_model(mf, str(p))
    lines = p.read_text().splitlines()
    assert lines[0] == f"format_version {FORMAT_VERSION}"
    lines[0] = f"format_version {FORMAT_VERSION + 1}"
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(ParseError, match="version"):
        load_model(str(p))


def test_truncated_file_rejected(tmp_path):
    rng = np.random.default_rng(8)
    mf = ModelFile(model=random_model(rng), labels=["a", "b", "c"], config={})
    p = tmp_path / "m.model"
    save_model(mf, str(p))
    lines = p.read_text().splitlines()
    p.write_text("\n".join(lines[: len(lines) // 2]) + "\n")
    with pytest.raises(ParseError):
        load_model(str(p))


def test_corrupted_hex_rejected(tmp_path):
    rng = np.random.default_rng(9)
    mf = ModelFile(model=random_model(rng), labels=["a", "b", "c"], config={})
    p = tmp_path / "m.model"
    save_model(mf, str(p))
    body = p.read_text().splitlines()
    for i, line in enumerate(body):
        if line.startswith("map_row "):
            parts = line.split()
            parts[1] = "0xgarbage"
            body[i] = " ".join(parts)
            break
    p.write_text("\n".join(body) + "\n")
    with pytest.raises(ParseError):
        load_model(str(p))


def test_wrong_record_name_reports_line(tmp_path):
    rng = np.random.default_rng(10)
    mf = ModelFile(model=random_model(rng), labels=["a", "b", "c"], config={})
    p = tmp_path / "m.model"
    save_model(mf, str(p))
    body = p.read_text().splitlines()
    idx = next(i for i, l in enumerate(body) if l.startswith("svm 0"))
    body[idx] = body[idx].replace("svm 0", "machine 0", 1)
    p.write_text("\n".join(body) + "\n")
    with pytest.raises(ParseError, match=str(idx + 1)):
        load_model(str(p))


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        load_model(str(tmp_path / "nope.model"))
