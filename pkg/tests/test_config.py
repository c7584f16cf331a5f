import copy
import json
from importlib import resources

import numpy as np
import pytest

from riskshare.choquet import coherent_risk
from riskshare.config import ConfigError, initial_risks, load_config, parse_config
from riskshare.distribution import Empirical, Gamma


def bundled() -> dict:
    text = resources.files("riskshare").joinpath("data/paper_example.json").read_text("utf-8")
    return json.loads(text)


def test_bundled_config():
    cfg = parse_config(bundled())
    assert cfg.n_agents == 3
    assert isinstance(cfg.aggregate, Gamma)
    assert cfg.initial_type == "proportional"
    assert cfg.theta.sum() == pytest.approx(1.0, abs=1e-15)
    assert cfg.tie_rule == "equal"
    assert cfg.grid == 1001
    assert [len(s) for s in cfg.sets] == [2, 2, 2]
    assert initial_risks(cfg) is None


def test_truncation_override():
    cfg = parse_config(bundled(), truncation_mass=1e-6)
    assert cfg.truncation_mass == 1e-6
    assert cfg.aggregate.essential_bounds()[1] == pytest.approx(Gamma(2, 10, 1e-6).essential_bounds()[1])
    with pytest.raises(ConfigError):
        parse_config(bundled(), truncation_mass=0.6)


def test_theta_must_sum_to_one():
    doc = bundled()
    doc["agents"][0]["initial"]["theta"] = 0.5
    with pytest.raises(ConfigError) as info:
        parse_config(doc)
    assert "theta" in info.value.field


def test_theta_all_or_none():
    doc = bundled()
    del doc["agents"][1]["initial"]["theta"]
    with pytest.raises(ConfigError):
        parse_config(doc)
    for a in doc["agents"]:
        a["initial"].pop("theta", None)
    np.testing.assert_allclose(parse_config(doc).theta, 1 / 3)


def test_mixed_initial_types_rejected():
    doc = bundled()
    doc["agents"][2]["initial"] = {"type": "precomputed", "rho_x": 10.0}
    with pytest.raises(ConfigError, match="same initial"):
        parse_config(doc)


def test_precomputed_positions():
    doc = bundled()
    for a, r in zip(doc["agents"], (1.0, 2.0, 3.5)):
        a["initial"] = {"type": "precomputed", "rho_x": r}
    np.testing.assert_array_equal(initial_risks(parse_config(doc)), [1.0, 2.0, 3.5])


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(schema_version=2),
    lambda d: d.pop("schema_version"),
    lambda d: d.update(tie_rule="weights"),
    lambda d: d["output"].update(grid=1),
    lambda d: d["layers"].update(scan_grid=10),
    lambda d: d["solver"].update(gap_tol=-1),
    lambda d: d["agents"][0].update(distortions=[]),
    lambda d: d["agents"][0].update(distortions=[{"type": "es", "alpha": 2.0}]),
    lambda d: d["agents"][0]["initial"].update(type="bogus"),
    lambda d: d.update(aggregate={"type": "nope"}),
    lambda d: d.update(agents=[]),
])
def test_invalid_documents(mutate):
    doc = copy.deepcopy(bundled())
    mutate(doc)
    with pytest.raises(ConfigError):
        parse_config(doc)


def _empirical_doc(tmp_path, shift=0.0):
    rng = np.random.default_rng(1)
    cols = rng.gamma(2.0, 5.0, size=(50, 2))
    agg = cols.sum(axis=1) + shift
    (tmp_path / "agg.csv").write_text("".join(f"{float(v)!r}\n" for v in agg))
    (tmp_path / "cols.csv").write_text("a,b\n" + "".join(f"{float(x)!r},{float(y)!r}\n" for x, y in cols))
    doc = {
        "schema_version": 1,
        "aggregate": {"type": "empirical", "path": "agg.csv"},
        "agents": [
            {"distortions": [{"type": "es", "alpha": 0.1}],
             "initial": {"type": "empirical_column", "path": "cols.csv", "column": "a"}},
            {"distortions": [{"type": "wang", "shift": 0.5}],
             "initial": {"type": "empirical_column", "path": "cols.csv", "column": "b"}},
        ],
    }
    path = tmp_path / "market.json"
    path.write_text(json.dumps(doc))
    return path, cols


def test_empirical_columns(tmp_path):
    path, cols = _empirical_doc(tmp_path)
    cfg = load_config(path)
    rho = initial_risks(cfg)
    want = [coherent_risk(Empirical(cols[:, i]), s)[0] for i, s in enumerate(cfg.sets)]
    np.testing.assert_allclose(rho, want, rtol=1e-12)


def test_empirical_row_sums_checked(tmp_path):
    path, _ = _empirical_doc(tmp_path, shift=1e-3)
    with pytest.raises(ConfigError, match="row sums"):
        load_config(path)


def test_empirical_columns_need_empirical_aggregate(tmp_path):
    path, _ = _empirical_doc(tmp_path)
    doc = json.loads(path.read_text())
    doc["aggregate"] = {"type": "gamma", "shape": 2, "scale": 5}
    path.write_text(json.dumps(doc))
    with pytest.raises(ConfigError, match="empirical aggregate"):
        load_config(path)


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(bad)
