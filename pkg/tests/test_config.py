import json

import pytest

from bandsup import BandWindow, PowerSpectrum
from bandsup.config import ConfigError, ExperimentConfig


def test_default_matches_dataclass_defaults():
    shipped = ExperimentConfig.default()
    assert shipped.to_dict() == ExperimentConfig().to_dict()
    assert shipped.monte_carlo.master_seed == 20240601
    assert shipped.window.kind == "smooth-bump"


def test_roundtrip_json(tmp_path):
    cfg = ExperimentConfig().with_overrides(["spectrum.alpha=3.0", "scales.j=[4,5]",
                                             "window.params.amplitude=2"])
    back = ExperimentConfig.from_json(cfg.to_json())
    assert back == cfg
    p = tmp_path / "c.json"
    p.write_text(cfg.to_json())
    assert ExperimentConfig.load(p) == cfg
    assert ExperimentConfig.from_dict(cfg.to_dict()).digest() == cfg.digest()


def test_digest_tracks_content():
    a = ExperimentConfig()
    assert a.digest() == ExperimentConfig().digest()
    assert len(a.digest()) == 64
    assert a.with_overrides(["monte_carlo.master_seed=1"]).digest() != a.digest()


def test_partial_document_fills_defaults():
    cfg = ExperimentConfig.from_dict({"spectrum": {"alpha": 3}})
    assert cfg.spectrum.alpha == 3.0 and isinstance(cfg.spectrum.alpha, float)
    assert cfg.scales.j == [4, 5, 6, 7]


def test_unknown_key_named_by_path():
    with pytest.raises(ConfigError, match=r"spectrum\.beta"):
        ExperimentConfig.from_dict({"spectrum": {"beta": 1}})
    with pytest.raises(ConfigError, match="colour"):
        ExperimentConfig.from_dict({"colour": {}})


def test_type_errors_named_by_path():
    with pytest.raises(ConfigError, match=r"monte_carlo\.replicates: expected an integer"):
        ExperimentConfig.from_dict({"monte_carlo": {"replicates": "many"}})
    with pytest.raises(ConfigError, match=r"scales\.j\[1\]"):
        ExperimentConfig.from_dict({"scales": {"j": [4, "x"]}})
    with pytest.raises(ConfigError, match=r"synth\.full_field: expected true or false"):
        ExperimentConfig.from_dict({"synth": {"full_field": 1}})
    with pytest.raises(ConfigError, match="expected an object"):
        ExperimentConfig.from_dict({"spectrum": 3})


def test_integral_float_accepted_for_int():
    assert ExperimentConfig.from_dict({"berman": {"n": 1e6}}).berman.n == 1000000


def test_json_syntax_error_has_location():
    with pytest.raises(ConfigError, match=r"cfg\.json: line 2, column \d+"):
        ExperimentConfig.from_json('{\n  "spectrum": ,\n}', "cfg.json")


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read config"):
        ExperimentConfig.load("/nonexistent/config.json")


def test_source_prefix_on_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"nets": {"delta_exponent": 1.5}}))
    with pytest.raises(ConfigError, match=r"bad\.json: nets\.delta_exponent"):
        ExperimentConfig.load(p)


@pytest.mark.parametrize("doc,where", [
    ({"window": {"kind": "gaussian"}}, "window.kind"),
    ({"output": {"formats": ["xml"]}}, "output.formats"),
    ({"scales": {"j": [0]}}, "scales.j"),
    ({"monte_carlo": {"replicates": 0}}, "monte_carlo.replicates"),
    ({"monte_carlo": {"workers": 0}}, "monte_carlo.workers"),
    ({"spectrum": {"alpha": 2.0}}, "spectrum"),
    ({"window": {"kind": "indicator", "params": {"lo": 0.1}}}, "window"),
])
def test_validation_errors(doc, where):
    with pytest.raises(ConfigError, match=where.replace(".", r"\.")):
        ExperimentConfig.from_dict(doc)


def test_overrides():
    cfg = ExperimentConfig().with_overrides(["thresholds.u=[4.0]", "output.directory=out/run",
                                             "window.kind=raised-cosine"])
    assert cfg.thresholds.u == [4.0]
    assert cfg.output.directory == "out/run"
    assert cfg.window.kind == "raised-cosine"
    # the original is untouched
    assert ExperimentConfig().thresholds.u == [3.5, 4.0, 4.5]


def test_override_errors():
    with pytest.raises(ConfigError, match="not of the form"):
        ExperimentConfig().with_overrides(["spectrum.alpha"])
    with pytest.raises(ConfigError, match="unknown key spectrum.gamma"):
        ExperimentConfig().with_overrides(["spectrum.gamma=1"])
    with pytest.raises(ConfigError, match="unknown key nope"):
        ExperimentConfig().with_overrides(["nope.x=1"])
    with pytest.raises(ConfigError, match="expected a number"):
        ExperimentConfig().with_overrides(["spectrum.alpha=fast"])


def test_window_params_are_free_form():
    cfg = ExperimentConfig().with_overrides(["window.kind=indicator", "window.params.lo=0.75",
                                             "window.params.hi=1.5"])
    assert cfg.band_window() == BandWindow("indicator", {"lo": 0.75, "hi": 1.5})


def test_domain_objects():
    cfg = ExperimentConfig().with_overrides(["spectrum.g_num=[1, 1]", "spectrum.g_den=[0, 1]"])
    spec = cfg.power_spectrum()
    assert isinstance(spec, PowerSpectrum) and spec.g_numerator == (1.0, 1.0)
    null = ExperimentConfig().with_overrides(["spectrum.g_num=[0]"]).power_spectrum()
    assert null == PowerSpectrum.null(2.5)
