import json

import numpy as np
import pytest

from cilc import two_sample
from cilc.config import PROFILE_WEIGHTS, default_document, load_document, resolve, subset
from cilc.errors import ConfigError
from cilc.twipr import reference_maneuver


def doc(**kw):
    base = {"schema_version": 1}
    base.update(kw)
    return base


def test_defaults_resolve():
    scn = resolve(default_document("appendix-a"))
    assert scn.trials == 30 and scn.names == ["agent 1", "agent 2"]
    np.testing.assert_array_equal(scn.plant.P, two_sample.P)
    np.testing.assert_array_equal(scn.r, two_sample.R_MINUS_D)
    assert scn.truth is None and scn.collectives == [["agent 1", "agent 2"]]


def test_twipr_default():
    scn = resolve(default_document("twipr"))
    assert scn.names == ["C", "B", "G"]
    assert len(scn.truth) == 3 and all(t.params.inertia_scale == pytest.approx(1.4) for t in scn.truth)
    np.testing.assert_array_equal(scn.r, reference_maneuver(100))
    assert scn.laws[0].name == "C"
    laws, truths = subset(scn, ["G", "C"])
    assert [law.id for law in laws] == [1, 2]
    np.testing.assert_array_equal(laws[0].L, scn.laws[2].L)
    assert truths[0] is scn.truth[2]


def test_profiles():
    assert set(PROFILE_WEIGHTS) == {"conservative", "balanced", "greedy"}
    assert PROFILE_WEIGHTS["conservative"][0] > PROFILE_WEIGHTS["balanced"][0] > PROFILE_WEIGHTS["greedy"][0]


def test_explicit_plant_and_laws():
    scn = resolve(doc(plant={"source": "explicit", "P": [[1, 0], [0.5, 2]], "d": [0.1, 0]},
                      agents=[{"law": "explicit", "Q": [[1, 0], [0, 1]], "L": [[0.5, 0], [0, 0.2]]},
                              {"law": "deadbeat", "name": "db"}, {"s": 1.0, "r": 0.0}],
                      reference={"values": [1, 2]}))
    assert scn.names == ["agent 1", "db", "agent 3"]
    np.testing.assert_allclose(scn.laws[1].L @ scn.plant.P, np.eye(2), atol=1e-15)
    np.testing.assert_array_equal(scn.r, [1, 2])


def test_per_agent_truth_scale():
    scn = resolve(doc(plant={"source": "twipr", "truth_inertia_scale": 1.0},
                      agents=[{"s": 5, "r": 0.1, "truth_inertia_scale": 1.05}, {"s": 1, "r": 0}]))
    assert scn.truth[0].params.inertia_scale == pytest.approx(1.05)
    assert scn.truth[1].params.inertia_scale == pytest.approx(1.0)


@pytest.mark.parametrize("bad, field", [
    (doc(extra=1), "extra"),
    ({"trials": 3}, "schema_version"),
    (doc(schema_version=2), "schema_version"),
    (doc(trials=0), "trials"),
    (doc(trials="5"), "trials"),
    (doc(seed=1.5), "seed"),
    (doc(plant={"source": "mars"}), "plant.source"),
    (doc(plant={"source": "explicit"}), "plant.P"),
    (doc(plant={"source": "explicit", "P": [[0, 0], [0, 0]]}, agents=[{"law": "deadbeat"}],
         reference={"values": [1, 1]}), "plant.P"),
    (doc(plant={"source": "explicit", "P": [[1]]}), "agents"),
    (doc(plant={"source": "explicit", "P": [[1]]}, agents=[{"law": "deadbeat"}]), "reference"),
    (doc(plant={"source": "twipr", "params": {"body_mass": -1}}, agents=[{"s": 1, "r": 0}]),
     "plant.params.body_mass"),
    (doc(plant={"source": "twipr", "poles": [1.2, 0.5, 0.5, 0.5]}, agents=[{"s": 1, "r": 0}]),
     "plant.poles"),
    (doc(agents=[{"law": "magic"}]), "agents[0].law"),
    (doc(agents=[{"profile": "reckless"}]), "agents[0].profile"),
    (doc(agents=[{"s": 1}]), "agents[0]"),
    (doc(agents=[{"s": -1, "r": 0}]), "agents[0]"),
    (doc(agents=[{"law": "explicit", "Q": [[1]], "L": [[1]]}]), "agents[0]"),
    (doc(agents=[{"name": "a", "s": 1, "r": 0}, {"name": "a", "s": 1, "r": 0}]), "agents"),
    (doc(agents=[{"s": 1, "r": 0, "truth_inertia_scale": 1.1}]), "agents"),
    (doc(collectives=[["nobody"]]), "collectives[0]"),
    (doc(reference={"values": [1, 2, 3]}), "reference"),
    (doc(grid_spacing=0), "grid_spacing"),
])
def test_config_errors_name_the_field(bad, field):
    with pytest.raises(ConfigError) as info:
        resolve(bad)
    assert info.value.field == field
    assert str(info.value).startswith(field + ": ")


def test_load_document_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_document(tmp_path / "missing.json")
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_document(p)
    p.write_text("[]")
    with pytest.raises(ConfigError, match="object"):
        load_document(p)
    p.write_text(json.dumps(doc(trials=4)))
    assert load_document(p)["trials"] == 4


def test_shipped_configs_resolve():
    import pathlib
    root = pathlib.Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.json"))
    assert files
    for f in files:
        resolve(load_document(f))
