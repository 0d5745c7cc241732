import json

import numpy as np
import pytest

from cltlab import distributions as dist
from cltlab.specfile import SpecFileError, load_spec


def test_product_spec_from_string():
    spec = load_spec('{"id": "r2", "family": "product_1d", "marginal": "rademacher", "copies": 2, "standardize": true}')
    assert spec.dim == 2
    np.testing.assert_allclose(dist.covariance(spec), np.eye(2), atol=1e-12)


def test_two_point_marginal_object():
    spec = load_spec({"family": "product_1d", "marginal": {"name": "two_point", "a": 1.0, "b": 0.0, "w": 0.2},
                      "standardize": True})
    assert float(dist.moment_tensor(spec, 3).ravel()[0]) == pytest.approx(1.5, rel=1e-12)


def test_shipped_spec_files(tmp_path):
    from pathlib import Path
    for f in sorted((Path(__file__).parent.parent / "configs" / "specs").glob("*.json")):
        spec = load_spec(str(f))
        np.testing.assert_allclose(dist.covariance(spec), np.eye(spec.dim), atol=1e-9)


def test_missing_field_reports_path_and_line(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text('{\n  "id": "x",\n  "family": "discrete",\n  "weights": [1.0]\n}\n')
    with pytest.raises(SpecFileError) as err:
        load_spec(str(f))
    assert err.value.field == "$.atoms"
    assert str(f) in str(err.value)


def test_wrong_type_line_number(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text('{\n  "family": "product_1d",\n  "marginal": "rademacher",\n  "copies": "two"\n}\n')
    with pytest.raises(SpecFileError) as err:
        load_spec(str(f))
    assert err.value.field == "$.copies"
    assert err.value.line == 4


def test_bad_weights_surface_family():
    with pytest.raises(SpecFileError, match="discrete"):
        load_spec({"family": "discrete", "atoms": [0.0, 1.0], "weights": [0.5, 0.7]})


def test_malformed_json():
    with pytest.raises(SpecFileError) as err:
        load_spec('{"family": ')
    assert err.value.line == 1


def test_missing_file():
    with pytest.raises(SpecFileError, match="cannot read"):
        load_spec("/nonexistent/spec.json")


def test_dim_mismatch():
    with pytest.raises(SpecFileError) as err:
        load_spec(json.dumps({"family": "point_mass", "location": [0.0, 0.0], "dim": 3}))
    assert err.value.field == "$.dim"
