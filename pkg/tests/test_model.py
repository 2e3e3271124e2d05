from __future__ import annotations

import json

import pytest

from qksched.errors import DanglingRefError, InvariantError, ParseError
from qksched.model import default_config, validate_config


def test_default_bundle_counts(model):
    assert len(model.classes) == 5
    assert len(model.nodes) == 16
    assert len(model.links) == 28
    assert len(model.domains) == 3


def test_default_compliance_fields(model):
    for cid in ("M1", "M4"):
        cls = model.class_by_id(cid)
        assert cls.forbid_s3
        assert cls.min_tag_bits >= 64


def test_negative_lambda_rejected():
    cfg = default_config()
    cfg["classes"][0]["lambda_base"] = -1
    with pytest.raises(InvariantError) as err:
        validate_config(cfg)
    assert "lambda_base" in str(err.value)


def test_m4_allowing_s3_rejected_in_strict_mode():
    cfg = default_config()
    m4 = next(c for c in cfg["classes"] if c["id"] == "M4")
    m4["forbid_s3"] = False
    with pytest.raises(InvariantError) as err:
        validate_config(cfg)
    assert "forbid_s3" in str(err.value)

    # permissive mode allows research configs
    cfg["sim"]["strict_compliance"] = False
    validate_config(cfg)


def test_parse_error_on_malformed_document():
    with pytest.raises(ParseError):
        validate_config("{not json")
    with pytest.raises(ParseError):
        validate_config(json.dumps([1, 2, 3]))


def test_unknown_keys_rejected():
    cfg = default_config()
    cfg["classes"][0]["surprise"] = 1
    with pytest.raises(InvariantError) as err:
        validate_config(cfg)
    assert "surprise" in str(err.value)

    cfg = default_config()
    cfg["queue"]["typo_field"] = 2
    with pytest.raises(InvariantError):
        validate_config(cfg)


def test_dangling_refs_rejected():
    cfg = default_config()
    cfg["nodes"][3]["domain"] = "nowhere"
    with pytest.raises(DanglingRefError):
        validate_config(cfg)

    cfg = default_config()
    cfg["links"][0]["v"] = "n99"
    with pytest.raises(DanglingRefError):
        validate_config(cfg)


def test_validation_idempotent(model):
    again = validate_config(model.serialize())
    assert again == model
    assert again.config_hash == model.config_hash
    assert validate_config(again.serialize()) == again


def test_grid_box_checks():
    cfg = default_config()
    cfg["crypto"]["a_grid"] = [0.0, 300.0]
    with pytest.raises(InvariantError):
        validate_config(cfg)
    cfg = default_config()
    cfg["crypto"]["impl_epsilon"] = 1.0
    with pytest.raises(InvariantError):
        validate_config(cfg)


def test_traffic_share_normalized(model):
    total = sum(model.traffic_share(n.id) for n in model.nodes)
    assert abs(total - 1.0) < 1e-12
