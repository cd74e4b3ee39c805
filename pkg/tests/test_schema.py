import json
import math

import pytest

from lib.errors import InstanceValidationError, StructuralError
from lib.model import (
    ConstraintMode,
    DiversityConstraint,
    ScreeningPolicy,
    SolveResult,
    SolveStatus,
    ThresholdPolicy,
)
from lib.schema import (
    SchemaManager,
    decode_extended,
    dumps,
    encode_extended,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    policy_from_dict,
    policy_to_dict,
    result_to_dict,
)


def test_instance_document_round_trip(stylized, tmp_path):
    """An instance written to JSON reads back equal"""
    instance = stylized.with_constraints([DiversityConstraint(0, 250.0, ConstraintMode.EXACTLY)])
    path = tmp_path / "instance.json"
    path.write_text(dumps(instance_to_dict(instance)))
    assert load_instance(str(path)) == instance


def test_unknown_fields_rejected(stylized):
    document = instance_to_dict(stylized)
    document["applicants"][0]["colour"] = "blue"
    with pytest.raises(InstanceValidationError) as info:
        instance_from_dict(document)
    assert info.value.violations


@pytest.mark.parametrize("field", ["budget", "utility", "constraints"])
def test_missing_field_rejected(stylized, field):
    document = instance_to_dict(stylized)
    del document[field]
    assert SchemaManager().errors("instance", document)
    with pytest.raises(InstanceValidationError):
        instance_from_dict(document)


def test_extended_reals():
    assert encode_extended(math.inf) == "+inf"
    assert encode_extended(-math.inf) == "-inf"
    assert encode_extended(1.5) == 1.5
    assert decode_extended("+inf") == math.inf
    assert decode_extended("-inf") == -math.inf
    assert decode_extended(2) == 2.0
    with pytest.raises(StructuralError):
        decode_extended("inf")


def test_policy_document():
    screening = ScreeningPolicy((1.0, 0.0))
    policy = ThresholdPolicy((0.5, math.inf), (0.25, 0.0))
    document = policy_to_dict(screening, policy)
    assert document["thresholds"] == [0.5, "+inf"]
    assert policy_from_dict(json.loads(json.dumps(document))) == (screening, policy)


def test_policy_from_result_document():
    """Result documents can stand in for policy documents"""
    result = SolveResult(
        screening=ScreeningPolicy((0.5,)),
        allocation=ThresholdPolicy((-math.inf,), (0.0,)),
        expected_utility=1.0 / 3.0,
        expected_cost=2.0,
        group_utilities=(1.0 / 3.0,),
        status=SolveStatus.OPTIMAL,
        lp_solves=3,
        lambda_target=0.0,
    )
    document = json.loads(dumps(result_to_dict(result, {"mode": "screen"})))
    assert document["expected_utility"] == 0.333333
    assert document["lambda"] == 0.0
    assert document["mode"] == "screen"
    assert policy_from_dict(document) == (result.screening, result.allocation)


def test_policy_schema_rejects_bad_probabilities():
    with pytest.raises(InstanceValidationError):
        policy_from_dict({"screening": [1.5], "thresholds": [0.0], "boundary_probs": [0.0]})


def test_dumps_is_deterministic(stylized):
    text = dumps(instance_to_dict(stylized))
    assert text.endswith("\n")
    assert text == dumps(instance_to_dict(stylized))
    with pytest.raises(ValueError):
        dumps({"value": math.nan})
