import json
import math
import logging
from typing import Any, Dict, List, Optional, Union

from jsonschema import Draft202012Validator

from lib.errors import InstanceValidationError, StructuralError
from lib.model import (
    Applicant,
    DiscreteDistribution,
    DiversityConstraint,
    ProblemInstance,
    ScreeningPolicy,
    SolveResult,
    ThresholdPolicy,
    UtilitySpec,
)

logger = logging.getLogger(__name__)

CURRENCY_DECIMALS = 6

_NUMBER = {"type": "number"}
_EXTENDED_REAL = {"oneOf": [{"type": "number"}, {"enum": ["-inf", "+inf"]}]}

INSTANCE_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ProblemInstance",
    "type": "object",
    "additionalProperties": False,
    "required": ["budget", "num_groups", "utility", "applicants", "constraints"],
    "properties": {
        "budget": _NUMBER,
        "num_groups": {"type": "integer"},
        "utility": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["repay_value", "default_value"],
                    "properties": {"repay_value": _NUMBER, "default_value": _NUMBER},
                },
            ]
        },
        "applicants": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "group", "mu", "screen_cost", "alloc_cost", "posterior"],
                "properties": {
                    "id": {"type": "integer"},
                    "group": {"type": "integer"},
                    "mu": _NUMBER,
                    "screen_cost": _NUMBER,
                    "alloc_cost": _NUMBER,
                    "posterior": {
                        "oneOf": [
                            {"type": "null"},
                            {
                                "type": "object",
                                "additionalProperties": False,
                                "required": ["support", "probs"],
                                "properties": {
                                    "support": {"type": "array", "items": _NUMBER},
                                    "probs": {"type": "array", "items": _NUMBER},
                                },
                            },
                        ]
                    },
                },
            },
        },
        "constraints": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["group", "target"],
                "properties": {
                    "group": {"type": "integer"},
                    "target": _NUMBER,
                    "mode": {"enum": ["at_least", "exactly"]},
                },
            },
        },
    },
}

POLICY_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "PolicyPair",
    "type": "object",
    "additionalProperties": False,
    "required": ["screening", "thresholds", "boundary_probs"],
    "properties": {
        "screening": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "thresholds": {"type": "array", "items": _EXTENDED_REAL},
        "boundary_probs": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
    },
}

RESULT_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "SolveResult",
    "type": "object",
    "required": ["status", "screening", "thresholds", "boundary_probs",
                 "expected_utility", "expected_cost", "group_utilities"],
    "properties": {
        "status": {"enum": ["optimal", "infeasible"]},
        "screening": POLICY_SCHEMA["properties"]["screening"],
        "thresholds": POLICY_SCHEMA["properties"]["thresholds"],
        "boundary_probs": POLICY_SCHEMA["properties"]["boundary_probs"],
        "expected_utility": _NUMBER,
        "expected_cost": _NUMBER,
        "group_utilities": {"type": "array", "items": _NUMBER},
    },
}


class SchemaManager:
    """Validates JSON documents against the instance, policy and result schemas."""

    SCHEMAS = {
        "instance": INSTANCE_SCHEMA,
        "policy": POLICY_SCHEMA,
        "result": RESULT_SCHEMA,
    }

    def __init__(self):
        self._validators = {name: Draft202012Validator(schema) for name, schema in self.SCHEMAS.items()}

    def errors(self, kind: str, document: Any) -> List[str]:
        """List schema errors for a document.

        Args:
            kind: One of ``instance``, ``policy`` or ``result``
            document: Parsed JSON

        Returns:
            List[str]: Messages with a JSON path prefix, empty when valid
        """
        validator = self._validators[kind]
        messages = []
        for error in sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path)):
            path = "/".join(str(p) for p in error.absolute_path) or "<root>"
            messages.append(f"{path}: {error.message}")
        return messages

    def validate(self, kind: str, document: Any) -> None:
        """Raise InstanceValidationError when a document breaks its schema."""
        messages = self.errors(kind, document)
        if messages:
            logger.error(f"Failed to validate {kind} document: {len(messages)} schema errors")
            raise InstanceValidationError(f"{kind} document does not match schema", messages)


_schemas = SchemaManager()


def encode_extended(value: float) -> Union[float, str]:
    """Encode ±inf thresholds as the strings "-inf" / "+inf"."""
    if math.isinf(value):
        return "+inf" if value > 0 else "-inf"
    return float(value)


def decode_extended(value: Union[float, int, str]) -> float:
    if isinstance(value, str):
        if value == "+inf":
            return math.inf
        if value == "-inf":
            return -math.inf
        raise StructuralError(f"unknown threshold literal {value!r}")
    return float(value)


def round_currency(value: float) -> float:
    return round(float(value), CURRENCY_DECIMALS)


def instance_to_dict(instance: ProblemInstance) -> Dict[str, Any]:
    utility = None
    if instance.utility is not None:
        utility = {
            "repay_value": instance.utility.repay_value,
            "default_value": instance.utility.default_value,
        }
    applicants = []
    for a in instance.applicants:
        posterior = None
        if a.posterior is not None:
            posterior = {"support": list(a.posterior.support), "probs": list(a.posterior.probs)}
        applicants.append({
            "id": a.id,
            "group": a.group,
            "mu": a.mu,
            "screen_cost": a.screen_cost,
            "alloc_cost": a.alloc_cost,
            "posterior": posterior,
        })
    return {
        "budget": instance.budget,
        "num_groups": instance.num_groups,
        "utility": utility,
        "applicants": applicants,
        "constraints": [
            {"group": c.group, "target": c.target, "mode": c.mode.value} for c in instance.constraints
        ],
    }


def instance_from_dict(document: Dict[str, Any]) -> ProblemInstance:
    """Build an instance from parsed JSON after schema validation.

    Args:
        document: Parsed instance JSON

    Returns:
        ProblemInstance: The instance (invariants are not checked here)

    Raises:
        InstanceValidationError: If the document breaks the schema
    """
    _schemas.validate("instance", document)
    utility = document.get("utility")
    applicants = []
    for raw in document["applicants"]:
        posterior = raw["posterior"]
        applicants.append(Applicant(
            id=int(raw["id"]),
            group=int(raw["group"]),
            mu=float(raw["mu"]),
            posterior=None if posterior is None else DiscreteDistribution(posterior["support"], posterior["probs"]),
            screen_cost=float(raw["screen_cost"]),
            alloc_cost=float(raw["alloc_cost"]),
        ))
    return ProblemInstance(
        applicants=tuple(applicants),
        num_groups=int(document["num_groups"]),
        budget=float(document["budget"]),
        constraints=tuple(
            DiversityConstraint(int(c["group"]), float(c["target"]), c.get("mode", "at_least"))
            for c in document.get("constraints", [])
        ),
        utility=None if utility is None else UtilitySpec(float(utility["repay_value"]), float(utility["default_value"])),
    )


def policy_to_dict(screening: ScreeningPolicy, policy: ThresholdPolicy) -> Dict[str, Any]:
    return {
        "screening": [float(p) for p in screening.probs],
        "thresholds": [encode_extended(t) for t in policy.thresholds],
        "boundary_probs": [float(a) for a in policy.boundary_probs],
    }


def policy_from_dict(document: Dict[str, Any]) -> "tuple[ScreeningPolicy, ThresholdPolicy]":
    """Read a policy pair from a policy document or a SolveResult document.

    Args:
        document: Parsed JSON with ``screening``, ``thresholds`` and ``boundary_probs``

    Returns:
        tuple: (ScreeningPolicy, ThresholdPolicy)
    """
    kind = "result" if "status" in document else "policy"
    _schemas.validate(kind, document)
    screening = ScreeningPolicy(tuple(float(p) for p in document["screening"]))
    thresholds = tuple(decode_extended(t) for t in document["thresholds"])
    alphas = tuple(float(a) for a in document["boundary_probs"])
    if len(thresholds) != len(alphas):
        raise StructuralError(f"{len(thresholds)} thresholds but {len(alphas)} boundary probabilities")
    return screening, ThresholdPolicy(thresholds, alphas)


def result_to_dict(result: SolveResult, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Serialise a SolveResult with currency rounded to six decimals."""
    document = {
        "status": result.status.value,
        **policy_to_dict(result.screening, result.allocation),
        "expected_utility": round_currency(result.expected_utility),
        "expected_cost": round_currency(result.expected_cost),
        "group_utilities": [round_currency(u) for u in result.group_utilities],
        "lp_solves": result.lp_solves,
    }
    if result.lambda_target is not None:
        document["lambda"] = round_currency(result.lambda_target)
    if extra:
        document.update(extra)
    return document


def report_to_dict(report) -> Dict[str, Any]:
    """Serialise an EvalReport (exact or Monte Carlo)."""
    document = {
        "expected_utility": round_currency(report.expected_utility),
        "expected_cost": round_currency(report.expected_cost),
        "group_utilities": [round_currency(u) for u in report.group_utilities],
    }
    if report.draws:
        document["draws"] = report.draws
        document["std_error_utility"] = round_currency(report.std_error_utility)
        document["std_error_cost"] = round_currency(report.std_error_cost)
    return document


def dumps(document: Dict[str, Any]) -> str:
    """Deterministic JSON text (fixed key order, trailing newline)."""
    return json.dumps(document, indent=2, allow_nan=False) + "\n"


def load_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Failed to read JSON from {path}: {e}")
        raise


def load_instance(path: str) -> ProblemInstance:
    return instance_from_dict(load_json(path))
