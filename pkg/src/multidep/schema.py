"""JSON Schema of the report printed by ``multidep test --format json``.

Kept in code so tests can validate real output against it; docs/schema.md
carries the same document.
"""

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "multidep test report",
    "type": "object",
    "required": ["statistic", "p_value", "valid", "method", "parameters", "warnings", "n", "N", "kind"],
    "additionalProperties": False,
    "properties": {
        "statistic": {"type": "number"},
        "p_value": {"type": "number", "minimum": 0, "maximum": 1},
        "valid": {"type": "boolean"},
        "method": {
            "enum": ["classical", "variance", "pearson", "clt", "eigenvalue",
                     "permutation", "bootstrap", "montecarlo"],
        },
        "parameters": {
            "type": "object",
            "required": ["method_id"],
            "properties": {
                "method_id": {"type": "string"},
                "bias": {"enum": ["biased", "unbiased"]},
                "horizon": {"enum": ["finite", "limit"]},
                "mean": {"type": "number"},
                "variance": {"type": "number"},
                "skewness": {"type": ["number", "null"]},
                "eigenvalues": {"type": "integer", "minimum": 0},
                "residual_mass": {"type": "number", "minimum": 0},
                "resamples": {"type": "integer", "minimum": 1},
                "seed": {"type": ["integer", "null"]},
            },
            "additionalProperties": False,
        },
        "warnings": {"type": "array", "items": {"type": "string"}},
        "n": {"type": "integer", "minimum": 2},
        "N": {"type": "integer", "minimum": 2},
        "kind": {
            "type": "object",
            "required": ["family", "normalized"],
            "properties": {
                "family": {"enum": ["multivariance", "total", "m"]},
                "normalized": {"type": "boolean"},
                "m": {"type": "integer", "minimum": 2},
            },
            "additionalProperties": False,
        },
    },
}
