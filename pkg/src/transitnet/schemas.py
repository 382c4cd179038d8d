"""Response schemas for the planner HTTP API.

Kept as plain JSON Schema dicts so tests (and the browser client) can
validate payloads without importing any server code.
"""

_DIGEST = {"type": "string", "minLength": 64, "maxLength": 64}

_METRICS = {
    "type": "object",
    "required": ["avg_path_length", "avg_eccentricity", "diameter",
                 "node_count", "edge_count", "sampled"],
    "properties": {
        "avg_path_length": {"type": "number", "minimum": 0},
        "avg_eccentricity": {"type": "number", "minimum": 0},
        "diameter": {"type": "integer", "minimum": 0},
        "node_count": {"type": "integer", "minimum": 0},
        "edge_count": {"type": "integer", "minimum": 0},
        "reachable_pairs": {"type": "integer", "minimum": 0},
        "sampled": {"type": "boolean"},
        "degenerate": {"type": "boolean"},
    },
}

_FEATURE = {
    "type": "object",
    "required": ["type", "geometry", "properties"],
    "properties": {
        "type": {"const": "Feature"},
        "geometry": {
            "type": "object",
            "required": ["type", "coordinates"],
            "properties": {
                "type": {"enum": ["Point", "LineString"]},
                "coordinates": {"type": "array"},
            },
        },
        "properties": {"type": "object"},
    },
}

_FEATURE_COLLECTION = {
    "type": "object",
    "required": ["type", "features"],
    "properties": {
        "type": {"const": "FeatureCollection"},
        "features": {"type": "array", "items": _FEATURE},
    },
}

GRAPH_SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["manifest_digest", "node_count", "edge_count",
                 "component_count", "giant_size", "coverage",
                 "giant_metrics"],
    "properties": {
        "manifest_digest": _DIGEST,
        "node_count": {"type": "integer", "minimum": 0},
        "edge_count": {"type": "integer", "minimum": 0},
        "total_weight": {"type": "number", "minimum": 0},
        "component_count": {"type": "integer", "minimum": 1},
        "giant_size": {"type": "integer", "minimum": 0},
        "coverage": {"type": "number", "minimum": 0, "maximum": 1},
        "giant_metrics": _METRICS,
    },
}

GRAPH_GEOJSON_SCHEMA = {
    "type": "object",
    "required": ["manifest_digest", "type", "features"],
    "properties": {
        "manifest_digest": _DIGEST,
        "type": {"const": "FeatureCollection"},
        "features": {"type": "array", "items": _FEATURE},
    },
}

_COMMUNITY_STATS_ROW = {
    "type": "object",
    "required": ["community_id", "node_count", "diameter",
                 "normalized_diameter", "density", "avg_clustering",
                 "avg_weighted_degree", "avg_weighted_degree_full"],
    "properties": {
        "community_id": {"type": "integer", "minimum": 0},
        "node_count": {"type": "integer", "minimum": 1},
        "diameter": {"type": "integer", "minimum": 0},
        "normalized_diameter": {"type": "number", "minimum": 0},
        "density": {"type": "number", "minimum": 0, "maximum": 1},
        "avg_clustering": {"type": "number", "minimum": 0, "maximum": 1},
        "avg_weighted_degree": {"type": "number", "minimum": 0},
        "avg_weighted_degree_full": {"type": "number", "minimum": 0},
    },
}

COMMUNITIES_SCHEMA = {
    "type": "object",
    "required": ["manifest_digest", "community_count", "modularity",
                 "centers", "stats", "geojson"],
    "properties": {
        "manifest_digest": _DIGEST,
        "community_count": {"type": "integer", "minimum": 1},
        "modularity": {"type": "number", "minimum": -1, "maximum": 1},
        "levels": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "resolution": {"type": "number", "exclusiveMinimum": 0},
        "centers": {
            "type": "object",
            "additionalProperties": {"type": "string"},
        },
        "stats": {"type": "array", "items": _COMMUNITY_STATS_ROW},
        "geojson": _FEATURE_COLLECTION,
    },
}

_FLOW_ENTRY = {
    "type": "object",
    "required": ["community_count", "matrix", "unassigned"],
    "properties": {
        "day_class": {"type": "string"},
        "community_count": {"type": "integer", "minimum": 1},
        "matrix": {
            "type": "array",
            "items": {"type": "array",
                      "items": {"type": "integer", "minimum": 0}},
        },
        "unassigned": {"type": "integer", "minimum": 0},
        "od_pairs": {"type": "integer", "minimum": 0},
        "days": {"type": "integer", "minimum": 0},
        "intra": {"type": "integer", "minimum": 0},
        "inter": {"type": "integer", "minimum": 0},
        "pct_intra": {"type": "number", "minimum": 0, "maximum": 100},
        "pct_inter": {"type": "number", "minimum": 0, "maximum": 100},
        "top_inter_pairs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["communities", "flow"],
                "properties": {
                    "communities": {
                        "type": "array",
                        "items": {"type": "integer", "minimum": 0},
                        "minItems": 2, "maxItems": 2,
                    },
                    "flow": {"type": "integer", "minimum": 1},
                },
            },
        },
    },
}

FLOWS_SCHEMA = {
    "type": "object",
    "required": ["manifest_digest", "day_classes", "notes"],
    "properties": {
        "manifest_digest": _DIGEST,
        "day_classes": {"type": "object", "additionalProperties": _FLOW_ENTRY},
        "notes": {"type": "array", "items": {"type": "string"}},
    },
}

FLOW_CLASS_SCHEMA = {
    "allOf": [
        _FLOW_ENTRY,
        {
            "type": "object",
            "required": ["manifest_digest", "day_class"],
            "properties": {"manifest_digest": _DIGEST},
        },
    ],
}

_TRAJECTORY_POINT = {
    "type": "object",
    "required": ["step", "apl", "avg_ecc", "diameter"],
    "properties": {
        "step": {"type": "integer", "minimum": 0},
        "apl": {"type": "number", "minimum": 0},
        "avg_ecc": {"type": "number", "minimum": 0},
        "diameter": {"type": "integer", "minimum": 0},
        "delta_apl": {"type": "number"},
        "delta_ecc": {"type": "number"},
        "delta_diam": {"type": "integer"},
        "duplicates": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "string"},
                      "minItems": 2, "maxItems": 2},
        },
    },
}

_PLAN_STEP = {
    "type": "object",
    "required": ["step", "communities", "centers", "weight"],
    "properties": {
        "step": {"type": "integer", "minimum": 1},
        "communities": {"type": "array",
                        "items": {"type": "integer", "minimum": 0},
                        "minItems": 2, "maxItems": 2},
        "centers": {"type": "array", "items": {"type": "string"},
                    "minItems": 2, "maxItems": 2},
        "flow": {"type": "integer", "minimum": 0},
        "weight": {"type": "number", "exclusiveMinimum": 0},
    },
}

PLAN_SCHEMA = {
    "type": "object",
    "required": ["manifest_digest", "plan", "trajectory"],
    "properties": {
        "manifest_digest": _DIGEST,
        "plan": {
            "type": "object",
            "required": ["centers", "steps"],
            "properties": {
                "centers": {"type": "object",
                            "additionalProperties": {"type": "string"}},
                "steps": {"type": "array", "items": _PLAN_STEP},
            },
        },
        "trajectory": {"type": "array", "items": _TRAJECTORY_POINT},
    },
}

PREVIEW_SCHEMA = {
    "type": "object",
    "required": ["manifest_digest", "steps", "trajectory"],
    "properties": {
        "manifest_digest": _DIGEST,
        "steps": {"type": "array", "items": _PLAN_STEP, "minItems": 1},
        "trajectory": {"type": "array", "items": _TRAJECTORY_POINT,
                       "minItems": 2},
    },
}
