//! Ensemble fixtures shared across module tests.

/// Single-edge regular ensemble, rate 1/2: variable degree 3, check degree
/// 6. Uses the shared two-slot channel convention.
pub(crate) fn regular_json() -> &'static str {
    r#"{
        "n_edge_types": 1,
        "n_channels": 2,
        "variable_nodes": [ { "coeff": 1.0, "b": [0, 1], "d": [3] } ],
        "check_nodes":    [ { "coeff": 0.5, "d": [6] } ]
    }"#
}

/// Three-edge-type ensemble of nominal rate 0.02 with a large fraction of
/// degree-one variable nodes on the third edge type.
pub(crate) fn low_rate_json() -> &'static str {
    r#"{
        "n_edge_types": 3,
        "n_channels": 2,
        "variable_nodes": [
            { "coeff": 0.02, "b": [0, 1], "d": [2, 51, 0] },
            { "coeff": 0.02, "b": [0, 1], "d": [3, 60, 0] },
            { "coeff": 0.96, "b": [0, 1], "d": [0, 0, 1] }
        ],
        "check_nodes": [
            { "coeff": 0.016, "d": [4, 0, 0] },
            { "coeff": 0.004, "d": [9, 0, 0] },
            { "coeff": 0.30,  "d": [0, 3, 1] },
            { "coeff": 0.66,  "d": [0, 2, 1] }
        ]
    }"#
}
