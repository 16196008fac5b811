//! Multi-edge-type LDPC ensemble descriptions.
//!
//! An ensemble is specified from the node perspective by two polynomials:
//! variable rows `coeff * r^b * x^d` and check rows `coeff * x^d`, where `b`
//! ranges over channel slots and `d` over edge types. Coefficients are
//! normalized per transmitted channel bit, so the design rate is the
//! difference of the two coefficient sums.
//!
//! Channel slot conventions: slot 0 carries no observation (punctured
//! variables), slot 1 is the communication channel. Rows select exactly one
//! slot.
//!
//! The JSON wire format mirrors the in-memory layout:
//!
//! ```json
//! {
//!   "n_edge_types": 3,
//!   "n_channels": 2,
//!   "variable_nodes": [ { "coeff": 0.02, "b": [0, 1], "d": [2, 51, 0] } ],
//!   "check_nodes":    [ { "coeff": 0.016, "d": [4, 0, 0] } ]
//! }
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for declaring the two sides of an edge type balanced.
const SOCKET_TOL: f64 = 1e-9;

/// One variable-node term: `coeff * prod_j r_j^(b_j) * prod_i x_i^(d_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableNodeRow {
    pub coeff: f64,
    /// Channel-slot exponents; exactly one entry is 1, the rest 0.
    #[serde(rename = "b")]
    pub received: Vec<u32>,
    /// Edge-type degrees.
    #[serde(rename = "d")]
    pub degrees: Vec<u32>,
}

/// One check-node term: `coeff * prod_i x_i^(d_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckNodeRow {
    pub coeff: f64,
    /// Edge-type degrees.
    #[serde(rename = "d")]
    pub degrees: Vec<u32>,
}

/// A complete multi-edge-type ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub n_edge_types: usize,
    pub n_channels: usize,
    pub variable_nodes: Vec<VariableNodeRow>,
    pub check_nodes: Vec<CheckNodeRow>,
}

/// Socket accounting for one edge type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SocketBalance {
    pub edge: usize,
    /// Sockets per transmitted bit on the variable side.
    pub variable: f64,
    /// Sockets per transmitted bit on the check side.
    pub check: f64,
    /// `|variable - check|` relative to their larger magnitude.
    pub rel_dev: f64,
}

/// Result of checking that every edge type has matching socket counts.
#[derive(Debug, Clone, Serialize)]
pub struct SocketReport {
    pub per_edge: Vec<SocketBalance>,
    pub balanced: bool,
}

/// Degree fraction of one node row on one edge type, from the edge
/// perspective: the probability that a uniformly chosen socket of that edge
/// type belongs to the given row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFraction {
    /// Index into `variable_nodes` or `check_nodes`.
    pub row: usize,
    pub fraction: f64,
}

/// Edge-perspective degree distributions, one list per edge type, rows with
/// zero degree omitted. Fractions on each list sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePerspective {
    pub variable: Vec<Vec<EdgeFraction>>,
    pub check: Vec<Vec<EdgeFraction>>,
}

/// Parses and validates an ensemble from its JSON representation.
pub fn parse_ensemble(json: &str) -> Result<EnsembleSpec> {
    let spec: EnsembleSpec = serde_json::from_str(json)?;
    spec.validate()?;
    Ok(spec)
}

impl EnsembleSpec {
    /// Structural validation: consistent vector lengths, finite nonnegative
    /// coefficients, one channel slot per variable row, and at least one
    /// socket per row. Socket balance is reported separately because an
    /// unbalanced ensemble is still useful to inspect.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidEnsemble(msg));
        if self.n_edge_types == 0 {
            return fail("n_edge_types must be at least 1".into());
        }
        if self.n_channels == 0 {
            return fail("n_channels must be at least 1".into());
        }
        if self.variable_nodes.is_empty() || self.check_nodes.is_empty() {
            return fail("both node lists must be nonempty".into());
        }
        for (r, row) in self.variable_nodes.iter().enumerate() {
            if row.received.len() != self.n_channels {
                return fail(format!(
                    "variable row {r}: b has {} entries, expected n_channels = {}",
                    row.received.len(),
                    self.n_channels
                ));
            }
            if row.degrees.len() != self.n_edge_types {
                return fail(format!(
                    "variable row {r}: d has {} entries, expected n_edge_types = {}",
                    row.degrees.len(),
                    self.n_edge_types
                ));
            }
            if !(row.coeff.is_finite() && row.coeff >= 0.0) {
                return fail(format!("variable row {r}: coefficient {} invalid", row.coeff));
            }
            if row.received.iter().sum::<u32>() != 1 {
                return fail(format!(
                    "variable row {r}: exactly one channel slot must be selected"
                ));
            }
            if row.degrees.iter().all(|&d| d == 0) {
                return fail(format!("variable row {r}: no edge sockets"));
            }
        }
        for (r, row) in self.check_nodes.iter().enumerate() {
            if row.degrees.len() != self.n_edge_types {
                return fail(format!(
                    "check row {r}: d has {} entries, expected n_edge_types = {}",
                    row.degrees.len(),
                    self.n_edge_types
                ));
            }
            if !(row.coeff.is_finite() && row.coeff >= 0.0) {
                return fail(format!("check row {r}: coefficient {} invalid", row.coeff));
            }
            if row.degrees.iter().all(|&d| d == 0) {
                return fail(format!("check row {r}: no edge sockets"));
            }
        }
        Ok(())
    }

    /// Serializes back to the JSON wire format, pretty-printed.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Variable nodes per transmitted bit, the evaluation `nu(1, 1)`.
    pub fn variable_mass(&self) -> f64 {
        self.variable_nodes.iter().map(|r| r.coeff).sum()
    }

    /// Check nodes per transmitted bit, the evaluation `mu(1)`.
    pub fn check_mass(&self) -> f64 {
        self.check_nodes.iter().map(|r| r.coeff).sum()
    }

    /// Design rate `nu(1,1) - mu(1)`.
    pub fn nominal_rate(&self) -> f64 {
        self.variable_mass() - self.check_mass()
    }

    /// Punctured variable nodes per transmitted bit: total coefficient of
    /// rows that receive the empty observation of slot 0.
    pub fn punctured_fraction(&self) -> f64 {
        let f: f64 = self
            .variable_nodes
            .iter()
            .filter(|r| r.received.first().copied().unwrap_or(0) > 0)
            .map(|r| r.coeff)
            .sum();
        f + 0.0
    }

    /// Variable-side sockets of one edge type per transmitted bit.
    pub fn variable_sockets(&self, edge: usize) -> f64 {
        self.variable_nodes
            .iter()
            .map(|r| r.coeff * f64::from(r.degrees[edge]))
            .sum()
    }

    /// Check-side sockets of one edge type per transmitted bit.
    pub fn check_sockets(&self, edge: usize) -> f64 {
        self.check_nodes
            .iter()
            .map(|r| r.coeff * f64::from(r.degrees[edge]))
            .sum()
    }

    /// Compares socket counts on the two sides of every edge type.
    pub fn validate_sockets(&self) -> SocketReport {
        let per_edge: Vec<SocketBalance> = (0..self.n_edge_types)
            .map(|edge| {
                let variable = self.variable_sockets(edge);
                let check = self.check_sockets(edge);
                let scale = variable.abs().max(check.abs());
                let rel_dev = if scale == 0.0 { 0.0 } else { (variable - check).abs() / scale };
                SocketBalance { edge, variable, check, rel_dev }
            })
            .collect();
        let balanced = per_edge.iter().all(|b| b.rel_dev <= SOCKET_TOL);
        SocketReport { per_edge, balanced }
    }

    /// Edge-perspective degree distributions for every edge type.
    ///
    /// Fails if an edge type has no sockets on one side, because messages on
    /// such an edge would have an undefined distribution.
    pub fn edge_perspective(&self) -> Result<EdgePerspective> {
        let mut variable = Vec::with_capacity(self.n_edge_types);
        let mut check = Vec::with_capacity(self.n_edge_types);
        for edge in 0..self.n_edge_types {
            let vtot = self.variable_sockets(edge);
            if vtot <= 0.0 {
                return Err(Error::ZeroSockets { edge, side: "variable" });
            }
            variable.push(
                self.variable_nodes
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| r.coeff > 0.0 && r.degrees[edge] > 0)
                    .map(|(row, r)| EdgeFraction {
                        row,
                        fraction: r.coeff * f64::from(r.degrees[edge]) / vtot,
                    })
                    .collect::<Vec<_>>(),
            );
            let ctot = self.check_sockets(edge);
            if ctot <= 0.0 {
                return Err(Error::ZeroSockets { edge, side: "check" });
            }
            check.push(
                self.check_nodes
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| r.coeff > 0.0 && r.degrees[edge] > 0)
                    .map(|(row, r)| EdgeFraction {
                        row,
                        fraction: r.coeff * f64::from(r.degrees[edge]) / ctot,
                    })
                    .collect::<Vec<_>>(),
            );
        }
        Ok(EdgePerspective { variable, check })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Three edge types, two channel slots, rate 0.02. Same shape as the
    /// shipped low-rate ensemble files.
    fn low_rate_json() -> &'static str {
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

    #[test]
    fn parses_and_reports_rate_and_sockets() {
        let e = parse_ensemble(low_rate_json()).unwrap();
        assert_eq!(e.n_edge_types, 3);
        assert!((e.nominal_rate() - 0.02).abs() < 1e-12);
        assert_eq!(e.punctured_fraction(), 0.0);

        let report = e.validate_sockets();
        assert!(report.balanced);
        let expected = [0.1, 2.22, 0.96];
        for (b, want) in report.per_edge.iter().zip(expected) {
            assert!((b.variable - want).abs() < 1e-12);
            assert!((b.check - want).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_perspective_fractions_sum_to_one_and_match_hand_values() {
        let e = parse_ensemble(low_rate_json()).unwrap();
        let p = e.edge_perspective().unwrap();

        for side in [&p.variable, &p.check] {
            for fractions in side {
                let total: f64 = fractions.iter().map(|f| f.fraction).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }

        // Edge 0 on the variable side: sockets 0.02*2 and 0.02*3 of 0.1.
        assert!((p.variable[0][0].fraction - 0.4).abs() < 1e-12);
        assert!((p.variable[0][1].fraction - 0.6).abs() < 1e-12);
        // Edge 1: 1.02 and 1.20 of 2.22.
        assert!((p.variable[1][0].fraction - 0.02 * 51.0 / 2.22).abs() < 1e-12);
        assert!((p.variable[1][1].fraction - 0.02 * 60.0 / 2.22).abs() < 1e-12);
        // Check side, edge 0: 0.064 and 0.036 of 0.1.
        assert!((p.check[0][0].fraction - 0.64).abs() < 1e-12);
        assert!((p.check[0][1].fraction - 0.36).abs() < 1e-12);
        // Check side, edge 2: 0.30 and 0.66 of 0.96.
        assert!((p.check[2][0].fraction - 0.3125).abs() < 1e-12);
        assert!((p.check[2][1].fraction - 0.6875).abs() < 1e-12);
    }

    #[test]
    fn punctured_rows_are_counted_and_legal() {
        let json = r#"{
            "n_edge_types": 2,
            "n_channels": 2,
            "variable_nodes": [
                { "coeff": 0.2, "b": [1, 0], "d": [1, 1] },
                { "coeff": 0.8, "b": [0, 1], "d": [1, 0] }
            ],
            "check_nodes": [
                { "coeff": 0.5, "d": [2, 0] },
                { "coeff": 0.1, "d": [0, 2] }
            ]
        }"#;
        let e = parse_ensemble(json).unwrap();
        assert!((e.punctured_fraction() - 0.2).abs() < 1e-12);
        assert!(e.validate_sockets().balanced);
    }

    #[test]
    fn rejects_structural_errors() {
        let cases = [
            // b length does not match n_channels
            r#"{"n_edge_types":1,"n_channels":2,
                "variable_nodes":[{"coeff":1.0,"b":[1],"d":[2]}],
                "check_nodes":[{"coeff":1.0,"d":[2]}]}"#,
            // d length does not match n_edge_types
            r#"{"n_edge_types":2,"n_channels":1,
                "variable_nodes":[{"coeff":1.0,"b":[1],"d":[2]}],
                "check_nodes":[{"coeff":1.0,"d":[2,0]}]}"#,
            // negative coefficient
            r#"{"n_edge_types":1,"n_channels":1,
                "variable_nodes":[{"coeff":-1.0,"b":[1],"d":[2]}],
                "check_nodes":[{"coeff":1.0,"d":[2]}]}"#,
            // two channel slots selected at once
            r#"{"n_edge_types":1,"n_channels":2,
                "variable_nodes":[{"coeff":1.0,"b":[1,1],"d":[2]}],
                "check_nodes":[{"coeff":1.0,"d":[2]}]}"#,
            // isolated row without sockets
            r#"{"n_edge_types":1,"n_channels":1,
                "variable_nodes":[{"coeff":1.0,"b":[1],"d":[0]}],
                "check_nodes":[{"coeff":1.0,"d":[2]}]}"#,
            // unknown field
            r#"{"n_edge_types":1,"n_channels":1,"extra":true,
                "variable_nodes":[{"coeff":1.0,"b":[1],"d":[2]}],
                "check_nodes":[{"coeff":1.0,"d":[2]}]}"#,
        ];
        for json in cases {
            assert!(parse_ensemble(json).is_err(), "accepted: {json}");
        }
    }

    #[test]
    fn unbalanced_sockets_are_reported_not_rejected() {
        let json = r#"{
            "n_edge_types": 1,
            "n_channels": 1,
            "variable_nodes": [ { "coeff": 1.0, "b": [1], "d": [3] } ],
            "check_nodes":    [ { "coeff": 0.5, "d": [5] } ]
        }"#;
        let e = parse_ensemble(json).unwrap();
        let report = e.validate_sockets();
        assert!(!report.balanced);
        assert!((report.per_edge[0].variable - 3.0).abs() < 1e-12);
        assert!((report.per_edge[0].check - 2.5).abs() < 1e-12);
    }

    #[test]
    fn zero_socket_edges_fail_edge_perspective() {
        let json = r#"{
            "n_edge_types": 2,
            "n_channels": 1,
            "variable_nodes": [ { "coeff": 1.0, "b": [1], "d": [3, 0] } ],
            "check_nodes":    [ { "coeff": 1.0, "d": [3, 0] } ]
        }"#;
        let e = parse_ensemble(json).unwrap();
        assert!(matches!(
            e.edge_perspective(),
            Err(Error::ZeroSockets { edge: 1, .. })
        ));
    }

    #[test]
    fn json_roundtrip_preserves_the_spec() {
        let e = parse_ensemble(low_rate_json()).unwrap();
        let text = e.to_json().unwrap();
        let back = parse_ensemble(&text).unwrap();
        assert_eq!(e, back);
    }
}
