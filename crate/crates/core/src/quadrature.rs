use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Newton-Cotes rules on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuadratureRule {
    /// Integrand sampled at the left end of each subinterval.
    RectLeft,
    /// Integrand sampled at the right end of each subinterval.
    RectRight,
    /// Trapezoid rule (Bezout's formula).
    Trapezoid,
    /// Composite Simpson. An odd number of subintervals takes one trapezoid
    /// step on the first subinterval and Simpson on the rest.
    Simpson,
}

impl QuadratureRule {
    pub const ALL: [QuadratureRule; 4] = [
        QuadratureRule::RectLeft,
        QuadratureRule::RectRight,
        QuadratureRule::Trapezoid,
        QuadratureRule::Simpson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QuadratureRule::RectLeft => "rect-left",
            QuadratureRule::RectRight => "rect-right",
            QuadratureRule::Trapezoid => "trapezoid",
            QuadratureRule::Simpson => "simpson",
        }
    }

    /// Weight of the node at offset `j` for an integral over `m` subintervals of width `h`.
    ///
    /// Nodes are `0..=m`; offset 0 is the lower limit.
    pub fn weight(self, j: usize, m: usize, h: f64) -> f64 {
        debug_assert!(j <= m);
        if m == 0 {
            return 0.0;
        }
        match self {
            QuadratureRule::RectLeft => {
                if j < m {
                    h
                } else {
                    0.0
                }
            }
            QuadratureRule::RectRight => {
                if j > 0 {
                    h
                } else {
                    0.0
                }
            }
            QuadratureRule::Trapezoid => {
                if j == 0 || j == m {
                    0.5 * h
                } else {
                    h
                }
            }
            QuadratureRule::Simpson => {
                if m.is_multiple_of(2) {
                    simpson_even(j, m, h)
                } else {
                    // trapezoid on [0, 1], Simpson on [1, m]
                    let trap = if j <= 1 { 0.5 * h } else { 0.0 };
                    let simp = if j >= 1 && m > 1 {
                        simpson_even(j - 1, m - 1, h)
                    } else {
                        0.0
                    };
                    trap + simp
                }
            }
        }
    }

    /// All weights for `m` subintervals.
    pub fn weights(self, m: usize, h: f64) -> Vec<f64> {
        (0..=m).map(|j| self.weight(j, m, h)).collect()
    }
}

fn simpson_even(l: usize, m: usize, h: f64) -> f64 {
    let c = if l == 0 || l == m {
        1.0
    } else if l % 2 == 1 {
        4.0
    } else {
        2.0
    };
    c * h / 3.0
}

impl fmt::Display for QuadratureRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QuadratureRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "rect-left" => Ok(QuadratureRule::RectLeft),
            "rect-right" => Ok(QuadratureRule::RectRight),
            "trapezoid" | "bezout" => Ok(QuadratureRule::Trapezoid),
            "simpson" => Ok(QuadratureRule::Simpson),
            other => Err(Error::InvalidArgument(format!("unknown quadrature rule '{other}'"))),
        }
    }
}
