use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Boundary impedance γ of the condition ∂u/∂n + ikγu = 0 (passive sign,
/// outward normal), as a nonnegative extended real.
///
/// `γ = ∞` is the Dirichlet (sound-soft) limit and `γ = 0` the Neumann
/// (sound-hard) one.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Impedance(f64);

impl Impedance {
    pub const DIRICHLET: Impedance = Impedance(f64::INFINITY);
    pub const NEUMANN: Impedance = Impedance(0.0);

    pub fn new(gamma: f64) -> Result<Self> {
        if gamma.is_nan() || gamma < 0.0 {
            return Err(Error::Domain(format!("impedance must be >= 0 or inf, got {gamma}")));
        }
        Ok(Impedance(gamma))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_dirichlet(self) -> bool {
        self.0.is_infinite()
    }

    pub fn is_neumann(self) -> bool {
        self.0 == 0.0
    }
}

impl fmt::Display for Impedance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_dirichlet() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Impedance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "dirichlet" => Ok(Impedance::DIRICHLET),
            "neumann" => Ok(Impedance::NEUMANN),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("invalid impedance '{s}'")))
                .and_then(Impedance::new),
        }
    }
}

impl Serialize for Impedance {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_dirichlet() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_named_limits() {
        assert!("inf".parse::<Impedance>().unwrap().is_dirichlet());
        assert!("Dirichlet".parse::<Impedance>().unwrap().is_dirichlet());
        assert!("neumann".parse::<Impedance>().unwrap().is_neumann());
        assert_eq!("2.5".parse::<Impedance>().unwrap().value(), 2.5);
    }

    #[test]
    fn rejects_negative_and_nan() {
        assert!(Impedance::new(-1.0).is_err());
        assert!(Impedance::new(f64::NAN).is_err());
        assert!("abc".parse::<Impedance>().is_err());
    }

    #[test]
    fn display_round_trips() {
        for g in [Impedance::DIRICHLET, Impedance::NEUMANN, Impedance(0.25)] {
            assert_eq!(g.to_string().parse::<Impedance>().unwrap(), g);
        }
    }
}
