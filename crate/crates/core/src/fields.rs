//! Analytic test fields with known divergence-free and curl-free parts.
//!
//! `ws_*` live on the whole plane (period 2), `bd_*` are periodic on the
//! unit square and their divergence-free part vanishes on its boundary.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Part {
    Div,
    Curl,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BuiltinField {
    WsDiv,
    WsCurl,
    WsFull,
    BdDiv,
    BdCurl,
    BdFull,
}

impl BuiltinField {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "ws_div" => Self::WsDiv,
            "ws_curl" => Self::WsCurl,
            "ws_full" => Self::WsFull,
            "bd_div" => Self::BdDiv,
            "bd_curl" => Self::BdCurl,
            "bd_full" => Self::BdFull,
            other => return Err(Error::UnknownField(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::WsDiv => "ws_div",
            Self::WsCurl => "ws_curl",
            Self::WsFull => "ws_full",
            Self::BdDiv => "bd_div",
            Self::BdCurl => "bd_curl",
            Self::BdFull => "bd_full",
        }
    }

    fn has(&self, part: Part) -> bool {
        match part {
            Part::Div => !matches!(self, Self::WsCurl | Self::BdCurl),
            Part::Curl => !matches!(self, Self::WsDiv | Self::BdDiv),
            Part::Full => true,
        }
    }

    fn bounded(&self) -> bool {
        matches!(self, Self::BdDiv | Self::BdCurl | Self::BdFull)
    }

    /// `D^alpha` of the requested part at `x`; `alpha` must be `0` or `e_1`.
    pub fn eval_part(&self, part: Part, x: &[f64], alpha: &[u32]) -> Result<[f64; 2]> {
        if x.len() != 2 || alpha.len() != 2 {
            return Err(Error::InvalidParameter("builtin fields are two-dimensional".into()));
        }
        let dx = match alpha {
            [0, 0] => false,
            [1, 0] => true,
            _ => return Err(Error::InvalidParameter(format!("unsupported derivative {alpha:?}"))),
        };
        let (a, b) = if self.bounded() { (4.0 * PI, 2.0 * PI) } else { (PI, PI) };
        let div = |x: f64, y: f64| -> [f64; 2] {
            if dx {
                [(2.0 * a * y).sin() * a * (2.0 * a * x).sin(), -2.0 * a * (2.0 * a * x).cos() * (a * y).sin().powi(2)]
            } else {
                [(2.0 * a * y).sin() * (a * x).sin().powi(2), -(2.0 * a * x).sin() * (a * y).sin().powi(2)]
            }
        };
        let curl = |x: f64, y: f64| -> [f64; 2] {
            if dx {
                [b * b * (b * x).cos() * (b * y).sin(), b * b * (b * x).sin() * (b * y).cos()]
            } else {
                [b * (b * x).sin() * (b * y).sin(), -b * (b * x).cos() * (b * y).cos()]
            }
        };
        let mut out = [0.0; 2];
        if part != Part::Curl && self.has(Part::Div) {
            let v = div(x[0], x[1]);
            out[0] += v[0];
            out[1] += v[1];
        }
        if part != Part::Div && self.has(Part::Curl) {
            let v = curl(x[0], x[1]);
            out[0] += v[0];
            out[1] += v[1];
        }
        Ok(out)
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        self.eval_part(Part::Full, x, &[0, 0]).expect("two-dimensional point").to_vec()
    }
}
