//! Shape-preserving 1-D interpolation on tabulated knots.
//!
//! Monotone piecewise-cubic Hermite (Fritsch–Carlson slopes), with a hard
//! domain: queries outside the knot range are rejected, never extrapolated.
//! Tables serialize to a versioned two-column text format with a checksum so
//! the CLI can cache them and detect corruption.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum InterpError {
    #[error("need at least two knots with equal lengths")]
    LengthMismatch,
    #[error("knot abscissa must be strictly increasing")]
    NonIncreasingX,
    #[error("knots must be finite")]
    NonFiniteInput,
    #[error("query {0} outside interpolant domain [{1}, {2}]")]
    OutOfDomain(f64, f64, f64),
    #[error("cache parse failure: {0}")]
    Corrupt(String),
}

/// Monotonicity-aware interpolating map with an explicit domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
    meta: String,
}

impl Interpolant {
    /// Build from knots; `meta` records the builder parameters and travels
    /// with the serialized table.
    pub fn new(x: Vec<f64>, y: Vec<f64>, meta: impl Into<String>) -> Result<Self, InterpError> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(InterpError::LengthMismatch);
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(InterpError::NonFiniteInput);
        }
        let mut h = Vec::with_capacity(n - 1);
        let mut delta = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let hi = x[i + 1] - x[i];
            if hi <= 0.0 {
                return Err(InterpError::NonIncreasingX);
            }
            h.push(hi);
            delta.push((y[i + 1] - y[i]) / hi);
        }

        let mut d = vec![0.0; n];
        for k in 1..n - 1 {
            let (s1, s2) = (delta[k - 1], delta[k]);
            if s1 == 0.0 || s2 == 0.0 || s1.signum() != s2.signum() {
                d[k] = 0.0;
            } else {
                let (h1, h2) = (h[k - 1], h[k]);
                let w1 = 2.0 * h2 + h1;
                let w2 = h2 + 2.0 * h1;
                d[k] = (w1 + w2) / (w1 / s1 + w2 / s2);
            }
        }
        d[0] = edge_slope(h[0], h.get(1).copied(), delta[0], delta.get(1).copied());
        d[n - 1] = edge_slope(
            h[n - 2],
            (n >= 3).then(|| h[n - 3]),
            delta[n - 2],
            (n >= 3).then(|| delta[n - 3]),
        );

        Ok(Self {
            x,
            y,
            d,
            meta: meta.into(),
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn knots_x(&self) -> &[f64] {
        &self.x
    }

    pub fn knots_y(&self) -> &[f64] {
        &self.y
    }

    pub fn meta(&self) -> &str {
        &self.meta
    }

    pub fn contains(&self, xq: f64) -> bool {
        xq >= self.x[0] && xq <= self.x[self.x.len() - 1]
    }

    /// Evaluate at `xq`; out-of-domain queries are errors by contract.
    pub fn eval(&self, xq: f64) -> Result<f64, InterpError> {
        let n = self.x.len();
        if !self.contains(xq) {
            return Err(InterpError::OutOfDomain(xq, self.x[0], self.x[n - 1]));
        }
        let k = match self.x.binary_search_by(|v| v.partial_cmp(&xq).unwrap()) {
            Ok(i) => return Ok(self.y[i]),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let t = (xq - self.x[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1])
    }

    /// Serialize to the versioned plain-text table format.
    pub fn to_text(&self) -> String {
        let mut body = String::new();
        for (x, y) in self.x.iter().zip(&self.y) {
            body.push_str(&format!("{x:.16e}\t{y:.16e}\n"));
        }
        format!(
            "# esla-interpolant v1\n# meta: {}\n# checksum: {:016x}\n{}",
            self.meta,
            fnv1a64(body.as_bytes()),
            body
        )
    }

    /// Parse the text format, verifying version and checksum.
    pub fn from_text(text: &str) -> Result<Self, InterpError> {
        let mut lines = text.lines();
        let version = lines.next().unwrap_or_default();
        if version.trim() != "# esla-interpolant v1" {
            return Err(InterpError::Corrupt(format!(
                "unsupported header {version:?}"
            )));
        }
        let meta = lines
            .next()
            .and_then(|l| l.strip_prefix("# meta: "))
            .ok_or_else(|| InterpError::Corrupt("missing meta line".into()))?
            .to_string();
        let checksum = lines
            .next()
            .and_then(|l| l.strip_prefix("# checksum: "))
            .and_then(|l| u64::from_str_radix(l.trim(), 16).ok())
            .ok_or_else(|| InterpError::Corrupt("missing checksum line".into()))?;
        let body: String = lines.map(|l| format!("{l}\n")).collect();
        if fnv1a64(body.as_bytes()) != checksum {
            return Err(InterpError::Corrupt("checksum mismatch".into()));
        }
        let mut x = Vec::new();
        let mut y = Vec::new();
        for line in body.lines() {
            let mut cols = line.split_whitespace();
            let (a, b) = (cols.next(), cols.next());
            match (a.and_then(|v| v.parse().ok()), b.and_then(|v| v.parse().ok())) {
                (Some(a), Some(b)) => {
                    x.push(a);
                    y.push(b);
                }
                _ => return Err(InterpError::Corrupt(format!("bad row {line:?}"))),
            }
        }
        Self::new(x, y, meta)
    }
}

fn edge_slope(h0: f64, h1: Option<f64>, s0: f64, s1: Option<f64>) -> f64 {
    match (h1, s1) {
        (Some(h1), Some(s1)) => {
            let mut d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
            if d.signum() != s0.signum() {
                d = 0.0;
            } else if s0.signum() != s1.signum() && d.abs() > 3.0 * s0.abs() {
                d = 3.0 * s0;
            }
            d
        }
        _ => s0,
    }
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
