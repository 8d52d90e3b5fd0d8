//! Site potentials U_i, hop rates and Boltzmann factors.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{parse_rational, Laurent, Q};
use crate::partition::Partition;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// U_i = −i·log r
    ConstantRate { r: f64 },
    /// values[k] = U at site base + k; linear tails with the given slope outside.
    Table { base: i64, values: Vec<f64>, tail_slope: f64 },
    /// U_i = c·i²/2
    Gauss { c: f64 },
}

/// Site-energy map normalized by U_0 = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    #[serde(flatten)]
    pub kind: PotentialKind,
    /// Site w such that the hop w → w−1 has rate zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard_wall: Option<i64>,
}

impl Potential {
    pub fn zero() -> Self {
        Self::constant_rate(1.0)
    }

    pub fn constant_rate(r: f64) -> Self {
        Potential { kind: PotentialKind::ConstantRate { r }, hard_wall: None }
    }

    pub fn gauss(c: f64) -> Self {
        Potential { kind: PotentialKind::Gauss { c }, hard_wall: None }
    }

    pub fn table(base: i64, values: Vec<f64>, tail_slope: f64) -> Self {
        Potential { kind: PotentialKind::Table { base, values, tail_slope }, hard_wall: None }
    }

    pub fn with_hard_wall(mut self, site: i64) -> Self {
        self.hard_wall = Some(site);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            PotentialKind::ConstantRate { r } if !(*r > 0.0 && r.is_finite()) => {
                Err(Error::param("rate", format!("must be positive and finite, got {r}")))
            }
            PotentialKind::Gauss { c } if !c.is_finite() => Err(Error::param("gauss", "c must be finite")),
            PotentialKind::Table { values, tail_slope, .. }
                if values.is_empty() || !tail_slope.is_finite() || values.iter().any(|v| v.is_nan()) =>
            {
                Err(Error::param("potential", "table needs non-empty values and a finite tail slope"))
            }
            _ => Ok(()),
        }
    }

    fn raw(&self, i: i64) -> f64 {
        match &self.kind {
            PotentialKind::ConstantRate { r } => -(i as f64) * r.ln(),
            PotentialKind::Gauss { c } => c * (i * i) as f64 / 2.0,
            PotentialKind::Table { base, values, tail_slope } => {
                let last = base + values.len() as i64 - 1;
                if i < *base {
                    values[0] - tail_slope * (base - i) as f64
                } else if i > last {
                    values[values.len() - 1] + tail_slope * (i - last) as f64
                } else {
                    values[(i - base) as usize]
                }
            }
        }
    }

    /// U_i with U_0 = 0.
    pub fn energy(&self, i: i64) -> f64 {
        self.raw(i) - self.raw(0)
    }

    /// r(i) = e^{−U_i + U_{i−1}}: weight of the hop i−1 → i.
    pub fn rate_up(&self, i: i64) -> f64 {
        (self.raw(i - 1) - self.raw(i)).exp()
    }

    /// r*(i) = e^{−U_{i−1} + U_i}: weight of the hop i → i−1.
    pub fn rate_down(&self, i: i64) -> f64 {
        if self.hard_wall == Some(i) {
            return 0.0;
        }
        (self.raw(i) - self.raw(i - 1)).exp()
    }

    /// Exact rate r when it is given by a terminating decimal or small rational.
    pub fn exact_rate(&self) -> Option<Q> {
        match &self.kind {
            PotentialKind::ConstantRate { r } => parse_rational(&format!("{r}")),
            _ => None,
        }
    }

    /// Numerical value of the formal variable w used by exact factors (w = e^{−c/2} for Gauss).
    pub fn w(&self) -> f64 {
        match &self.kind {
            PotentialKind::Gauss { c } => (-c / 2.0).exp(),
            _ => 1.0,
        }
    }

    /// e^{−U_i} as an exact monomial in w, when available.
    pub fn boltzmann_exact(&self, i: i64) -> Option<Laurent> {
        match &self.kind {
            PotentialKind::ConstantRate { .. } => {
                let r = self.exact_rate()?;
                Some(Laurent::constant(qpow(&r, i)))
            }
            PotentialKind::Gauss { .. } => Some(Laurent::monomial(Q::one(), i * i)),
            PotentialKind::Table { .. } => None,
        }
    }

    /// e^{+U_i} as an exact monomial in w.
    pub fn inv_boltzmann_exact(&self, i: i64) -> Option<Laurent> {
        match &self.kind {
            PotentialKind::ConstantRate { .. } => {
                let r = self.exact_rate()?;
                Some(Laurent::constant(qpow(&r, -i)))
            }
            PotentialKind::Gauss { .. } => Some(Laurent::monomial(Q::one(), -i * i)),
            PotentialKind::Table { .. } => None,
        }
    }

    /// Whether every factor is a rational number (no formal w needed).
    pub fn is_rational(&self) -> bool {
        self.exact_rate().is_some()
    }

    pub fn is_exact(&self) -> bool {
        self.boltzmann_exact(1).is_some()
    }

    /// Sites of the windowed particles of λ at level n.
    fn sites(lambda: &Partition, n: i64) -> impl Iterator<Item = (i64, i64)> + '_ {
        lambda.parts().iter().enumerate().map(move |(i, &p)| {
            let i = i as i64 + 1;
            (p as i64 - i + n, -i + n)
        })
    }

    /// U_λ(n) = Σ_i (U_{λ_i−i+n} − U_{−i+n}).
    pub fn energy_of(&self, lambda: &Partition, n: i64) -> f64 {
        Self::sites(lambda, n).map(|(a, b)| self.raw(a) - self.raw(b)).sum()
    }

    /// e^{−U_λ(n)} exactly.
    pub fn boltzmann_of_exact(&self, lambda: &Partition, n: i64) -> Option<Laurent> {
        let mut acc = Laurent::one();
        for (a, b) in Self::sites(lambda, n) {
            acc = acc * self.boltzmann_exact(a)? * self.inv_boltzmann_exact(b)?;
        }
        Some(acc)
    }

    /// e^{+U_λ(n)} exactly.
    pub fn inv_boltzmann_of_exact(&self, lambda: &Partition, n: i64) -> Option<Laurent> {
        let mut acc = Laurent::one();
        for (a, b) in Self::sites(lambda, n) {
            acc = acc * self.inv_boltzmann_exact(a)? * self.boltzmann_exact(b)?;
        }
        Some(acc)
    }

    /// e^{−U_λ(n)} as a rational, for rational-rate potentials.
    pub fn boltzmann_of_rational(&self, lambda: &Partition, n: i64) -> Option<Q> {
        if !self.is_rational() {
            return None;
        }
        self.boltzmann_of_exact(lambda, n)?.as_rational()
    }
}

pub fn qpow(r: &Q, e: i64) -> Q {
    if e >= 0 {
        num_traits::pow(r.clone(), e as usize)
    } else if r.is_zero() {
        panic!("zero rate to a negative power")
    } else {
        num_traits::pow(r.recip(), (-e) as usize)
    }
}
