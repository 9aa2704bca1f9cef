use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Base symbol of a jet coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    Kappa1,
    Kappa2,
    Mu,
    Lambda,
}

impl Base {
    pub fn name(self) -> &'static str {
        match self {
            Base::Kappa1 => "k1",
            Base::Kappa2 => "k2",
            Base::Mu => "mu",
            Base::Lambda => "lambda",
        }
    }

    pub fn from_name(name: &str) -> Option<Base> {
        match name {
            "k1" => Some(Base::Kappa1),
            "k2" => Some(Base::Kappa2),
            "mu" => Some(Base::Mu),
            "lambda" | "lam" => Some(Base::Lambda),
            _ => None,
        }
    }

    /// The two generating curvature invariants.
    pub fn is_kappa(self) -> bool {
        matches!(self, Base::Kappa1 | Base::Kappa2)
    }
}

/// A jet coordinate: `order` arc-length derivatives of `base`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JetVar {
    pub base: Base,
    pub order: u32,
}

impl JetVar {
    pub const fn new(base: Base, order: u32) -> Self {
        JetVar { base, order }
    }

    pub const fn k1(order: u32) -> Self {
        JetVar::new(Base::Kappa1, order)
    }

    pub const fn k2(order: u32) -> Self {
        JetVar::new(Base::Kappa2, order)
    }

    pub const fn mu(order: u32) -> Self {
        JetVar::new(Base::Mu, order)
    }

    pub const fn lambda(order: u32) -> Self {
        JetVar::new(Base::Lambda, order)
    }

    pub fn differentiated(self) -> Self {
        JetVar::new(self.base, self.order + 1)
    }

    /// Parses the compact names produced by `Display` (`k1`, `k2_ss`, `mu_s`, ...).
    pub fn from_name(name: &str) -> Option<Self> {
        let (head, tail) = match name.find('_') {
            Some(idx) => (&name[..idx], &name[idx + 1..]),
            None => (name, ""),
        };
        let base = Base::from_name(head)?;
        if name.contains('_') && (tail.is_empty() || tail.chars().any(|c| c != 's')) {
            return None;
        }
        Some(JetVar::new(base, tail.len() as u32))
    }
}

impl fmt::Display for JetVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.base.name())?;
        if self.order > 0 {
            f.write_str("_")?;
            for _ in 0..self.order {
                f.write_str("s")?;
            }
        }
        Ok(())
    }
}

/// Numeric values for a set of jet coordinates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct JetPoint {
    values: HashMap<JetVar, f64>,
}

impl JetPoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: JetVar, value: f64) -> Self {
        self.values.insert(var, value);
        self
    }

    pub fn set(&mut self, var: JetVar, value: f64) {
        self.values.insert(var, value);
    }

    pub fn get(&self, var: &JetVar) -> Option<f64> {
        self.values.get(var).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Highest derivative order stored for `base`, if any.
    pub fn max_order(&self, base: Base) -> Option<u32> {
        self.values
            .keys()
            .filter(|v| v.base == base)
            .map(|v| v.order)
            .max()
    }
}

impl FromIterator<(JetVar, f64)> for JetPoint {
    fn from_iter<I: IntoIterator<Item = (JetVar, f64)>>(iter: I) -> Self {
        JetPoint {
            values: iter.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for var in [JetVar::k1(0), JetVar::k2(3), JetVar::mu(1), JetVar::lambda(0)] {
            let name = var.to_string();
            assert_eq!(JetVar::from_name(&name), Some(var), "{name}");
        }
        assert_eq!(JetVar::k2(2).to_string(), "k2_ss");
        assert_eq!(JetVar::from_name("k3"), None);
        assert_eq!(JetVar::from_name("k1_"), None);
        assert_eq!(JetVar::from_name("k1_sx"), None);
    }
}
