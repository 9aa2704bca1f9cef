//! The worked Lagrangians with their initial data, plus the elastic rod.

use std::collections::BTreeMap;

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub lagrangian: &'static str,
    pub ics: Vec<(&'static str, f64)>,
    pub span: (f64, f64),
    pub psi0: f64,
    pub z0: Option<f64>,
}

impl Fixture {
    pub fn ic_map(&self) -> BTreeMap<String, f64> {
        self.ics.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

/// L = ½(κ₂/κ₁)².
pub fn ratio_squared() -> Fixture {
    Fixture {
        name: "ratio-squared",
        lagrangian: "0.5*(k2/k1)^2",
        ics: vec![("k1", 1.0), ("k2", 0.5), ("k1_s", 1.0), ("k2_s", 1.0), ("mu", 1.0)],
        span: (0.0, 5.0),
        psi0: 0.0,
        z0: Some(1.0),
    }
}

/// L = κ₁κ₂,ₛ − κ₁,ₛκ₂.
pub fn first_order_torsion() -> Fixture {
    Fixture {
        name: "first-order-torsion",
        lagrangian: "k1*D(k2,1) - D(k1,1)*k2",
        ics: vec![("k1", 1.0), ("k2", 0.5), ("k1_s", 1.0), ("k2_s", 1.0), ("k1_ss", 1.0), ("k2_ss", 1.0)],
        span: (0.0, 5.0),
        psi0: 0.0,
        z0: None,
    }
}

/// L = κ₁,ₛκ₂,ₛₛ − κ₁,ₛₛκ₂,ₛ. The system is fifth order; the fourth
/// derivatives are set to 1 like the rest of the data.
pub fn second_order_torsion() -> Fixture {
    Fixture {
        name: "second-order-torsion",
        lagrangian: "D(k1,1)*D(k2,2) - D(k1,2)*D(k2,1)",
        ics: vec![
            ("k1", 1.0),
            ("k2", 0.5),
            ("k1_s", 1.0),
            ("k2_s", 1.0),
            ("k1_ss", 1.0),
            ("k2_ss", 1.0),
            ("k1_sss", 1.0),
            ("k2_sss", 1.0),
            ("k1_ssss", 1.0),
            ("k2_ssss", 1.0),
        ],
        span: (0.0, 5.0),
        psi0: 0.0,
        z0: None,
    }
}

/// L = ½(κ₁² + κ₂²).
pub fn elastic() -> Fixture {
    Fixture {
        name: "elastic",
        lagrangian: "0.5*(k1^2 + k2^2)",
        ics: vec![("k1", 1.0), ("k2", 0.0), ("k1_s", 0.0), ("k2_s", 0.0), ("mu", 0.0)],
        span: (0.0, 5.0),
        psi0: 0.0,
        z0: None,
    }
}

pub fn worked_examples() -> Vec<Fixture> {
    vec![ratio_squared(), first_order_torsion(), second_order_torsion()]
}

pub fn by_name(name: &str) -> Option<Fixture> {
    [ratio_squared(), first_order_torsion(), second_order_torsion(), elastic()]
        .into_iter()
        .find(|f| f.name == name)
}
