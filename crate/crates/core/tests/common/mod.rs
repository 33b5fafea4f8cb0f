#![allow(dead_code)]

use maxgraph::{Domain, ExprField, JobConfig, Mode};

pub struct Case {
    pub name: &'static str,
    pub domain: Domain,
    pub kappa: f64,
    pub phi: Vec<&'static str>,
}

impl Case {
    pub fn field(&self) -> ExprField {
        ExprField::parse(self.domain.dim(), &self.phi).unwrap()
    }

    pub fn job(&self, mode: Mode, h: f64) -> JobConfig {
        let mut job = job(self.domain.clone(), &self.phi, self.kappa, h);
        job.name = Some(self.name.to_string());
        job.mode = Some(mode);
        job
    }
}

pub fn job(domain: Domain, phi: &[&str], kappa: f64, h: f64) -> JobConfig {
    let text = serde_json::json!({
        "domain": domain,
        "m": domain.dim(),
        "n": phi.len(),
        "phi": phi,
        "kappa": kappa,
        "h": h,
    });
    serde_json::from_value(text).unwrap()
}

/// The small-data disc benchmark. Its boundary data do not meet the
/// hypothesis inequality, but the solve converges comfortably.
pub const BENCHMARK: [&str; 2] = ["0.05*sin(x1 + x2)", "0.05*cos(x1 - x2)"];

pub fn benchmark() -> ExprField {
    ExprField::parse(2, &BENCHMARK).unwrap()
}

/// Data that satisfy the hypothesis inequality.
pub fn hypothesis_set() -> Vec<Case> {
    let disc = Domain::unit_disc;
    vec![
        Case {
            name: "trig",
            domain: disc(),
            kappa: 0.25,
            phi: vec!["0.004*sin(x1 + x2)", "0.004*cos(x1 - x2)"],
        },
        Case {
            name: "affine",
            domain: disc(),
            kappa: 0.25,
            phi: vec!["0.2*x1 + 0.1*x2 + 0.3", "-0.1*x1 + 0.15*x2 - 0.2"],
        },
        Case {
            name: "holomorphic_square",
            domain: disc(),
            kappa: 0.25,
            phi: vec!["0.003*(x1^2 - x2^2)", "0.006*x1*x2"],
        },
        Case {
            name: "scalar",
            domain: disc(),
            kappa: 0.25,
            phi: vec!["0.005*x1*x2 + 0.1*x1"],
        },
        Case {
            name: "superellipse",
            domain: Domain::Superellipse {
                center: vec![0.0, 0.0],
                semi_axes: vec![1.0, 0.8],
                exponent: 4.0,
            },
            kappa: 0.25,
            phi: vec!["0.003*sin(x1 + x2)", "0.003*cos(x1 - x2)"],
        },
        Case {
            name: "trig_kappa_half",
            domain: disc(),
            kappa: 0.5,
            phi: vec!["0.002*sin(x1 + x2)", "0.002*cos(x1 - x2)"],
        },
    ]
}

/// Restricts a fine-grid field to the points of a grid with twice the spacing.
pub fn restrict(coarse: &maxgraph::DomainGrid, fine: &maxgraph::DomainGrid, u: &maxgraph::VectorField) -> Vec<Vec<f64>> {
    (0..coarse.len())
        .map(|p| {
            let key: Vec<i64> = coarse.key(p).iter().map(|k| 2 * k).collect();
            let q = fine.index_of(&key).expect("coarse point on the fine grid");
            for (a, b) in coarse.point(p).iter().zip(fine.point(q)) {
                assert!((a - b).abs() < 1e-12);
            }
            u.value(q).to_vec()
        })
        .collect()
}
