//! Catalog of smooth vector fields with closed-form derivatives, used to
//! drive local-limit studies and analytic CLI inputs.

use crate::error::{NlvcError, Result};
use crate::linalg::Point3;

/// A smooth vector field together with its exact Laplacian and
/// gradient-of-divergence, from which the curl-curl follows as
/// ∇×∇×w = ∇(∇·w) − Δw.
#[derive(Clone, Copy)]
pub struct AnalyticField {
    pub name: &'static str,
    pub f: fn(Point3) -> Point3,
    pub laplacian: fn(Point3) -> Point3,
    pub grad_div: fn(Point3) -> Point3,
}

impl AnalyticField {
    pub fn curl_curl(&self, p: Point3) -> Point3 {
        (self.grad_div)(p) - (self.laplacian)(p)
    }
}

const CATALOG: &[AnalyticField] = &[
    // w = (sin x1, 0, 0): generic smooth field with nonzero Laplacian.
    AnalyticField {
        name: "sin_x1",
        f: |p| Point3::new(p.x1.sin(), 0.0, 0.0),
        laplacian: |p| Point3::new(-p.x1.sin(), 0.0, 0.0),
        grad_div: |p| Point3::new(-p.x1.sin(), 0.0, 0.0),
    },
    // w = (sin x2 sinh x3, 0, 0): first component harmonic in (x2, x3),
    // divergence-free; Δw = 0 and ∇(∇·w) = 0.
    AnalyticField {
        name: "harmonic_transverse",
        f: |p| Point3::new(p.x2.sin() * p.x3.sinh(), 0.0, 0.0),
        laplacian: |_| Point3::ZERO,
        grad_div: |_| Point3::ZERO,
    },
    // w = (x1^2, 0, 0): polynomial with constant second derivatives.
    AnalyticField {
        name: "quadratic_x1",
        f: |p| Point3::new(p.x1 * p.x1, 0.0, 0.0),
        laplacian: |_| Point3::new(2.0, 0.0, 0.0),
        grad_div: |_| Point3::new(2.0, 0.0, 0.0),
    },
    // w = (x1^2 - x2^2, 2 x1 x2, 0): componentwise harmonic, curl-free,
    // with ∇·w = 4 x1.
    AnalyticField {
        name: "harmonic_quadratic",
        f: |p| Point3::new(p.x1 * p.x1 - p.x2 * p.x2, 2.0 * p.x1 * p.x2, 0.0),
        laplacian: |_| Point3::ZERO,
        grad_div: |_| Point3::new(4.0, 0.0, 0.0),
    },
    // w = (|x|^2, 0, 0): radial quadratic, Δw = (6, 0, 0).
    AnalyticField {
        name: "quadratic_radial",
        f: |p| Point3::new(p.norm_sq(), 0.0, 0.0),
        laplacian: |_| Point3::new(6.0, 0.0, 0.0),
        grad_div: |_| Point3::new(2.0, 0.0, 0.0),
    },
];

pub fn catalog() -> &'static [AnalyticField] {
    CATALOG
}

pub fn lookup(name: &str) -> Result<&'static AnalyticField> {
    CATALOG.iter().find(|f| f.name == name).ok_or_else(|| {
        let names: Vec<&str> = CATALOG.iter().map(|f| f.name).collect();
        NlvcError::InvalidInput(format!(
            "unknown analytic field {name:?} (available: {})",
            names.join(", ")
        ))
    })
}
