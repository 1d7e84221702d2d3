//! Minimal fixed-size vector/matrix arithmetic shared by every module.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// A point (or 3-vector) in R^3.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl Point3 {
    pub const ZERO: Point3 = Point3 { x1: 0.0, x2: 0.0, x3: 0.0 };

    pub fn new(x1: f64, x2: f64, x3: f64) -> Point3 {
        Point3 { x1, x2, x3 }
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x1 * o.x1 + self.x2 * o.x2 + self.x3 * o.x3
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3 {
            x1: self.x2 * o.x3 - self.x3 * o.x2,
            x2: self.x3 * o.x1 - self.x1 * o.x3,
            x3: self.x1 * o.x2 - self.x2 * o.x1,
        }
    }

    pub fn outer(self, o: Point3) -> Mat3 {
        Mat3([
            self.x1 * o.x1,
            self.x1 * o.x2,
            self.x1 * o.x3,
            self.x2 * o.x1,
            self.x2 * o.x2,
            self.x2 * o.x3,
            self.x3 * o.x1,
            self.x3 * o.x2,
            self.x3 * o.x3,
        ])
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn inf_norm(self) -> f64 {
        self.x1.abs().max(self.x2.abs()).max(self.x3.abs())
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.x3.is_finite()
    }

    pub fn comp(self, k: usize) -> f64 {
        match k {
            0 => self.x1,
            1 => self.x2,
            2 => self.x3,
            _ => panic!("component index out of range: {k}"),
        }
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x1 + o.x1, self.x2 + o.x2, self.x3 + o.x3)
    }
}

impl AddAssign for Point3 {
    fn add_assign(&mut self, o: Point3) {
        self.x1 += o.x1;
        self.x2 += o.x2;
        self.x3 += o.x3;
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x1 - o.x1, self.x2 - o.x2, self.x3 - o.x3)
    }
}

impl SubAssign for Point3 {
    fn sub_assign(&mut self, o: Point3) {
        self.x1 -= o.x1;
        self.x2 -= o.x2;
        self.x3 -= o.x3;
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x1, -self.x2, -self.x3)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x1 * s, self.x2 * s, self.x3 * s)
    }
}

/// Row-major 3x3 matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Mat3(pub [f64; 9]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([0.0; 9]);
    pub const IDENTITY: Mat3 = Mat3([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);

    pub fn matvec(&self, v: Point3) -> Point3 {
        let m = &self.0;
        Point3 {
            x1: m[0] * v.x1 + m[1] * v.x2 + m[2] * v.x3,
            x2: m[3] * v.x1 + m[4] * v.x2 + m[5] * v.x3,
            x3: m[6] * v.x1 + m[7] * v.x2 + m[8] * v.x3,
        }
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn inf_norm(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, a| acc.max(a.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.is_finite())
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut r = [0.0; 9];
        for k in 0..9 {
            r[k] = self.0[k] + o.0[k];
        }
        Mat3(r)
    }
}

impl AddAssign for Mat3 {
    fn add_assign(&mut self, o: Mat3) {
        for k in 0..9 {
            self.0[k] += o.0[k];
        }
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        let mut r = [0.0; 9];
        for k in 0..9 {
            r[k] = self.0[k] - o.0[k];
        }
        Mat3(r)
    }
}

impl Neg for Mat3 {
    type Output = Mat3;
    fn neg(self) -> Mat3 {
        let mut r = [0.0; 9];
        for k in 0..9 {
            r[k] = -self.0[k];
        }
        Mat3(r)
    }
}

impl Mul<f64> for Mat3 {
    type Output = Mat3;
    fn mul(self, s: f64) -> Mat3 {
        let mut r = [0.0; 9];
        for k in 0..9 {
            r[k] = self.0[k] * s;
        }
        Mat3(r)
    }
}

/// Square sparse matrix in compressed-sparse-row layout with per-row
/// column indices sorted ascending.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub offsets: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from unsorted (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(u32, u32, f64)>) -> CsrMatrix {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut offsets = vec![0usize; n + 1];
        let mut cols: Vec<u32> = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut row = 0usize;
        for (r, c, v) in triplets {
            while row < r as usize {
                row += 1;
                offsets[row] = cols.len();
            }
            if cols.len() > offsets[row] && *cols.last().unwrap() == c {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
            }
        }
        while row < n {
            row += 1;
            offsets[row] = cols.len();
        }
        CsrMatrix { n, offsets, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for t in self.offsets[i]..self.offsets[i + 1] {
                acc += self.vals[t] * x[self.cols[t] as usize];
            }
            y[i] = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for t in self.offsets[i]..self.offsets[i + 1] {
                if self.cols[t] as usize == i {
                    d[i] = self.vals[t];
                }
            }
        }
        d
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let lo = self.offsets[i];
        let hi = self.offsets[i + 1];
        match self.cols[lo..hi].binary_search(&(j as u32)) {
            Ok(p) => self.vals[lo + p],
            Err(_) => 0.0,
        }
    }

    /// max |a_ij − a_ji| over stored entries.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for t in self.offsets[i]..self.offsets[i + 1] {
                let j = self.cols[t] as usize;
                worst = worst.max((self.vals[t] - self.entry(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}
