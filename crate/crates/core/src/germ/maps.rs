//! Linear maps on `M_n` written as finite sums `B ↦ Σ_t c_t A_t B C_t`.

use crate::linalg::{self, Mat, C64, ONE};

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coef: C64,
    pub left: Mat,
    pub right: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixMap {
    n: usize,
    terms: Vec<Term>,
}

impl MatrixMap {
    pub fn zero(n: usize) -> Self {
        MatrixMap { n, terms: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::sandwich(linalg::identity(n), linalg::identity(n))
    }

    /// `B ↦ left · B · right`.
    pub fn sandwich(left: Mat, right: Mat) -> Self {
        let n = left.nrows();
        MatrixMap { n, terms: vec![Term { coef: ONE, left, right }] }
    }

    pub fn left_mul(a: Mat) -> Self {
        let n = a.nrows();
        Self::sandwich(a, linalg::identity(n))
    }

    pub fn right_mul(a: Mat) -> Self {
        let n = a.nrows();
        Self::sandwich(linalg::identity(n), a)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn push(&mut self, coef: C64, left: Mat, right: Mat) {
        self.terms.push(Term { coef, left, right });
    }

    pub fn plus(mut self, other: &MatrixMap) -> Self {
        self.terms.extend(other.terms.iter().cloned());
        self
    }

    pub fn scaled(mut self, z: C64) -> Self {
        for t in &mut self.terms {
            t.coef *= z;
        }
        self
    }

    pub fn apply(&self, b: &Mat) -> Mat {
        let mut out = linalg::zeros(self.n, self.n);
        for t in &self.terms {
            out += (&t.left * b * &t.right) * t.coef;
        }
        out
    }

    /// `B ↦ f(B†)†`.
    pub fn star(&self) -> Self {
        MatrixMap {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|t| Term { coef: t.coef.conj(), left: t.right.adjoint(), right: t.left.adjoint() })
                .collect(),
        }
    }

    /// Trace dual: `tr(ρ f(B)) = tr(f'(ρ) B)`.
    pub fn trace_dual(&self) -> Self {
        MatrixMap {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|t| Term { coef: t.coef, left: t.right.clone(), right: t.left.clone() })
                .collect(),
        }
    }

    /// `n² x n²` matrix acting on column-stacked `vec(B)`.
    pub fn superoperator(&self) -> Mat {
        let n2 = self.n * self.n;
        let mut s = linalg::zeros(n2, n2);
        for t in &self.terms {
            s += linalg::kron(&t.right.transpose(), &t.left) * t.coef;
        }
        s
    }
}
