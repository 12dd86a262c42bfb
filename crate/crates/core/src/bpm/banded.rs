//! Complex symmetric pentadiagonal solves for the Crank-Nicolson systems.
//!
//! The matrices have the form `I + iH` with `H` real symmetric apart from
//! absorber and boundary terms, so their Hermitian part is positive definite
//! and an `LDLᵀ` factorization without pivoting is stable.

use crate::field::C64;

/// Symmetric band with `a0[i] = A[i][i]`, `a1[i] = A[i][i+1]`,
/// `a2[i] = A[i][i+2]`.
#[derive(Debug, Clone, Default)]
pub(crate) struct SymmetricBand {
    pub a0: Vec<C64>,
    pub a1: Vec<C64>,
    pub a2: Vec<C64>,
}

impl SymmetricBand {
    pub fn zeros(n: usize) -> Self {
        let z = C64::new(0.0, 0.0);
        Self { a0: vec![z; n], a1: vec![z; n.saturating_sub(1)], a2: vec![z; n.saturating_sub(2)] }
    }

    pub fn len(&self) -> usize {
        self.a0.len()
    }

    /// `out = A x`.
    pub fn mul(&self, x: &[C64], out: &mut Vec<C64>) {
        let n = self.len();
        out.clear();
        out.extend((0..n).map(|i| self.a0[i] * x[i]));
        for i in 0..n.saturating_sub(1) {
            out[i] += self.a1[i] * x[i + 1];
            out[i + 1] += self.a1[i] * x[i];
        }
        for i in 0..n.saturating_sub(2) {
            out[i] += self.a2[i] * x[i + 2];
            out[i + 2] += self.a2[i] * x[i];
        }
    }
}

/// Reusable factor storage.
#[derive(Debug, Clone, Default)]
pub(crate) struct Workspace {
    d: Vec<C64>,
    l1: Vec<C64>,
    l2: Vec<C64>,
}

/// Solves `A x = rhs` in place.
pub(crate) fn solve(a: &SymmetricBand, rhs: &mut [C64], work: &mut Workspace) {
    let n = a.len();
    debug_assert_eq!(rhs.len(), n);
    let zero = C64::new(0.0, 0.0);
    let Workspace { d, l1, l2 } = work;
    d.clear();
    l1.clear();
    l2.clear();
    d.resize(n, zero);
    l1.resize(n, zero);
    l2.resize(n, zero);
    for i in 0..n {
        let mut di = a.a0[i];
        if i >= 1 {
            di -= l1[i - 1] * l1[i - 1] * d[i - 1];
        }
        if i >= 2 {
            di -= l2[i - 2] * l2[i - 2] * d[i - 2];
        }
        d[i] = di;
        if i + 1 < n {
            let mut v = a.a1[i];
            if i >= 1 {
                v -= l2[i - 1] * d[i - 1] * l1[i - 1];
            }
            l1[i] = v / di;
        }
        if i + 2 < n {
            l2[i] = a.a2[i] / di;
        }
    }
    for i in 0..n {
        if i >= 1 {
            let p = rhs[i - 1];
            rhs[i] -= l1[i - 1] * p;
        }
        if i >= 2 {
            let p = rhs[i - 2];
            rhs[i] -= l2[i - 2] * p;
        }
    }
    for i in 0..n {
        rhs[i] /= d[i];
    }
    for i in (0..n).rev() {
        if i + 1 < n {
            let p = rhs[i + 1];
            rhs[i] -= l1[i] * p;
        }
        if i + 2 < n {
            let p = rhs[i + 2];
            rhs[i] -= l2[i] * p;
        }
    }
}
