//! Ideal transfer-matrix algebra on the {TE₀, TE₁} qubit basis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Amplitudes of |0⟩ (TE₀) and |1⟩ (TE₁).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    pub c0: C64,
    pub c1: C64,
}

impl QubitState {
    pub const ZERO: QubitState = QubitState { c0: ONE, c1: ZERO };
    pub const ONE: QubitState = QubitState { c0: ZERO, c1: ONE };

    pub fn new(c0: C64, c1: C64) -> Self {
        Self { c0, c1 }
    }

    pub fn basis(bit: usize) -> Self {
        if bit == 0 {
            Self::ZERO
        } else {
            Self::ONE
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c0.norm_sqr() + self.c1.norm_sqr()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Degenerate("qubit state has zero norm".into()));
        }
        Ok(Self { c0: self.c0 / n, c1: self.c1 / n })
    }

    pub fn inner(&self, other: &QubitState) -> C64 {
        self.c0.conj() * other.c0 + self.c1.conj() * other.c1
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self { c0: self.c0 * s, c1: self.c1 * s }
    }
}

/// 2×2 complex matrix acting on `(c0, c1)`, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix2 {
    pub m: [[C64; 2]; 2],
}

impl TransferMatrix2 {
    pub fn identity() -> Self {
        Self { m: [[ONE, ZERO], [ZERO, ONE]] }
    }

    pub fn from_columns(col0: QubitState, col1: QubitState) -> Self {
        Self { m: [[col0.c0, col1.c0], [col0.c1, col1.c1]] }
    }

    pub fn column(&self, j: usize) -> QubitState {
        QubitState::new(self.m[0][j], self.m[1][j])
    }

    pub fn adjoint(&self) -> Self {
        let m = self.m;
        Self { m: [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]] }
    }

    pub fn trace(&self) -> C64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut out = *self;
        out.m.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    /// Largest entry of `|U†U − I|`.
    pub fn unitarity_defect(&self) -> f64 {
        max_deviation(&compose(&self.adjoint(), self), &Self::identity())
    }
}

/// `U(φ) = [[cos φ/2, i sin φ/2], [i sin φ/2, cos φ/2]]`.
pub fn mzi_unitary(phi: f64) -> TransferMatrix2 {
    let c = C64::new((phi / 2.0).cos(), 0.0);
    let s = I * (phi / 2.0).sin();
    TransferMatrix2 { m: [[c, s], [s, c]] }
}

pub fn apply(u: &TransferMatrix2, s: &QubitState) -> QubitState {
    QubitState::new(u.m[0][0] * s.c0 + u.m[0][1] * s.c1, u.m[1][0] * s.c0 + u.m[1][1] * s.c1)
}

/// Matrix product `a · b`: `b` acts first.
pub fn compose(a: &TransferMatrix2, b: &TransferMatrix2) -> TransferMatrix2 {
    let mut m = [[ZERO; 2]; 2];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = a.m[r][0] * b.m[0][c] + a.m[r][1] * b.m[1][c];
        }
    }
    TransferMatrix2 { m }
}

/// Largest entrywise modulus of `a − b`.
pub fn max_deviation(a: &TransferMatrix2, b: &TransferMatrix2) -> f64 {
    let mut worst = 0.0_f64;
    for r in 0..2 {
        for c in 0..2 {
            worst = worst.max((a.m[r][c] - b.m[r][c]).norm());
        }
    }
    worst
}

/// Gate fidelity `|tr(U_ref† U)/2|²`, insensitive to a global phase.
pub fn gate_fidelity(reference: &TransferMatrix2, u: &TransferMatrix2) -> f64 {
    (compose(&reference.adjoint(), u).trace() / 2.0).norm_sqr()
}

/// Global phase `e^{iα}` maximizing `Re tr(U_ref† e^{-iα} U)`, returned
/// together with the phase-aligned `e^{-iα} U`.
pub fn align_global_phase(reference: &TransferMatrix2, u: &TransferMatrix2) -> (f64, TransferMatrix2) {
    let t = compose(&reference.adjoint(), u).trace();
    let alpha = if t.norm() > 0.0 { t.arg() } else { 0.0 };
    (alpha, u.scaled(C64::from_polar(1.0, -alpha)))
}

/// Amplitudes over `|00⟩, |01⟩, |10⟩, |11⟩` (control ⊗ target).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitState {
    pub amplitudes: [C64; 4],
}

impl TwoQubitState {
    pub fn basis(control: usize, target: usize) -> Self {
        let mut amplitudes = [ZERO; 4];
        amplitudes[2 * (control & 1) + (target & 1)] = ONE;
        Self { amplitudes }
    }

    pub fn product(control: &QubitState, target: &QubitState) -> Self {
        Self { amplitudes: [control.c0 * target.c0, control.c0 * target.c1, control.c1 * target.c0, control.c1 * target.c1] }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &TwoQubitState) -> C64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Phase convention of the ideal C-NOT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CnotPhase {
    /// The flip carries the factor `i` of `mzi_unitary(π)`.
    #[default]
    Physical,
    /// Textbook phase-free swap.
    PhaseFree,
}

/// Swaps the `|10⟩` and `|11⟩` amplitudes; with [`CnotPhase::Physical`] the
/// swapped pair also picks up the factor `i`.
pub fn cnot_ideal(s: &TwoQubitState, phase: CnotPhase) -> TwoQubitState {
    let f = match phase {
        CnotPhase::Physical => I,
        CnotPhase::PhaseFree => ONE,
    };
    let a = s.amplitudes;
    TwoQubitState { amplitudes: [a[0], a[1], f * a[3], f * a[2]] }
}

/// Phases accumulated by the control light in the physical C-NOT, kept
/// separate from the target transfer. A control TE₁ photon crosses two
/// full-transfer couplers, each contributing `−i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoutingPhases {
    pub control_te0: C64,
    pub control_te1: C64,
}

impl RoutingPhases {
    pub fn separator_pair() -> Self {
        Self { control_te0: ONE, control_te1: -I * -I }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "snake_case")]
pub enum AnyState {
    Single(QubitState),
    Pair(TwoQubitState),
}

/// State fidelity `|⟨a|b⟩|²` for normalized inputs.
pub fn fidelity(a: &AnyState, b: &AnyState) -> Result<f64> {
    match (a, b) {
        (AnyState::Single(a), AnyState::Single(b)) => Ok(a.inner(b).norm_sqr()),
        (AnyState::Pair(a), AnyState::Pair(b)) => Ok(a.inner(b).norm_sqr()),
        _ => Err(Error::KindMismatch("cannot compare a one-qubit and a two-qubit state".into())),
    }
}

pub fn qubit_fidelity(a: &QubitState, b: &QubitState) -> f64 {
    a.inner(b).norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn close(a: &QubitState, b: &QubitState, tol: f64) -> bool {
        (a.c0 - b.c0).norm() < tol && (a.c1 - b.c1).norm() < tol
    }

    #[test]
    fn mzi_examples() {
        assert!(max_deviation(&mzi_unitary(0.0), &TransferMatrix2::identity()) == 0.0);
        let not = mzi_unitary(PI);
        assert!(not.m[0][0].norm() < 1e-15 && (not.m[0][1] - I).norm() < 1e-15);
        let half = apply(&mzi_unitary(PI / 2.0), &QubitState::ZERO);
        let expected = QubitState::new(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, FRAC_1_SQRT_2));
        assert!(close(&half, &expected, 1e-12));
    }

    #[test]
    fn apply_examples() {
        let s = QubitState::new(C64::new(0.6, 0.0), C64::new(0.0, 0.8));
        assert_eq!(apply(&TransferMatrix2::identity(), &s), s);
        assert!(close(&apply(&mzi_unitary(PI), &QubitState::ONE), &QubitState::new(I, ZERO), 1e-15));
        let u = mzi_unitary(PI / 2.0);
        let twice = apply(&u, &apply(&u, &QubitState::ZERO));
        assert!(close(&twice, &QubitState::new(ZERO, I), 1e-12));
    }

    #[test]
    fn compose_examples() {
        let u = mzi_unitary(0.7);
        assert!(max_deviation(&compose(&u, &TransferMatrix2::identity()), &u) < 1e-15);
        let minus = TransferMatrix2::identity().scaled(C64::new(-1.0, 0.0));
        assert!(max_deviation(&compose(&mzi_unitary(PI), &mzi_unitary(PI)), &minus) < 1e-12);
    }

    #[test]
    fn cnot_examples() {
        for phase in [CnotPhase::Physical, CnotPhase::PhaseFree] {
            assert_eq!(cnot_ideal(&TwoQubitState::basis(0, 0), phase), TwoQubitState::basis(0, 0));
            let flipped = cnot_ideal(&TwoQubitState::basis(1, 0), phase);
            assert_eq!(flipped.amplitudes[2], ZERO);
            assert!((flipped.amplitudes[3].norm() - 1.0).abs() < 1e-15);
        }
        assert_eq!(cnot_ideal(&TwoQubitState::basis(1, 0), CnotPhase::Physical).amplitudes[3], I);
    }

    #[test]
    fn cnot_twice_on_basis_is_a_phase() {
        for c in 0..2 {
            for t in 0..2 {
                let s = TwoQubitState::basis(c, t);
                let twice = cnot_ideal(&cnot_ideal(&s, CnotPhase::Physical), CnotPhase::Physical);
                let overlap = s.inner(&twice);
                assert!((overlap.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn routing_phase_of_two_crossings() {
        assert_eq!(RoutingPhases::separator_pair().control_te1, C64::new(-1.0, 0.0));
    }

    #[test]
    fn fidelity_examples() {
        let s = AnyState::Single(QubitState::new(C64::new(0.6, 0.0), C64::new(0.0, 0.8)));
        assert!((fidelity(&s, &s).unwrap() - 1.0).abs() < 1e-15);
        let z = AnyState::Single(QubitState::ZERO);
        assert_eq!(fidelity(&z, &AnyState::Single(QubitState::ONE)).unwrap(), 0.0);
        let plus = AnyState::Single(apply(&mzi_unitary(PI / 2.0), &QubitState::ZERO));
        assert!((fidelity(&z, &plus).unwrap() - 0.5).abs() < 1e-12);
        let pair = AnyState::Pair(TwoQubitState::basis(0, 0));
        assert!(matches!(fidelity(&z, &pair), Err(Error::KindMismatch(_))));
    }

    #[test]
    fn aligned_phase_recovers_reference() {
        let u = mzi_unitary(PI).scaled(C64::from_polar(1.0, 1.1));
        let (alpha, aligned) = align_global_phase(&mzi_unitary(PI), &u);
        assert!((alpha - 1.1).abs() < 1e-12);
        assert!(max_deviation(&aligned, &mzi_unitary(PI)) < 1e-12);
        assert!((gate_fidelity(&mzi_unitary(PI), &u) - 1.0).abs() < 1e-12);
    }

    fn state() -> impl Strategy<Value = QubitState> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("nonzero", |(a, b, c, d)| a * a + b * b + c * c + d * d > 1e-3)
            .prop_map(|(a, b, c, d)| QubitState::new(C64::new(a, b), C64::new(c, d)).normalized().unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn mzi_is_unitary(phi in -20.0f64..20.0) {
            prop_assert!(mzi_unitary(phi).unitarity_defect() < 1e-12);
        }

        #[test]
        fn mzi_group_property(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let lhs = compose(&mzi_unitary(a), &mzi_unitary(b));
            prop_assert!(max_deviation(&lhs, &mzi_unitary(a + b)) < 1e-12);
        }

        #[test]
        fn apply_preserves_norm(phi in -10.0f64..10.0, s in state()) {
            prop_assert!((apply(&mzi_unitary(phi), &s).norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn fidelity_ignores_global_phase(a in state(), b in state(), t in -PI..PI) {
            let f = qubit_fidelity(&a, &b);
            let g = qubit_fidelity(&a.scaled(C64::from_polar(1.0, t)), &b);
            prop_assert!((f - g).abs() < 1e-12);
        }

        #[test]
        fn cnot_is_involution(c in state(), t in state()) {
            let s = TwoQubitState::product(&c, &t);
            for phase in [CnotPhase::Physical, CnotPhase::PhaseFree] {
                let once = cnot_ideal(&s, phase);
                prop_assert!((once.norm_sqr() - s.norm_sqr()).abs() < 1e-12);
                let twice = cnot_ideal(&once, phase);
                // The physical convention leaves i² = −1 on the |1x⟩ block.
                let f = if phase == CnotPhase::Physical { C64::new(-1.0, 0.0) } else { ONE };
                let expected = [s.amplitudes[0], s.amplitudes[1], f * s.amplitudes[2], f * s.amplitudes[3]];
                for (x, y) in twice.amplitudes.iter().zip(expected) {
                    prop_assert!((x - y).norm() < 1e-12);
                }
            }
        }
    }
}
