use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// First-order state of the 14-dimensional system.
///
/// Layout (fixed, used everywhere a flat vector appears):
///
/// ```text
///  0 h_e      mean excitatory soma potential        (mV)
///  1 h_i      mean inhibitory soma potential        (mV)
///  2 I_ee     e->e synaptic input                   (mV)
///  3 I_ee'                                          (mV/s)
///  4 I_ei     e->i synaptic input                   (mV)
///  5 I_ei'                                          (mV/s)
///  6 I_ie     i->e synaptic input                   (mV)
///  7 I_ie'                                          (mV/s)
///  8 I_ii     i->i synaptic input                   (mV)
///  9 I_ii'                                          (mV/s)
/// 10 phi_ee   long-range e->e pulse rate            (1/s)
/// 11 phi_ee'                                        (1/s^2)
/// 12 phi_ei   long-range e->i pulse rate            (1/s)
/// 13 phi_ei'                                        (1/s^2)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub [f64; 14]);

/// Number of dynamical variables.
pub const DIM: usize = 14;

// Component indices.
pub const H_E: usize = 0;
pub const H_I: usize = 1;
pub const I_EE: usize = 2;
pub const D_EE: usize = 3;
pub const I_EI: usize = 4;
pub const D_EI: usize = 5;
pub const I_IE: usize = 6;
pub const D_IE: usize = 7;
pub const I_II: usize = 8;
pub const D_II: usize = 9;
pub const PHI_EE: usize = 10;
pub const DPHI_EE: usize = 11;
pub const PHI_EI: usize = 12;
pub const DPHI_EI: usize = 13;

impl StateVector {
    pub const DIM: usize = DIM;

    pub fn zeros() -> Self {
        StateVector([0.0; DIM])
    }

    /// The equilibration start point: `h_e = h_i = -70 mV`, all other
    /// variables zero.
    pub fn rest_guess() -> Self {
        let mut x = [0.0; DIM];
        x[H_E] = -70.0;
        x[H_I] = -70.0;
        StateVector(x)
    }

    pub fn h_e(&self) -> f64 {
        self.0[H_E]
    }

    pub fn h_i(&self) -> f64 {
        self.0[H_I]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.0)
    }

    pub fn from_slice(s: &[f64]) -> Self {
        let mut x = [0.0; DIM];
        x.copy_from_slice(&s[..DIM]);
        StateVector(x)
    }
}

impl std::ops::Index<usize> for StateVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for StateVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}
