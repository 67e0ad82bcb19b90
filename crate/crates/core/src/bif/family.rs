//! A parameterized ODE family, the substrate every bifurcation computation
//! works on. The mean-field model plugs in through [`LileyFamily`]; analytic
//! normal forms implement the trait directly in tests.

use nalgebra::{DMatrix, DVector};

use crate::model::{jacobian, rhs, state_scales, Modulation, ParameterSet, StateVector};
use crate::solver;

/// A finite-dimensional ODE system `x' = f(x, p)` with a small number of
/// active continuation parameters.
pub trait OdeFamily {
    fn dim(&self) -> usize;
    fn n_params(&self) -> usize;

    fn f(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64>;

    /// Jacobian with respect to the state. Default: central differences.
    fn jac_x(&self, x: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let scales = self.state_scales();
        let mut j = DMatrix::zeros(n, n);
        for col in 0..n {
            let h = 1e-6 * scales[col].max(1e-12);
            let mut up = x.clone();
            let mut um = x.clone();
            up[col] += h;
            um[col] -= h;
            j.set_column(col, &((self.f(&up, p) - self.f(&um, p)) / (2.0 * h)));
        }
        j
    }

    /// Jacobian with respect to the active parameters (central differences).
    fn jac_p(&self, x: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let np = self.n_params();
        let scales = self.param_scales();
        let mut j = DMatrix::zeros(n, np);
        for col in 0..np {
            let h = 1e-6 * scales[col].max(1e-12);
            let mut up = p.clone();
            let mut um = p.clone();
            up[col] += h;
            um[col] -= h;
            j.set_column(col, &((self.f(x, &up) - self.f(x, &um)) / (2.0 * h)));
        }
        j
    }

    fn state_scales(&self) -> DVector<f64> {
        DVector::from_element(self.dim(), 1.0)
    }

    fn param_scales(&self) -> DVector<f64> {
        DVector::from_element(self.n_params(), 1.0)
    }

    /// Magnitude scale of each component of `f`.
    fn f_scales(&self) -> DVector<f64> {
        DVector::from_element(self.dim(), 1.0)
    }

    /// Continuation window on the active parameters.
    fn param_window(&self) -> Vec<(f64, f64)> {
        vec![(f64::NEG_INFINITY, f64::INFINITY); self.n_params()]
    }

    fn in_window(&self, p: &DVector<f64>) -> bool {
        self.param_window()
            .iter()
            .zip(p.iter())
            .all(|((lo, hi), v)| v >= lo && v <= hi)
    }

    /// State Jacobian rescaled by similarity with the state scales, so its
    /// entries are O(1)-comparable while the spectrum is unchanged.
    fn jac_x_scaled(&self, x: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        let mut j = self.jac_x(x, p);
        let d = self.state_scales();
        let n = self.dim();
        for r in 0..n {
            for c in 0..n {
                j[(r, c)] = j[(r, c)] * d[c] / d[r];
            }
        }
        j
    }
}

/// Which model parameter a continuation axis drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    R,
    K,
    Pei,
    Pee,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::R => "R",
            Axis::K => "k",
            Axis::Pei => "p_ei",
            Axis::Pee => "p_ee",
        }
    }

    pub fn scale(&self) -> f64 {
        match self {
            Axis::R | Axis::K => 1.0,
            Axis::Pei | Axis::Pee => 1_000.0,
        }
    }
}

/// The mean-field model as an [`OdeFamily`] over a chosen set of active
/// axes; inactive modulation and drive values stay at `base_m` and the
/// values stored in `params`.
#[derive(Debug, Clone)]
pub struct LileyFamily {
    pub params: ParameterSet,
    pub base_m: Modulation,
    pub axes: Vec<Axis>,
    /// Per-axis `(min, max)` continuation window.
    pub window: Vec<(f64, f64)>,
}

impl LileyFamily {
    pub fn new(params: ParameterSet, axes: Vec<Axis>, window: Vec<(f64, f64)>) -> Self {
        assert_eq!(axes.len(), window.len());
        LileyFamily {
            params,
            base_m: Modulation::IDENTITY,
            axes,
            window,
        }
    }

    /// Resolve the active parameter vector into a concrete `(params, m)`.
    pub fn resolve(&self, p: &DVector<f64>) -> (ParameterSet, Modulation) {
        let mut params = self.params;
        let mut m = self.base_m;
        for (axis, &value) in self.axes.iter().zip(p.iter()) {
            match axis {
                Axis::R => m.r = value,
                Axis::K => m.k = value,
                Axis::Pei => params.p_ei = value,
                Axis::Pee => params.p_ee = value,
            }
        }
        (params, m)
    }
}

impl OdeFamily for LileyFamily {
    fn dim(&self) -> usize {
        StateVector::DIM
    }

    fn n_params(&self) -> usize {
        self.axes.len()
    }

    fn f(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        let (params, m) = self.resolve(p);
        rhs(&StateVector::from_slice(x.as_slice()), &params, m).to_dvector()
    }

    fn jac_x(&self, x: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        let (params, m) = self.resolve(p);
        jacobian(&StateVector::from_slice(x.as_slice()), &params, m)
    }

    fn state_scales(&self) -> DVector<f64> {
        state_scales(&self.params)
    }

    fn param_scales(&self) -> DVector<f64> {
        // Wide continuation windows widen the scale so arclength steps cover
        // them in a bounded number of points.
        DVector::from_iterator(
            self.axes.len(),
            self.axes
                .iter()
                .zip(self.window.iter())
                .map(|(a, (lo, hi))| a.scale().max((hi - lo) / 10.0)),
        )
    }

    fn f_scales(&self) -> DVector<f64> {
        solver::rhs_row_scales(&self.params)
    }

    fn param_window(&self) -> Vec<(f64, f64)> {
        self.window.clone()
    }
}
