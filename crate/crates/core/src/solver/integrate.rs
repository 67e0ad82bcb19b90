use nalgebra::DVector;

/// One classical Runge-Kutta step of size `dt` for an autonomous system.
pub fn rk4_step(f: &dyn Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, dt: f64) -> DVector<f64> {
    let k1 = f(x);
    let k2 = f(&(x + 0.5 * dt * &k1));
    let k3 = f(&(x + 0.5 * dt * &k2));
    let k4 = f(&(x + dt * &k3));
    x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Dormand-Prince 5(4) adaptive integration of an autonomous system from
/// `t = 0` to `t = t_end`. Error control uses `rtol` relative to the
/// per-component `scales`. `on_step` is called with `(t, x)` after every
/// accepted step (and once at the start).
pub fn integrate_adaptive(
    f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    x0: &DVector<f64>,
    t_end: f64,
    rtol: f64,
    scales: &DVector<f64>,
    mut on_step: impl FnMut(f64, &DVector<f64>),
) -> DVector<f64> {
    // Dormand-Prince coefficients.
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let mut x = x0.clone();
    let mut t = 0.0_f64;
    let mut dt = (t_end / 100.0).min(1e-4).max(1e-9);
    on_step(t, &x);

    let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
    while t < t_end {
        dt = dt.min(t_end - t);
        k.clear();
        k.push(f(&x));
        for (i, row) in A.iter().enumerate() {
            let mut xi = x.clone();
            for (j, &a) in row.iter().enumerate().take(i + 1) {
                if a != 0.0 {
                    xi += dt * a * &k[j];
                }
            }
            k.push(f(&xi));
        }
        let mut x5 = x.clone();
        let mut x4 = x.clone();
        for i in 0..7 {
            if B5[i] != 0.0 {
                x5 += dt * B5[i] * &k[i];
            }
            if B4[i] != 0.0 {
                x4 += dt * B4[i] * &k[i];
            }
        }
        let err = (x5
            .iter()
            .zip(x4.iter())
            .zip(scales.iter())
            .map(|((a, b), s)| ((a - b) / (rtol * s)).powi(2))
            .sum::<f64>()
            / x.len() as f64)
            .sqrt();
        if err <= 1.0 || dt <= 1e-12 {
            t += dt;
            x = x5;
            on_step(t, &x);
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        dt = (dt * factor).max(1e-12);
    }
    x
}
