//! Fixed-step fourth-order Runge-Kutta over flat `f64` state vectors.

/// Scratch buffers for repeated RK4 steps on a state of fixed length.
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(len: usize) -> Self {
        Rk4 {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            tmp: vec![0.0; len],
        }
    }

    /// Advances `state` from `t` to `t + dt`. `deriv(t, x, dx)` writes the
    /// time derivative of `x` into `dx`.
    pub fn step<E, F>(&mut self, state: &mut [f64], t: f64, dt: f64, mut deriv: F) -> Result<(), E>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    {
        let half = 0.5 * dt;
        deriv(t, state, &mut self.k1)?;
        for ((x, k), y) in state.iter().zip(&self.k1).zip(self.tmp.iter_mut()) {
            *y = x + half * k;
        }
        deriv(t + half, &self.tmp, &mut self.k2)?;
        for ((x, k), y) in state.iter().zip(&self.k2).zip(self.tmp.iter_mut()) {
            *y = x + half * k;
        }
        deriv(t + half, &self.tmp, &mut self.k3)?;
        for ((x, k), y) in state.iter().zip(&self.k3).zip(self.tmp.iter_mut()) {
            *y = x + dt * k;
        }
        deriv(t + dt, &self.tmp, &mut self.k4)?;
        for (i, x) in state.iter_mut().enumerate() {
            *x += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}
