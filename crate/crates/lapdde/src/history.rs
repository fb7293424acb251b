//! Densely sampled solution records with delayed lookups.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{NetworkSignal, Prehistory, TIME_TOL};

/// Solution record over `[t0 - h_bar, t_end]`: uniform samples from `t0`
/// onward plus the prehistory function, which is evaluated exactly (never
/// resampled). Lookups between samples use linear interpolation.
#[derive(Debug, Clone)]
pub struct TrajectoryHistory {
    t0: f64,
    step: f64,
    h_bar: f64,
    prehistory: Prehistory,
    samples: Vec<Vec<f64>>,
}

impl TrajectoryHistory {
    pub fn new(
        t0: f64,
        step: f64,
        h_bar: f64,
        prehistory: Prehistory,
        samples: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if step <= 0.0 {
            return Err(Error::config("history step must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::config("history needs at least the initial sample"));
        }
        Ok(TrajectoryHistory { t0, step, h_bar, prehistory, samples })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn h_bar(&self) -> f64 {
        self.h_bar
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + (self.samples.len() - 1) as f64 * self.step
    }

    pub fn n(&self) -> usize {
        self.samples[0].len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn prehistory(&self) -> &Prehistory {
        &self.prehistory
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        &self.samples[k]
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn time_of(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.step
    }

    pub fn final_state(&self) -> &[f64] {
        self.samples.last().unwrap()
    }

    /// Component `j` at time `t`. Times at or after `t0` interpolate the
    /// sample grid (the record is right-continuous at `t0`); times in
    /// `[t0 - h_bar, t0)` evaluate the prehistory exactly.
    pub fn component_at(&self, j: usize, t: f64) -> Result<f64> {
        if t >= self.t0 - TIME_TOL {
            let u = (t - self.t0) / self.step;
            let k = u.floor() as isize;
            let k = k.clamp(0, self.samples.len() as isize - 1) as usize;
            if t > self.t_end() + TIME_TOL {
                return Err(Error::out_of_range(format!(
                    "lookup at t={t} past recorded end {}",
                    self.t_end()
                )));
            }
            if k + 1 >= self.samples.len() {
                return Ok(self.samples[k][j]);
            }
            let frac = u - k as f64;
            let a = self.samples[k][j];
            let b = self.samples[k + 1][j];
            Ok(a + frac * (b - a))
        } else if t >= self.t0 - self.h_bar - TIME_TOL {
            Ok(self.prehistory.component(j, t - self.t0))
        } else {
            Err(Error::out_of_range(format!(
                "lookup at t={t} before history start; covered range begins at {}",
                self.t0 - self.h_bar
            )))
        }
    }

    pub fn state_at(&self, t: f64) -> Result<Vec<f64>> {
        (0..self.n()).map(|j| self.component_at(j, t)).collect()
    }

    /// CSV export with header `t,x_1,...,x_n`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t")?;
        for j in 1..=self.n() {
            write!(w, ",x_{j}")?;
        }
        writeln!(w)?;
        for (k, state) in self.samples.iter().enumerate() {
            write!(w, "{:.16e}", self.time_of(k))?;
            for v in state {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Delayed lookup `x_j(t - h_ij(t))` of the value of agent `j` as seen by
/// agent `i` at time `t`.
pub fn lookup_delayed(
    history: &TrajectoryHistory,
    signal: &NetworkSignal,
    i: usize,
    j: usize,
    t: f64,
) -> Result<f64> {
    let h = signal.delay(i, j, t)?;
    history.component_at(j, t - h)
}
