use crate::error::{Error, Result};

/// Uniform grid `t_j = j·dt`, `j = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    /// `steps = round(tmax / dt)`.
    pub fn new(dt: f64, tmax: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if !(tmax.is_finite() && tmax >= dt) {
            return Err(Error::InvalidArgument(format!("tmax must be >= dt, got tmax = {tmax}, dt = {dt}")));
        }
        let steps = (tmax / dt).round() as usize;
        Ok(TimeGrid { dt, steps: steps.max(1) })
    }

    pub fn from_steps(tmax: f64, steps: usize) -> Result<Self> {
        if steps < 1 {
            return Err(Error::InvalidArgument("step count must be at least 1".into()));
        }
        if !(tmax.is_finite() && tmax > 0.0) {
            return Err(Error::InvalidArgument(format!("tmax must be positive, got {tmax}")));
        }
        Ok(TimeGrid { dt: tmax / steps as f64, steps })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tmax(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.steps).map(|j| self.time(j)).collect()
    }

    /// Grid with `factor` times as many steps over the same horizon.
    pub fn refined(&self, factor: usize) -> Self {
        TimeGrid { dt: self.dt / factor as f64, steps: self.steps * factor }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shapes() {
        let g = TimeGrid::new(1e-3, 2.0).unwrap();
        assert_eq!(g.steps(), 2000);
        assert_eq!(g.points().len(), 2001);
        assert_eq!(g.time(0), 0.0);
        assert!(g.points().windows(2).all(|w| w[1] > w[0]));
        assert!((g.tmax() - 2.0).abs() < 1e-12);
        assert!(TimeGrid::new(0.0, 1.0).is_err());
        assert!(TimeGrid::new(0.5, 0.1).is_err());
        assert!(TimeGrid::from_steps(1.0, 0).is_err());
        assert_eq!(TimeGrid::from_steps(1.0, 4).unwrap().dt(), 0.25);
    }
}
