use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of dx/dt = beta x(t - tau) / (1 + x(t - tau)^n) - gamma x(t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MackeyGlass {
    pub tau: f64,
    pub beta: f64,
    pub gamma: f64,
    pub n: f64,
    pub dt: f64,
    /// Constant value of x(t) for t <= 0.
    pub history: f64,
}

impl Default for MackeyGlass {
    fn default() -> Self {
        MackeyGlass {
            tau: 17.0,
            beta: 0.2,
            gamma: 0.1,
            n: 10.0,
            dt: 0.1,
            history: 1.2,
        }
    }
}

impl MackeyGlass {
    pub fn generate(&self, n_steps: usize) -> Result<Vec<f64>> {
        mackey_glass(
            n_steps,
            self.dt,
            self.tau,
            self.beta,
            self.gamma,
            self.n,
            self.history,
        )
    }
}

/// Integrates the Mackey-Glass equation with classical RK4 and returns
/// x(0), x(dt), ..., x((n_steps - 1) dt).
///
/// Delayed values between grid points are linearly interpolated. When the
/// delay is shorter than one step, substage lookups past the last computed
/// sample use that sample.
pub fn mackey_glass(
    n_steps: usize,
    dt: f64,
    tau: f64,
    beta: f64,
    gamma: f64,
    n: f64,
    history: f64,
) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Data(format!(
            "Mackey-Glass step must be positive, got {dt}"
        )));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::Data(format!(
            "Mackey-Glass delay must be nonnegative, got {tau}"
        )));
    }
    if n_steps == 0 {
        return Err(Error::Data("Mackey-Glass needs at least one step".into()));
    }
    if ![beta, gamma, n, history].iter().all(|v| v.is_finite()) {
        return Err(Error::Data("Mackey-Glass parameters must be finite".into()));
    }
    let f = |x: f64, xd: f64| beta * xd / (1.0 + xd.abs().powf(n)) - gamma * x;
    let mut xs = Vec::with_capacity(n_steps);
    xs.push(history);
    let delayed = |xs: &[f64], s: f64| -> f64 {
        // s is measured in steps; grid point i holds x(i dt)
        if s <= 0.0 {
            return history;
        }
        let last = (xs.len() - 1) as f64;
        if s >= last {
            return xs[xs.len() - 1];
        }
        let i = s.floor() as usize;
        let frac = s - i as f64;
        if frac == 0.0 {
            xs[i]
        } else {
            xs[i] + frac * (xs[i + 1] - xs[i])
        }
    };
    let lag = tau / dt;
    for i in 0..n_steps - 1 {
        let x = xs[i];
        let t = i as f64;
        let (k1, k2, k3, k4);
        if tau == 0.0 {
            k1 = f(x, x);
            let x2 = x + 0.5 * dt * k1;
            k2 = f(x2, x2);
            let x3 = x + 0.5 * dt * k2;
            k3 = f(x3, x3);
            let x4 = x + dt * k3;
            k4 = f(x4, x4);
        } else {
            let d0 = delayed(&xs, t - lag);
            let dh = delayed(&xs, t + 0.5 - lag);
            let d1 = delayed(&xs, t + 1.0 - lag);
            k1 = f(x, d0);
            k2 = f(x + 0.5 * dt * k1, dh);
            k3 = f(x + 0.5 * dt * k2, dh);
            k4 = f(x + dt * k3, d1);
        }
        let next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::Data(format!(
                "Mackey-Glass integration diverged at step {} (t = {})",
                i + 1,
                (i + 1) as f64 * dt
            )));
        }
        xs.push(next);
    }
    Ok(xs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euler(n_steps: usize, dt: f64, tau: f64, history: f64) -> Vec<f64> {
        let lag = (tau / dt).round() as usize;
        let mut xs = vec![history];
        for i in 0..n_steps - 1 {
            let xd = if i >= lag { xs[i - lag] } else { history };
            let x = xs[i];
            xs.push(x + dt * (0.2 * xd / (1.0 + xd.powi(10)) - 0.1 * x));
        }
        xs
    }

    #[test]
    fn equilibrium() {
        let xs = mackey_glass(5000, 0.1, 17.0, 0.2, 0.1, 10.0, 1.0).unwrap();
        assert!(xs.iter().all(|x| (x - 1.0).abs() <= 1e-9));
    }

    #[test]
    fn fine_euler_agreement() {
        let rk = mackey_glass(1001, 0.1, 17.0, 0.2, 0.1, 10.0, 1.2).unwrap();
        let eu = euler(100_001, 0.001, 17.0, 1.2);
        let dev = (0..1001)
            .map(|i| (rk[i] - eu[i * 100]).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-2, "max deviation {dev}");
    }

    #[test]
    fn default_configuration_is_bounded() {
        let xs = MackeyGlass::default().generate(10_000).unwrap();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo > 0.15 && hi < 1.45, "range [{lo}, {hi}]");
        // not settling onto a fixed point
        let tail = &xs[9000..];
        let spread = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - tail.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread > 0.5);
    }

    #[test]
    fn halving_dt_is_consistent() {
        let coarse = mackey_glass(1001, 0.1, 17.0, 0.2, 0.1, 10.0, 1.2).unwrap();
        let fine = mackey_glass(2001, 0.05, 17.0, 0.2, 0.1, 10.0, 1.2).unwrap();
        let dev = (0..1001)
            .map(|i| (coarse[i] - fine[2 * i]).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-3, "max deviation {dev}");
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(mackey_glass(10, 0.0, 17.0, 0.2, 0.1, 10.0, 1.2).is_err());
        assert!(mackey_glass(10, 0.1, -1.0, 0.2, 0.1, 10.0, 1.2).is_err());
        assert!(mackey_glass(0, 0.1, 17.0, 0.2, 0.1, 10.0, 1.2).is_err());
        assert_eq!(
            mackey_glass(1, 0.1, 17.0, 0.2, 0.1, 10.0, 1.2).unwrap(),
            vec![1.2]
        );
    }

    #[test]
    fn divergence_is_reported() {
        let err = mackey_glass(2000, 0.1, 0.0, 0.0, -50.0, 10.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("diverged"));
    }
}
