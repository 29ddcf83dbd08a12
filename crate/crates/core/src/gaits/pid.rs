use serde::{Deserialize, Serialize};

use crate::geometry::ACTUATED_COUNT;

/// Tendon PID gains plus the shape-advance rule used by the scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidGains {
    /// Rest-length rate per meter of error, 1/s.
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Bound on the accumulated error integral, m·s.
    pub integral_clamp: f64,
    /// A shape is reached once every tendon error is below this, m.
    pub tolerance: f64,
    /// A shape is abandoned after this long, s.
    pub shape_timeout: f64,
    /// Time a converged shape is held before advancing, s.
    pub hold_time: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self { kp: 5.0, ki: 1.0, kd: 0.0, integral_clamp: 0.01, tolerance: 2e-3, shape_timeout: 5.0, hold_time: 0.5 }
    }
}

impl PidGains {
    pub fn validate(&self) -> crate::Result<()> {
        let finite = [self.kp, self.ki, self.kd, self.integral_clamp, self.tolerance, self.shape_timeout, self.hold_time]
            .iter()
            .all(|v| v.is_finite());
        if finite
            && self.kp > 0.0
            && self.ki >= 0.0
            && self.kd >= 0.0
            && self.integral_clamp >= 0.0
            && self.tolerance > 0.0
            && self.shape_timeout > 0.0
            && self.hold_time >= 0.0
        {
            Ok(())
        } else {
            Err(crate::Error::InvalidArgument(format!("invalid PID gains: {self:?}")))
        }
    }
}

/// Per-run controller memory.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidState {
    pub integral: [f64; ACTUATED_COUNT],
    pub prev_error: Option<[f64; ACTUATED_COUNT]>,
}

impl PidState {
    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// Rest-length rates from the per-tendon error `target - measured`, clamped
/// to `±max_rate`. The integral is clamped for anti-windup.
pub fn pid_rate(
    measured: &[f64; ACTUATED_COUNT],
    target: &[f64; ACTUATED_COUNT],
    state: &mut PidState,
    gains: &PidGains,
    max_rate: f64,
    dt: f64,
) -> [f64; ACTUATED_COUNT] {
    let mut error = [0.0; ACTUATED_COUNT];
    for i in 0..ACTUATED_COUNT {
        error[i] = target[i] - measured[i];
    }
    let prev = state.prev_error.unwrap_or(error);
    let mut out = [0.0; ACTUATED_COUNT];
    for i in 0..ACTUATED_COUNT {
        state.integral[i] = (state.integral[i] + error[i] * dt).clamp(-gains.integral_clamp, gains.integral_clamp);
        let deriv = (error[i] - prev[i]) / dt;
        let raw = gains.kp * error[i] + gains.ki * state.integral[i] + gains.kd * deriv;
        out[i] = raw.clamp(-max_rate, max_rate);
    }
    state.prev_error = Some(error);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_error_gives_zero_rate() {
        let mut s = PidState::default();
        let r = pid_rate(&[0.2; 6], &[0.2; 6], &mut s, &PidGains::default(), 0.1, 1e-3);
        assert_eq!(r, [0.0; 6]);
    }

    #[test]
    fn proportional_only() {
        let gains = PidGains { kp: 5.0, ki: 0.0, kd: 0.0, ..PidGains::default() };
        let mut s = PidState::default();
        let mut measured = [0.2; 6];
        measured[2] = 0.18;
        let r = pid_rate(&measured, &[0.2; 6], &mut s, &gains, 1.0, 1e-3);
        assert!((r[2] - 0.1).abs() < 1e-12);
        assert_eq!(r[0], 0.0);
    }

    #[test]
    fn output_is_clamped() {
        let mut s = PidState::default();
        let r = pid_rate(&[0.1; 6], &[0.3; 6], &mut s, &PidGains::default(), 0.1, 1e-3);
        assert!(r.iter().all(|v| (*v - 0.1).abs() < 1e-15));
        let r = pid_rate(&[0.3; 6], &[0.1; 6], &mut s, &PidGains::default(), 0.1, 1e-3);
        assert!(r.iter().all(|v| (*v + 0.1).abs() < 1e-15));
    }

    #[test]
    fn integral_is_clamped() {
        let gains = PidGains { integral_clamp: 0.005, ..PidGains::default() };
        let mut s = PidState::default();
        for _ in 0..10_000 {
            pid_rate(&[0.1; 6], &[0.3; 6], &mut s, &gains, 0.1, 1e-3);
        }
        assert!(s.integral.iter().all(|v| (*v - 0.005).abs() < 1e-15));
    }

    /// One tendon modeled as a rest length that follows the commanded rate
    /// exactly: count how often it crosses the target on its way in.
    #[test]
    fn step_response_settles_without_ringing() {
        let gains = PidGains::default();
        let dt = 1e-3;
        let target = [0.24f64; 6];
        let mut len = [0.2f64; 6];
        let mut s = PidState::default();
        let mut crossings = 0;
        let mut prev_sign = (target[0] - len[0]).signum();
        let mut reached = None;
        // the slow closed-loop pole of s^2 + kp s + ki sits near 1/5 s^-1
        for k in 0..40_000 {
            let r = pid_rate(&len, &target, &mut s, &gains, 0.1, dt);
            for i in 0..6 {
                len[i] += r[i] * dt;
            }
            let e = target[0] - len[0];
            if e != 0.0 && e.signum() != prev_sign {
                crossings += 1;
                prev_sign = e.signum();
            }
            if reached.is_none() && e.abs() < gains.tolerance {
                reached = Some(k);
            }
        }
        assert!(reached.is_some());
        assert!(crossings <= 2, "{crossings} overshoots");
        assert!((len[0] - 0.24).abs() < 1e-4);
    }
}
