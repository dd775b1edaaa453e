//! Square-law n-channel MOSFET in saturation with channel-length modulation.
//!
//! ```text
//! Ids = ½ · k · (Vgs − Vth)² · (1 + λ·Vds),   k = W·µ·Cox / L
//! ```
//!
//! For a fixed gate voltage the curve is a straight line in `Vds` whose
//! slope `λ · ½k(Vgs − Vth)²` grows with `Vgs`. The decoder relies on that
//! slope to tell the curves apart.
//!
//! The saturation condition `Vds > Vgs − Vth` is not enforced; the channel
//! experiment drives both terminals over the same 5–10 V span, so the model
//! is applied unconditionally. [`MosfetParams::in_saturation`] reports it.

use crate::error::{Error, Result};

/// Device constants of the saturation equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosfetParams {
    /// Transconductance factor `W·µ·Cox/L` [A/V²].
    pub k_gain: f64,
    /// Threshold voltage [V].
    pub v_th: f64,
    /// Channel-length modulation parameter [1/V].
    pub lambda: f64,
}

impl Default for MosfetParams {
    /// 0.18 µm n-channel device.
    fn default() -> Self {
        Self {
            k_gain: 155e-6,
            v_th: 0.74,
            lambda: 0.037,
        }
    }
}

impl MosfetParams {
    pub fn new(k_gain: f64, v_th: f64, lambda: f64) -> Result<Self> {
        let p = Self {
            k_gain,
            v_th,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        Self::new(self.k_gain, self.v_th, lambda)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_gain.is_finite() && self.k_gain > 0.0) {
            return Err(Error::invalid("k_gain", "must be finite and > 0"));
        }
        if !(self.v_th.is_finite() && self.v_th >= 0.0) {
            return Err(Error::invalid("v_th", "must be finite and >= 0"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid("lambda", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// `½·k·(vgs − vth)²`, the current at `vds = 0`.
    fn base_current(&self, vgs: f64) -> f64 {
        let overdrive = vgs - self.v_th;
        0.5 * self.k_gain * overdrive * overdrive
    }

    /// Drain current [A] at the given gate-source and drain-source voltages.
    pub fn drain_current(&self, vgs: f64, vds: f64) -> Result<f64> {
        if !(vgs >= self.v_th) {
            return Err(Error::Domain(format!(
                "vgs = {vgs} V is below threshold {} V (device off)",
                self.v_th
            )));
        }
        if !(vds >= 0.0) {
            return Err(Error::Domain(format!("vds = {vds} V must be >= 0")));
        }
        Ok(self.base_current(vgs) * (1.0 + self.lambda * vds))
    }

    /// Drain-source voltage that produces `ids` on the `vgs` curve.
    ///
    /// This is the exact algebraic inverse of [`drain_current`](Self::drain_current).
    /// The result is not clamped: a current that does not belong to the curve
    /// maps to a negative or out-of-range voltage, which the decoder's range
    /// check relies on.
    pub fn invert_vds(&self, vgs: f64, ids: f64) -> Result<f64> {
        if !(vgs > self.v_th) {
            return Err(Error::Domain(format!(
                "cannot invert at vgs = {vgs} V: must exceed threshold {} V",
                self.v_th
            )));
        }
        if !(ids > 0.0) {
            return Err(Error::Domain(format!(
                "cannot invert ids = {ids} A: must be > 0"
            )));
        }
        if self.lambda == 0.0 {
            return Err(Error::Domain(
                "cannot invert with lambda = 0: current is independent of vds".into(),
            ));
        }
        Ok((ids / self.base_current(vgs) - 1.0) / self.lambda)
    }

    /// `∂Ids/∂Vds` of the `vgs` curve [A/V]. Constant along the curve.
    pub fn curve_slope(&self, vgs: f64) -> Result<f64> {
        if !(vgs >= self.v_th) {
            return Err(Error::Domain(format!(
                "vgs = {vgs} V is below threshold {} V (device off)",
                self.v_th
            )));
        }
        Ok(self.lambda * self.base_current(vgs))
    }

    /// Whether `(vgs, vds)` satisfies `vds ≥ vgs − vth`.
    pub fn in_saturation(&self, vgs: f64, vds: f64) -> bool {
        vds >= vgs - self.v_th
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent evaluation of the saturation equation with the constants
    // spelled out, used as the oracle for the examples below.
    fn oracle(vgs: f64, vds: f64) -> f64 {
        0.5 * 155e-6 * (vgs - 0.74).powi(2) * (1.0 + 0.037 * vds)
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn drain_current_examples() {
        let p = MosfetParams::default();
        let i = p.drain_current(1.0, 5.0).unwrap();
        assert!(close(i, oracle(1.0, 5.0), 1e-12));
        assert!(close(i, 6.2082e-6, 1e-4));

        assert_eq!(p.drain_current(0.74, 7.0).unwrap(), 0.0);

        let i = p.drain_current(5.0, 10.0).unwrap();
        assert!(close(i, 1.9268e-3, 1e-4));
    }

    #[test]
    fn drain_current_rejects_cutoff() {
        let p = MosfetParams::default();
        assert!(matches!(p.drain_current(0.5, 5.0), Err(Error::Domain(_))));
        assert!(p.drain_current(1.0, -1.0).is_err());
    }

    #[test]
    fn invert_vds_examples() {
        let p = MosfetParams::default();
        let v = p.invert_vds(1.0, oracle(1.0, 5.0)).unwrap();
        assert!((v - 5.0).abs() < 1e-9);
        let v = p.invert_vds(5.0, oracle(5.0, 10.0)).unwrap();
        assert!((v - 10.0).abs() < 1e-9);
        let v = p.invert_vds(1.0, 0.5 * 155e-6 * 0.26 * 0.26).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn invert_vds_domain_errors() {
        let p = MosfetParams::default();
        assert!(p.invert_vds(0.74, 1e-3).is_err());
        assert!(p.invert_vds(2.0, 0.0).is_err());
        assert!(p.invert_vds(2.0, -1e-6).is_err());
        let flat = p.with_lambda(0.0).unwrap();
        assert!(flat.invert_vds(2.0, 1e-4).is_err());
    }

    #[test]
    fn invert_vds_can_leave_the_valid_range() {
        // A current from the vgs = 4 curve read against vgs = 5 lands below 0 V.
        let p = MosfetParams::default();
        let i = p.drain_current(4.0, 9.8).unwrap();
        assert!(p.invert_vds(5.0, i).unwrap() < 0.0);
    }

    #[test]
    fn curve_slope_examples() {
        let p = MosfetParams::default();
        let h = 1e-4;
        let fd = (oracle(1.0, 7.0 + h) - oracle(1.0, 7.0 - h)) / (2.0 * h);
        let s = p.curve_slope(1.0).unwrap();
        assert!(close(s, fd, 1e-6));
        assert!(close(s, 1.9384e-7, 1e-4));

        assert_eq!(p.curve_slope(0.74).unwrap(), 0.0);
        assert_eq!(p.with_lambda(0.0).unwrap().curve_slope(3.3).unwrap(), 0.0);
        assert!(p.curve_slope(0.1).is_err());
    }

    #[test]
    fn rejects_bad_constants() {
        assert!(MosfetParams::new(0.0, 0.74, 0.037).is_err());
        assert!(MosfetParams::new(1e-4, -0.1, 0.037).is_err());
        assert!(MosfetParams::new(1e-4, 0.74, -0.01).is_err());
        assert!(MosfetParams::new(f64::NAN, 0.74, 0.01).is_err());
    }

    #[test]
    fn saturation_flag() {
        let p = MosfetParams::default();
        assert!(p.in_saturation(5.0, 5.0));
        assert!(!p.in_saturation(10.0, 5.0));
    }
}
