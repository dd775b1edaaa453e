//! Rectangular Shannon mapping over MOSFET curves.
//!
//! The transmitter quantizes `Vgs` onto a discrete level set and lets the
//! transistor fold `(Vgs, Vds)` into one drain current. The receiver sees
//! only currents. It takes two consecutive currents, assumes they sit on the
//! same curve, and picks the level whose two-point slope best matches the
//! analytic estimate `λ·(I₁ + I₂)/2`. Candidates whose implied `Vds` falls
//! outside the transmitter's range are rejected in score order.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::mosfet::MosfetParams;

/// Slack on the `Vds` range bounds so exact-endpoint decodes survive round-off.
pub const RANGE_TOLERANCE: f64 = 1e-6;

/// Closed voltage interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    /// Distance from `x` to the interval, zero inside.
    pub fn excess(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else if x.is_nan() {
            f64::INFINITY
        } else {
            0.0
        }
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    fn check(&self, name: &'static str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err(Error::invalid(name, "bounds must be finite"));
        }
        if self.lo > self.hi {
            return Err(Error::invalid(
                name,
                format!("empty interval ({}, {})", self.lo, self.hi),
            ));
        }
        Ok(())
    }
}

/// Uniform level set `{lo, lo+Δ, lo+2Δ, …}` up to the largest value `≤ hi`.
///
/// A range narrower than `delta` yields the single level `lo`. That is only
/// an error when the caller asks for at least `min_levels > 1`.
pub fn build_levels(range: Interval, delta: f64, min_levels: usize) -> Result<Vec<f64>> {
    range.check("vgs_range")?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid("delta", format!("must be > 0, got {delta}")));
    }
    // The relative nudge keeps exact multiples such as (5,10)/0.05 from
    // losing their top level to division round-off.
    let steps = (range.width() / delta * (1.0 + 1e-12)).floor() as usize;
    let levels: Vec<f64> = (0..=steps).map(|i| range.lo + i as f64 * delta).collect();
    if levels.len() < min_levels {
        return Err(Error::invalid(
            "delta",
            format!(
                "spacing {delta} over ({}, {}) gives {} level(s), need {min_levels}",
                range.lo,
                range.hi,
                levels.len()
            ),
        ));
    }
    Ok(levels)
}

/// Nearest level to `value`; an exact midpoint goes to the lower level.
///
/// `levels` must be sorted ascending and non-empty.
pub fn quantize(value: f64, levels: &[f64]) -> f64 {
    assert!(!levels.is_empty(), "quantize needs at least one level");
    let upper = levels.partition_point(|&l| l < value);
    if upper == 0 {
        return levels[0];
    }
    if upper == levels.len() {
        return levels[levels.len() - 1];
    }
    let (below, above) = (levels[upper - 1], levels[upper]);
    if above - value < value - below {
        above
    } else {
        below
    }
}

/// Level set and `Vds` range shared by the encoder and decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecConfig {
    pub levels: Vec<f64>,
    /// Nominal spacing between adjacent levels.
    pub delta: f64,
    /// Range the raw `Vgs` inputs are drawn from.
    pub vgs_range: Interval,
    /// Range the transmitter keeps `Vds` in; the decoder's range check.
    pub vds_range: Interval,
    /// Reject out-of-range candidates and fall back to the next best.
    pub range_check: bool,
}

impl CodecConfig {
    /// Uniform levels over `vgs_range`, validated against the device.
    pub fn uniform(
        params: &MosfetParams,
        vgs_range: Interval,
        delta: f64,
        vds_range: Interval,
    ) -> Result<Self> {
        let levels = build_levels(vgs_range, delta, 1)?;
        let cfg = Self {
            levels,
            delta,
            vgs_range,
            vds_range,
            range_check: true,
        };
        cfg.validate(params)?;
        Ok(cfg)
    }

    /// Arbitrary ascending level set. `delta` is taken as the smallest gap.
    pub fn from_levels(
        params: &MosfetParams,
        levels: Vec<f64>,
        vds_range: Interval,
    ) -> Result<Self> {
        let delta = levels
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let vgs_range = Interval::new(
            levels.first().copied().unwrap_or(f64::NAN),
            levels.last().copied().unwrap_or(f64::NAN),
        );
        let cfg = Self {
            levels,
            delta,
            vgs_range,
            vds_range,
            range_check: true,
        };
        cfg.validate(params)?;
        Ok(cfg)
    }

    pub fn with_range_check(mut self, on: bool) -> Self {
        self.range_check = on;
        self
    }

    pub fn validate(&self, params: &MosfetParams) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::invalid("levels", "level set is empty"));
        }
        if self.levels.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("levels", "must be strictly ascending"));
        }
        if let Some(&low) = self.levels.iter().find(|&&l| !(l > params.v_th)) {
            return Err(Error::invalid(
                "levels",
                format!("level {low} V is not above threshold {} V", params.v_th),
            ));
        }
        self.vds_range.check("vds_range")?;
        if !(self.vds_range.lo < self.vds_range.hi) {
            return Err(Error::invalid("vds_range", "lo must be < hi"));
        }
        if self.vds_range.lo < 0.0 {
            return Err(Error::invalid("vds_range", "must be non-negative"));
        }
        Ok(())
    }

    pub fn quantize(&self, vgs: f64) -> f64 {
        quantize(vgs, &self.levels)
    }
}

/// Quantize `vgs_raw` and run the pair through the transistor.
pub fn encode(params: &MosfetParams, cfg: &CodecConfig, vgs_raw: f64, vds: f64) -> Result<f64> {
    if !cfg.vds_range.contains(vds, RANGE_TOLERANCE) {
        return Err(Error::Domain(format!(
            "vds = {vds} V is outside the codec range ({}, {})",
            cfg.vds_range.lo, cfg.vds_range.hi
        )));
    }
    params.drain_current(cfg.quantize(vgs_raw), vds)
}

/// Result of decoding two consecutive currents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedPair {
    pub vgs_hat: f64,
    pub vds_hat_1: f64,
    pub vds_hat_2: f64,
    /// The chosen level was not the best slope match.
    pub corrected: bool,
    /// Both `Vds` estimates lie inside the codec range.
    pub in_range: bool,
}

struct Candidate {
    level: f64,
    vds_1: f64,
    vds_2: f64,
    score: f64,
}

impl Candidate {
    fn range_excess(&self, range: &Interval) -> f64 {
        range.excess(self.vds_1).max(range.excess(self.vds_2))
    }
}

/// Slope-matching decode of one pair of currents.
///
/// Candidates are ranked by `|slope₂ − slope₁|`, lower level first on ties.
/// With the range check on, the first candidate whose two `Vds` estimates
/// both lie in `vds_range` wins. If none does, the candidate that misses the
/// range by the least is returned with `in_range = false`.
///
/// Equal currents make the two-point slope undefined; every score is then
/// infinite and the choice is made by the range check alone, which lands on
/// the lowest in-range level.
pub fn decode_pair(
    params: &MosfetParams,
    cfg: &CodecConfig,
    ids1: f64,
    ids2: f64,
) -> Result<DecodedPair> {
    if !(ids1 > 0.0 && ids2 > 0.0) {
        return Err(Error::Domain(format!(
            "decode needs positive currents, got ({ids1}, {ids2})"
        )));
    }
    let slope_1 = params.lambda * (ids1 + ids2) / 2.0;
    let degenerate = ids1 == ids2;

    let mut candidates = cfg
        .levels
        .iter()
        .map(|&level| {
            let vds_1 = params.invert_vds(level, ids1)?;
            let vds_2 = params.invert_vds(level, ids2)?;
            let score = if degenerate {
                f64::INFINITY
            } else {
                let slope_2 = (ids2 - ids1) / (vds_2 - vds_1);
                (slope_2 - slope_1).abs()
            };
            Ok(Candidate {
                level,
                vds_1,
                vds_2,
                score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // Stable sort over ascending levels keeps the lower level first on ties.
    candidates.sort_by(|a, b| a.score.total_cmp(&b.score));

    let range = &cfg.vds_range;
    let picked = if cfg.range_check {
        candidates
            .iter()
            .position(|c| c.range_excess(range) <= RANGE_TOLERANCE)
            .unwrap_or_else(|| {
                let mut best = 0;
                for (i, c) in candidates.iter().enumerate().skip(1) {
                    if c.range_excess(range)
                        .total_cmp(&candidates[best].range_excess(range))
                        == Ordering::Less
                    {
                        best = i;
                    }
                }
                best
            })
    } else {
        0
    };

    let c = &candidates[picked];
    Ok(DecodedPair {
        vgs_hat: c.level,
        vds_hat_1: c.vds_1,
        vds_hat_2: c.vds_2,
        corrected: picked != 0,
        in_range: c.range_excess(range) <= RANGE_TOLERANCE,
    })
}

/// Per-sample output of [`decode_stream`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedSample {
    pub vgs_hat: f64,
    pub vds_hat: f64,
    pub corrected: bool,
    pub in_range: bool,
}

/// Decode a stream as non-overlapping pairs `(0,1), (2,3), …`.
///
/// Both samples of a pair share its `vgs_hat`. An odd trailing sample is
/// decoded together with its predecessor; the predecessor keeps the result
/// of its own pair.
pub fn decode_stream(
    params: &MosfetParams,
    cfg: &CodecConfig,
    ids: &[f64],
) -> Result<Vec<DecodedSample>> {
    if ids.len() < 2 {
        return Err(Error::invalid(
            "ids",
            format!("stream needs at least 2 samples, got {}", ids.len()),
        ));
    }
    let sample = |p: &DecodedPair, vds_hat: f64| DecodedSample {
        vgs_hat: p.vgs_hat,
        vds_hat,
        corrected: p.corrected,
        in_range: p.in_range,
    };

    let mut out = Vec::with_capacity(ids.len());
    for pair in ids.chunks_exact(2) {
        let p = decode_pair(params, cfg, pair[0], pair[1])?;
        out.push(sample(&p, p.vds_hat_1));
        out.push(sample(&p, p.vds_hat_2));
    }
    if ids.len() % 2 == 1 {
        let n = ids.len();
        let p = decode_pair(params, cfg, ids[n - 2], ids[n - 1])?;
        out.push(sample(&p, p.vds_hat_2));
    }
    Ok(out)
}
