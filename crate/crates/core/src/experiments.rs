//! End-to-end experiments: the noiseless curve decode, the λ sweep, and the
//! Δ and SNR sweeps through the FM/Rician channel.
//!
//! Channel results are reported as block-averaged MSE: decoded estimates are
//! averaged inside each `s_p × s_p × t_p` block before being compared with
//! the block's ground truth.

use rayon::prelude::*;

use crate::channel::{ChannelConfig, DopplerMode, Link};
use crate::codec::{decode_stream, encode, CodecConfig, Interval};
use crate::error::{Error, Result};
use crate::mosfet::MosfetParams;
use crate::phenomenon::{generate_field, Field, Geometry};
use crate::seed::mix;

/// The parameter point an [`MseReport`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OperatingPoint {
    pub delta: f64,
    pub snr_db: f64,
    pub bandwidth: f64,
    pub lambda: f64,
}

/// Block-averaged MSE of both sources at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseReport {
    pub mse_gs: f64,
    pub mse_ds: f64,
    /// Mean of `mse_gs` and `mse_ds`.
    pub mse_sum: f64,
    /// Blocks averaged over, across all repetitions.
    pub n_blocks: usize,
    /// Fraction of samples whose decoded level equals the transmitted one.
    pub level_accuracy: f64,
    pub point: OperatingPoint,
}

impl MseReport {
    fn new(
        mse_gs: f64,
        mse_ds: f64,
        n_blocks: usize,
        level_accuracy: f64,
        point: OperatingPoint,
    ) -> Self {
        Self {
            mse_gs,
            mse_ds,
            mse_sum: (mse_gs + mse_ds) / 2.0,
            n_blocks,
            level_accuracy,
            point,
        }
    }

    /// `mse_gs + mse_ds`.
    pub fn literal_sum(&self) -> f64 {
        self.mse_gs + self.mse_ds
    }
}

/// Mean over blocks of `(block-mean estimate − block-mean truth)²`.
pub fn block_mse(truth: &Field, estimates: &[f64]) -> Result<f64> {
    let truth_means = truth.block_means(&truth.values)?;
    let est_means = truth.block_means(estimates)?;
    let n = truth_means.len() as f64;
    Ok(truth_means
        .iter()
        .zip(&est_means)
        .map(|(t, e)| (e - t).powi(2))
        .sum::<f64>()
        / n)
}

/// Block-averaged MSE for a `Vgs`/`Vds` field pair.
pub fn mse_averaged(
    vgs_truth: &Field,
    vgs_est: &[f64],
    vds_truth: &Field,
    vds_est: &[f64],
    point: OperatingPoint,
) -> Result<MseReport> {
    if vgs_truth.geometry != vds_truth.geometry {
        return Err(Error::invalid(
            "geometry",
            "Vgs and Vds fields must share the block geometry",
        ));
    }
    let gs = block_mse(vgs_truth, vgs_est)?;
    let ds = block_mse(vds_truth, vds_est)?;
    Ok(MseReport::new(
        gs,
        ds,
        vgs_truth.geometry.n_blocks(),
        f64::NAN,
        point,
    ))
}

// ---------------------------------------------------------------------------
// Noiseless curve decode and λ sweep
// ---------------------------------------------------------------------------

/// Curves of the noiseless experiment: every level crossed with every `Vds`
/// grid point, no channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiselessSetup {
    pub params: MosfetParams,
    pub levels: Vec<f64>,
    pub vds_grid: Vec<f64>,
    pub vds_range: Interval,
}

impl Default for NoiselessSetup {
    /// `Vgs ∈ {1,…,5}` V, 50 `Vds` points 5.0, 5.1, …, 9.9 V.
    fn default() -> Self {
        Self {
            params: MosfetParams::default(),
            levels: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            vds_grid: vds_grid(5.0, 0.1, 50),
            vds_range: Interval::new(5.0, 10.0),
        }
    }
}

/// `start, start + step, …` with `count` points.
pub fn vds_grid(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start + step * k as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterPoint {
    pub vgs_true: f64,
    pub vds_true: f64,
    pub vgs_hat: f64,
    pub vds_hat: f64,
    pub corrected: bool,
    pub in_range: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiselessOutcome {
    pub points: Vec<ScatterPoint>,
    pub accuracy: f64,
    pub mse_gs: f64,
    pub mse_ds: f64,
}

impl NoiselessOutcome {
    /// Mean of the two per-sample MSEs.
    pub fn mse(&self) -> f64 {
        (self.mse_gs + self.mse_ds) / 2.0
    }

    fn from_points(points: Vec<ScatterPoint>) -> Self {
        let n = points.len() as f64;
        let hits = points.iter().filter(|p| p.vgs_hat == p.vgs_true).count();
        let mse_gs = points
            .iter()
            .map(|p| (p.vgs_hat - p.vgs_true).powi(2))
            .sum::<f64>()
            / n;
        let mse_ds = points
            .iter()
            .map(|p| (p.vds_hat - p.vds_true).powi(2))
            .sum::<f64>()
            / n;
        Self {
            points,
            accuracy: hits as f64 / n,
            mse_gs,
            mse_ds,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiselessResult {
    pub corrected: NoiselessOutcome,
    pub uncorrected: NoiselessOutcome,
}

fn decode_curves(setup: &NoiselessSetup, cfg: &CodecConfig) -> Result<Vec<ScatterPoint>> {
    let p = &setup.params;
    let mut points = Vec::with_capacity(setup.levels.len() * setup.vds_grid.len());
    for &g in &setup.levels {
        let ids = setup
            .vds_grid
            .iter()
            .map(|&v| encode(p, cfg, g, v))
            .collect::<Result<Vec<_>>>()?;
        let decoded = decode_stream(p, cfg, &ids)?;
        points.extend(
            setup
                .vds_grid
                .iter()
                .zip(decoded)
                .map(|(&v, d)| ScatterPoint {
                    vgs_true: g,
                    vds_true: v,
                    vgs_hat: d.vgs_hat,
                    vds_hat: d.vds_hat,
                    corrected: d.corrected,
                    in_range: d.in_range,
                }),
        );
    }
    Ok(points)
}

/// Encode every grid point, decode each curve on its own, with and without
/// the range check.
pub fn run_noiseless(setup: &NoiselessSetup) -> Result<NoiselessResult> {
    setup.params.validate()?;
    if let Some(&v) = setup
        .vds_grid
        .iter()
        .find(|&&v| !setup.vds_range.contains(v, crate::codec::RANGE_TOLERANCE))
    {
        return Err(Error::invalid(
            "vds_grid",
            format!("{v} V lies outside the vds range"),
        ));
    }
    let cfg = CodecConfig::from_levels(&setup.params, setup.levels.clone(), setup.vds_range)?;
    let corrected = decode_curves(setup, &cfg)?;
    let uncorrected = decode_curves(setup, &cfg.with_range_check(false))?;
    Ok(NoiselessResult {
        corrected: NoiselessOutcome::from_points(corrected),
        uncorrected: NoiselessOutcome::from_points(uncorrected),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaRow {
    pub lambda: f64,
    pub mse_pre: f64,
    pub mse_post: f64,
    pub accuracy_pre: f64,
    pub accuracy_post: f64,
}

/// `{0.001} ∪ {0.005, 0.010, …, 0.200}`.
pub fn default_lambda_grid() -> Vec<f64> {
    std::iter::once(0.001)
        .chain((1..=40).map(|k| k as f64 / 200.0))
        .collect()
}

/// [`run_noiseless`] at each λ, everything else from `setup`.
pub fn sweep_lambda(setup: &NoiselessSetup, lambdas: &[f64]) -> Result<Vec<LambdaRow>> {
    if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("lambdas", "must be strictly ascending"));
    }
    lambdas
        .iter()
        .map(|&lambda| {
            if !(lambda > 0.0) {
                return Err(Error::invalid(
                    "lambdas",
                    format!("λ = {lambda} must be > 0"),
                ));
            }
            let setup = NoiselessSetup {
                params: setup.params.with_lambda(lambda)?,
                ..setup.clone()
            };
            let r = run_noiseless(&setup)?;
            Ok(LambdaRow {
                lambda,
                mse_pre: r.uncorrected.mse(),
                mse_post: r.corrected.mse(),
                accuracy_pre: r.uncorrected.accuracy,
                accuracy_post: r.corrected.accuracy,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Channel experiments
// ---------------------------------------------------------------------------

/// Channel settings that do not depend on the sweep axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelTemplate {
    pub doppler_fraction: f64,
    pub doppler_mode: DopplerMode,
    pub rician_k_db: f64,
    pub fft_len: usize,
    /// `sample_rate / bandwidth`.
    pub oversample: f64,
    /// Fraction of the bandwidth the largest current maps to.
    pub fm_fraction: f64,
    /// Bypass the channel: noise, fading and Doppler all off.
    pub ideal: bool,
    pub s_c: Option<f64>,
    pub t_c: Option<f64>,
}

impl Default for ChannelTemplate {
    fn default() -> Self {
        Self {
            doppler_fraction: 0.02,
            doppler_mode: DopplerMode::Uniform,
            rician_k_db: 6.0,
            fft_len: ChannelConfig::FFT_LEN,
            oversample: ChannelConfig::OVERSAMPLE,
            fm_fraction: ChannelConfig::FM_FRACTION,
            ideal: false,
            s_c: None,
            t_c: None,
        }
    }
}

impl ChannelTemplate {
    pub fn build(&self, bandwidth: f64, snr_db: f64, i_max: f64, seed: u64) -> ChannelConfig {
        let cfg = ChannelConfig {
            bandwidth,
            snr_db,
            doppler_fraction: self.doppler_fraction,
            doppler_mode: self.doppler_mode,
            rician_k_db: self.rician_k_db,
            fm_scale: self.fm_fraction * bandwidth / i_max,
            sample_rate: self.oversample * bandwidth,
            fft_len: self.fft_len,
            seed,
            s_c: self.s_c,
            t_c: self.t_c,
        };
        if self.ideal {
            cfg.ideal()
        } else {
            cfg
        }
    }
}

/// Field geometry, device, ranges and channel for the Δ and SNR sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelExperiment {
    pub params: MosfetParams,
    pub geometry: Geometry,
    pub vgs_range: Interval,
    pub vds_range: Interval,
    pub field_jitter: f64,
    pub channel: ChannelTemplate,
    pub seed: u64,
    /// Independent field/channel draws averaged per point.
    pub repetitions: usize,
}

impl Default for ChannelExperiment {
    fn default() -> Self {
        Self {
            params: MosfetParams::default(),
            geometry: Geometry::STANDARD,
            vgs_range: Interval::new(5.0, 10.0),
            vds_range: Interval::new(5.0, 10.0),
            field_jitter: 0.0,
            channel: ChannelTemplate::default(),
            seed: 1,
            repetitions: 10,
        }
    }
}

/// Ground truth and decoded estimates of one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub vgs_field: Field,
    pub vds_field: Field,
    /// Transmitted (quantized) levels.
    pub vgs_quantized: Vec<f64>,
    pub vgs_hat: Vec<f64>,
    /// Clamped to the `Vds` range.
    pub vds_hat: Vec<f64>,
}

impl ChannelExperiment {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.geometry.validate()?;
        if self.geometry.nt < 2 {
            return Err(Error::invalid(
                "nt",
                "sensor streams need at least 2 instants",
            ));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions", "must be >= 1"));
        }
        if !(self.vgs_range.lo > self.params.v_th) {
            return Err(Error::invalid(
                "vgs_range",
                "must lie above the threshold voltage",
            ));
        }
        if !(self.vgs_range.lo < self.vgs_range.hi) {
            return Err(Error::invalid("vgs_range", "lo must be < hi"));
        }
        if !(self.vds_range.lo >= 0.0 && self.vds_range.lo < self.vds_range.hi) {
            return Err(Error::invalid("vds_range", "need 0 <= lo < hi"));
        }
        Ok(())
    }

    /// Largest current the transmitter can produce; sets the FM scale.
    pub fn max_current(&self) -> Result<f64> {
        self.params
            .drain_current(self.vgs_range.hi, self.vds_range.hi)
    }

    /// Field seeds and channel seed of repetition `rep`.
    fn seeds(&self, rep: usize) -> (u64, u64, u64) {
        let base = mix(self.seed, rep as u64);
        (mix(base, 1), mix(base, 2), mix(base, 3))
    }

    /// Ground-truth `Vgs` and `Vds` fields of repetition `rep`.
    pub fn fields(&self, rep: usize) -> Result<(Field, Field)> {
        self.validate()?;
        let (gs_seed, ds_seed, _) = self.seeds(rep);
        let g = self.geometry;
        Ok((
            generate_field(
                g,
                self.vgs_range.lo,
                self.vgs_range.hi,
                gs_seed,
                self.field_jitter,
            )?,
            generate_field(
                g,
                self.vds_range.lo,
                self.vds_range.hi,
                ds_seed,
                self.field_jitter,
            )?,
        ))
    }

    /// Simulate one repetition at `(delta, bandwidth, snr_db)`.
    pub fn realize(
        &self,
        rep: usize,
        delta: f64,
        bandwidth: f64,
        snr_db: f64,
    ) -> Result<Realization> {
        let (vgs_field, vds_field) = self.fields(rep)?;
        let (_, _, ch_seed) = self.seeds(rep);
        let g = self.geometry;
        let codec = CodecConfig::uniform(&self.params, self.vgs_range, delta, self.vds_range)?;
        let i_max = self.max_current()?;
        let channel = self.channel.build(bandwidth, snr_db, i_max, ch_seed);
        channel.validate(i_max)?;

        let vgs_quantized: Vec<f64> = vgs_field
            .values
            .iter()
            .map(|&v| codec.quantize(v))
            .collect();
        let streams = (0..g.sensors())
            .into_par_iter()
            .map_init(
                || Link::new(channel.clone()),
                |link, sensor| -> Result<Vec<(f64, f64)>> {
                    let start = sensor * g.nt;
                    let ids = (start..start + g.nt)
                        .map(|i| {
                            let sent = encode(
                                &self.params,
                                &codec,
                                vgs_quantized[i],
                                vds_field.values[i],
                            )?;
                            link.send(sent, i as u64)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(decode_stream(&self.params, &codec, &ids)?
                        .into_iter()
                        .map(|d| (d.vgs_hat, self.vds_range.clamp(d.vds_hat)))
                        .collect())
                },
            )
            .collect::<Result<Vec<_>>>()?;
        let (vgs_hat, vds_hat) = streams.into_iter().flatten().unzip();
        Ok(Realization {
            vgs_field,
            vds_field,
            vgs_quantized,
            vgs_hat,
            vds_hat,
        })
    }

    /// Block-averaged MSE at one point, averaged over all repetitions.
    pub fn run_point(&self, delta: f64, bandwidth: f64, snr_db: f64) -> Result<MseReport> {
        let point = OperatingPoint {
            delta,
            snr_db,
            bandwidth,
            lambda: self.params.lambda,
        };
        let mut gs = 0.0;
        let mut ds = 0.0;
        let mut hits = 0usize;
        let mut samples = 0usize;
        for rep in 0..self.repetitions {
            let r = self.realize(rep, delta, bandwidth, snr_db)?;
            gs += block_mse(&r.vgs_field, &r.vgs_hat)?;
            ds += block_mse(&r.vds_field, &r.vds_hat)?;
            hits += r
                .vgs_hat
                .iter()
                .zip(&r.vgs_quantized)
                .filter(|(a, b)| a == b)
                .count();
            samples += r.vgs_hat.len();
        }
        let n = self.repetitions as f64;
        Ok(MseReport::new(
            gs / n,
            ds / n,
            self.geometry.n_blocks() * self.repetitions,
            hits as f64 / samples as f64,
            point,
        ))
    }

    /// One report per Δ, with the argmin of `mse_sum`.
    pub fn sweep_delta(&self, deltas: &[f64], bandwidth: f64, snr_db: f64) -> Result<DeltaSweep> {
        if deltas.is_empty() {
            return Err(Error::invalid("deltas", "sweep grid is empty"));
        }
        if deltas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("deltas", "must be strictly ascending"));
        }
        let reports = deltas
            .iter()
            .map(|&d| self.run_point(d, bandwidth, snr_db))
            .collect::<Result<Vec<_>>>()?;
        let best = reports
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.mse_sum.total_cmp(&b.1.mse_sum))
            .map(|(i, _)| i)
            .unwrap_or(0);
        Ok(DeltaSweep {
            delta_star: deltas[best],
            best,
            reports,
        })
    }

    /// `mse_sum` vs SNR, one curve per bandwidth; reports are bandwidth-major.
    pub fn sweep_snr(
        &self,
        delta: f64,
        snrs: &[f64],
        bandwidths: &[f64],
    ) -> Result<Vec<MseReport>> {
        if snrs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("snrs", "must be strictly ascending"));
        }
        let mut out = Vec::with_capacity(snrs.len() * bandwidths.len());
        for &bw in bandwidths {
            for &snr in snrs {
                out.push(self.run_point(delta, bw, snr)?);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSweep {
    pub reports: Vec<MseReport>,
    pub delta_star: f64,
    /// Index of `delta_star` in `reports`.
    pub best: usize,
}

impl DeltaSweep {
    pub fn best_report(&self) -> &MseReport {
        &self.reports[self.best]
    }
}

/// `0.05, 0.10, …, 1.25`.
pub fn default_delta_grid() -> Vec<f64> {
    (1..=25).map(|k| k as f64 / 20.0).collect()
}

/// `−100, −90, …, 0` dB.
pub fn default_snr_grid() -> Vec<f64> {
    (0..=10).map(|k| -100.0 + 10.0 * k as f64).collect()
}

/// 50, 200, 410 and 500 kHz.
pub fn default_bandwidths() -> Vec<f64> {
    vec![50e3, 200e3, 410e3, 500e3]
}
