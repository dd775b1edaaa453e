//! FM tone over a single-path Rician channel with Doppler and AWGN, and an
//! FFT-peak receiver.
//!
//! Each encoded current becomes one symbol: a complex baseband tone at
//! `fm_scale · ids` Hz, lasting `fft_len` samples. The receiver takes one
//! FFT per symbol and maps the strongest in-band bin back to a current.
//!
//! Every symbol draws its Doppler offset, fading gain and noise from its own
//! RNG stream keyed by `(seed, symbol index)`, so blocks are reproducible no
//! matter which worker simulates them. The streams are Xoshiro256++; noise
//! generation dominates the cost of a symbol.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// How the per-symbol Doppler offset is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DopplerMode {
    /// Shift drawn uniformly in `±doppler_fraction · f`.
    Uniform,
    /// Constant `+doppler_fraction · f`.
    Fixed,
}

impl std::str::FromStr for DopplerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "fixed" => Ok(Self::Fixed),
            other => Err(format!("expected `uniform` or `fixed`, got `{other}`")),
        }
    }
}

impl std::fmt::Display for DopplerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::Fixed => "fixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Receiver bandwidth [Hz]. Tones live in `(0, bandwidth]`.
    pub bandwidth: f64,
    /// In-band SNR [dB]; `+inf` disables noise.
    pub snr_db: f64,
    pub doppler_fraction: f64,
    pub doppler_mode: DopplerMode,
    /// Rician K-factor [dB]; `+inf` is pure line of sight.
    pub rician_k_db: f64,
    /// Current-to-frequency map [Hz/A].
    pub fm_scale: f64,
    pub sample_rate: f64,
    /// Samples per symbol, and the FFT length.
    pub fft_len: usize,
    pub seed: u64,
    /// Channel spatial correlation scale. Carried for completeness; the
    /// fading is i.i.d. per symbol.
    pub s_c: Option<f64>,
    /// Channel temporal correlation scale. Same caveat as `s_c`.
    pub t_c: Option<f64>,
}

impl ChannelConfig {
    /// Default FFT length.
    pub const FFT_LEN: usize = 4096;
    /// Default `sample_rate / bandwidth`.
    pub const OVERSAMPLE: f64 = 4.0;
    /// Default fraction of the bandwidth the largest current maps to.
    pub const FM_FRACTION: f64 = 0.8;

    /// Defaults sized for currents up to `i_max`: the largest current maps to
    /// 80% of the bandwidth, sampling runs at 4× bandwidth, 4096-point FFT,
    /// 6 dB K-factor and ±2% uniform Doppler.
    pub fn for_current_range(bandwidth: f64, snr_db: f64, i_max: f64) -> Self {
        Self {
            bandwidth,
            snr_db,
            doppler_fraction: 0.02,
            doppler_mode: DopplerMode::Uniform,
            rician_k_db: 6.0,
            fm_scale: Self::FM_FRACTION * bandwidth / i_max,
            sample_rate: Self::OVERSAMPLE * bandwidth,
            fft_len: Self::FFT_LEN,
            seed: 0,
            s_c: None,
            t_c: None,
        }
    }

    /// No noise, no fading, no Doppler.
    pub fn ideal(mut self) -> Self {
        self.snr_db = f64::INFINITY;
        self.rician_k_db = f64::INFINITY;
        self.doppler_fraction = 0.0;
        self
    }

    pub fn symbol_duration(&self) -> f64 {
        self.fft_len as f64 / self.sample_rate
    }

    /// Frequency resolution of the receiver FFT [Hz].
    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.fft_len as f64
    }

    /// Current represented by one FFT bin [A].
    pub fn current_resolution(&self) -> f64 {
        self.bin_width() / self.fm_scale
    }

    /// Per-sample complex noise variance for a unit-power tone.
    ///
    /// The noise is white over the whole simulated band, with density chosen
    /// so that the power inside `bandwidth` is `10^(−snr/10)`.
    pub fn noise_variance(&self) -> f64 {
        if self.snr_db == f64::INFINITY {
            0.0
        } else {
            10f64.powf(-self.snr_db / 10.0) * self.sample_rate / self.bandwidth
        }
    }

    /// Checks the configuration for currents up to `i_max`.
    pub fn validate(&self, i_max: f64) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ))
            }
        };
        positive("bandwidth", self.bandwidth)?;
        positive("fm_scale", self.fm_scale)?;
        positive("sample_rate", self.sample_rate)?;
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::invalid("snr_db", "must be a number or +inf"));
        }
        if self.rician_k_db.is_nan() || self.rician_k_db == f64::NEG_INFINITY {
            return Err(Error::invalid("rician_k_db", "must be a number or +inf"));
        }
        if !(0.0..1.0).contains(&self.doppler_fraction) {
            return Err(Error::invalid("doppler_fraction", "must be in [0, 1)"));
        }
        if self.fft_len < 2 {
            return Err(Error::invalid("fft_len", "must be at least 2"));
        }
        if self.bandwidth > self.sample_rate / 2.0 {
            return Err(Error::invalid(
                "bandwidth",
                "must not exceed half the sample rate",
            ));
        }
        let f_max = self.fm_scale * i_max * (1.0 + self.doppler_fraction);
        if self.sample_rate < 2.0 * f_max {
            return Err(Error::invalid(
                "sample_rate",
                format!(
                    "{} Hz is below Nyquist for a {f_max} Hz tone",
                    self.sample_rate
                ),
            ));
        }
        if self.fm_scale * i_max > self.bandwidth {
            return Err(Error::invalid(
                "fm_scale",
                format!("maps {i_max} A above the {} Hz bandwidth", self.bandwidth),
            ));
        }
        Ok(())
    }
}

/// RNG stream owned by one symbol.
pub fn symbol_rng(seed: u64, symbol: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(crate::seed::mix(seed, symbol))
}

/// Current to tone frequency [Hz].
pub fn modulate(ids: f64, cfg: &ChannelConfig) -> Result<f64> {
    if !(ids > 0.0) {
        return Err(Error::Domain(format!(
            "cannot modulate ids = {ids} A: must be > 0"
        )));
    }
    let freq = cfg.fm_scale * ids;
    if freq > cfg.bandwidth {
        return Err(Error::invalid(
            "fm_scale",
            format!(
                "{ids} A maps to {freq} Hz, above the {} Hz bandwidth",
                cfg.bandwidth
            ),
        ));
    }
    Ok(freq)
}

/// Per-symbol channel state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolState {
    /// Received tone frequency after Doppler [Hz].
    pub freq: f64,
    pub gain: Complex64,
}

fn draw_state<R: Rng + ?Sized>(freq: f64, cfg: &ChannelConfig, rng: &mut R) -> SymbolState {
    let d = match cfg.doppler_mode {
        DopplerMode::Uniform => rng.random_range(-1.0..=1.0),
        DopplerMode::Fixed => 1.0,
    };
    let freq = freq * (1.0 + cfg.doppler_fraction * d);

    let gain = if cfg.rician_k_db == f64::INFINITY {
        Complex64::new(1.0, 0.0)
    } else {
        let k = 10f64.powf(cfg.rician_k_db / 10.0);
        let los = (k / (k + 1.0)).sqrt();
        let diffuse_sd = (1.0 / (2.0 * (k + 1.0))).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(los + diffuse_sd * re, diffuse_sd * im)
    };
    SymbolState { freq, gain }
}

/// Writes `gain · exp(j2π·freq·n/fs)` into `out`.
fn synthesize_tone(state: &SymbolState, sample_rate: f64, out: &mut [Complex64]) {
    // Phasor recursion, re-anchored periodically to bound drift.
    const RESYNC: usize = 256;
    let cycles_per_sample = state.freq / sample_rate;
    let step = Complex64::from_polar(1.0, TAU * cycles_per_sample);
    for (block, chunk) in out.chunks_mut(RESYNC).enumerate() {
        let n0 = (block * RESYNC) as f64;
        let mut z = state.gain * Complex64::from_polar(1.0, TAU * (cycles_per_sample * n0).fract());
        for s in chunk {
            *s = z;
            z *= step;
        }
    }
}

fn add_noise<R: Rng + ?Sized>(variance: f64, out: &mut [Complex64], rng: &mut R) {
    if variance == 0.0 {
        return;
    }
    let sd = (variance / 2.0).sqrt();
    for s in out {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *s += Complex64::new(sd * re, sd * im);
    }
}

/// One received symbol block for a tone at `freq`.
///
/// The channel state is drawn before the noise, so the same RNG stream with
/// noise disabled reproduces the faded tone exactly.
pub fn transmit<R: Rng + ?Sized>(freq: f64, cfg: &ChannelConfig, rng: &mut R) -> Vec<Complex64> {
    let mut block = vec![Complex64::default(); cfg.fft_len];
    transmit_into(freq, cfg, rng, &mut block);
    block
}

/// [`transmit`] into a caller-owned buffer of length `fft_len`.
pub fn transmit_into<R: Rng + ?Sized>(
    freq: f64,
    cfg: &ChannelConfig,
    rng: &mut R,
    block: &mut [Complex64],
) -> SymbolState {
    let state = draw_state(freq, cfg, rng);
    synthesize_tone(&state, cfg.sample_rate, block);
    add_noise(cfg.noise_variance(), block, rng);
    state
}

/// FFT-peak receiver with a cached plan.
pub struct Demodulator {
    fft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    buffer: Vec<Complex64>,
    fft_len: usize,
    sample_rate: f64,
    fm_scale: f64,
    /// Highest bin searched; bins `1..=max_bin` cover `(0, bandwidth]`.
    max_bin: usize,
}

impl Demodulator {
    pub fn new(cfg: &ChannelConfig) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(cfg.fft_len);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let max_bin =
            ((cfg.bandwidth / cfg.bin_width()).floor() as usize).clamp(1, cfg.fft_len / 2);
        Self {
            fft,
            scratch,
            buffer: vec![Complex64::default(); cfg.fft_len],
            fft_len: cfg.fft_len,
            sample_rate: cfg.sample_rate,
            fm_scale: cfg.fm_scale,
            max_bin,
        }
    }

    /// Frequency of the strongest in-band bin [Hz]. Ties go to the lower bin.
    pub fn peak_frequency(&mut self, samples: &[Complex64]) -> Result<f64> {
        if samples.len() < self.fft_len {
            return Err(Error::ShapeMismatch {
                expected: self.fft_len,
                actual: samples.len(),
            });
        }
        self.buffer.copy_from_slice(&samples[..self.fft_len]);
        self.fft
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        let mut best = 1;
        let mut best_power = f64::NEG_INFINITY;
        for (k, x) in self
            .buffer
            .iter()
            .enumerate()
            .take(self.max_bin + 1)
            .skip(1)
        {
            let power = x.norm_sqr();
            if power > best_power {
                best = k;
                best_power = power;
            }
        }
        Ok(best as f64 * self.sample_rate / self.fft_len as f64)
    }

    /// Current estimate for one symbol block.
    pub fn demodulate(&mut self, samples: &[Complex64]) -> Result<f64> {
        Ok(self.peak_frequency(samples)? / self.fm_scale)
    }
}

/// One-shot [`Demodulator::demodulate`].
pub fn demodulate(samples: &[Complex64], cfg: &ChannelConfig) -> Result<f64> {
    Demodulator::new(cfg).demodulate(samples)
}

/// Sends one current through the channel and back.
pub struct Link {
    cfg: ChannelConfig,
    demod: Demodulator,
    block: Vec<Complex64>,
}

impl Link {
    pub fn new(cfg: ChannelConfig) -> Self {
        let demod = Demodulator::new(&cfg);
        let block = vec![Complex64::default(); cfg.fft_len];
        Self { cfg, demod, block }
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    /// Modulate, transmit on the symbol's own RNG stream, demodulate.
    pub fn send(&mut self, ids: f64, symbol: u64) -> Result<f64> {
        let freq = modulate(ids, &self.cfg)?;
        let mut rng = symbol_rng(self.cfg.seed, symbol);
        transmit_into(freq, &self.cfg, &mut rng, &mut self.block);
        self.demod.demodulate(&self.block)
    }
}
