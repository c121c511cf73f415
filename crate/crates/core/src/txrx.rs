//! On-off-keyed transmission and difference detection over the fluidic
//! link.
//!
//! A frame of `L` bits is transmitted by releasing one concentration pulse
//! of width `T_p` per 1-bit, one bit slot of `T_b ≥ T_p` apart. Each pulse
//! reaches the sensor a transport delay `t_delay` after release and
//! contributes one copy of the single-pulse kernel; the receiver current is
//! the baseline plus the superposition of all live kernels (binding sites
//! are far from saturation at these doses, so kernels add).
//!
//! Detection needs no threshold or channel estimate. The receiver samples
//! the (optionally noise-filtered) current at the arrival-aligned instants
//!
//! ```text
//! t_i = t_tx + t_delay + i·T_b,     i = 0 … L
//! ```
//!
//! and declares bit `i` a 1 exactly when `r(t_{i+1}) − r(t_i) < 0`: a fresh
//! pulse drags the current down over its own slot, while a silent slot only
//! sees earlier tails relax upward. Comparing consecutive samples makes the
//! decision invariant under any positive affine rescaling `a·r + b` of the
//! trace, so gain and offset never need calibrating.
//!
//! Everything is reproducible by construction: the payload comes from a
//! seeded xorshift64* generator, measurement noise from a counter-based
//! generator keyed by `seed XOR NOISE_SEED_SALT`, and the parallel seed
//! sweep merges results in seed order, so one `u64` pins the whole
//! experiment bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::pulse::{pulse_response_ua, PulseError, PulseModelParams};

/// XOR-folded into the frame seed to decorrelate measurement noise from the
/// payload without asking callers to manage two seeds.
pub const NOISE_SEED_SALT: u64 = 0xD1B5_4A32_D192_ED03;

/// Invalid link parameter or detection failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TxRxError {
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("pulse width {pulse_width_s} s must fit inside the bit period {bit_period_s} s")]
    PulseOverrunsSlot {
        pulse_width_s: f64,
        bit_period_s: f64,
    },
    #[error("{name} must be finite and non-negative, got {value}")]
    NegativeOrNan { name: &'static str, value: f64 },
    #[error("filter window must be odd, got {width}")]
    EvenFilterWindow { width: usize },
    #[error("filter window {window_s} s is shorter than the sample spacing {dt_s} s")]
    FilterWindowTooShort { window_s: f64, dt_s: f64 },
    #[error("decision instants {instants:?} s fall outside the sampled trace")]
    DecisionsOutsideTrace { instants: Vec<f64> },
    #[error("payload override may contain only 0 and 1, found {value} at index {index}")]
    BadPayloadBit { value: u8, index: usize },
    #[error("bit vectors differ in length: {expected} vs {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("cannot take statistics of an empty set")]
    Empty,
    #[error(transparent)]
    Pulse(#[from] PulseError),
}

fn positive(name: &'static str, value: f64) -> Result<f64, TxRxError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(TxRxError::NotPositive { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<f64, TxRxError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(TxRxError::NegativeOrNan { name, value })
    }
}

/// Deterministic payload generator (xorshift64*).
///
/// Small, seedable, and stable across platforms: the per-step state update
/// is three xor-shifts (12, 25, 27) and the output is the top bit of the
/// state multiplied by `0x2545F4914F6CDD1D`. A zero seed would be a fixed
/// point of the state update, so it is remapped to an arbitrary odd
/// constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitGenerator {
    state: u64,
}

impl BitGenerator {
    pub fn new(seed: u64) -> Self {
        Self {
            state: if seed == 0 { 0x9E37_79B9_7F4A_7C15 } else { seed },
        }
    }

    /// Next payload bit (0 or 1).
    pub fn next_bit(&mut self) -> u8 {
        self.state ^= self.state >> 12;
        self.state ^= self.state << 25;
        self.state ^= self.state >> 27;
        (self.state.wrapping_mul(0x2545_F491_4F6C_DD1D) >> 63) as u8
    }

    /// Next `n` payload bits.
    pub fn bits(&mut self, n: usize) -> Vec<u8> {
        (0..n).map(|_| self.next_bit()).collect()
    }
}

/// Timing of the on-off-keyed frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OokScheme {
    /// Bit slot duration `T_b` [s].
    pub bit_period_s: f64,
    /// Released pulse width `T_p` [s], at most one slot.
    pub pulse_width_s: f64,
    /// Release-to-sensor transport delay [s].
    pub transport_delay_s: f64,
    /// Release instant of bit 0 [s].
    pub t_tx_start_s: f64,
}

impl OokScheme {
    pub fn new(
        bit_period_s: f64,
        pulse_width_s: f64,
        transport_delay_s: f64,
        t_tx_start_s: f64,
    ) -> Result<Self, TxRxError> {
        positive("bit period", bit_period_s)?;
        positive("pulse width", pulse_width_s)?;
        non_negative("transport delay", transport_delay_s)?;
        if !t_tx_start_s.is_finite() {
            return Err(TxRxError::NegativeOrNan {
                name: "transmission start",
                value: t_tx_start_s,
            });
        }
        if pulse_width_s > bit_period_s {
            return Err(TxRxError::PulseOverrunsSlot {
                pulse_width_s,
                bit_period_s,
            });
        }
        Ok(Self {
            bit_period_s,
            pulse_width_s,
            transport_delay_s,
            t_tx_start_s,
        })
    }

    /// Arrival/flush window of bit `i`'s pulse at the sensor [s].
    pub fn arrival_window_s(&self, bit_index: usize) -> (f64, f64) {
        let t_a = self.t_tx_start_s + self.transport_delay_s + bit_index as f64 * self.bit_period_s;
        (t_a, t_a + self.pulse_width_s)
    }

    /// Decision sampling instant `t_i` [s]; detecting `n` bits takes
    /// instants `0..=n`.
    pub fn decision_time_s(&self, i: usize) -> f64 {
        self.t_tx_start_s + self.transport_delay_s + i as f64 * self.bit_period_s
    }
}

/// Noise-free received current [µA]: baseline plus one kernel copy per
/// 1-bit, each re-windowed to its own arrival slot. Data-parallel over
/// samples with the `parallel` feature; the per-sample kernel sum runs in
/// bit order either way, so the output is bit-for-bit feature-independent.
pub fn synthesize_signal_ua(
    pulse: &PulseModelParams,
    scheme: &OokScheme,
    bits: &[u8],
    baseline_ua: f64,
    times_s: &[f64],
) -> Result<Vec<f64>, TxRxError> {
    let kernels = bit_kernels(pulse, scheme, bits)?;
    let sample = |t: f64| -> Result<f64, TxRxError> {
        let mut acc = baseline_ua;
        for k in &kernels {
            acc += pulse_response_ua(t, k)?;
        }
        Ok(acc)
    };
    #[cfg(feature = "parallel")]
    {
        times_s.par_iter().map(|&t| sample(t)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        times_s.iter().map(|&t| sample(t)).collect()
    }
}

/// Sequential twin of [`synthesize_signal_ua`].
pub fn synthesize_signal_ua_seq(
    pulse: &PulseModelParams,
    scheme: &OokScheme,
    bits: &[u8],
    baseline_ua: f64,
    times_s: &[f64],
) -> Result<Vec<f64>, TxRxError> {
    let kernels = bit_kernels(pulse, scheme, bits)?;
    times_s
        .iter()
        .map(|&t| {
            let mut acc = baseline_ua;
            for k in &kernels {
                acc += pulse_response_ua(t, k)?;
            }
            Ok(acc)
        })
        .collect()
}

fn bit_kernels(
    pulse: &PulseModelParams,
    scheme: &OokScheme,
    bits: &[u8],
) -> Result<Vec<PulseModelParams>, TxRxError> {
    bits.iter()
        .enumerate()
        .filter(|(_, &b)| b != 0)
        .map(|(i, _)| {
            let (t_a, t_d) = scheme.arrival_window_s(i);
            pulse.with_window(t_a, t_d).map_err(TxRxError::from)
        })
        .collect()
}

/// Additive measurement disturbance: white Gaussian noise plus a linear
/// baseline drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Gaussian standard deviation [µA].
    pub sigma_ua: f64,
    /// Drift slope [µA/s], applied as `drift·t`.
    pub drift_ua_per_s: f64,
}

impl NoiseModel {
    pub fn new(sigma_ua: f64, drift_ua_per_s: f64) -> Result<Self, TxRxError> {
        non_negative("noise sigma", sigma_ua)?;
        if !drift_ua_per_s.is_finite() {
            return Err(TxRxError::NegativeOrNan {
                name: "drift slope",
                value: drift_ua_per_s,
            });
        }
        Ok(Self {
            sigma_ua,
            drift_ua_per_s,
        })
    }

    /// Disturb a clean trace. The same `noise_seed` always produces the
    /// same disturbance, independent of the `parallel` feature (the stream
    /// is drawn sequentially on purpose).
    pub fn apply(&self, clean_ua: &[f64], times_s: &[f64], noise_seed: u64) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(noise_seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal is well-formed");
        clean_ua
            .iter()
            .zip(times_s)
            .map(|(&r, &t)| r + self.sigma_ua * normal.sample(&mut rng) + self.drift_ua_per_s * t)
            .collect()
    }
}

/// Odd sample count covering a filter window given in seconds:
/// `round(window/dt)` forced up to the next odd number. The window must be
/// at least one sample wide.
pub fn window_samples(window_s: f64, dt_s: f64) -> Result<usize, TxRxError> {
    positive("grid spacing", dt_s)?;
    positive("filter window", window_s)?;
    if window_s < dt_s {
        return Err(TxRxError::FilterWindowTooShort { window_s, dt_s });
    }
    let mut n = (window_s / dt_s).round() as usize;
    if n % 2 == 0 {
        n += 1;
    }
    Ok(n.max(1))
}

/// [`moving_mean`] with the window given in seconds instead of samples.
pub fn moving_mean_window_s(
    samples: &[f64],
    window_s: f64,
    dt_s: f64,
) -> Result<Vec<f64>, TxRxError> {
    moving_mean(samples, window_samples(window_s, dt_s)?)
}

/// Centered moving mean with an odd window; near the edges the window
/// shrinks to what the trace covers, so the output has the input's length
/// and no startup bias. `width <= 1` is the identity.
pub fn moving_mean(samples: &[f64], width: usize) -> Result<Vec<f64>, TxRxError> {
    if width > 1 && width % 2 == 0 {
        return Err(TxRxError::EvenFilterWindow { width });
    }
    if width <= 1 {
        return Ok(samples.to_vec());
    }
    let half = width / 2;
    let n = samples.len();
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let window = &samples[lo..=hi];
            window.iter().sum::<f64>() / window.len() as f64
        })
        .collect())
}

/// Nearest-grid sample indices for decision instants `t_i = scheme
/// decision time + offset_s`, `i = 0..=n_bits`. A negative offset samples
/// ahead of the nominal interval boundary, which keeps a centered filter
/// window from reaching into the next slot's pulse onset. Errors list
/// every instant that rounds off the trace.
pub fn decision_indices(
    scheme: &OokScheme,
    offset_s: f64,
    t0_s: f64,
    dt_s: f64,
    n_samples: usize,
    n_bits: usize,
) -> Result<Vec<usize>, TxRxError> {
    positive("grid spacing", dt_s)?;
    let mut indices = Vec::with_capacity(n_bits + 1);
    let mut missing = Vec::new();
    for i in 0..=n_bits {
        let t = scheme.decision_time_s(i) + offset_s;
        let idx = ((t - t0_s) / dt_s).round();
        if idx < 0.0 || idx >= n_samples as f64 {
            missing.push(t);
        } else {
            indices.push(idx as usize);
        }
    }
    if missing.is_empty() {
        Ok(indices)
    } else {
        Err(TxRxError::DecisionsOutsideTrace { instants: missing })
    }
}

/// Difference detector: bit `i` is 1 exactly when the trace falls across
/// its slot, `r[idx_{i+1}] − r[idx_i] < 0`. Returns one bit per
/// consecutive index pair.
pub fn detect_bits(samples: &[f64], indices: &[usize]) -> Vec<u8> {
    indices
        .windows(2)
        .map(|w| u8::from(samples[w[1]] - samples[w[0]] < 0.0))
        .collect()
}

/// Clamp a trace's baseline excursion to the saturation step magnitude.
///
/// The superposition synthesis is linear and time-invariant by assumption;
/// a real surface cannot step past `|ΔI_sat|`. Capping exposes how much the
/// linear model overshoots when pulses pile up.
pub fn apply_saturation_cap(samples: &mut [f64], baseline_ua: f64, delta_i_sat_ua: f64) {
    let cap = delta_i_sat_ua.abs();
    for r in samples {
        let excursion = *r - baseline_ua;
        if excursion.abs() > cap {
            *r = baseline_ua + excursion.signum() * cap;
        }
    }
}

/// Fraction of mismatched positions between sent and detected bits.
pub fn bit_error_rate(sent: &[u8], detected: &[u8]) -> Result<f64, TxRxError> {
    if sent.is_empty() {
        return Err(TxRxError::Empty);
    }
    if sent.len() != detected.len() {
        return Err(TxRxError::LengthMismatch {
            expected: sent.len(),
            actual: detected.len(),
        });
    }
    let errors = sent
        .iter()
        .zip(detected)
        .filter(|(a, b)| (**a != 0) != (**b != 0))
        .count();
    Ok(errors as f64 / sent.len() as f64)
}

/// Median of a sample set (mean of the middle pair for even counts).
pub fn median(values: &[f64]) -> Result<f64, TxRxError> {
    if values.is_empty() {
        return Err(TxRxError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mid = sorted.len() / 2;
    Ok(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    })
}

/// One complete frame experiment: payload, synthesis, disturbance,
/// optional filtering, detection.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    /// Single-pulse kernel template; its window is re-derived per bit.
    pub pulse: PulseModelParams,
    /// Frame timing.
    pub scheme: OokScheme,
    /// Payload length `L`.
    pub n_bits: usize,
    /// Quiescent device current [µA].
    pub baseline_ua: f64,
    /// Receiver sampling interval [s].
    pub dt_s: f64,
    /// Measurement disturbance model.
    pub noise: NoiseModel,
    /// Moving-mean width in samples; `0` or `1` disables filtering.
    pub filter_window: usize,
    /// Shift applied to every decision instant [s]. Negative values sample
    /// ahead of the nominal slot boundary so a centered filter window never
    /// reaches into the next pulse's onset.
    pub decision_offset_s: f64,
    /// Explicit payload replacing the seeded generator; length must equal
    /// `n_bits`.
    pub payload_override: Option<Vec<u8>>,
    /// Clamp the synthesized excursion to this saturation step [µA]
    /// before noise (see [`apply_saturation_cap`]); `None` keeps the pure
    /// linear superposition.
    pub saturation_cap_ua: Option<f64>,
    /// Noise stream seed; `None` derives `seed XOR NOISE_SEED_SALT`.
    pub noise_seed: Option<u64>,
}

/// Everything a single frame run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRun {
    /// Transmitted payload.
    pub bits: Vec<u8>,
    /// Receiver sampling grid [s].
    pub times_s: Vec<f64>,
    /// Noise-free received current [µA].
    pub clean_ua: Vec<f64>,
    /// Disturbed current before any filtering [µA].
    pub noisy_ua: Vec<f64>,
    /// Disturbed (and, if enabled, filtered) current the detector saw [µA].
    pub received_ua: Vec<f64>,
    /// Sample indices the detector compared, one per decision instant.
    pub decision_indices: Vec<usize>,
    /// Noise stream seed actually used (derived or explicit).
    pub noise_seed: u64,
    /// Detector output.
    pub detected: Vec<u8>,
    /// Fraction of payload bits detected wrongly.
    pub ber: f64,
}

/// Run one frame end to end from a single seed. The payload derives from
/// `seed` directly and the noise stream from `seed XOR NOISE_SEED_SALT`,
/// so re-running with the same parameters and seed reproduces every vector
/// bit-for-bit.
pub fn run_link(params: &LinkParams, seed: u64) -> Result<LinkRun, TxRxError> {
    if params.n_bits == 0 {
        return Err(TxRxError::Empty);
    }
    positive("grid spacing", params.dt_s)?;
    if params.filter_window > 1 && params.filter_window % 2 == 0 {
        return Err(TxRxError::EvenFilterWindow {
            width: params.filter_window,
        });
    }
    let bits = match &params.payload_override {
        Some(payload) => {
            if payload.len() != params.n_bits {
                return Err(TxRxError::LengthMismatch {
                    expected: params.n_bits,
                    actual: payload.len(),
                });
            }
            if let Some(index) = payload.iter().position(|&b| b > 1) {
                return Err(TxRxError::BadPayloadBit {
                    value: payload[index],
                    index,
                });
            }
            payload.clone()
        }
        None => BitGenerator::new(seed).bits(params.n_bits),
    };

    // Cover the last decision instant plus one slot of margin.
    let t_last = params.scheme.decision_time_s(params.n_bits);
    let t_first = params.scheme.decision_time_s(0) + params.decision_offset_s.min(0.0);
    let t0 = params.scheme.t_tx_start_s.min(0.0).min(t_first);
    let n_samples = ((t_last + params.scheme.bit_period_s - t0) / params.dt_s).ceil() as usize + 1;
    let times_s: Vec<f64> = (0..n_samples)
        .map(|i| t0 + i as f64 * params.dt_s)
        .collect();

    let mut clean_ua =
        synthesize_signal_ua(&params.pulse, &params.scheme, &bits, params.baseline_ua, &times_s)?;
    if let Some(sat) = params.saturation_cap_ua {
        apply_saturation_cap(&mut clean_ua, params.baseline_ua, sat);
    }
    let noise_seed = params.noise_seed.unwrap_or(seed ^ NOISE_SEED_SALT);
    let noisy = params.noise.apply(&clean_ua, &times_s, noise_seed);
    let received_ua = moving_mean(&noisy, params.filter_window)?;
    let indices = decision_indices(
        &params.scheme,
        params.decision_offset_s,
        t0,
        params.dt_s,
        n_samples,
        params.n_bits,
    )?;
    let detected = detect_bits(&received_ua, &indices);
    let ber = bit_error_rate(&bits, &detected)?;
    Ok(LinkRun {
        bits,
        times_s,
        clean_ua,
        noisy_ua: noisy,
        received_ua,
        decision_indices: indices,
        noise_seed,
        detected,
        ber,
    })
}

/// Frame error rates for a whole seed list, one run per seed. Runs
/// data-parallel with the `parallel` feature; results always come back in
/// seed order, so the output is identical to the sequential path.
pub fn ber_sweep(params: &LinkParams, seeds: &[u64]) -> Result<Vec<f64>, TxRxError> {
    #[cfg(feature = "parallel")]
    {
        seeds
            .par_iter()
            .map(|&s| run_link(params, s).map(|r| r.ber))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ber_sweep_seq(params, seeds)
    }
}

/// Sequential twin of [`ber_sweep`].
pub fn ber_sweep_seq(params: &LinkParams, seeds: &[u64]) -> Result<Vec<f64>, TxRxError> {
    seeds
        .iter()
        .map(|&s| run_link(params, s).map(|r| r.ber))
        .collect()
}
