//! First-order low-pass and one-euro filtering of angular pose streams.
//!
//! The one-euro filter is an exponential smoother whose cutoff frequency
//! rises with the (smoothed) speed of the signal: slow, jittery motion is
//! smoothed heavily while fast motion passes with little lag.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoothing factor of an exponential moving average sampled every `dt`
/// seconds with the given cutoff frequency.
///
/// `alpha = 1 / (1 + tau / dt)` with `tau = 1 / (2 pi cutoff_hz)`.
pub fn smoothing_alpha(cutoff_hz: f64, dt: f64) -> Result<f64> {
    if !(cutoff_hz.is_finite() && cutoff_hz > 0.0) {
        return Err(Error::invalid(
            "cutoff_hz",
            format!("must be finite and > 0, got {cutoff_hz}"),
        ));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(
            "dt",
            format!("must be finite and > 0, got {dt}"),
        ));
    }
    let tau = 1.0 / (2.0 * PI * cutoff_hz);
    Ok(1.0 / (1.0 + tau / dt))
}

/// Exponential moving average state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LowPass {
    last: Option<f64>,
}

impl LowPass {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_initialized(&self) -> bool {
        self.last.is_some()
    }

    pub fn last_output(&self) -> Option<f64> {
        self.last
    }

    /// Seeds the state so the next step blends against `value`.
    pub fn seed(&mut self, value: f64) {
        self.last = Some(value);
    }

    pub fn reset(&mut self) {
        self.last = None;
    }

    /// One EMA step. The first sample after construction or reset passes
    /// through unchanged. A non-finite `x` leaves the state untouched.
    pub fn step(&mut self, x: f64, alpha: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::InvalidSample { value: x });
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(
                "alpha",
                format!("must lie in [0, 1], got {alpha}"),
            ));
        }
        let out = match self.last {
            None => x,
            Some(_) if alpha == 1.0 => x,
            // increment form keeps a constant input an exact fixed point
            Some(prev) => prev + alpha * (x - prev),
        };
        self.last = Some(out);
        Ok(out)
    }
}

/// Tuning of the one-euro filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OneEuroParams {
    /// Cutoff at zero speed, in Hz.
    pub min_cutoff_hz: f64,
    /// Cutoff increase per unit of speed (per degree/second here).
    pub beta: f64,
    /// Cutoff used when smoothing the derivative, in Hz.
    pub d_cutoff_hz: f64,
}

impl Default for OneEuroParams {
    fn default() -> Self {
        Self {
            min_cutoff_hz: 1.0,
            beta: 0.3,
            d_cutoff_hz: 1.0,
        }
    }
}

impl OneEuroParams {
    pub fn new(min_cutoff_hz: f64, beta: f64, d_cutoff_hz: f64) -> Result<Self> {
        let params = Self {
            min_cutoff_hz,
            beta,
            d_cutoff_hz,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_cutoff_hz.is_finite() && self.min_cutoff_hz > 0.0) {
            return Err(Error::invalid("min_cutoff_hz", "must be finite and > 0"));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::invalid("beta", "must be finite and >= 0"));
        }
        if !(self.d_cutoff_hz.is_finite() && self.d_cutoff_hz > 0.0) {
            return Err(Error::invalid("d_cutoff_hz", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// State of one scalar one-euro channel.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OneEuroState {
    x_filter: LowPass,
    dx_filter: LowPass,
    last_t: Option<f64>,
    last_raw: f64,
}

impl OneEuroState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }

    /// Smoothed derivative estimate after the latest step, if any.
    pub fn derivative(&self) -> Option<f64> {
        self.dx_filter.last_output()
    }

    pub fn step(&mut self, params: &OneEuroParams, t: f64, x: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::invalid("t", "timestamp must be finite"));
        }
        if !x.is_finite() {
            return Err(Error::InvalidSample { value: x });
        }
        let Some(last_t) = self.last_t else {
            self.x_filter.seed(x);
            self.dx_filter.seed(0.0);
            self.last_t = Some(t);
            self.last_raw = x;
            return Ok(x);
        };
        if t <= last_t {
            return Err(Error::NonMonotonicTime { last: last_t, t });
        }
        params.validate()?;

        let dt = t - last_t;
        let raw_dx = (x - self.last_raw) / dt;
        let dx = self
            .dx_filter
            .step(raw_dx, smoothing_alpha(params.d_cutoff_hz, dt)?)?;
        let cutoff = params.min_cutoff_hz + params.beta * dx.abs();
        let out = self.x_filter.step(x, smoothing_alpha(cutoff, dt)?)?;

        self.last_t = Some(t);
        self.last_raw = x;
        Ok(out)
    }
}

/// Ray direction as yaw/pitch in degrees at a timestamp in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularPose {
    pub t: f64,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
}

impl AngularPose {
    pub fn new(t: f64, yaw_deg: f64, pitch_deg: f64) -> Self {
        Self {
            t,
            yaw_deg,
            pitch_deg,
        }
    }
}

/// Incremental two-channel pose filter with a runtime toggle.
///
/// Yaw and pitch are filtered independently. While disabled, poses pass
/// through verbatim; re-enabling starts from a fresh state seeded by the
/// next pose.
#[derive(Debug, Clone)]
pub struct PoseFilter {
    params: OneEuroParams,
    enabled: bool,
    yaw: OneEuroState,
    pitch: OneEuroState,
}

impl PoseFilter {
    pub fn new(params: OneEuroParams, enabled: bool) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            enabled,
            yaw: OneEuroState::new(),
            pitch: OneEuroState::new(),
        })
    }

    pub fn params(&self) -> &OneEuroParams {
        &self.params
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn set_enabled(&mut self, enabled: bool) {
        if enabled && !self.enabled {
            self.yaw.reset();
            self.pitch.reset();
        }
        self.enabled = enabled;
    }

    pub fn apply(&mut self, pose: AngularPose) -> Result<AngularPose> {
        if !self.enabled {
            return Ok(pose);
        }
        let yaw = self.yaw.step(&self.params, pose.t, pose.yaw_deg)?;
        let pitch = self.pitch.step(&self.params, pose.t, pose.pitch_deg)?;
        Ok(AngularPose::new(pose.t, yaw, pitch))
    }
}

/// Filters a whole pose trace. With `enabled == false` the trace is
/// returned unchanged.
pub fn filter_pose_stream(
    trace: &[AngularPose],
    params: &OneEuroParams,
    enabled: bool,
) -> Result<Vec<AngularPose>> {
    filter_pose_stream_toggled(trace, params, enabled, &[])
}

/// Like [`filter_pose_stream`], flipping the enabled flag at each toggle
/// time. A toggle takes effect at the first sample with `t >= toggle`.
pub fn filter_pose_stream_toggled(
    trace: &[AngularPose],
    params: &OneEuroParams,
    initially_enabled: bool,
    toggles_s: &[f64],
) -> Result<Vec<AngularPose>> {
    let mut filter = PoseFilter::new(*params, initially_enabled)?;
    let mut toggles = toggles_s.iter().copied().peekable();
    let mut out = Vec::with_capacity(trace.len());
    for (index, pose) in trace.iter().enumerate() {
        while toggles.next_if(|&at| pose.t >= at).is_some() {
            let flipped = !filter.is_enabled();
            filter.set_enabled(flipped);
        }
        let filtered = filter.apply(*pose).map_err(|e| Error::AtSample {
            index,
            source: Box::new(e),
        })?;
        out.push(filtered);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const DT_90: f64 = 1.0 / 90.0;

    fn ema_magnitude(alpha: f64, omega: f64) -> f64 {
        let q = 1.0 - alpha;
        alpha / (1.0 - 2.0 * q * omega.cos() + q * q).sqrt()
    }

    #[test]
    fn alpha_closed_form_values() {
        assert_abs_diff_eq!(
            smoothing_alpha(1.0 / (2.0 * PI), 1.0).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            smoothing_alpha(1.0, DT_90).unwrap(),
            0.06526,
            epsilon = 5e-6
        );
        assert!((1.0 - smoothing_alpha(1e6, 1.0).unwrap()) < 1e-5);
    }

    #[test]
    fn alpha_rejects_bad_arguments() {
        for (fc, dt) in [
            (0.0, 1.0),
            (-1.0, 1.0),
            (1.0, 0.0),
            (f64::NAN, 1.0),
            (1.0, f64::INFINITY),
        ] {
            assert!(matches!(
                smoothing_alpha(fc, dt),
                Err(Error::InvalidParameter { .. })
            ));
        }
    }

    #[test]
    fn lowpass_examples() {
        let mut lp = LowPass::new();
        lp.seed(3.0);
        assert_eq!(lp.step(7.0, 1.0).unwrap(), 7.0);

        let mut lp = LowPass::new();
        lp.seed(3.0);
        assert_eq!(lp.step(7.0, 0.0).unwrap(), 3.0);

        let mut lp = LowPass::new();
        lp.seed(4.0);
        assert_abs_diff_eq!(lp.step(8.0, 0.25).unwrap(), 5.0, epsilon = 1e-12);

        let mut fresh = LowPass::new();
        assert_eq!(fresh.step(42.0, 0.1).unwrap(), 42.0);
    }

    #[test]
    fn lowpass_non_finite_leaves_state() {
        let mut lp = LowPass::new();
        lp.seed(2.0);
        assert!(matches!(
            lp.step(f64::NAN, 0.5),
            Err(Error::InvalidSample { .. })
        ));
        assert_eq!(lp.last_output(), Some(2.0));
    }

    #[test]
    fn one_euro_first_sample_and_step() {
        let params = OneEuroParams::new(1.0, 0.0, 1.0).unwrap();
        let mut s = OneEuroState::new();
        assert_eq!(s.step(&params, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(s.derivative(), Some(0.0));
        let y = s.step(&params, DT_90, 1.0).unwrap();
        assert_abs_diff_eq!(y, 0.06526, epsilon = 5e-6);

        let mut s = OneEuroState::new();
        assert_eq!(s.step(&OneEuroParams::default(), 3.0, 5.0).unwrap(), 5.0);
    }

    #[test]
    fn one_euro_rejects_time_going_backwards() {
        let p = OneEuroParams::default();
        let mut s = OneEuroState::new();
        s.step(&p, 1.0, 0.0).unwrap();
        assert!(matches!(
            s.step(&p, 1.0, 0.0),
            Err(Error::NonMonotonicTime { .. })
        ));
        assert!(matches!(
            s.step(&p, 0.5, 0.0),
            Err(Error::NonMonotonicTime { .. })
        ));
        assert!(matches!(
            s.step(&p, 2.0, f64::INFINITY),
            Err(Error::InvalidSample { .. })
        ));
    }

    #[test]
    fn stream_error_carries_index() {
        let trace = vec![
            AngularPose::new(0.0, 0.0, 0.0),
            AngularPose::new(0.1, 0.0, 0.0),
            AngularPose::new(0.1, 0.0, 0.0),
        ];
        match filter_pose_stream(&trace, &OneEuroParams::default(), true) {
            Err(Error::AtSample { index, source }) => {
                assert_eq!(index, 2);
                assert!(matches!(*source, Error::NonMonotonicTime { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sinusoid_attenuation_matches_ema_magnitude() {
        let params = OneEuroParams::new(1.0, 0.0, 1.0).unwrap();
        let n = 6 * 90;
        let trace: Vec<_> = (0..n)
            .map(|k| {
                let t = k as f64 * DT_90;
                AngularPose::new(t, (2.0 * PI * 8.0 * t).sin(), 0.0)
            })
            .collect();
        let out = filter_pose_stream(&trace, &params, true).unwrap();
        // last second holds exactly 8 periods
        let tail = &out[n - 90..];
        let rms = (tail.iter().map(|p| p.yaw_deg * p.yaw_deg).sum::<f64>() / 90.0).sqrt();
        let amplitude = rms * 2f64.sqrt();
        let alpha = smoothing_alpha(1.0, DT_90).unwrap();
        let expected = ema_magnitude(alpha, 2.0 * PI * 8.0 / 90.0);
        assert_abs_diff_eq!(expected, 0.122, epsilon = 1e-3);
        assert!(
            (amplitude - expected).abs() / expected < 0.02,
            "{amplitude} vs {expected}"
        );
    }

    #[test]
    fn toggle_reseeds_without_spike() {
        let params = OneEuroParams::default();
        let trace: Vec<_> = (0..200)
            .map(|k| AngularPose::new(k as f64 * DT_90, 10.0 + k as f64 * 0.05, -3.0))
            .collect();
        let toggles = [0.5, 1.0];
        let out = filter_pose_stream_toggled(&trace, &params, true, &toggles).unwrap();
        for (raw, filt) in trace.iter().zip(&out) {
            if raw.t >= 0.5 && raw.t < 1.0 {
                assert_eq!(raw, filt);
            }
        }
        let first_on = trace.iter().position(|p| p.t >= 1.0).unwrap();
        assert_eq!(out[first_on], trace[first_on]);
    }

    #[test]
    fn beta_reduces_ramp_lag() {
        let ramp: Vec<_> = (0..450)
            .map(|k| {
                let t = k as f64 * DT_90;
                AngularPose::new(t, 20.0 * t, 0.0)
            })
            .collect();
        let lag = |beta: f64| {
            let p = OneEuroParams::new(1.0, beta, 1.0).unwrap();
            let out = filter_pose_stream(&ramp, &p, true).unwrap();
            let last = out.len() - 1;
            ramp[last].yaw_deg - out[last].yaw_deg
        };
        let plain = lag(0.0);
        let adaptive = lag(0.05);
        assert!(plain > 0.0);
        assert!(adaptive < plain, "{adaptive} !< {plain}");
    }

    #[test]
    fn smoothing_reduces_noise_variance() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let trace: Vec<_> = (0..2000)
            .map(|k| AngularPose::new(k as f64 * DT_90, normal.sample(&mut rng), 0.0))
            .collect();
        let p = OneEuroParams::new(5.0, 0.0, 1.0).unwrap();
        let out = filter_pose_stream(&trace, &p, true).unwrap();
        let var = |xs: &mut dyn Iterator<Item = f64>| {
            let v: Vec<f64> = xs.collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
        };
        let vin = var(&mut trace.iter().map(|p| p.yaw_deg));
        let vout = var(&mut out.iter().map(|p| p.yaw_deg));
        assert!(vout < vin);
    }

    fn arb_params() -> impl Strategy<Value = OneEuroParams> {
        (0.05f64..20.0, 0.0f64..2.0, 0.05f64..20.0).prop_map(|(a, b, c)| OneEuroParams {
            min_cutoff_hz: a,
            beta: b,
            d_cutoff_hz: c,
        })
    }

    fn arb_trace() -> impl Strategy<Value = Vec<AngularPose>> {
        prop::collection::vec((0.001f64..0.1, -60.0f64..60.0, -60.0f64..60.0), 1..120).prop_map(
            |steps| {
                let mut t = 0.0;
                steps
                    .into_iter()
                    .map(|(dt, y, p)| {
                        t += dt;
                        AngularPose::new(t, y, p)
                    })
                    .collect()
            },
        )
    }

    proptest! {
        #[test]
        fn disabled_is_identity(trace in arb_trace(), params in arb_params()) {
            prop_assert_eq!(filter_pose_stream(&trace, &params, false).unwrap(), trace);
        }

        #[test]
        fn constant_is_fixed_point(params in arb_params(), v in -80.0f64..80.0, n in 1usize..200) {
            let trace: Vec<_> = (0..n).map(|k| AngularPose::new(k as f64 * DT_90, v, -v / 2.0)).collect();
            prop_assert_eq!(filter_pose_stream(&trace, &params, true).unwrap(), trace);
        }

        #[test]
        fn output_stays_within_seen_range(trace in arb_trace(), params in arb_params()) {
            let out = filter_pose_stream(&trace, &params, true).unwrap();
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (raw, f) in trace.iter().zip(&out) {
                lo = lo.min(raw.yaw_deg);
                hi = hi.max(raw.yaw_deg);
                prop_assert!(f.yaw_deg >= lo - 1e-9 && f.yaw_deg <= hi + 1e-9);
            }
        }

        #[test]
        fn alpha_increasing_in_both_arguments(fc in 0.01f64..100.0, dt in 1e-4f64..1.0) {
            let a = smoothing_alpha(fc, dt).unwrap();
            prop_assert!(a > 0.0 && a <= 1.0);
            prop_assert!(smoothing_alpha(fc * 1.5, dt).unwrap() > a);
            prop_assert!(smoothing_alpha(fc, dt * 1.5).unwrap() > a);
        }
    }
}
