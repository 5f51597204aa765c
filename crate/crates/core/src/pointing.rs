//! Closed-loop model of a user pointing a tremulous ray at panel targets.
//!
//! Each sample the raw pose is the user's intended aim plus tremor; the
//! rendered pose is the raw pose passed through the (optionally enabled)
//! one-euro filter. The user sees the rendered cursor after a reaction
//! delay, blurred by a short visual integration, and steers the aim with a
//! proportional pursuit law. Because the user knows their own recent
//! motor output, the delayed percept is advanced by the aim change made
//! since it was captured, so a noise-free cursor is tracked without lag.
//!
//! Confirmation is dwell based: once the perceived cursor has stayed inside
//! the target for the dwell time the user clicks, and the click lands
//! wherever the rendered cursor is at that instant.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{AngularPose, LowPass, OneEuroParams, PoseFilter};
use crate::geometry::{ray_hit, PanelPoint, Rect, SliderLayout, UiPanel};
use crate::tremor::{TremorProfile, TremorSource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UserModel {
    /// Aim velocity per degree of perceived error, 1/s.
    pub pursuit_gain: f64,
    pub reaction_delay_s: f64,
    /// Time the perceived cursor must stay on a target before confirming.
    pub confirm_dwell_s: f64,
    pub sample_rate_hz: f64,
    /// Time constant of the visual integration applied to the perceived
    /// cursor.
    pub perception_tau_s: f64,
}

impl Default for UserModel {
    fn default() -> Self {
        Self {
            pursuit_gain: 5.0,
            reaction_delay_s: 0.15,
            confirm_dwell_s: 0.15,
            sample_rate_hz: 90.0,
            perception_tau_s: 0.25,
        }
    }
}

impl UserModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pursuit_gain", self.pursuit_gain),
            ("reaction_delay_s", self.reaction_delay_s),
            ("confirm_dwell_s", self.confirm_dwell_s),
            ("sample_rate_hz", self.sample_rate_hz),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if !(self.perception_tau_s.is_finite() && self.perception_tau_s >= 0.0) {
            return Err(Error::invalid(
                "perception_tau_s",
                "must be finite and >= 0",
            ));
        }
        Ok(())
    }

    /// Checks the model and that its sample rate does not alias `profile`.
    pub fn validate_with(&self, profile: &TremorProfile) -> Result<()> {
        self.validate()?;
        profile.validate()?;
        if self.sample_rate_hz < 2.0 * profile.tremor_hz {
            return Err(Error::Aliasing {
                rate_hz: self.sample_rate_hz,
                tremor_hz: profile.tremor_hz,
            });
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    fn delay_samples(&self) -> usize {
        (self.reaction_delay_s * self.sample_rate_hz).round() as usize
    }

    fn dwell_samples(&self) -> usize {
        ((self.confirm_dwell_s * self.sample_rate_hz) - 1e-9)
            .ceil()
            .max(1.0) as usize
    }
}

/// One pursuit update of the intended aim.
///
/// The aim moves toward the target at `pursuit_gain` times the angular
/// error between the perceived cursor and the target, integrated exactly
/// over `dt` so that a noise-free error decays as `exp(-gain * t)`. With
/// no cursor on the panel the user steers toward the panel centre.
pub fn pursuit_step(
    current_aim: &AngularPose,
    perceived_cursor: Option<PanelPoint>,
    target: PanelPoint,
    panel: &UiPanel,
    model: &UserModel,
    dt: f64,
) -> Result<AngularPose> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", "must be finite and > 0"));
    }
    let (err_yaw, err_pitch) = match perceived_cursor {
        Some(cursor) => {
            let (ty, tp) = panel.angles_of(target);
            let (cy, cp) = panel.angles_of(cursor);
            (ty - cy, tp - cp)
        }
        None => (-current_aim.yaw_deg, -current_aim.pitch_deg),
    };
    let k = 1.0 - (-model.pursuit_gain * dt).exp();
    Ok(AngularPose::new(
        current_aim.t + dt,
        current_aim.yaw_deg + k * err_yaw,
        current_aim.pitch_deg + k * err_pitch,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Click,
    Grab,
    Release,
    Toggle,
    Timeout,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Click => "click",
            EventKind::Grab => "grab",
            EventKind::Release => "release",
            EventKind::Toggle => "toggle",
            EventKind::Timeout => "timeout",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: f64,
    pub kind: EventKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub raw: AngularPose,
    pub filtered: AngularPose,
    /// Hit of the rendered pose on the panel active at that moment.
    pub hit: Option<PanelPoint>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MotionTrace {
    pub samples: Vec<TraceSample>,
    pub events: Vec<TraceEvent>,
    pub timed_out: bool,
}

impl MotionTrace {
    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

/// A confirmation issued by the user: time and where the rendered cursor was.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Click {
    pub t: f64,
    pub hit: Option<PanelPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Release {
    pub t: f64,
    pub value: u32,
}

#[derive(Debug, Clone, Copy)]
struct Percept {
    cursor: (f64, f64),
    aim: (f64, f64),
}

#[derive(Debug, Clone, Copy)]
struct Tick {
    t: f64,
    rendered: AngularPose,
    hit: Option<PanelPoint>,
    percept: Option<Percept>,
}

/// Sample-by-sample simulation of one continuous stretch of pointing.
///
/// Time, tremor, filter and perception state carry over between calls to
/// [`PointingSim::acquire`] and [`PointingSim::drag_to_value`], so a whole
/// trial is one uninterrupted stream.
#[derive(Debug, Clone)]
pub struct PointingSim {
    model: UserModel,
    dt: f64,
    index: u64,
    aim: AngularPose,
    tremor: TremorSource,
    filter: PoseFilter,
    history: VecDeque<Percept>,
    delay: usize,
    dwell: usize,
    vis_alpha: f64,
    vis: [LowPass; 4],
    record_samples: bool,
    trace: MotionTrace,
}

impl PointingSim {
    pub fn new(
        profile: &TremorProfile,
        model: &UserModel,
        filter_params: &OneEuroParams,
        filter_on: bool,
        start_aim_deg: (f64, f64),
    ) -> Result<Self> {
        model.validate_with(profile)?;
        let dt = model.dt();
        let vis_alpha = if model.perception_tau_s > 0.0 {
            dt / (model.perception_tau_s + dt)
        } else {
            1.0
        };
        Ok(Self {
            model: *model,
            dt,
            index: 0,
            aim: AngularPose::new(0.0, start_aim_deg.0, start_aim_deg.1),
            tremor: TremorSource::new(profile, model.sample_rate_hz)?,
            filter: PoseFilter::new(*filter_params, filter_on)?,
            history: VecDeque::with_capacity(model.delay_samples() + 1),
            delay: model.delay_samples(),
            dwell: model.dwell_samples(),
            vis_alpha,
            vis: [LowPass::new(); 4],
            record_samples: true,
            trace: MotionTrace::default(),
        })
    }

    /// Keep only events in the trace, not per-sample poses.
    pub fn events_only(mut self) -> Self {
        self.record_samples = false;
        self
    }

    /// Time of the next sample to be simulated.
    pub fn time(&self) -> f64 {
        self.index as f64 * self.dt
    }

    pub fn aim(&self) -> AngularPose {
        self.aim
    }

    pub fn set_filter_enabled(&mut self, enabled: bool) {
        self.filter.set_enabled(enabled);
    }

    pub fn record(&mut self, t: f64, kind: EventKind, detail: impl Into<String>) {
        self.trace.events.push(TraceEvent {
            t,
            kind,
            detail: detail.into(),
        });
    }

    pub fn mark_timed_out(&mut self, t: f64) {
        self.trace.timed_out = true;
        self.record(t, EventKind::Timeout, "duration cap reached");
    }

    pub fn trace(&self) -> &MotionTrace {
        &self.trace
    }

    pub fn into_trace(self) -> MotionTrace {
        self.trace
    }

    fn tick(&mut self, panel: &UiPanel) -> Result<Tick> {
        let t = self.time();
        let tremor = self.tremor.next_sample();
        let raw = AngularPose::new(
            t,
            self.aim.yaw_deg + tremor.yaw_offset_deg,
            self.aim.pitch_deg + tremor.pitch_offset_deg,
        );
        let rendered = self.filter.apply(raw)?;
        let hit = ray_hit(&rendered, panel)?;
        if self.record_samples {
            self.trace.samples.push(TraceSample {
                t,
                raw,
                filtered: rendered,
                hit,
            });
        }

        self.history.push_back(Percept {
            cursor: (rendered.yaw_deg, rendered.pitch_deg),
            aim: (self.aim.yaw_deg, self.aim.pitch_deg),
        });
        let percept = if self.history.len() > self.delay {
            let seen = self.history.pop_front().expect("history is non-empty");
            let a = self.vis_alpha;
            let [cy, cp, ay, ap] = &mut self.vis;
            Some(Percept {
                cursor: (cy.step(seen.cursor.0, a)?, cp.step(seen.cursor.1, a)?),
                aim: (ay.step(seen.aim.0, a)?, ap.step(seen.aim.1, a)?),
            })
        } else {
            None
        };
        self.index += 1;
        Ok(Tick {
            t,
            rendered,
            hit,
            percept,
        })
    }

    /// The user's estimate of where the cursor is now.
    fn estimated_cursor(&self, percept: Option<Percept>) -> (f64, f64) {
        match percept {
            Some(p) => (
                self.aim.yaw_deg + (p.cursor.0 - p.aim.0),
                self.aim.pitch_deg + (p.cursor.1 - p.aim.1),
            ),
            None => (self.aim.yaw_deg, self.aim.pitch_deg),
        }
    }

    fn steer(&mut self, panel: &UiPanel, target: PanelPoint, tick: &Tick) -> Result<()> {
        let (ey, ep) = self.estimated_cursor(tick.percept);
        let estimate = panel.project(ey, ep)?;
        let on_panel = panel.contains(estimate).then_some(estimate);
        self.aim = pursuit_step(&self.aim, on_panel, target, panel, &self.model, self.dt)?;
        Ok(())
    }

    fn perceived_hit(panel: &UiPanel, percept: Option<Percept>) -> Option<PanelPoint> {
        let p = percept?;
        panel
            .project(p.cursor.0, p.cursor.1)
            .ok()
            .filter(|h| panel.contains(*h))
    }

    /// Points at `target` until the user confirms with a click, or until
    /// the simulation clock reaches `deadline_s`.
    pub fn acquire(
        &mut self,
        panel: &UiPanel,
        target: &Rect,
        deadline_s: f64,
    ) -> Result<Option<Click>> {
        let aim_point = target.center();
        let mut run = 0usize;
        while self.time() < deadline_s {
            let tick = self.tick(panel)?;
            match Self::perceived_hit(panel, tick.percept) {
                Some(h) if target.contains(h) => run += 1,
                _ => run = 0,
            }
            self.steer(panel, aim_point, &tick)?;
            if run >= self.dwell {
                return Ok(Some(Click {
                    t: tick.t,
                    hit: tick.hit,
                }));
            }
        }
        Ok(None)
    }

    /// With the slider handle held, moves it until the perceived value has
    /// read `value` for the dwell time, then releases. The released value
    /// is read from the rendered cursor at the release instant.
    pub fn drag_to_value(
        &mut self,
        panel: &UiPanel,
        slider: &SliderLayout,
        value: u32,
        deadline_s: f64,
    ) -> Result<Option<Release>> {
        let aim_point = slider.point_of(value);
        let mut run = 0usize;
        while self.time() < deadline_s {
            let tick = self.tick(panel)?;
            let perceived = match tick.percept {
                Some(p) => Some(slider.value_at(panel.project(p.cursor.0, p.cursor.1)?)),
                None => None,
            };
            if perceived == Some(value) {
                run += 1;
            } else {
                run = 0;
            }
            self.steer(panel, aim_point, &tick)?;
            if run >= self.dwell {
                let at = panel.project(tick.rendered.yaw_deg, tick.rendered.pitch_deg)?;
                return Ok(Some(Release {
                    t: tick.t,
                    value: slider.value_at(at),
                }));
            }
        }
        Ok(None)
    }
}

/// Everything that describes one isolated pointing run.
#[derive(Debug, Clone, Copy)]
pub struct PointingSetup {
    pub panel: UiPanel,
    pub target: Rect,
    pub start_aim_deg: (f64, f64),
    pub profile: TremorProfile,
    pub model: UserModel,
    pub filter_params: OneEuroParams,
    pub filter_on: bool,
    pub duration_cap_s: f64,
}

/// Result of [`simulate_pointing`]: the trace plus the time of the click
/// that landed on the target, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct PointingOutcome {
    pub trace: MotionTrace,
    pub time_to_click_s: Option<f64>,
    pub missed_clicks: usize,
}

/// Runs one target acquisition from `start_aim_deg`. Clicks that land off
/// the target are logged and the user keeps trying until a click lands or
/// the duration cap is hit, in which case the trace is flagged timed out.
pub fn simulate_pointing(setup: &PointingSetup) -> Result<PointingOutcome> {
    if !(setup.duration_cap_s.is_finite() && setup.duration_cap_s > 0.0) {
        return Err(Error::invalid("duration_cap_s", "must be finite and > 0"));
    }
    let mut sim = PointingSim::new(
        &setup.profile,
        &setup.model,
        &setup.filter_params,
        setup.filter_on,
        setup.start_aim_deg,
    )?;
    let mut missed = 0;
    loop {
        match sim.acquire(&setup.panel, &setup.target, setup.duration_cap_s)? {
            Some(click) => {
                let on_target = click.hit.is_some_and(|h| setup.target.contains(h));
                let detail = match click.hit {
                    Some(h) => format!(
                        "x={:.4} y={:.4} {}",
                        h.x_m,
                        h.y_m,
                        if on_target { "hit" } else { "miss" }
                    ),
                    None => "off-panel miss".to_string(),
                };
                sim.record(click.t, EventKind::Click, detail);
                if on_target {
                    return Ok(PointingOutcome {
                        trace: sim.into_trace(),
                        time_to_click_s: Some(click.t),
                        missed_clicks: missed,
                    });
                }
                missed += 1;
            }
            None => {
                let t = sim.time();
                sim.mark_timed_out(t);
                return Ok(PointingOutcome {
                    trace: sim.into_trace(),
                    time_to_click_s: None,
                    missed_clicks: missed,
                });
            }
        }
    }
}
