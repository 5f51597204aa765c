//! Ray-to-panel hit testing, the numpad and slider layouts, and the
//! ergonomic comfort-angle and distance-zone calculators.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::AngularPose;

/// A flat UI panel facing the user, centred on the neutral ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UiPanel {
    pub distance_m: f64,
    pub width_m: f64,
    pub height_m: f64,
}

impl UiPanel {
    pub fn new(distance_m: f64, width_m: f64, height_m: f64) -> Result<Self> {
        for (name, v) in [
            ("distance_m", distance_m),
            ("width_m", width_m),
            ("height_m", height_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        Ok(Self {
            distance_m,
            width_m,
            height_m,
        })
    }

    pub fn contains(&self, p: PanelPoint) -> bool {
        p.x_m.abs() <= self.width_m / 2.0 && p.y_m.abs() <= self.height_m / 2.0
    }

    /// Yaw and pitch (degrees) of the ray through `p`.
    pub fn angles_of(&self, p: PanelPoint) -> (f64, f64) {
        (
            (p.x_m / self.distance_m).atan().to_degrees(),
            (p.y_m / self.distance_m).atan().to_degrees(),
        )
    }

    /// Where a ray with the given angles meets the panel plane, ignoring
    /// the panel extents.
    pub fn project(&self, yaw_deg: f64, pitch_deg: f64) -> Result<PanelPoint> {
        for a in [yaw_deg, pitch_deg] {
            if !a.is_finite() || a.abs() >= 90.0 {
                return Err(Error::BehindPlane { angle_deg: a });
            }
        }
        Ok(PanelPoint::new(
            self.distance_m * yaw_deg.to_radians().tan(),
            self.distance_m * pitch_deg.to_radians().tan(),
        ))
    }
}

/// A point on a panel in metres, origin at the panel centre, +y up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelPoint {
    pub x_m: f64,
    pub y_m: f64,
}

impl PanelPoint {
    pub const CENTER: PanelPoint = PanelPoint { x_m: 0.0, y_m: 0.0 };

    pub fn new(x_m: f64, y_m: f64) -> Self {
        Self { x_m, y_m }
    }
}

/// Intersection of the pose's ray with the panel, or `None` when the ray
/// passes outside the panel extents.
pub fn ray_hit(pose: &AngularPose, panel: &UiPanel) -> Result<Option<PanelPoint>> {
    let p = panel.project(pose.yaw_deg, pose.pitch_deg)?;
    Ok(panel.contains(p).then_some(p))
}

/// Axis-aligned rectangle in panel metres.
///
/// Containment is half-open: the left and bottom edges belong to the
/// rectangle, the right and top edges do not. Adjacent rectangles sharing
/// an edge therefore never both contain a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn centered(center: PanelPoint, width: f64, height: f64) -> Self {
        Self {
            min_x: center.x_m - width / 2.0,
            min_y: center.y_m - height / 2.0,
            max_x: center.x_m + width / 2.0,
            max_y: center.y_m + height / 2.0,
        }
    }

    pub fn center(&self) -> PanelPoint {
        PanelPoint::new(
            (self.min_x + self.max_x) / 2.0,
            (self.min_y + self.max_y) / 2.0,
        )
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains(&self, p: PanelPoint) -> bool {
        p.x_m >= self.min_x && p.x_m < self.max_x && p.y_m >= self.min_y && p.y_m < self.max_y
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.min_x < other.max_x
            && other.min_x < self.max_x
            && self.min_y < other.max_y
            && other.min_y < self.max_y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ButtonLabel {
    Digit(u8),
    Backspace,
    Enter,
}

impl fmt::Display for ButtonLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ButtonLabel::Digit(d) => write!(f, "{d}"),
            ButtonLabel::Backspace => f.write_str("backspace"),
            ButtonLabel::Enter => f.write_str("enter"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumpadLayout {
    pub buttons: Vec<(ButtonLabel, Rect)>,
    pub button_size_m: f64,
}

impl Default for NumpadLayout {
    fn default() -> Self {
        Self::grid(0.12, 0.02)
    }
}

impl NumpadLayout {
    /// Phone-style 3x4 grid centred on the panel origin:
    /// `1 2 3 / 4 5 6 / 7 8 9 / backspace 0 enter`.
    pub fn grid(button_size_m: f64, gap_m: f64) -> Self {
        use ButtonLabel::*;
        let rows = [
            [Digit(1), Digit(2), Digit(3)],
            [Digit(4), Digit(5), Digit(6)],
            [Digit(7), Digit(8), Digit(9)],
            [Backspace, Digit(0), Enter],
        ];
        let pitch = button_size_m + gap_m;
        let mut buttons = Vec::with_capacity(12);
        for (r, row) in rows.iter().enumerate() {
            let y = (1.5 - r as f64) * pitch;
            for (c, label) in row.iter().enumerate() {
                let x = (c as f64 - 1.0) * pitch;
                buttons.push((
                    *label,
                    Rect::centered(PanelPoint::new(x, y), button_size_m, button_size_m),
                ));
            }
        }
        Self {
            buttons,
            button_size_m,
        }
    }

    pub fn rect_of(&self, label: ButtonLabel) -> Option<Rect> {
        self.buttons
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, r)| *r)
    }

    pub fn button_at(&self, hit: PanelPoint) -> Option<ButtonLabel> {
        self.buttons
            .iter()
            .find(|(_, r)| r.contains(hit))
            .map(|(l, _)| *l)
    }
}

/// Horizontal slider: a 1 m track mapping 1 cm to one value step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliderLayout {
    pub left_x_m: f64,
    pub track_y_m: f64,
    pub track_length_m: f64,
    pub metres_per_unit: f64,
    pub max_value: u32,
    pub handle_size_m: f64,
}

impl Default for SliderLayout {
    fn default() -> Self {
        Self {
            left_x_m: -0.5,
            track_y_m: 0.0,
            track_length_m: 1.0,
            metres_per_unit: 0.01,
            max_value: 100,
            handle_size_m: 0.12,
        }
    }
}

impl SliderLayout {
    pub fn value_at(&self, hit: PanelPoint) -> u32 {
        let units = ((hit.x_m - self.left_x_m) / self.metres_per_unit).round();
        units.clamp(0.0, self.max_value as f64) as u32
    }

    pub fn point_of(&self, value: u32) -> PanelPoint {
        PanelPoint::new(
            self.left_x_m + value.min(self.max_value) as f64 * self.metres_per_unit,
            self.track_y_m,
        )
    }

    pub fn handle_rect(&self, value: u32) -> Rect {
        Rect::centered(self.point_of(value), self.handle_size_m, self.handle_size_m)
    }
}

pub fn slider_value(hit: PanelPoint, layout: &SliderLayout) -> u32 {
    layout.value_at(hit)
}

pub fn button_at(hit: PanelPoint, layout: &NumpadLayout) -> Option<ButtonLabel> {
    layout.button_at(hit)
}

/// Visual angle subtended by `extent_m` seen face-on at `distance_m`, in
/// degrees.
pub fn angular_size(extent_m: f64, distance_m: f64) -> Result<f64> {
    if !(extent_m.is_finite() && extent_m > 0.0) {
        return Err(Error::invalid("extent_m", "must be finite and > 0"));
    }
    if !(distance_m.is_finite() && distance_m > 0.0) {
        return Err(Error::invalid("distance_m", "must be finite and > 0"));
    }
    Ok(2.0 * (extent_m / (2.0 * distance_m)).atan().to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComfortRange {
    pub min_comfort_deg: f64,
    pub max_comfort_deg: f64,
}

/// Head-rotation comfort range for a headset field of view:
/// `min = fov/2 + 30`, `max = fov/2 + 55`.
pub fn comfort_angles(fov_deg: f64) -> Result<ComfortRange> {
    if !(0.0..=360.0).contains(&fov_deg) {
        return Err(Error::invalid(
            "fov_deg",
            format!("must lie in [0, 360], got {fov_deg}"),
        ));
    }
    Ok(ComfortRange {
        min_comfort_deg: fov_deg / 2.0 + 30.0,
        max_comfort_deg: fov_deg / 2.0 + 55.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    Personal,
    Interaction,
    Content,
    Strong3d,
    WeakDepth,
    Flat,
}

impl Zone {
    pub fn as_str(&self) -> &'static str {
        match self {
            Zone::Personal => "personal",
            Zone::Interaction => "interaction",
            Zone::Content => "content",
            Zone::Strong3d => "strong_3d",
            Zone::WeakDepth => "weak_depth",
            Zone::Flat => "flat",
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Distance band around the user.
///
/// `[0, 0.5)` personal, `[0.5, 1)` interaction, `[1, 2)` content,
/// `[2, 10]` strong 3D, `(10, 20]` weak depth, beyond 20 m flat.
pub fn classify_zone(distance_m: f64) -> Result<Zone> {
    if distance_m.is_nan() || distance_m < 0.0 {
        return Err(Error::invalid(
            "distance_m",
            format!("must be >= 0, got {distance_m}"),
        ));
    }
    Ok(match distance_m {
        d if d < 0.5 => Zone::Personal,
        d if d < 1.0 => Zone::Interaction,
        d if d < 2.0 => Zone::Content,
        d if d <= 10.0 => Zone::Strong3d,
        d if d <= 20.0 => Zone::WeakDepth,
        _ => Zone::Flat,
    })
}
