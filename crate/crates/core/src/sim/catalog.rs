//! The 34 sensors the platform can collect, with their nominal cadence.

use serde::{Deserialize, Serialize};

use crate::plan::SensorType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SensorGroup {
    Hardware,
    Software,
    QuestionAnswering,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cadence {
    /// Up to ten samples per second; summarized once per scheduled occurrence.
    UpTo10Hz,
    /// Once every this many milliseconds.
    Every(i64),
    /// Fires when the underlying state changes.
    OnChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CatalogEntry {
    pub no: u8,
    pub name: &'static str,
    pub group: SensorGroup,
    pub cadence: Cadence,
    pub sensor_type: SensorType,
    /// Big sensors produce raw high-rate streams.
    pub big: bool,
}

const fn hw(no: u8, name: &'static str, cadence: Cadence, sensor_type: SensorType, big: bool) -> CatalogEntry {
    CatalogEntry { no, name, group: SensorGroup::Hardware, cadence, sensor_type, big }
}

const fn sw(no: u8, name: &'static str, cadence: Cadence, sensor_type: SensorType) -> CatalogEntry {
    CatalogEntry { no, name, group: SensorGroup::Software, cadence, sensor_type, big: false }
}

const fn qa(no: u8, name: &'static str) -> CatalogEntry {
    CatalogEntry {
        no,
        name,
        group: SensorGroup::QuestionAnswering,
        cadence: Cadence::OnChange,
        sensor_type: SensorType::QuestionAnswering,
        big: false,
    }
}

const MINUTE: Cadence = Cadence::Every(60_000);

pub const CATALOG: [CatalogEntry; 34] = [
    hw(1, "Accelerometer", Cadence::UpTo10Hz, SensorType::Motion, true),
    hw(2, "Gyroscope", Cadence::UpTo10Hz, SensorType::Inertial, true),
    hw(3, "Light", Cadence::UpTo10Hz, SensorType::Ambient, true),
    hw(4, "Location", MINUTE, SensorType::Location, false),
    hw(5, "Magnetic Field", Cadence::UpTo10Hz, SensorType::Inertial, true),
    hw(6, "Pressure", Cadence::UpTo10Hz, SensorType::Ambient, true),
    sw(7, "Airplane Mode", Cadence::OnChange, SensorType::Device),
    sw(8, "Battery Charge", Cadence::OnChange, SensorType::Device),
    sw(9, "Battery Level", Cadence::OnChange, SensorType::Device),
    sw(10, "Bluetooth Devices", MINUTE, SensorType::Social),
    sw(11, "Bluetooth LE Devices", MINUTE, SensorType::Social),
    sw(12, "Cellular network info", MINUTE, SensorType::Device),
    sw(13, "Doze Mode", Cadence::OnChange, SensorType::Device),
    sw(14, "Headset Status", Cadence::OnChange, SensorType::Device),
    sw(15, "Movement Activity Label", Cadence::Every(30_000), SensorType::Motion),
    sw(16, "Movement Activity per Time", Cadence::Every(30_000), SensorType::Motion),
    sw(17, "Music Playback", Cadence::OnChange, SensorType::Software),
    sw(18, "Notifications received", Cadence::OnChange, SensorType::Software),
    sw(19, "Proximity", Cadence::UpTo10Hz, SensorType::Device),
    sw(20, "Ring mode", Cadence::OnChange, SensorType::Device),
    sw(21, "Running Applications", Cadence::Every(5_000), SensorType::Software),
    sw(22, "Screen Status", Cadence::OnChange, SensorType::Device),
    sw(23, "Step Counter", Cadence::UpTo10Hz, SensorType::Motion),
    sw(24, "Step Detection", Cadence::OnChange, SensorType::Motion),
    sw(25, "Touch event", Cadence::OnChange, SensorType::Device),
    sw(26, "User Presence", Cadence::OnChange, SensorType::Device),
    sw(27, "WIFI Network Connected to", Cadence::OnChange, SensorType::Location),
    sw(28, "WIFI Networks Available", MINUTE, SensorType::Location),
    qa(29, "Time Diary question"),
    qa(30, "Time Diary confirmation"),
    qa(31, "Time Diary answer"),
    qa(32, "Task question"),
    qa(33, "Task confirmation"),
    qa(34, "Task answer"),
];

/// Looks a sensor up by name, ignoring case and a trailing `[...]` qualifier.
/// `GPS` is an alias of `Location`.
pub fn catalog_entry(name: &str) -> Option<&'static CatalogEntry> {
    let bare = name.split('[').next().unwrap_or(name).trim();
    let bare = if bare.eq_ignore_ascii_case("GPS") { "Location" } else { bare };
    CATALOG.iter().find(|e| e.name.eq_ignore_ascii_case(bare))
}

/// On-change sensors are driven by context transitions instead of the schedule.
pub fn is_on_change(name: &str) -> bool {
    catalog_entry(name).is_some_and(|e| e.cadence == Cadence::OnChange)
}
