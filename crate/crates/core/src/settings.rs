//! The 180-setting waveplate catalog and outcome keys.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{jones, WaveplateKind};
use crate::qmath::CMatrix;

/// Input preparation (QWP, HWP), degrees, light passing the QWP first.
pub const INPUT_ANGLES: [(f64, f64); 3] = [(0.0, 0.0), (0.0, 22.5), (45.0, 0.0)];
/// Bob's HWP before his PBS.
pub const BOB_MEASURE_ANGLES: [f64; 2] = [0.0, 22.5];
/// Bob's HWP after his PBS.
pub const BOB_REPREPARE_ANGLES: [f64; 3] = [0.0, 22.5, 45.0];
/// Alice's (QWP, HWP, QWP) in light order, degrees.
pub const ALICE_ANGLES: [(f64, f64, f64); 10] = [
    (0.0, 0.0, 0.0),
    (0.0, 0.0, 45.0),
    (0.0, 45.0, 0.0),
    (45.0, 0.0, 0.0),
    (45.0, 0.0, 90.0),
    (45.0, 45.0, 90.0),
    (90.0, 0.0, 0.0),
    (90.0, 0.0, 45.0),
    (90.0, 45.0, 0.0),
    (90.0, 45.0, 45.0),
];

pub const NUM_SETTINGS: usize = 180;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SettingError {
    #[error("index {name}={value} outside 1..={max}")]
    IndexOutOfRange { name: &'static str, value: usize, max: usize },
    #[error("stage `{stage}`: angles {angles:?} are not a catalog row")]
    OffCatalog { stage: &'static str, angles: Vec<f64> },
    #[error("malformed outcome key `{0}`")]
    BadKey(String),
}

/// One measurement setting. Indices are 1-based as in the catalog.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSetting {
    pub z: usize,
    pub y: usize,
    pub r: usize,
    pub x: usize,
    /// (QWP, HWP) degrees.
    pub input: (f64, f64),
    pub bob_measure: f64,
    pub bob_reprepare: f64,
    /// (QWP, HWP, QWP) degrees.
    pub alice: (f64, f64, f64),
}

fn check(name: &'static str, value: usize, max: usize) -> Result<(), SettingError> {
    if value == 0 || value > max {
        return Err(SettingError::IndexOutOfRange { name, value, max });
    }
    Ok(())
}

impl ExperimentSetting {
    pub fn new(z: usize, y: usize, r: usize, x: usize) -> Result<Self, SettingError> {
        check("z", z, 3)?;
        check("y", y, 2)?;
        check("r", r, 3)?;
        check("x", x, 10)?;
        Ok(Self {
            z,
            y,
            r,
            x,
            input: INPUT_ANGLES[z - 1],
            bob_measure: BOB_MEASURE_ANGLES[y - 1],
            bob_reprepare: BOB_REPREPARE_ANGLES[r - 1],
            alice: ALICE_ANGLES[x - 1],
        })
    }

    /// Rejects angle sets that do not match their catalog rows.
    pub fn validate(&self) -> Result<(), SettingError> {
        let fresh = Self::new(self.z, self.y, self.r, self.x)?;
        if fresh.input != self.input {
            return Err(SettingError::OffCatalog { stage: "prep", angles: vec![self.input.0, self.input.1] });
        }
        if fresh.alice != self.alice {
            return Err(SettingError::OffCatalog {
                stage: "alice",
                angles: vec![self.alice.0, self.alice.1, self.alice.2],
            });
        }
        if fresh.bob_measure != self.bob_measure || fresh.bob_reprepare != self.bob_reprepare {
            return Err(SettingError::OffCatalog { stage: "bob", angles: vec![self.bob_measure, self.bob_reprepare] });
        }
        Ok(())
    }

    /// Operator preparing the input from |H⟩.
    pub fn input_unitary(&self) -> CMatrix {
        let q = jones(WaveplateKind::Qwp, self.input.0.to_radians());
        let h = jones(WaveplateKind::Hwp, self.input.1.to_radians());
        &h * &q
    }

    pub fn input_state(&self) -> [crate::C64; 2] {
        let u = self.input_unitary();
        [u[(0, 0)], u[(1, 0)]]
    }

    pub fn alice_unitary(&self) -> CMatrix {
        alice_unitary(self.alice)
    }

    pub fn bob_measure_unitary(&self) -> CMatrix {
        jones(WaveplateKind::Hwp, self.bob_measure.to_radians())
    }

    pub fn bob_reprepare_unitary(&self) -> CMatrix {
        jones(WaveplateKind::Hwp, self.bob_reprepare.to_radians())
    }

    /// Kraus operator HWP(rep)·|b⟩⟨b|·HWP(meas).
    pub fn bob_kraus(&self, b: usize) -> CMatrix {
        let p = crate::qmath::gates::proj(b);
        &(&self.bob_reprepare_unitary() * &p) * &self.bob_measure_unitary()
    }

    /// Parameter values for the reference circuit (angles in degrees).
    pub fn circuit_params(&self) -> Vec<(String, f64)> {
        vec![
            ("input.qwp".into(), self.input.0),
            ("input.hwp".into(), self.input.1),
            ("alice.q1".into(), self.alice.0),
            ("alice.h".into(), self.alice.1),
            ("alice.q2".into(), self.alice.2),
            ("bob.meas".into(), self.bob_measure),
            ("bob.rep".into(), self.bob_reprepare),
        ]
    }
}

pub fn alice_unitary(angles: (f64, f64, f64)) -> CMatrix {
    let q1 = jones(WaveplateKind::Qwp, angles.0.to_radians());
    let h = jones(WaveplateKind::Hwp, angles.1.to_radians());
    let q2 = jones(WaveplateKind::Qwp, angles.2.to_radians());
    &(&q2 * &h) * &q1
}

/// All 180 settings, ordered by z, then y, then r, then x.
pub fn enumerate_settings() -> Vec<ExperimentSetting> {
    let mut out = Vec::with_capacity(NUM_SETTINGS);
    for z in 1..=3 {
        for y in 1..=2 {
            for r in 1..=3 {
                for x in 1..=10 {
                    out.push(ExperimentSetting::new(z, y, r, x).expect("catalog indices"));
                }
            }
        }
    }
    out
}

/// Outcome probabilities for every catalog setting.
pub type ProbabilityTable = std::collections::BTreeMap<OutcomeKey, f64>;

/// Key for one outcome of one setting; displayed as "b,d,x,y,r,z".
/// Ordering follows the setting enumeration with (b, d) innermost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutcomeKey {
    pub z: u8,
    pub y: u8,
    pub r: u8,
    pub x: u8,
    pub b: u8,
    pub d: u8,
}

impl OutcomeKey {
    pub fn new(setting: &ExperimentSetting, b: usize, d: usize) -> Self {
        Self { z: setting.z as u8, y: setting.y as u8, r: setting.r as u8, x: setting.x as u8, b: b as u8, d: d as u8 }
    }

    pub fn setting(&self) -> ExperimentSetting {
        ExperimentSetting::new(self.z as usize, self.y as usize, self.r as usize, self.x as usize)
            .expect("keys are built from catalog settings")
    }

    pub fn all() -> Vec<Self> {
        let mut v = Vec::with_capacity(4 * NUM_SETTINGS);
        for s in enumerate_settings() {
            for b in 0..2 {
                for d in 0..2 {
                    v.push(Self::new(&s, b, d));
                }
            }
        }
        v
    }
}

impl fmt::Display for OutcomeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{},{},{}", self.b, self.d, self.x, self.y, self.r, self.z)
    }
}

impl FromStr for OutcomeKey {
    type Err = SettingError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<u8> = s
            .split(',')
            .map(|p| p.trim().parse::<u8>())
            .collect::<Result<_, _>>()
            .map_err(|_| SettingError::BadKey(s.to_string()))?;
        let [b, d, x, y, r, z] = parts[..] else {
            return Err(SettingError::BadKey(s.to_string()));
        };
        if b > 1 || d > 1 {
            return Err(SettingError::BadKey(s.to_string()));
        }
        ExperimentSetting::new(z as usize, y as usize, r as usize, x as usize)
            .map_err(|_| SettingError::BadKey(s.to_string()))?;
        Ok(Self { z, y, r, x, b, d })
    }
}

impl Serialize for OutcomeKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OutcomeKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
