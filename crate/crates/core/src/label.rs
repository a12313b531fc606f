use core::fmt;

use serde::{Deserialize, Serialize};

/// The two driving styles the dataset distinguishes.
///
/// Doubles as the GAN condition: [`DrivingClass::one_hot`] is the length-2
/// encoding appended to every time step of the generator and discriminator
/// inputs, and the classifier treats `Aggressive` as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrivingClass {
    Normal,
    Aggressive,
}

impl DrivingClass {
    pub const ALL: [DrivingClass; 2] = [DrivingClass::Normal, DrivingClass::Aggressive];

    /// One-hot condition encoding; exactly one entry is 1.
    pub fn one_hot(self) -> [f64; 2] {
        match self {
            DrivingClass::Normal => [1.0, 0.0],
            DrivingClass::Aggressive => [0.0, 1.0],
        }
    }

    /// Index of the class in softmax outputs (`Aggressive` = 1).
    pub fn index(self) -> usize {
        match self {
            DrivingClass::Normal => 0,
            DrivingClass::Aggressive => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DrivingClass::Normal => "normal",
            DrivingClass::Aggressive => "aggressive",
        }
    }

    pub fn parse(s: &str) -> Option<DrivingClass> {
        match s {
            "normal" => Some(DrivingClass::Normal),
            "aggressive" => Some(DrivingClass::Aggressive),
            _ => None,
        }
    }
}

impl fmt::Display for DrivingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
