//! Bundled benchmark plants, parsed from the documents under `models/`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::parse_model;
use crate::sysmodel::StateSpaceModel;

const AC15: &str = include_str!("../models/ac15.toml");
const HE3: &str = include_str!("../models/he3.toml");
const REA4: &str = include_str!("../models/rea4.toml");
const SCALAR: &str = include_str!("../models/scalar.toml");

pub const NAMES: [&str; 4] = ["ac15", "he3", "rea4", "scalar"];

/// Looks up a bundled plant by name.
pub fn by_name(name: &str) -> Result<StateSpaceModel> {
    let text = match name {
        "ac15" => AC15,
        "he3" => HE3,
        "rea4" => REA4,
        "scalar" => SCALAR,
        other => return Err(Error::InvalidArgument(format!("unknown benchmark {other}"))),
    };
    parse_model(text, Path::new(name))
}

/// Aircraft plant, 4 states and 2 inputs, unstable open loop.
pub fn ac15() -> StateSpaceModel {
    by_name("ac15").expect("bundled model is valid")
}

/// Helicopter plant, 8 states and 4 inputs, unstable open loop.
pub fn he3() -> StateSpaceModel {
    by_name("he3").expect("bundled model is valid")
}

/// Eight-tank reactor cascade, single input, stable open loop.
pub fn rea4() -> StateSpaceModel {
    by_name("rea4").expect("bundled model is valid")
}

/// `A = 0.5`, `B_u = B_w = C = 1`.
pub fn scalar() -> StateSpaceModel {
    by_name("scalar").expect("bundled model is valid")
}
