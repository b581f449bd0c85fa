//! The closed attribute vocabulary for face records.

use crate::error::{Error, Result};

/// `(attribute, classes)` in lower snake case.
pub const SCHEMA: &[(&str, &[&str])] = &[
    (
        "age",
        &[
            "early_adulthood",
            "middle_aged",
            "teenager",
            "adult",
            "kid",
            "senior",
            "retirement",
            "baby",
        ],
    ),
    (
        "ethnicity",
        &["african_american", "white", "east_asian", "south_asian"],
    ),
    ("eyes_color", &["brown", "other", "blue", "green"]),
    (
        "facial_hair",
        &[
            "no",
            "light_mustache",
            "light_goatee",
            "light_beard",
            "thick_goatee",
            "thick_beard",
            "thick_mustache",
        ],
    ),
    ("gender", &["male", "female"]),
    ("glasses", &["no", "eyeglasses", "sunglasses"]),
    (
        "hair_color",
        &["black", "brown", "other", "blonde", "white", "red"],
    ),
    ("hair_covered", &["no", "turban", "cap", "helmet"]),
    (
        "hair_style",
        &[
            "short_straight",
            "long_straight",
            "short_curly",
            "other",
            "bald",
            "long_curly",
        ],
    ),
    ("smile", &["yes", "no"]),
    ("visible_forehead", &["yes", "no"]),
];

pub fn attribute_names() -> impl Iterator<Item = &'static str> {
    SCHEMA.iter().map(|(a, _)| *a)
}

pub fn classes(attribute: &str) -> Result<&'static [&'static str]> {
    SCHEMA
        .iter()
        .find(|(a, _)| *a == attribute)
        .map(|(_, c)| *c)
        .ok_or_else(|| Error::Dataset(format!("unknown attribute {attribute:?}")))
}

/// Lower-cases and joins words with underscores: `"East Asian"` →
/// `"east_asian"`.
pub fn canonical(s: &str) -> String {
    s.split(|c: char| c.is_whitespace() || c == '-' || c == '_')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

/// Canonical class name if `value` belongs to `attribute`.
pub fn validate_value(attribute: &str, value: &str) -> Result<String> {
    let v = canonical(value);
    if classes(attribute)?.contains(&v.as_str()) {
        Ok(v)
    } else {
        Err(Error::Dataset(format!(
            "{value:?} is not a class of {attribute}"
        )))
    }
}
