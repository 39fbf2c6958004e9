//! Scenarios shipped with the binary.

pub const BUILTINS: &[(&str, &str)] = &[
    ("example_3_1", include_str!("../scenarios/example_3_1.toml")),
    ("example_5_1", include_str!("../scenarios/example_5_1.toml")),
    ("example_4_1", include_str!("../scenarios/example_4_1.toml")),
    ("rank2_lagrangian", include_str!("../scenarios/rank2_lagrangian.toml")),
    ("rank2_spheres", include_str!("../scenarios/rank2_spheres.toml")),
    ("circle_conformal", include_str!("../scenarios/circle_conformal.toml")),
    ("round_sphere", include_str!("../scenarios/round_sphere.toml")),
    ("negative_controls", include_str!("../scenarios/negative_controls.toml")),
];

pub fn names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

pub fn source(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}
