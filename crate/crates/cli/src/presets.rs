//! Configs reproducing each figure, embedded in the binary.

use crate::config::{parse_config_str, ConfigError, RunConfig};

pub const PRESETS: &[(&str, &str)] = &[
    ("fig2a", include_str!("../presets/fig2a.json")),
    ("fig2b", include_str!("../presets/fig2b.json")),
    ("fig2c", include_str!("../presets/fig2c.json")),
    ("fig2d", include_str!("../presets/fig2d.json")),
    ("fig3a", include_str!("../presets/fig3a.json")),
    ("fig3b", include_str!("../presets/fig3b.json")),
    ("fig3c", include_str!("../presets/fig3c.json")),
    ("fig3d", include_str!("../presets/fig3d.json")),
    ("fig4", include_str!("../presets/fig4.json")),
    ("fig5", include_str!("../presets/fig5.json")),
    ("figS1a", include_str!("../presets/figS1a.json")),
    ("figS1b", include_str!("../presets/figS1b.json")),
    ("figS1c", include_str!("../presets/figS1c.json")),
    ("figS2a", include_str!("../presets/figS2a.json")),
    ("figS2b", include_str!("../presets/figS2b.json")),
    ("figS2c", include_str!("../presets/figS2c.json")),
];

pub fn get(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn parse(name: &str) -> Option<Result<RunConfig, ConfigError>> {
    get(name).map(parse_config_str)
}
