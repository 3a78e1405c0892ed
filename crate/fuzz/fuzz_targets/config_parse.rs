#![no_main]

use coopdipole_cli::parse_config_str;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    // Accepted configs must survive a serialize/parse round trip unchanged.
    if let Ok(config) = parse_config_str(data) {
        let text = serde_json::to_string(&config).unwrap();
        let again = parse_config_str(&text).expect("resolved config must parse");
        assert_eq!(serde_json::to_string(&again).unwrap(), text);
    }
});
