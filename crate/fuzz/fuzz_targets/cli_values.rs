#![no_main]

use libfuzzer_sys::fuzz_target;
use sdesim_cli::config::{Count, FloatList, MaybeScheme, ModelName, OutputFormat, Real};
use sdesim_core::levy::{AreaSamplerKind, SamplerBudget};
use sdesim_core::{Payoff, SchemeKind};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    // every value a flag or config key can carry goes through one of these
    let _ = s.parse::<Count>();
    let _ = s.parse::<Real>();
    let _ = s.parse::<OutputFormat>();
    let _ = s.parse::<ModelName>();
    let _ = s.parse::<MaybeScheme>();
    let _ = s.parse::<SchemeKind>();
    let _ = s.parse::<AreaSamplerKind>();
    let _ = s.parse::<SamplerBudget>();
    let _ = s.parse::<Payoff>();
    if let Ok(list) = s.parse::<FloatList>() {
        assert_eq!(list.to_string().parse::<FloatList>().unwrap(), list);
    }
});
