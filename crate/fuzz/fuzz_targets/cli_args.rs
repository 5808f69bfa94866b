#![no_main]

use clap::Parser;
use libfuzzer_sys::fuzz_target;
use sdesim_cli::Cli;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let args = std::iter::once("sdesim").chain(s.split_whitespace());
    let _ = Cli::try_parse_from(args);
});
