#![no_main]

use libfuzzer_sys::fuzz_target;
use wpt_relay::table::parse_results_table;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = parse_results_table(text) {
        // whatever parses must survive a render/parse cycle row for row
        let back = parse_results_table(&table.to_csv()).expect("rendered table parses");
        assert_eq!(back.rows.len(), table.rows.len());
    }
});
