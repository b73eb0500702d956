//! Regenerates the bundled scenario files from their builders.

use std::path::Path;

use platoon_core::presets::build_all;

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets");
    for s in build_all() {
        let text = s.to_toml().expect("presets serialize");
        std::fs::write(dir.join(format!("{}.scn", s.name)), text).expect("write preset");
        println!("wrote {}", s.name);
    }
}
