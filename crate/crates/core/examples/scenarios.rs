//! Replay every bundled stakeholder scenario and print its text report.

use hxai_core::session::{ScenarioConfig, BUNDLED_SCENARIOS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let only = std::env::args().nth(1);
    for (name, _) in BUNDLED_SCENARIOS {
        if only.as_deref().is_some_and(|o| o != name) {
            continue;
        }
        let started = std::time::Instant::now();
        let session = ScenarioConfig::bundled(name)?.run(std::path::Path::new("."))?;
        println!("{}", session.render_report()?.to_text());
        eprintln!("{name}: {:.1}s", started.elapsed().as_secs_f64());
    }
    Ok(())
}
