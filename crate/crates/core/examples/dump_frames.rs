//! Writes the first frame of every camera of a base preset as PNG plus a label map.
//!
//! `cargo run --example dump_frames -- <preset> <out_dir> [slot]`

use std::path::PathBuf;

use synthperson::config::base_config;
use synthperson::pipeline::Plan;

fn main() -> synthperson::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let preset = args.get(1).map(String::as_str).unwrap_or("desk_full");
    let out = PathBuf::from(args.get(2).map(String::as_str).unwrap_or("frames"));
    let slot: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
    let plan = Plan::new(&base_config(preset)?)?;
    let stage = plan.stage();
    let mut n = 0;
    plan.render_slot_frames(&stage, slot, 1, |f| {
        let stem = format!("cam{:02}_t{:.2}", f.camera_id, f.sim_time);
        if let Err(e) = f.dump(&out, &stem) {
            eprintln!("{e}");
        }
        n += 1;
    })?;
    println!("{n} frames written to {}", out.display());
    Ok(())
}
