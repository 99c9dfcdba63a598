// Draws a seeded multipath channel for the four reference users, prints the
// link budget, and replays the draw from its JSON record.
//
//   cargo run --release --example channel_sampling

use std::path::Path;

use sim_isac::channel::{
    linear_to_db, sample_channel, user_distance, ChannelRealization, ChannelRecord, LinkBudget, UserSpec,
};
use sim_isac::geometry::{GeometryParams, SimGeometry};

pub fn run(quick: bool, out: &Path) -> sim_isac::Result<()> {
    let side = if quick { 4 } else { 10 };
    let geometry = SimGeometry::new(&GeometryParams::square(side, 1, 6))?;
    let users = UserSpec::reference_users();
    let budget = LinkBudget::default();
    println!("noise power: {:.3e} mW", budget.noise_power_mw());

    let channel = sample_channel(&geometry, &users, &budget, 7)?;
    for (n, user) in users.iter().enumerate() {
        let d = user_distance(user)?;
        let energy: f64 = channel.h.row(n).iter().map(|c| c.norm_sqr()).sum();
        println!(
            "user {n}: ({:+.0}, {:+.0}) deg, d = {d:.2} m, zeta = {:.2} dB, |h|^2 = {:.2} dB",
            user.los_elevation_deg,
            user.los_azimuth_deg,
            budget.path_gain_db(d),
            linear_to_db(energy)
        );
    }

    std::fs::create_dir_all(out).map_err(|e| sim_isac::Error::io(out, e))?;
    let path = out.join("channel.json");
    std::fs::write(&path, serde_json::to_string_pretty(&channel.to_record())?)
        .map_err(|e| sim_isac::Error::io(&path, e))?;
    let record: ChannelRecord = serde_json::from_str(&std::fs::read_to_string(&path).map_err(|e| sim_isac::Error::io(&path, e))?)?;
    let replay = ChannelRealization::from_record(&geometry, &record)?;
    println!("replay from {} identical: {}", path.display(), replay == channel);
    Ok(())
}

fn main() -> sim_isac::Result<()> {
    let quick = std::env::args().any(|a| a == "--quick");
    run(quick, Path::new("out/channel_sampling"))
}
