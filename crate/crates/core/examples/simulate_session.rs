//! Generate a session and print what was planted.
//!
//! cargo run --example simulate_session -- [seed] [out_dir]

use trio::synth::{generate_session, SessionConfig};

fn main() -> trio::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut cfg = SessionConfig::default();
    cfg.protocol.n_trials = 10;
    let s = generate_session(&cfg, seed)?;

    let rec = &s.contaminated;
    println!("{} channels, {} samples at {} Hz ({:.1} s)", rec.n_channels(), rec.n_samples(), rec.rate_hz(), rec.duration_s());
    for pattern in ["GA_ONSET", "R_PEAK", "STIM/*", "BLINK", "EMG_BURST_START"] {
        println!("{pattern:>16}: {}", s.true_markers(pattern).len());
    }
    let peak = |a: &ndarray::Array2<f64>| a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("peak |addend|: gradient {:.0} uV, cardiac {:.0} uV, myogenic {:.0} uV",
        peak(&s.addends.gradient), peak(&s.addends.cardiac), peak(&s.addends.myogenic));

    if let Some(dir) = args.next() {
        s.write(&dir)?;
        println!("written to {dir}");
    }
    Ok(())
}
