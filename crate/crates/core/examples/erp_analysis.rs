//! Epoch the clean and contaminated EEG on stimulus markers and compare the
//! averaged responses.

use trio::evaluate::{average_erp, epoch, erp_channel_correlation, peak_amplitudes};
use trio::synth::{generate_session, SessionConfig};
use trio::ChannelSelector;

fn main() -> trio::Result<()> {
    let mut cfg = SessionConfig::default();
    cfg.protocol.n_trials = 30;
    cfg.gradient.enabled = false;
    let s = generate_session(&cfg, 5)?;
    let eeg: ChannelSelector = "EEG".parse()?;
    let noisy = s.contaminated.select_channels(&eeg)?;

    let baseline = Some((-0.2, 0.0));
    let clean_epochs = epoch(&s.clean_eeg, "STIM/*", 0.2, 0.8)?;
    let noisy_epochs = epoch(&noisy, "STIM/*", 0.2, 0.8)?;
    println!("{} trials, {} dropped at the edges", clean_epochs.n_trials(), clean_epochs.dropped);

    let truth = average_erp(&clean_epochs, baseline)?;
    let erp = average_erp(&noisy_epochs, baseline)?;
    let corr = erp_channel_correlation(&erp, &truth)?;
    let (pt, pn) = (peak_amplitudes(&truth), peak_amplitudes(&erp));
    for (c, name) in clean_epochs.channel_names.iter().enumerate() {
        let r = corr.per_channel[c].map_or("-".to_string(), |r| format!("{r:.3}"));
        println!("{name:>5}  peak clean {:5.1} uV  contaminated {:6.1} uV  r {r}", pt[c], pn[c]);
    }
    Ok(())
}
