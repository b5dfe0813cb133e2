//! BER campaign CLI: runs Monte-Carlo sweeps over SNR/speed grids and the
//! window/damping parameter sweeps, printing CSV to stdout and optionally
//! appending to a file.

use clap::{Args, Parser, Subcommand};
use otfs::harness::{
    run_campaign, sweep_damping, sweep_ni, BerRecord, CampaignConfig, Scheme, CSV_HEADER,
};
use otfs::IdiWindow;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "otfs-sim",
    about = "Delay-Doppler (OTFS) vs OFDM Monte-Carlo BER simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one campaign over the SNR x speed grid.
    Run(CommonArgs),
    /// Rerun the campaign for several Doppler-window half-widths.
    SweepNi {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated window half-widths (integers or "full").
        #[arg(long, value_delimiter = ',', required = true)]
        ni_list: Vec<IdiWindow>,
    },
    /// Rerun the campaign for several damping factors.
    SweepDamping {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated damping factors in (0, 1].
        #[arg(long, value_delimiter = ',', required = true)]
        delta_list: Vec<f64>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// TOML campaign config; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,

    /// otfs-ideal | otfs-rect-wc | otfs-rect-wo | ofdm
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Doppler bins per frame.
    #[arg(long)]
    n: Option<usize>,
    /// Delay bins (subcarriers) per frame.
    #[arg(long)]
    m: Option<usize>,
    /// Square QAM size (4, 16, 64).
    #[arg(long)]
    qam: Option<usize>,
    /// Comma-separated SNR grid in dB.
    #[arg(long, value_delimiter = ',')]
    snr: Option<Vec<f64>>,
    /// Comma-separated UE speeds in km/h.
    #[arg(long, value_delimiter = ',')]
    speed: Option<Vec<f64>>,
    /// Monte-Carlo frames per grid point.
    #[arg(long)]
    frames: Option<usize>,
    /// Doppler window half-width per path, or "full".
    #[arg(long)]
    ni: Option<IdiWindow>,
    /// Message damping factor in (0, 1].
    #[arg(long)]
    damping: Option<f64>,
    /// Convergence threshold of the detector.
    #[arg(long)]
    gamma: Option<f64>,
    /// Stopping slack of the detector.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Detector iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Channel profile: eva, synthetic-4, or a name from the config file.
    #[arg(long)]
    profile: Option<String>,
    /// Master seed for the deterministic trial streams.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path (appended; header written when new).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Transmit without noise (SNR still sets the detector variance).
    #[arg(long)]
    noiseless: bool,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl CommonArgs {
    fn into_config(self) -> Result<CampaignConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                toml::from_str(&text).map_err(|e| format!("bad config: {e}"))?
            }
            None => {
                let scheme = self
                    .scheme
                    .ok_or("either --config or --scheme is required")?;
                CampaignConfig {
                    scheme,
                    n: 16,
                    m: 64,
                    subcarrier_spacing: 15e3,
                    carrier_freq: 4e9,
                    qam: 4,
                    snr_db: vec![18.0],
                    speed_kmph: vec![120.0],
                    frames: 500,
                    ni: IdiWindow::Limited(10),
                    detector: Default::default(),
                    profile: "eva".to_string(),
                    profiles: Default::default(),
                    seed: 0,
                    out: None,
                    noiseless: false,
                    threads: 0,
                }
            }
        };
        if let Some(v) = self.scheme {
            cfg.scheme = v;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.m {
            cfg.m = v;
        }
        if let Some(v) = self.qam {
            cfg.qam = v;
        }
        if let Some(v) = self.snr {
            cfg.snr_db = v;
        }
        if let Some(v) = self.speed {
            cfg.speed_kmph = v;
        }
        if let Some(v) = self.frames {
            cfg.frames = v;
        }
        if let Some(v) = self.ni {
            cfg.ni = v;
        }
        if let Some(v) = self.damping {
            cfg.detector.damping = v;
        }
        if let Some(v) = self.gamma {
            cfg.detector.gamma = v;
        }
        if let Some(v) = self.epsilon {
            cfg.detector.epsilon = v;
        }
        if let Some(v) = self.max_iters {
            cfg.detector.max_iters = v;
        }
        if let Some(v) = self.profile {
            cfg.profile = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.out {
            cfg.out = Some(v);
        }
        if self.noiseless {
            cfg.noiseless = true;
        }
        if let Some(v) = self.threads {
            cfg.threads = v;
        }
        Ok(cfg)
    }
}

fn print_records(records: &[BerRecord]) {
    println!("{CSV_HEADER}");
    for r in records {
        println!("{}", r.csv_row());
    }
}

fn run() -> Result<(), String> {
    let cli = Cli::parse();
    let records = match cli.cmd {
        Cmd::Run(common) => {
            let cfg = common.into_config()?;
            run_campaign(&cfg).map_err(|e| e.to_string())?
        }
        Cmd::SweepNi { common, ni_list } => {
            let cfg = common.into_config()?;
            sweep_ni(&cfg, &ni_list).map_err(|e| e.to_string())?
        }
        Cmd::SweepDamping { common, delta_list } => {
            let cfg = common.into_config()?;
            sweep_damping(&cfg, &delta_list).map_err(|e| e.to_string())?
        }
    };
    print_records(&records);
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
