//! Delay-Doppler (OTFS) physical-layer simulation: modulation transforms,
//! doubly-dispersive channel models, sparse effective-channel builders, a
//! Gaussian message-passing detector, an OFDM baseline, and a Monte-Carlo
//! BER campaign harness.

pub mod channel;
pub mod effective_channel;
pub mod detector;
pub mod frame;
pub mod harness;
pub mod transforms;

pub use channel::{
    add_awgn, apply_channel_time, generate_channel, max_doppler_hz, noise_variance,
    quantize_taps, ChannelError, ChannelProfile, PathSpec, TapPath,
};
pub use effective_channel::{
    beta, build_ideal, build_ofdm, build_rect, dense_ideal_oracle, waveform_oracle,
    EffectiveChannelError, IdiWindow, SparseEffectiveChannel,
};
pub use detector::{
    map_oracle, mp_detect, DetectorConfig, DetectorError, DetectorResult, StopReason,
};
pub use frame::{
    demap_symbols, map_bits, validate_params, Alphabet, FrameError, FrameParams, GridIndex,
    SupportMargins,
};
pub use harness::{
    run_campaign, run_trial, sweep_damping, sweep_ni, write_csv, BerRecord, CampaignConfig,
    HarnessError, ProfileSpec, Scheme, TrialOutcome,
};
pub use transforms::{
    ambiguity_rect, heisenberg_rect, isfft, sfft, wigner_rect, AmbiguityKind, DelayDopplerGrid,
    SampleStream, TimeFreqGrid,
};
