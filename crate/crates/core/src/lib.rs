//! Wiretap-channel key chaining: rates, random-binning codes, the
//! multi-slot protocol, exact leakage audits and Monte-Carlo experiments.
//!
//! The numeric core is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below fix it to `f64`.

pub mod bits;
pub mod chain_protocol;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod infotheory;
pub mod leakage_audit;
pub mod scalar;
pub mod seeding;
pub mod wiretap_code;

pub use bits::BitString;
pub use chain_protocol::{
    build_schedule, run_session, ChannelPolicy, CodebookSet, ProtocolState, Role, Session,
    SlotPlan, SlotSchedule, TranscriptRecord,
};
pub use channel::{CascadeSpec, ChannelConfig, ChannelModel, Degradedness};
pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, Proportion};
pub use infotheory::{
    gaussian_rates, rate_profile, GaussianWiretapParams, InputDistribution, RateProfile,
};
pub use leakage_audit::{
    audit_all, audit_induction, audit_slot2, build_joint, empirical_leakage_estimate, JointState,
    LeakageReport,
};
pub use scalar::Real;
pub use wiretap_code::{
    build_channel, build_wiretap, exact_block_leakage, ChannelCodebook, CodeLimits, CodebookSpec,
    WiretapCodebook,
};

pub type Channel = ChannelModel<f64>;
pub type Profile = RateProfile<f64>;
pub type InputDist = InputDistribution<f64>;
pub type Joint = JointState<f64>;
pub type GaussianParams = GaussianWiretapParams<f64>;
