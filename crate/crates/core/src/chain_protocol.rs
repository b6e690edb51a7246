//! Multi-slot key chaining.
//!
//! Slot 1 carries one wiretap-coded message. Slots `2..=lambda` carry one
//! wiretap-coded message plus `k - 1` messages encrypted with the previous
//! slot's whole message as a one-time pad and sent over a plain channel
//! code. From slot `lambda + 1` on, a slot is a single mini-slot carrying
//! `lambda` keyed messages. Every `restart_period` slots the pattern starts
//! over from slot-1 behavior, which bounds error propagation.
//!
//! Within a slot the message bit string is the wiretap message (if any)
//! followed by the keyed messages, all big-endian.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{BitString, MAX_INDEX_BITS};
use crate::channel::{ChannelModel, Degradedness};
use crate::error::{Error, Result};
use crate::infotheory::{InputDistribution, RateProfile};
use crate::scalar::Real;
use crate::seeding::{derive_seed, KEYED_CODE_BASE, WIRETAP_CODE_STREAM};
use crate::wiretap_code::{build_channel, build_wiretap, ChannelCodebook, CodeLimits, WiretapCodebook};

/// Default restart period in multiples of `lambda`.
pub const DEFAULT_RESTART_FACTOR: usize = 10;

/// One slot of the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotPlan {
    /// 1-based slot number.
    pub slot: usize,
    /// 1-based position inside the current restart window.
    pub position: usize,
    pub mini_slots: usize,
    pub wiretap_msgs: usize,
    pub keyed_msgs: usize,
    /// Key bits consumed, equal to the keyed message bits.
    pub key_bits: usize,
    pub wiretap_bits: usize,
    pub message_bits: usize,
    pub channel_uses: usize,
    /// Secret bits per channel use.
    pub slot_rate: f64,
}

impl SlotPlan {
    pub fn has_wiretap(&self) -> bool {
        self.wiretap_msgs > 0
    }

    pub fn has_keyed(&self) -> bool {
        self.keyed_msgs > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSchedule {
    pub lambda: usize,
    pub rate_bits: usize,
    pub n: usize,
    pub restart_period: usize,
    pub slots: Vec<SlotPlan>,
}

/// Schedule for a channel profile. Requires `rate_bits / n <= R_s`.
pub fn build_schedule<T: Real>(
    profile: &RateProfile<T>,
    rate_bits: usize,
    n: usize,
    num_slots: usize,
    restart_period: Option<usize>,
) -> Result<SlotSchedule> {
    if n == 0 {
        return Err(Error::Input("blocklength must be positive".into()));
    }
    let rate = rate_bits as f64 / n as f64;
    let rs = profile.secrecy_capacity.to_f64().unwrap();
    if rate > rs + 1e-12 {
        return Err(Error::RateExceedsSecrecy {
            rate,
            secrecy_capacity: rs,
        });
    }
    let lambda = profile.lambda as usize;
    SlotSchedule::with_lambda(lambda, rate_bits, n, num_slots, restart_period)
}

impl SlotSchedule {
    /// Schedule with an explicit `lambda` and no rate check.
    pub fn with_lambda(
        lambda: usize,
        rate_bits: usize,
        n: usize,
        num_slots: usize,
        restart_period: Option<usize>,
    ) -> Result<SlotSchedule> {
        if lambda == 0 || rate_bits == 0 || n == 0 || num_slots == 0 {
            return Err(Error::Input(format!(
                "lambda ({lambda}), rate_bits ({rate_bits}), n ({n}) and slots \
                 ({num_slots}) must all be positive"
            )));
        }
        if lambda * rate_bits > MAX_INDEX_BITS {
            return Err(Error::Input(format!(
                "steady-state messages of {} bits exceed {MAX_INDEX_BITS}",
                lambda * rate_bits
            )));
        }
        let restart_period = restart_period.unwrap_or(DEFAULT_RESTART_FACTOR * lambda);
        if restart_period == 0 {
            return Err(Error::Input("restart period must be positive".into()));
        }
        let slots = (1..=num_slots)
            .map(|slot| {
                let position = (slot - 1) % restart_period + 1;
                let (mini_slots, wiretap_msgs, keyed_msgs) = if position == 1 {
                    (1, 1, 0)
                } else if position <= lambda {
                    (2, 1, position - 1)
                } else {
                    (1, 0, lambda)
                };
                let key_bits = keyed_msgs * rate_bits;
                let wiretap_bits = wiretap_msgs * rate_bits;
                let message_bits = wiretap_bits + key_bits;
                let channel_uses = mini_slots * n;
                SlotPlan {
                    slot,
                    position,
                    mini_slots,
                    wiretap_msgs,
                    keyed_msgs,
                    key_bits,
                    wiretap_bits,
                    message_bits,
                    channel_uses,
                    slot_rate: message_bits as f64 / channel_uses as f64,
                }
            })
            .collect();
        let schedule = SlotSchedule {
            lambda,
            rate_bits,
            n,
            restart_period,
            slots,
        };
        schedule.check_key_availability()?;
        Ok(schedule)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Plan for the 1-based slot `k`.
    pub fn slot(&self, k: usize) -> Option<&SlotPlan> {
        k.checked_sub(1).and_then(|i| self.slots.get(i))
    }

    /// Distinct key widths used by keyed mini-slots.
    pub fn keyed_widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self
            .slots
            .iter()
            .filter(|s| s.has_keyed())
            .map(|s| s.key_bits)
            .collect();
        w.sort_unstable();
        w.dedup();
        w
    }

    pub fn total_message_bits(&self) -> usize {
        self.slots.iter().map(|s| s.message_bits).sum()
    }

    pub fn total_channel_uses(&self) -> usize {
        self.slots.iter().map(|s| s.channel_uses).sum()
    }

    /// Every keyed slot must follow a slot of the same restart window whose
    /// message is at least as long as the key it consumes.
    pub fn check_key_availability(&self) -> Result<()> {
        for pair in self.slots.windows(2) {
            let (prev, cur) = (&pair[0], &pair[1]);
            if cur.key_bits == 0 {
                continue;
            }
            if cur.position == 1 || prev.message_bits < cur.key_bits {
                return Err(Error::Protocol(format!(
                    "slot {} needs {} key bits but slot {} produced {}",
                    cur.slot, cur.key_bits, prev.slot, prev.message_bits
                )));
            }
        }
        if let Some(first) = self.slots.first() {
            if first.key_bits > 0 {
                return Err(Error::Protocol("slot 1 cannot consume a key".into()));
            }
        }
        Ok(())
    }
}

/// Wiretap code plus one keyed channel code per key width.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSet {
    pub wiretap: WiretapCodebook,
    pub keyed: BTreeMap<usize, ChannelCodebook>,
}

impl CodebookSet {
    /// Builds every code a schedule needs, seeding each from `master_seed`.
    pub fn build<T: Real>(
        schedule: &SlotSchedule,
        input_dist: &InputDistribution<T>,
        bin_bits: usize,
        master_seed: u64,
        limits: &CodeLimits,
    ) -> Result<Self> {
        let wiretap = build_wiretap(
            schedule.n,
            schedule.rate_bits,
            bin_bits,
            input_dist,
            derive_seed(master_seed, WIRETAP_CODE_STREAM),
            limits,
        )?;
        let keyed = schedule
            .keyed_widths()
            .into_iter()
            .map(|width| {
                let seed = derive_seed(master_seed, KEYED_CODE_BASE + width as u64);
                build_channel(schedule.n, 1 << width, input_dist, seed, limits)
                    .map(|code| (width, code))
            })
            .collect::<Result<_>>()?;
        Ok(CodebookSet { wiretap, keyed })
    }

    pub fn keyed_code(&self, width: usize) -> Result<&ChannelCodebook> {
        self.keyed
            .get(&width)
            .ok_or_else(|| Error::Protocol(format!("no channel code for {width}-bit keys")))
    }

    /// Checks that the codes match the schedule's dimensions.
    pub fn check_against(&self, schedule: &SlotSchedule) -> Result<()> {
        if self.wiretap.n() != schedule.n || self.wiretap.rate_bits() != schedule.rate_bits {
            return Err(Error::Input(format!(
                "wiretap code is ({}, {} bits), schedule expects ({}, {} bits)",
                self.wiretap.n(),
                self.wiretap.rate_bits(),
                schedule.n,
                schedule.rate_bits
            )));
        }
        for width in schedule.keyed_widths() {
            let code = self.keyed_code(width)?;
            if code.n() != schedule.n || code.num_codewords() != 1 << width {
                return Err(Error::Input(format!(
                    "channel code for {width}-bit keys has shape ({}, {})",
                    code.n(),
                    code.num_codewords()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Alice,
    Bob,
}

/// What Alice puts on the channel in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotEmission {
    /// Wiretap block first (if any), then the keyed block (if any).
    pub x_blocks: Vec<Vec<usize>>,
    /// One-time-pad cipher of the keyed messages.
    pub cipher: Option<BitString>,
}

/// Per-party chaining state.
#[derive(Debug, Clone)]
pub struct ProtocolState<'a> {
    role: Role,
    slots_done: usize,
    key_buffer: BitString,
    schedule: &'a SlotSchedule,
    codebooks: &'a CodebookSet,
}

impl<'a> ProtocolState<'a> {
    pub fn new(role: Role, schedule: &'a SlotSchedule, codebooks: &'a CodebookSet) -> Result<Self> {
        codebooks.check_against(schedule)?;
        Ok(ProtocolState {
            role,
            slots_done: 0,
            key_buffer: BitString::default(),
            schedule,
            codebooks,
        })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    /// 1-based index of the next slot to process.
    pub fn slot_index(&self) -> usize {
        self.slots_done + 1
    }

    pub fn key_buffer(&self) -> &BitString {
        &self.key_buffer
    }

    /// Overwrites the key buffer, e.g. to inject a key mismatch.
    pub fn replace_key_buffer(&mut self, key: BitString) {
        self.key_buffer = key;
    }

    pub fn restart_period(&self) -> usize {
        self.schedule.restart_period
    }

    fn current_plan(&self, expected: Role) -> Result<SlotPlan> {
        if self.role != expected {
            return Err(Error::Protocol(format!(
                "{:?} state used for {expected:?}'s operation",
                self.role
            )));
        }
        self.schedule.slot(self.slot_index()).copied().ok_or_else(|| {
            Error::Protocol(format!(
                "slot {} is beyond the {}-slot schedule",
                self.slot_index(),
                self.schedule.len()
            ))
        })
    }

    fn key_for(&self, plan: &SlotPlan) -> Result<BitString> {
        if plan.position == 1 || !plan.has_keyed() {
            return Ok(BitString::default());
        }
        self.key_buffer.prefix(plan.key_bits).ok_or_else(|| {
            Error::Protocol(format!(
                "key shortfall in slot {}: need {} bits, buffer holds {}",
                plan.slot,
                plan.key_bits,
                self.key_buffer.len()
            ))
        })
    }

    /// Alice: wiretap-encodes the first message of the slot, one-time-pads
    /// the rest with the previous slot's message and channel-encodes the
    /// cipher.
    pub fn alice_encode_slot<R: Rng + ?Sized>(
        &mut self,
        fresh_messages: &BitString,
        rng: &mut R,
    ) -> Result<SlotEmission> {
        let plan = self.current_plan(Role::Alice)?;
        if fresh_messages.len() != plan.message_bits {
            return Err(Error::Input(format!(
                "slot {} carries {} message bits, got {}",
                plan.slot,
                plan.message_bits,
                fresh_messages.len()
            )));
        }
        let key = self.key_for(&plan)?;
        let (wiretap_part, keyed_part) = fresh_messages.split_at(plan.wiretap_bits);
        let mut x_blocks = Vec::with_capacity(plan.mini_slots);
        if plan.has_wiretap() {
            let w = wiretap_part.to_index()? as usize;
            x_blocks.push(self.codebooks.wiretap.encode(w, rng)?);
        }
        let mut cipher = None;
        if plan.has_keyed() {
            let c = keyed_part.xor(&key)?;
            let code = self.codebooks.keyed_code(plan.key_bits)?;
            x_blocks.push(code.encode(c.to_index()? as usize)?);
            cipher = Some(c);
        }
        self.key_buffer = fresh_messages.clone();
        self.slots_done += 1;
        Ok(SlotEmission { x_blocks, cipher })
    }

    /// Bob: wiretap-decodes the first block, channel-decodes the second and
    /// removes the pad with his own copy of the previous message.
    pub fn bob_decode_slot<T: Real>(
        &mut self,
        y_blocks: &[Vec<usize>],
        model: &ChannelModel<T>,
    ) -> Result<BitString> {
        let plan = self.current_plan(Role::Bob)?;
        if y_blocks.len() != plan.mini_slots {
            return Err(Error::Input(format!(
                "slot {} has {} mini-slots, got {} blocks",
                plan.slot,
                plan.mini_slots,
                y_blocks.len()
            )));
        }
        let key = self.key_for(&plan)?;
        let mut blocks = y_blocks.iter();
        let mut decoded = BitString::default();
        if plan.has_wiretap() {
            let w = self.codebooks.wiretap.decode(blocks.next().unwrap(), model)?;
            decoded = BitString::from_index(w as u64, plan.wiretap_bits)?;
        }
        if plan.has_keyed() {
            let code = self.codebooks.keyed_code(plan.key_bits)?;
            let c = code.decode(blocks.next().unwrap(), model)?;
            let cipher = BitString::from_index(c as u64, plan.key_bits)?;
            decoded = decoded.concat(&cipher.xor(&key)?);
        }
        self.key_buffer = decoded.clone();
        self.slots_done += 1;
        Ok(decoded)
    }
}

/// Everything that happened in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub plan: SlotPlan,
    pub message: BitString,
    pub cipher: Option<BitString>,
    pub x_blocks: Vec<Vec<usize>>,
    pub y_blocks: Vec<Vec<usize>>,
    pub z_blocks: Vec<Vec<usize>>,
    pub decoded: BitString,
}

impl SlotRecord {
    pub fn error(&self) -> bool {
        self.decoded != self.message
    }

    /// Secret bits delivered correctly in this slot.
    pub fn delivered_bits(&self) -> usize {
        if self.error() {
            0
        } else {
            self.plan.message_bits
        }
    }

    pub fn throughput(&self) -> f64 {
        self.delivered_bits() as f64 / self.plan.channel_uses as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptRecord {
    pub slots: Vec<SlotRecord>,
}

impl TranscriptRecord {
    pub fn error_indicators(&self) -> Vec<bool> {
        self.slots.iter().map(SlotRecord::error).collect()
    }

    pub fn delivered_bits(&self) -> usize {
        self.slots.iter().map(SlotRecord::delivered_bits).sum()
    }

    /// Eve's observations `Z^(k)` over the first `k` slots, flattened.
    pub fn eve_view(&self, k: usize) -> Vec<usize> {
        self.slots[..k]
            .iter()
            .flat_map(|s| s.z_blocks.iter().flatten().copied())
            .collect()
    }
}

/// Whether sessions accept channels whose degradedness is unverified.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelPolicy {
    #[default]
    CascadeOnly,
    AllowUnverified,
}

/// A consistent channel, schedule and codebook configuration.
#[derive(Debug, Clone, Copy)]
pub struct Session<'a, T> {
    channel: &'a ChannelModel<T>,
    schedule: &'a SlotSchedule,
    codebooks: &'a CodebookSet,
}

impl<'a, T: Real> Session<'a, T> {
    pub fn new(
        channel: &'a ChannelModel<T>,
        schedule: &'a SlotSchedule,
        codebooks: &'a CodebookSet,
        policy: ChannelPolicy,
    ) -> Result<Self> {
        if channel.degradedness() == Degradedness::Unverified
            && policy == ChannelPolicy::CascadeOnly
        {
            return Err(Error::Validation(
                "channel degradedness is unverified; build it as a cascade or allow \
                 unverified channels explicitly"
                    .into(),
            ));
        }
        if channel.x_size() != codebooks.wiretap.x_size() {
            return Err(Error::Input(format!(
                "codebooks use a {}-ary input, channel has {}",
                codebooks.wiretap.x_size(),
                channel.x_size()
            )));
        }
        codebooks.check_against(schedule)?;
        Ok(Session {
            channel,
            schedule,
            codebooks,
        })
    }

    pub fn schedule(&self) -> &SlotSchedule {
        self.schedule
    }

    pub fn codebooks(&self) -> &CodebookSet {
        self.codebooks
    }

    pub fn channel(&self) -> &ChannelModel<T> {
        self.channel
    }

    /// Runs `num_slots` slots with uniform fresh messages.
    pub fn run<R: Rng + ?Sized>(&self, num_slots: usize, rng: &mut R) -> Result<TranscriptRecord> {
        if num_slots > self.schedule.len() {
            return Err(Error::Input(format!(
                "{num_slots} slots requested, schedule has {}",
                self.schedule.len()
            )));
        }
        let mut alice = ProtocolState::new(Role::Alice, self.schedule, self.codebooks)?;
        let mut bob = ProtocolState::new(Role::Bob, self.schedule, self.codebooks)?;
        let mut slots = Vec::with_capacity(num_slots);
        for plan in &self.schedule.slots[..num_slots] {
            let message = BitString::random(plan.message_bits, rng);
            let emission = alice.alice_encode_slot(&message, rng)?;
            let mut y_blocks = Vec::with_capacity(plan.mini_slots);
            let mut z_blocks = Vec::with_capacity(plan.mini_slots);
            for x in &emission.x_blocks {
                let (y, z) = self.channel.sample_block(x, rng)?;
                y_blocks.push(y);
                z_blocks.push(z);
            }
            let decoded = bob.bob_decode_slot(&y_blocks, self.channel)?;
            slots.push(SlotRecord {
                plan: *plan,
                message,
                cipher: emission.cipher,
                x_blocks: emission.x_blocks,
                y_blocks,
                z_blocks,
                decoded,
            });
        }
        Ok(TranscriptRecord { slots })
    }
}

/// Runs a session over a cascade channel.
pub fn run_session<T: Real, R: Rng + ?Sized>(
    channel: &ChannelModel<T>,
    schedule: &SlotSchedule,
    codebooks: &CodebookSet,
    num_slots: usize,
    rng: &mut R,
) -> Result<TranscriptRecord> {
    Session::new(channel, schedule, codebooks, ChannelPolicy::CascadeOnly)?.run(num_slots, rng)
}
