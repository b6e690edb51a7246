//! Exact multi-slot leakage by enumeration.
//!
//! [`build_joint`] materializes the law of every message and every Eve
//! block of the first `k` slots. The wiretap randomization is summed out
//! analytically through the per-bin mixture law of Eve's block, so the
//! table is indexed by messages and Eve outputs only. Arbitrary
//! conditional mutual informations are then evaluated by marginalizing
//! on demand, and the audits name each term by the key used in
//! `leakage.json`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::chain_protocol::{CodebookSet, SlotPlan, SlotSchedule, TranscriptRecord};
use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::infotheory::cmi_unchecked;
use crate::scalar::Real;
use crate::seeding::{stream_rng, BOOTSTRAP_STREAM};

/// Default bound on message x randomization x output states.
pub const DEFAULT_JOINT_STATE_CAP: u128 = 1 << 26;
/// Absolute tolerance for structural zeros and identities.
pub const AUDIT_TOLERANCE: f64 = 1e-9;
pub const MIN_EMPIRICAL_TRANSCRIPTS: usize = 10_000;
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 200;

const MARGINAL_CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    /// Wiretap-coded message `W_{k1}`.
    WiretapMsg,
    /// Keyed message `W_{k2}` (all keyed messages of the slot together).
    KeyedMsg,
    /// Eve's block of the wiretap mini-slot.
    WiretapOut,
    /// Eve's block of the keyed mini-slot.
    KeyedOut,
}

impl VarKind {
    fn label(self) -> &'static str {
        match self {
            VarKind::WiretapMsg => "W1",
            VarKind::KeyedMsg => "W2",
            VarKind::WiretapOut => "Z1",
            VarKind::KeyedOut => "Z2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointVar {
    pub slot: usize,
    pub kind: VarKind,
    pub size: usize,
}

impl fmt::Display for JointVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = self.kind.label();
        write!(f, "{}{}{}", &l[..1], self.slot, &l[1..])
    }
}

/// Dense joint law of messages and Eve's blocks over the first slots.
///
/// Variables are ordered slot by slot as `W_{k1}, W_{k2}, Z_{k1}, Z_{k2}`
/// (absent ones skipped); the first variable is the most significant
/// index digit.
#[derive(Debug, Clone)]
pub struct JointState<T> {
    n: usize,
    plans: Vec<SlotPlan>,
    vars: Vec<JointVar>,
    strides: Vec<usize>,
    probs: Vec<T>,
    state_count: u128,
}

impl<T: Real> JointState<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_slots(&self) -> usize {
        self.plans.len()
    }

    pub fn plans(&self) -> &[SlotPlan] {
        &self.plans
    }

    pub fn vars(&self) -> &[JointVar] {
        &self.vars
    }

    /// Product of message, randomization and output alphabet sizes.
    pub fn state_count(&self) -> u128 {
        self.state_count
    }

    pub fn table_len(&self) -> usize {
        self.probs.len()
    }

    pub fn total_mass(&self) -> T {
        self.probs.iter().copied().sum()
    }

    /// Probability of one full assignment, in variable order.
    pub fn prob(&self, assignment: &[usize]) -> Result<T> {
        if assignment.len() != self.vars.len() {
            return Err(Error::Input(format!(
                "assignment has {} values for {} variables",
                assignment.len(),
                self.vars.len()
            )));
        }
        let mut idx = 0;
        for ((&a, v), &s) in assignment.iter().zip(&self.vars).zip(&self.strides) {
            if a >= v.size {
                return Err(Error::Input(format!("{v} takes values below {}", v.size)));
            }
            idx += a * s;
        }
        Ok(self.probs[idx])
    }

    pub fn var(&self, slot: usize, kind: VarKind) -> Option<usize> {
        self.vars.iter().position(|v| v.slot == slot && v.kind == kind)
    }

    fn vars_where(&self, keep: impl Fn(&JointVar) -> bool) -> Vec<usize> {
        (0..self.vars.len()).filter(|&i| keep(&self.vars[i])).collect()
    }

    /// `W_{k1}` (empty if slot `k` has no wiretap mini-slot).
    pub fn w1(&self, k: usize) -> Vec<usize> {
        self.var(k, VarKind::WiretapMsg).into_iter().collect()
    }

    /// `W_{k2}` (empty if slot `k` has no keyed mini-slot).
    pub fn w2(&self, k: usize) -> Vec<usize> {
        self.var(k, VarKind::KeyedMsg).into_iter().collect()
    }

    /// Whole message `W̄_k` of slot `k`.
    pub fn w_bar(&self, k: usize) -> Vec<usize> {
        self.vars_where(|v| v.slot == k && matches!(v.kind, VarKind::WiretapMsg | VarKind::KeyedMsg))
    }

    pub fn z1(&self, k: usize) -> Vec<usize> {
        self.var(k, VarKind::WiretapOut).into_iter().collect()
    }

    pub fn z2(&self, k: usize) -> Vec<usize> {
        self.var(k, VarKind::KeyedOut).into_iter().collect()
    }

    /// Eve's whole observation of slot `k`.
    pub fn z_slot(&self, k: usize) -> Vec<usize> {
        self.vars_where(|v| v.slot == k && matches!(v.kind, VarKind::WiretapOut | VarKind::KeyedOut))
    }

    /// `Z^(k)`: Eve's observations of slots `from..=to`.
    pub fn z_range(&self, from: usize, to: usize) -> Vec<usize> {
        self.vars_where(|v| {
            (from..=to).contains(&v.slot)
                && matches!(v.kind, VarKind::WiretapOut | VarKind::KeyedOut)
        })
    }

    pub fn z_upto(&self, k: usize) -> Vec<usize> {
        self.z_range(1, k)
    }

    /// Marginal over `keep`, laid out with the first listed variable most
    /// significant.
    pub fn marginal(&self, keep: &[usize]) -> Vec<T> {
        let nv = self.vars.len();
        let mut coef = vec![0usize; nv];
        let mut out_len = 1;
        for &v in keep.iter().rev() {
            coef[v] = out_len;
            out_len *= self.vars[v].size;
        }
        let sizes: Vec<usize> = self.vars.iter().map(|v| v.size).collect();
        let partials: Vec<Vec<T>> = self
            .probs
            .par_chunks(MARGINAL_CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut acc = vec![T::zero(); out_len];
                let mut digits = vec![0usize; nv];
                let mut rest = ci * MARGINAL_CHUNK;
                let mut out = 0;
                for v in (0..nv).rev() {
                    digits[v] = rest % sizes[v];
                    rest /= sizes[v];
                    out += digits[v] * coef[v];
                }
                for &p in chunk {
                    acc[out] = acc[out] + p;
                    for v in (0..nv).rev() {
                        digits[v] += 1;
                        out += coef[v];
                        if digits[v] < sizes[v] {
                            break;
                        }
                        digits[v] = 0;
                        out -= coef[v] * sizes[v];
                    }
                }
                acc
            })
            .collect();
        let mut total = vec![T::zero(); out_len];
        for part in partials {
            for (t, p) in total.iter_mut().zip(part) {
                *t = *t + p;
            }
        }
        total
    }

    /// `I(A;B|C)` in bits over groups of variables. Empty `A` or `B` gives 0.
    pub fn mi(&self, a: &[usize], b: &[usize], c: &[usize]) -> T {
        if a.is_empty() || b.is_empty() {
            return T::zero();
        }
        debug_assert!(
            a.iter().chain(b).chain(c).enumerate().all(|(i, v)| {
                !a.iter().chain(b).chain(c).skip(i + 1).any(|w| w == v)
            }),
            "overlapping variable groups"
        );
        let size = |g: &[usize]| g.iter().map(|&v| self.vars[v].size).product::<usize>();
        let keep: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
        let table = self.marginal(&keep);
        cmi_unchecked(&table, size(a), size(b), size(c))
    }

    /// `I(W̄_m; Z^(k))`.
    pub fn leakage(&self, m: usize, k: usize) -> T {
        self.mi(&self.w_bar(m), &self.z_upto(k), &[])
    }

    /// Exact leakage `I(W_{j1}; Z_{j1})` of every wiretap block up to slot `m`.
    pub fn wiretap_block_leakages(&self, m: usize) -> Vec<T> {
        (1..=m.min(self.num_slots()))
            .filter(|&j| self.plans[j - 1].has_wiretap())
            .map(|j| self.mi(&self.w1(j), &self.z1(j), &[]))
            .collect()
    }
}

fn checked_size(base: usize, exp: usize) -> Option<u128> {
    (base as u128).checked_pow(exp as u32)
}

/// Exact joint law of the first `k` slots under uniform messages.
pub fn build_joint<T: Real>(
    channel: &ChannelModel<T>,
    codebooks: &CodebookSet,
    schedule: &SlotSchedule,
    k: usize,
    cap: u128,
) -> Result<JointState<T>> {
    if k == 0 || k > schedule.len() {
        return Err(Error::Input(format!(
            "cannot build a {k}-slot joint from a {}-slot schedule",
            schedule.len()
        )));
    }
    codebooks.check_against(schedule)?;
    if channel.x_size() != codebooks.wiretap.x_size() {
        return Err(Error::Input("codebook and channel alphabets differ".into()));
    }
    let n = schedule.n;
    let plans = schedule.slots[..k].to_vec();
    let overflow = || Error::EnumerationCap {
        states: u128::MAX,
        cap,
    };
    let z_block = checked_size(channel.z_size(), n).ok_or_else(overflow)?;
    let mut state_count: u128 = 1;
    for plan in &plans {
        let mut factor = 1u128;
        if plan.has_wiretap() {
            factor = factor
                .checked_mul(codebooks.wiretap.num_rows() as u128)
                .and_then(|f| f.checked_mul(z_block))
                .ok_or_else(overflow)?;
        }
        if plan.has_keyed() {
            factor = factor
                .checked_mul(1u128 << plan.key_bits)
                .and_then(|f| f.checked_mul(z_block))
                .ok_or_else(overflow)?;
        }
        state_count = state_count.checked_mul(factor).ok_or_else(overflow)?;
    }
    if state_count > cap {
        return Err(Error::EnumerationCap {
            states: state_count,
            cap,
        });
    }
    let z_block = z_block as usize;

    let book = &codebooks.wiretap;
    let inv_bin = T::one() / T::from_usize(book.bin_size()).unwrap();
    let wiretap_law: Vec<Vec<T>> = (0..book.num_bins())
        .map(|w| {
            let mut law = vec![T::zero(); z_block];
            for cw in book.bin(w) {
                for (l, p) in law.iter_mut().zip(channel.eve_block_law(cw)) {
                    *l = *l + p * inv_bin;
                }
            }
            law
        })
        .collect();
    let keyed_laws: BTreeMap<usize, Vec<Vec<T>>> = schedule
        .keyed_widths()
        .into_iter()
        .map(|width| {
            let code = codebooks.keyed_code(width)?;
            let laws = (0..code.num_codewords())
                .map(|c| channel.eve_block_law(code.codeword(c)))
                .collect();
            Ok((width, laws))
        })
        .collect::<Result<_>>()?;

    let mut vars: Vec<JointVar> = Vec::new();
    let mut probs = vec![T::one()];
    for (idx, plan) in plans.iter().enumerate() {
        let slot = idx + 1;
        let old_vars = vars.clone();
        let old_strides = strides_of(&old_vars);
        let prev = (plan.has_keyed() && plan.position > 1).then(|| {
            let p = &plans[idx - 1];
            let find = |kind| old_vars.iter().position(|v| v.slot == slot - 1 && v.kind == kind);
            (
                find(VarKind::WiretapMsg),
                find(VarKind::KeyedMsg),
                p.key_bits,
                p.message_bits,
            )
        });
        let m1 = if plan.has_wiretap() { book.num_bins() } else { 1 };
        let m2 = if plan.has_keyed() { 1usize << plan.key_bits } else { 1 };
        let z1 = if plan.has_wiretap() { z_block } else { 1 };
        let z2 = if plan.has_keyed() { z_block } else { 1 };
        if plan.has_wiretap() {
            vars.push(JointVar { slot, kind: VarKind::WiretapMsg, size: m1 });
        }
        if plan.has_keyed() {
            vars.push(JointVar { slot, kind: VarKind::KeyedMsg, size: m2 });
        }
        if plan.has_wiretap() {
            vars.push(JointVar { slot, kind: VarKind::WiretapOut, size: z1 });
        }
        if plan.has_keyed() {
            vars.push(JointVar { slot, kind: VarKind::KeyedOut, size: z2 });
        }
        let block = m1 * m2 * z1 * z2;
        let weight = T::one() / T::from_usize(m1 * m2).unwrap();
        let keyed_law = plan.has_keyed().then(|| &keyed_laws[&plan.key_bits]);
        let old_sizes: Vec<usize> = old_vars.iter().map(|v| v.size).collect();
        let mut next = vec![T::zero(); probs.len() * block];
        next.par_chunks_mut(block)
            .zip(probs.par_iter())
            .enumerate()
            .for_each(|(i, (out, &p))| {
                if p == T::zero() {
                    return;
                }
                let key = match prev {
                    Some((v1, v2, prev_key_bits, prev_bits)) => {
                        let digit = |v: Option<usize>| {
                            v.map_or(0, |v| (i / old_strides[v]) % old_sizes[v])
                        };
                        let full = (digit(v1) << prev_key_bits) | digit(v2);
                        full >> (prev_bits - plan.key_bits)
                    }
                    None => 0,
                };
                let base = p * weight;
                for w1 in 0..m1 {
                    for w2 in 0..m2 {
                        let lc = keyed_law.map(|laws| &laws[w2 ^ key]);
                        for zi in 0..z1 {
                            let pw = if plan.has_wiretap() {
                                base * wiretap_law[w1][zi]
                            } else {
                                base
                            };
                            let row = ((w1 * m2 + w2) * z1 + zi) * z2;
                            match lc {
                                Some(law) => {
                                    for (o, &q) in out[row..row + z2].iter_mut().zip(law) {
                                        *o = pw * q;
                                    }
                                }
                                None => out[row] = pw,
                            }
                        }
                    }
                }
            });
        probs = next;
    }
    let strides = strides_of(&vars);
    let joint = JointState {
        n,
        plans,
        vars,
        strides,
        probs,
        state_count,
    };
    let mass = joint.total_mass();
    if (mass - T::one()).abs() > T::lit(AUDIT_TOLERANCE) {
        return Err(Error::Validation(format!("joint law has total mass {mass}")));
    }
    Ok(joint)
}

fn strides_of(vars: &[JointVar]) -> Vec<usize> {
    let mut strides = vec![0; vars.len()];
    let mut s = 1;
    for (st, v) in strides.iter_mut().zip(vars).rev() {
        *st = s;
        s *= v.size;
    }
    strides
}

/// A checked equality or inequality between two information quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl Relation {
    pub fn bound(lhs: f64, rhs: f64) -> Self {
        Relation {
            lhs,
            rhs,
            pass: lhs <= rhs + AUDIT_TOLERANCE,
        }
    }

    pub fn equal(lhs: f64, rhs: f64) -> Self {
        Relation {
            lhs,
            rhs,
            pass: (lhs - rhs).abs() <= AUDIT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageEntry {
    pub m: usize,
    pub k: usize,
    /// `I(W̄_m; Z^(k))` in bits.
    pub bits: f64,
    /// `bits / n`.
    pub rate: f64,
}

/// Named terms of an audit. Keys follow the `leakage.json` schema.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub n: usize,
    pub slots: usize,
    /// Terms that must vanish exactly.
    pub zeros: BTreeMap<String, f64>,
    /// Chain-rule recompositions, identities and bounds.
    pub relations: BTreeMap<String, Relation>,
    /// Logged but not gating.
    pub informational: BTreeMap<String, f64>,
    pub leakage: Vec<LeakageEntry>,
}

impl LeakageReport {
    fn new(n: usize, slots: usize) -> Self {
        LeakageReport {
            n,
            slots,
            ..Default::default()
        }
    }

    pub fn zero_failures(&self) -> Vec<&str> {
        self.zeros
            .iter()
            .filter(|(_, v)| v.abs() > AUDIT_TOLERANCE)
            .map(|(k, _)| k.as_str())
            .collect()
    }

    pub fn relation_failures(&self) -> Vec<&str> {
        self.relations
            .iter()
            .filter(|(_, r)| !r.pass)
            .map(|(k, _)| k.as_str())
            .collect()
    }

    /// True when every structural zero is within tolerance.
    pub fn zeros_pass(&self) -> bool {
        self.zero_failures().is_empty()
    }

    pub fn relations_pass(&self) -> bool {
        self.relation_failures().is_empty()
    }

    pub fn merge(&mut self, other: LeakageReport) {
        self.zeros.extend(other.zeros);
        self.relations.extend(other.relations);
        self.informational.extend(other.informational);
        for e in other.leakage {
            if !self.leakage.iter().any(|x| x.m == e.m && x.k == e.k) {
                self.leakage.push(e);
            }
        }
        self.leakage.sort_by_key(|e| (e.m, e.k));
    }

    /// Flat JSON object keyed by term, plus summary fields.
    pub fn to_json_value(&self) -> Value {
        let mut map = Map::new();
        for (k, v) in &self.zeros {
            map.insert(k.clone(), json!(v));
        }
        for (k, r) in &self.relations {
            map.insert(k.clone(), serde_json::to_value(r).expect("plain struct"));
        }
        map.insert("informational".into(), json!(self.informational));
        map.insert("leakage".into(), json!(self.leakage));
        map.insert("n".into(), json!(self.n));
        map.insert("slots".into(), json!(self.slots));
        map.insert("tolerance".into(), json!(AUDIT_TOLERANCE));
        map.insert("structural_zeros_pass".into(), json!(self.zeros_pass()));
        map.insert("relations_pass".into(), json!(self.relations_pass()));
        Value::Object(map)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json_value())?)
    }
}

struct Recorder<'a, T> {
    joint: &'a JointState<T>,
    report: LeakageReport,
    suffix: String,
}

impl<'a, T: Real> Recorder<'a, T> {
    fn new(joint: &'a JointState<T>, suffix: String) -> Self {
        Recorder {
            joint,
            report: LeakageReport::new(joint.n, joint.num_slots()),
            suffix,
        }
    }

    fn key(&self, name: &str) -> String {
        format!("{name}{}", self.suffix)
    }

    fn mi(&self, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
        self.joint.mi(a, b, c).to_f64().unwrap()
    }

    fn zero(&mut self, name: &str, value: f64) {
        let key = self.key(name);
        self.report.zeros.insert(key, value);
    }

    fn relation(&mut self, name: &str, rel: Relation) {
        let key = self.key(name);
        self.report.relations.insert(key, rel);
    }

    fn info(&mut self, name: &str, value: f64) {
        let key = self.key(name);
        self.report.informational.insert(key, value);
    }

    fn leakage(&mut self, m: usize, k: usize, bits: f64) {
        let entry = LeakageEntry {
            m,
            k,
            bits,
            rate: bits / self.joint.n as f64,
        };
        if !self.report.leakage.contains(&entry) {
            self.report.leakage.push(entry);
        }
    }
}

fn cat(groups: &[&[usize]]) -> Vec<usize> {
    groups.concat()
}

/// Slot-2 decomposition: terms of `I(W̄_1; Z^(2))` and `I(W̄_2; Z^(2))`.
pub fn audit_slot2<T: Real>(joint: &JointState<T>) -> Result<LeakageReport> {
    if joint.num_slots() < 2 {
        return Err(Error::Input(format!(
            "slot-2 audit needs a joint over at least 2 slots, got {}",
            joint.num_slots()
        )));
    }
    let j = joint;
    let mut r = Recorder::new(j, String::new());
    let (wb1, wb2) = (j.w_bar(1), j.w_bar(2));
    let (w1, w21, w22) = (j.w1(1), j.w1(2), j.w2(2));
    let (z1, z21, z22, z2) = (j.z_slot(1), j.z1(2), j.z2(2), j.z_slot(2));
    let z_both = j.z_upto(2);

    let l1 = r.mi(&wb1, &z_both, &[]);
    let l1_first = r.mi(&wb1, &z1, &[]);
    let eq11 = r.mi(&wb1, &z2, &z1);
    r.zero("eq11", eq11);
    r.relation("eq10_chain", Relation::equal(l1, l1_first + eq11));
    r.relation("eq10_identity", Relation::equal(l1, l1_first));
    let block1 = r.mi(&w1, &z1, &[]);
    let block2 = r.mi(&w21, &z21, &[]);
    r.relation("eq12_bound", Relation::bound(l1, block1));
    r.relation("eq12_bound_two_block", Relation::bound(l1, block1 + block2));

    let l2 = r.mi(&wb2, &z_both, &[]);
    let eq14 = r.mi(&wb2, &z1, &[]);
    let l2_cond = r.mi(&wb2, &z2, &z1);
    r.zero("eq14", eq14);
    r.relation("eq13_chain", Relation::equal(l2, eq14 + l2_cond));

    let t21 = r.mi(&w21, &z2, &z1);
    let t22 = r.mi(&w22, &z2, &cat(&[&z1, &w21]));
    r.relation("eq14_chain", Relation::equal(l2_cond, t21 + t22));

    let eq16 = r.mi(&w21, &z22, &z1);
    let t21_rest = r.mi(&w21, &z21, &cat(&[&z1, &z22]));
    r.zero("eq16", eq16);
    r.relation("eq15_chain", Relation::equal(t21, eq16 + t21_rest));
    r.relation("eq17_identity", Relation::equal(t21_rest, block2));
    r.relation("eq18_bound", Relation::bound(t21, block2));

    let eq18 = r.mi(&w22, &z21, &cat(&[&z1, &w21]));
    let t22_rest = r.mi(&w22, &z22, &cat(&[&z1, &z21, &w21]));
    r.zero("eq18", eq18);
    r.relation("eq19_chain", Relation::equal(t22, eq18 + t22_rest));
    let t22_z1 = r.mi(&w22, &z22, &z1);
    r.relation("eq20_identity", Relation::equal(t22_rest, t22_z1));
    let swapped = r.mi(&w22, &z1, &z22);
    r.relation("eq21_identity", Relation::equal(t22_z1, swapped));
    r.zero("eq17", r.mi(&w22, &z22, &[]));

    let with_w1 = r.mi(&z1, &cat(&[&w22, &w1]), &z22);
    let with_w1_uncond = r.mi(&z1, &cat(&[&w22, &w1]), &[]);
    r.relation("eq23_bound_a", Relation::bound(swapped, with_w1));
    r.relation("eq23_bound_b", Relation::bound(with_w1, with_w1_uncond));
    r.zero("eq23", r.mi(&z1, &w22, &w1));
    r.relation("eq24_bound", Relation::bound(swapped, r.mi(&z1, &w1, &[])));
    r.relation("eq22_bound", Relation::bound(l2, block1 + block2));

    r.leakage(1, 1, l1_first);
    r.leakage(1, 2, l1);
    r.leakage(2, 2, l2);
    Ok(r.report)
}

/// Induction step from `k` to `k + 1` slots for message `m <= k + 1`.
pub fn audit_induction<T: Real>(
    joint: &JointState<T>,
    m: usize,
    k: usize,
) -> Result<LeakageReport> {
    if k == 0 || k + 1 > joint.num_slots() || m == 0 || m > k + 1 {
        return Err(Error::Input(format!(
            "induction audit needs 1 <= m <= k + 1 <= {} slots, got m = {m}, k = {k}",
            joint.num_slots()
        )));
    }
    let j = joint;
    let mut r = Recorder::new(j, format!("_m{m}_k{k}"));
    let zk = j.z_upto(k);
    let (a, b) = (j.z1(k + 1), j.z2(k + 1));
    let z_next = j.z_slot(k + 1);
    let wb = j.w_bar(m);
    let total = r.mi(&wb, &j.z_upto(k + 1), &[]);
    let accumulated: f64 = j
        .wiretap_block_leakages(m)
        .into_iter()
        .map(|v| v.to_f64().unwrap())
        .sum();

    if m <= k {
        let before = r.mi(&wb, &zk, &[]);
        let step = r.mi(&wb, &z_next, &zk);
        r.relation("eq28_chain", Relation::equal(total, before + step));
        let first = r.mi(&wb, &a, &zk);
        let second = r.mi(&wb, &b, &cat(&[&zk, &a]));
        r.relation("eq29_chain", Relation::equal(step, first + second));
        let (wm1, wm2) = (j.w1(m), j.w2(m));
        let eq30 = r.mi(&wm1, &a, &zk);
        let eq31 = r.mi(&wm2, &a, &cat(&[&zk, &wm1]));
        r.zero("eq30", eq30);
        r.zero("eq31", eq31);
        r.zero("eq32", first);
        r.relation("eq30_chain", Relation::equal(first, eq30 + eq31));
        if m == k {
            r.zero("eq35", second);
            let upper = r.mi(&wb, &b, &[]);
            r.relation("eq34_bound", Relation::bound(second, upper));
            r.zero("eq37", upper);
            r.info("eq37_intermediate", r.mi(&j.w2(k), &b, &[]));
        } else {
            let tail = cat(&[&j.z_range(m, k), &a]);
            let reduced = r.mi(&wb, &b, &tail);
            r.relation("eq36_identity", Relation::equal(second, reduced));
            r.zero("eq36", reduced);
            let later: Vec<usize> = (m..=k).flat_map(|s| j.w_bar(s)).collect();
            r.zero("eq38", r.mi(&later, &b, &[]));
        }
        let own = r.mi(&wb, &j.z_upto(m), &[]);
        r.relation("eq39_identity", Relation::equal(total, own));
        r.relation("eq39_bound", Relation::bound(total, accumulated));
        r.leakage(m, k, before);
    } else {
        let (w1, w2) = (j.w1(k + 1), j.w2(k + 1));
        let part1 = r.mi(&w1, &j.z_upto(k + 1), &[]);
        let part2 = r.mi(&w2, &j.z_upto(k + 1), &w1);
        r.relation("eq40_chain", Relation::equal(total, part1 + part2));
        let eq42 = r.mi(&w1, &zk, &[]);
        let fresh = r.mi(&w1, &z_next, &zk);
        r.zero("eq42", eq42);
        r.relation("eq41_chain", Relation::equal(part1, eq42 + fresh));
        r.zero("eq43", r.mi(&w1, &b, &zk));
        let own_block = r.mi(&w1, &a, &[]);
        r.relation(
            "eq43_identity",
            Relation::equal(r.mi(&w1, &a, &cat(&[&zk, &b])), own_block),
        );
        r.relation("eq44_bound", Relation::bound(part1, own_block));
        r.zero("eq45", r.mi(&w2, &a, &w1));
        r.zero("eq46", r.mi(&w2, &zk, &[]));
        r.zero("eq48", r.mi(&w2, &b, &[]));
        let zk_slot = j.z_slot(k);
        let wbk = j.w_bar(k);
        r.zero("eq50", r.mi(&w2, &zk_slot, &wbk));
        r.info("eq47_lhs", r.mi(&w2, &b, &zk));
        r.info("eq47_rhs", r.mi(&w2, &b, &zk_slot));
        r.relation(
            "eq50_bound",
            Relation::bound(r.mi(&w2, &zk_slot, &b), r.mi(&wbk, &zk_slot, &[])),
        );
        r.relation("eq49_bound", Relation::bound(total, accumulated));
    }
    r.leakage(m, k + 1, total);
    Ok(r.report)
}

/// Slot-2 audit plus every induction step the joint supports.
pub fn audit_all<T: Real>(joint: &JointState<T>) -> Result<LeakageReport> {
    let mut report = LeakageReport::new(joint.n, joint.num_slots());
    if joint.num_slots() == 1 {
        let l = joint.leakage(1, 1).to_f64().unwrap();
        report.leakage.push(LeakageEntry {
            m: 1,
            k: 1,
            bits: l,
            rate: l / joint.n as f64,
        });
        return Ok(report);
    }
    report.merge(audit_slot2(joint)?);
    for k in 1..joint.num_slots() {
        for m in 1..=k + 1 {
            report.merge(audit_induction(joint, m, k)?);
        }
    }
    Ok(report)
}

/// Plug-in estimate of `I(W̄_m; Z^(k))` with a basic bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalLeakage {
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub samples: usize,
    pub resamples: usize,
}

impl EmpiricalLeakage {
    pub fn contains(&self, value: f64) -> bool {
        self.ci_lo <= value && value <= self.ci_hi
    }
}

fn plug_in_mi(pairs: &[(usize, usize)], idx: impl Iterator<Item = usize>, nw: usize, nz: usize) -> f64 {
    let mut counts = vec![0.0f64; nw * nz];
    let mut total = 0.0;
    for i in idx {
        let (w, z) = pairs[i];
        counts[w * nz + z] += 1.0;
        total += 1.0;
    }
    for c in &mut counts {
        *c /= total;
    }
    cmi_unchecked(&counts, nw, nz, 1)
}

/// 95% basic-bootstrap interval, lower end clamped at 0.
pub fn empirical_leakage_estimate(
    transcripts: &[TranscriptRecord],
    m: usize,
    k: usize,
    resamples: usize,
    seed: u64,
) -> Result<EmpiricalLeakage> {
    if transcripts.len() < MIN_EMPIRICAL_TRANSCRIPTS {
        return Err(Error::InsufficientSamples {
            got: transcripts.len(),
            needed: MIN_EMPIRICAL_TRANSCRIPTS,
        });
    }
    if m == 0 || m > k || resamples == 0 {
        return Err(Error::Input(format!(
            "need 1 <= m <= k and resamples > 0, got m = {m}, k = {k}, resamples = {resamples}"
        )));
    }
    let mut w_ids: HashMap<u64, usize> = HashMap::new();
    let mut z_ids: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut pairs = Vec::with_capacity(transcripts.len());
    for t in transcripts {
        if t.slots.len() < k {
            return Err(Error::Input(format!(
                "transcript has {} slots, need {k}",
                t.slots.len()
            )));
        }
        let w = t.slots[m - 1].message.to_index()?;
        let next_w = w_ids.len();
        let w = *w_ids.entry(w).or_insert(next_w);
        let next_z = z_ids.len();
        let z = *z_ids.entry(t.eve_view(k)).or_insert(next_z);
        pairs.push((w, z));
    }
    let (nw, nz) = (w_ids.len(), z_ids.len());
    let estimate = plug_in_mi(&pairs, 0..pairs.len(), nw, nz);
    let mut rng = stream_rng(seed, BOOTSTRAP_STREAM);
    let len = pairs.len();
    let mut boot: Vec<f64> = (0..resamples)
        .map(|_| {
            let idx: Vec<usize> = (0..len).map(|_| rng.random_range(0..len)).collect();
            plug_in_mi(&pairs, idx.into_iter(), nw, nz)
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    let q = |p: f64| boot[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Ok(EmpiricalLeakage {
        estimate,
        ci_lo: (2.0 * estimate - q(0.975)).max(0.0),
        ci_hi: (2.0 * estimate - q(0.025)).max(0.0),
        samples: len,
        resamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::CascadeSpec;
    use crate::infotheory::InputDistribution;
    use crate::wiretap_code::{exact_block_leakage, CodeLimits};

    fn setup(
        ch: &ChannelModel<f64>,
        lambda: usize,
        n: usize,
        slots: usize,
        seed: u64,
    ) -> (SlotSchedule, CodebookSet) {
        let s = SlotSchedule::with_lambda(lambda, 1, n, slots, None).unwrap();
        let dist = InputDistribution::<f64>::uniform(ch.x_size());
        let cb = CodebookSet::build(&s, &dist, 1, seed, &CodeLimits::default()).unwrap();
        (s, cb)
    }

    fn pure_noise() -> ChannelModel<f64> {
        let half = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        ChannelModel::from_cascade(&CascadeSpec::new(id, half)).unwrap()
    }

    #[test]
    fn single_slot_matches_block_leakage() {
        let ch = ChannelModel::bsc_pair(0.1, 0.2).unwrap();
        for seed in 0..4 {
            let (s, cb) = setup(&ch, 2, 3, 1, seed);
            let j = build_joint(&ch, &cb, &s, 1, DEFAULT_JOINT_STATE_CAP).unwrap();
            let a = j.leakage(1, 1);
            let b = exact_block_leakage(&cb.wiretap, &ch, &CodeLimits::default()).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn state_count_is_dimension_product() {
        let ch = ChannelModel::bsc_pair(0.1, 0.2).unwrap();
        let (s, cb) = setup(&ch, 2, 2, 2, 0);
        let j = build_joint(&ch, &cb, &s, 2, DEFAULT_JOINT_STATE_CAP).unwrap();
        // slot 1: 2 msgs * 2 rand * 4 outputs; slot 2 adds a 2-value key block
        assert_eq!(j.state_count(), (2 * 2 * 4) * (2 * 2 * 4 * 2 * 4));
        assert_eq!(j.table_len(), (2 * 4) * (2 * 4 * 2 * 4));
        assert!((j.total_mass() - 1.0).abs() < 1e-12);
        let names: Vec<String> = j.vars().iter().map(|v| v.to_string()).collect();
        assert_eq!(names, ["W11", "Z11", "W21", "W22", "Z21", "Z22"]);
    }

    #[test]
    fn budget_exceeded_reports_states() {
        let ch = ChannelModel::bsc_pair(0.1, 0.2).unwrap();
        let (s, cb) = setup(&ch, 2, 4, 3, 0);
        match build_joint(&ch, &cb, &s, 3, 1 << 10) {
            Err(Error::EnumerationCap { states, cap }) => {
                assert!(states > cap);
                assert_eq!(cap, 1 << 10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pure_noise_eve_leaks_nothing() {
        let ch = pure_noise();
        let (s, cb) = setup(&ch, 2, 2, 3, 4);
        let j = build_joint(&ch, &cb, &s, 3, DEFAULT_JOINT_STATE_CAP).unwrap();
        let rep = audit_all(&j).unwrap();
        assert!(rep.zeros.values().all(|v| v.abs() < 1e-12));
        assert!(rep.leakage.iter().all(|e| e.bits.abs() < 1e-12));
        assert!(rep.relations_pass());
        let r = rep.relations["eq22_bound"];
        assert!(r.lhs.abs() < 1e-12 && r.rhs.abs() < 1e-12);
    }

    #[test]
    fn slot2_structure_on_cascade() {
        let ch = ChannelModel::bsc_pair(0.1, 0.3).unwrap();
        for seed in 0..3 {
            let (s, cb) = setup(&ch, 2, 3, 2, seed);
            let j = build_joint(&ch, &cb, &s, 2, DEFAULT_JOINT_STATE_CAP).unwrap();
            let rep = audit_slot2(&j).unwrap();
            assert!(rep.zeros_pass(), "{:?}", rep.zero_failures());
            assert!(rep.relations_pass(), "{:?}", rep.relation_failures());
            for key in ["eq11", "eq14", "eq16", "eq17"] {
                assert!(rep.zeros.contains_key(key));
            }
        }
    }

    #[test]
    fn induction_structure_on_cascade() {
        let ch = ChannelModel::bsc_pair(0.05, 0.2).unwrap();
        for lambda in [2, 3] {
            let (s, cb) = setup(&ch, lambda, 2, 3, 11);
            let j = build_joint(&ch, &cb, &s, 3, DEFAULT_JOINT_STATE_CAP).unwrap();
            let rep = audit_all(&j).unwrap();
            assert!(rep.zeros_pass(), "{:?}", rep.zero_failures());
            assert!(rep.relations_pass(), "{:?}", rep.relation_failures());
            let first = j.leakage(1, 1);
            assert!((j.leakage(1, 3) - first).abs() < 1e-9);
        }
    }

    #[test]
    fn arity_errors() {
        let ch = ChannelModel::bsc_pair(0.1, 0.2).unwrap();
        let (s, cb) = setup(&ch, 2, 2, 2, 0);
        let j = build_joint(&ch, &cb, &s, 1, DEFAULT_JOINT_STATE_CAP).unwrap();
        assert!(audit_slot2(&j).is_err());
        assert!(audit_induction(&j, 1, 1).is_err());
        assert!(build_joint(&ch, &cb, &s, 3, DEFAULT_JOINT_STATE_CAP).is_err());
    }

    #[test]
    fn report_json_shape() {
        let ch = ChannelModel::bsc_pair(0.1, 0.2).unwrap();
        let (s, cb) = setup(&ch, 2, 2, 3, 0);
        let j = build_joint(&ch, &cb, &s, 3, DEFAULT_JOINT_STATE_CAP).unwrap();
        let v = audit_all(&j).unwrap().to_json_value();
        assert!(v["eq11"].is_number());
        let b = &v["eq49_bound_m3_k2"];
        assert!(b["lhs"].is_number() && b["rhs"].is_number() && b["pass"].is_boolean());
        assert_eq!(v["structural_zeros_pass"], json!(true));
    }

    #[test]
    fn too_few_transcripts() {
        assert!(matches!(
            empirical_leakage_estimate(&[], 1, 1, 10, 0),
            Err(Error::InsufficientSamples { got: 0, .. })
        ));
    }
}
