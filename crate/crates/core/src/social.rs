//! Social tie strength.
//!
//! Interaction evidence ("tie signs") between ordered user pairs is condensed
//! into a continuous index in `[0, 1]`: each sign count is normalised against
//! population statistics, weighted, summed and optionally decayed with age.
//! The index is quantised onto an integer 0–4 scale and stored in a
//! [`TsMatrix`]. Paths are rated by the geometric mean of the tie strengths of
//! their consecutive hops in the direction of travel.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::sim::Seconds;
use crate::{Error, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Network {
    Facebook,
    Twitter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Directness {
    Direct,
    Indirect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visibility {
    Public,
    Private,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignInfo {
    pub name: &'static str,
    pub network: Network,
    pub directness: Directness,
    pub visibility: Visibility,
}

const fn sign(name: &'static str, network: Network, directness: Directness, visibility: Visibility) -> SignInfo {
    SignInfo { name, network, directness, visibility }
}

use Directness::{Direct, Indirect};
use Network::{Facebook, Twitter};
use Visibility::{Private, Public};

/// Every tie sign known to the ledger: 13 Facebook signs then 11 Twitter signs.
pub const SIGNS: [SignInfo; 24] = [
    sign("fb_wall_posts", Facebook, Direct, Private),
    sign("fb_private_messages", Facebook, Direct, Private),
    sign("fb_comments_friend_objects", Facebook, Direct, Public),
    sign("fb_comments_same_objects", Facebook, Indirect, Public),
    sign("fb_likes_friend_objects", Facebook, Direct, Public),
    sign("fb_likes_same_objects", Facebook, Indirect, Public),
    sign("fb_tagged_same_media", Facebook, Indirect, Private),
    sign("fb_same_private_group", Facebook, Indirect, Private),
    sign("fb_same_public_group", Facebook, Indirect, Public),
    sign("fb_same_private_event", Facebook, Indirect, Private),
    sign("fb_same_public_event", Facebook, Indirect, Public),
    sign("fb_subscribed_to_same_user", Facebook, Indirect, Public),
    sign("fb_subscribed_by_same_user", Facebook, Indirect, Public),
    sign("tw_mentions", Twitter, Direct, Private),
    sign("tw_private_messages", Twitter, Direct, Private),
    sign("tw_retweets_friend", Twitter, Direct, Public),
    sign("tw_retweets_same", Twitter, Indirect, Public),
    sign("tw_favorites_friend", Twitter, Direct, Public),
    sign("tw_favorites_same", Twitter, Indirect, Public),
    sign("tw_same_private_list", Twitter, Indirect, Private),
    sign("tw_same_public_list", Twitter, Indirect, Public),
    sign("tw_same_hashtag", Twitter, Indirect, Public),
    sign("tw_common_followers", Twitter, Indirect, Public),
    sign("tw_common_followees", Twitter, Indirect, Public),
];

/// Index into [`SIGNS`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignType(u8);

impl SignType {
    pub fn new(index: usize) -> Option<Self> {
        (index < SIGNS.len()).then_some(Self(index as u8))
    }

    pub fn from_name(name: &str) -> Option<Self> {
        SIGNS.iter().position(|s| s.name == name).map(|i| Self(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn info(self) -> &'static SignInfo {
        &SIGNS[self.index()]
    }

    pub fn all() -> impl Iterator<Item = SignType> {
        (0..SIGNS.len()).map(|i| SignType(i as u8))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignRecord {
    pub count: u64,
    pub last_update: Seconds,
}

/// Counts of each sign type per ordered user pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TieSignLedger {
    pairs: BTreeMap<(NodeId, NodeId), BTreeMap<SignType, SignRecord>>,
}

impl TieSignLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `count` interactions of `sign` from `u` towards `v` observed at
    /// `at`. Self pairs are ignored.
    pub fn record(&mut self, u: NodeId, v: NodeId, sign: SignType, count: u64, at: Seconds) {
        if u == v {
            return;
        }
        let rec = self
            .pairs
            .entry((u, v))
            .or_default()
            .entry(sign)
            .or_insert(SignRecord { count: 0, last_update: at });
        rec.count += count;
        rec.last_update = rec.last_update.max(at);
    }

    pub fn get(&self, u: NodeId, v: NodeId, sign: SignType) -> Option<SignRecord> {
        self.pairs.get(&(u, v)).and_then(|m| m.get(&sign)).copied()
    }

    pub fn count(&self, u: NodeId, v: NodeId, sign: SignType) -> u64 {
        self.get(u, v, sign).map_or(0, |r| r.count)
    }

    /// Ordered pairs with at least one record.
    pub fn pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.pairs.keys().copied()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }
}

/// Per-sign weights α_k, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TieSignWeights {
    alpha: [f64; 24],
}

impl Default for TieSignWeights {
    fn default() -> Self {
        Self::from_tags(SignType::all())
    }
}

impl TieSignWeights {
    /// Relative weight from the tags: private counts double public, direct
    /// counts double indirect.
    pub fn tag_weight(info: &SignInfo) -> f64 {
        let vis = match info.visibility {
            Visibility::Private => 2.0,
            Visibility::Public => 1.0,
        };
        let dir = match info.directness {
            Directness::Direct => 2.0,
            Directness::Indirect => 1.0,
        };
        vis * dir
    }

    /// Tag-derived weights normalised over `active`; other signs weigh zero.
    pub fn from_tags(active: impl IntoIterator<Item = SignType>) -> Self {
        let mut alpha = [0.0; 24];
        for s in active {
            alpha[s.index()] = Self::tag_weight(s.info());
        }
        let total: f64 = alpha.iter().sum();
        if total > 0.0 {
            alpha.iter_mut().for_each(|a| *a /= total);
        }
        Self { alpha }
    }

    /// Explicit weights. They must be nonnegative and sum to one within 1e-9.
    pub fn new(alpha: [f64; 24]) -> Result<Self, Error> {
        if alpha.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::InvalidParameter("alpha"));
        }
        let total: f64 = alpha.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("alpha"));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self, sign: SignType) -> f64 {
        self.alpha[sign.index()]
    }

    pub fn sum(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

/// Population mean and maximum of one sign's counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignStats {
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    per_sign: [SignStats; 24],
}

impl NormalizationStats {
    pub fn new(per_sign: [SignStats; 24]) -> Self {
        Self { per_sign }
    }

    /// Mean and max of each sign's count over the ordered pairs present in
    /// the ledger; a pair lacking a sign contributes a zero count.
    pub fn from_ledger(ledger: &TieSignLedger) -> Self {
        let mut per_sign = [SignStats { mean: 0.0, max: 0.0 }; 24];
        let pairs = ledger.pair_count();
        if pairs == 0 {
            return Self { per_sign };
        }
        let mut sums = [0.0f64; 24];
        for signs in ledger.pairs.values() {
            for (s, rec) in signs {
                let c = rec.count as f64;
                sums[s.index()] += c;
                let st = &mut per_sign[s.index()];
                st.max = st.max.max(c);
            }
        }
        for (st, sum) in per_sign.iter_mut().zip(sums) {
            st.mean = sum / pairs as f64;
        }
        Self { per_sign }
    }

    pub fn get(&self, sign: SignType) -> SignStats {
        self.per_sign[sign.index()]
    }
}

/// Log-ratio normalisation of a count against population statistics.
///
/// Counts at or below `mean² / max` map to 0, the mean maps to 0.5 and the
/// maximum to 1. A zero count is always 0. When `max == mean` the log ratio is
/// undefined and any positive count maps to 0.5. Results are clamped to
/// `[0, 1]` so counts above the population maximum saturate.
pub fn normalize(x: f64, stats: SignStats) -> f64 {
    let SignStats { mean, max } = stats;
    if !(x > 0.0) {
        return 0.0;
    }
    if !(max > mean) {
        return 0.5;
    }
    let threshold = mean * mean / max;
    if x <= threshold {
        return 0.0;
    }
    let value = libm::log(max * x / (mean * mean)) / libm::log(max * max / (mean * mean));
    value.clamp(0.0, 1.0)
}

/// Weighted sum of normalised sign counts from `u` towards `v`.
pub fn tie_strength(
    u: NodeId,
    v: NodeId,
    ledger: &TieSignLedger,
    weights: &TieSignWeights,
    stats: &NormalizationStats,
) -> f64 {
    if u == v {
        return 0.0;
    }
    SignType::all()
        .map(|s| weights.alpha(s) * normalize(ledger.count(u, v, s) as f64, stats.get(s)))
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// Exponential decay rate for tie strength, per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayParams {
    pub rate: f64,
}

pub fn decayed_tie_strength(base: f64, elapsed: Seconds, params: DecayParams) -> f64 {
    if params.rate == 0.0 || elapsed <= 0.0 {
        return base;
    }
    base * libm::exp(-params.rate * elapsed)
}

/// Tie strength evaluated at time `now`, with each sign's contribution aged by
/// the time since that sign was last updated.
pub fn tie_strength_at(
    u: NodeId,
    v: NodeId,
    now: Seconds,
    ledger: &TieSignLedger,
    weights: &TieSignWeights,
    stats: &NormalizationStats,
    decay: DecayParams,
) -> f64 {
    if u == v {
        return 0.0;
    }
    SignType::all()
        .filter_map(|s| ledger.get(u, v, s).map(|rec| (s, rec)))
        .map(|(s, rec)| {
            let base = weights.alpha(s) * normalize(rec.count as f64, stats.get(s));
            decayed_tie_strength(base, (now - rec.last_update).max(0.0), decay)
        })
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// Maps an index in `[0, 1]` onto the 0–4 scale, rounding half up.
pub fn quantize(ts: f64) -> Result<u8, Error> {
    if !(0.0..=1.0).contains(&ts) {
        return Err(Error::OutOfRange(ts));
    }
    Ok(libm::floor(4.0 * ts + 0.5) as u8)
}

/// Asymmetric tie-strength matrix on the 0–4 scale with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TsMatrix {
    n: usize,
    values: Vec<u8>,
}

impl TsMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, values: alloc::vec![0; n * n] }
    }

    /// Row-major values. Rejects entries above 4 and nonzero diagonals.
    pub fn from_rows(n: usize, values: Vec<u8>) -> Result<Self, Error> {
        if values.len() != n * n {
            return Err(Error::InvalidParameter("ts matrix shape"));
        }
        for (i, &v) in values.iter().enumerate() {
            if v > 4 {
                return Err(Error::OutOfRange(f64::from(v)));
            }
            if i / n == i % n && v != 0 {
                return Err(Error::InvalidParameter("ts matrix diagonal"));
            }
        }
        Ok(Self { n, values })
    }

    /// Quantised tie strengths computed from a ledger.
    pub fn from_ledger(
        n: usize,
        ledger: &TieSignLedger,
        weights: &TieSignWeights,
        stats: &NormalizationStats,
        at: Option<(Seconds, DecayParams)>,
    ) -> Self {
        let mut m = Self::zeros(n);
        for (u, v) in ledger.pairs() {
            if u.index() >= n || v.index() >= n {
                continue;
            }
            let t = match at {
                Some((now, decay)) => tie_strength_at(u, v, now, ledger, weights, stats, decay),
                None => tie_strength(u, v, ledger, weights, stats),
            };
            m.values[u.index() * n + v.index()] = quantize(t).unwrap_or(0);
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Tie strength of `u` towards `v`.
    pub fn get(&self, u: NodeId, v: NodeId) -> u8 {
        if u.index() >= self.n || v.index() >= self.n {
            return 0;
        }
        self.values[u.index() * self.n + v.index()]
    }

    pub fn row(&self, u: usize) -> &[u8] {
        &self.values[u * self.n..(u + 1) * self.n]
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    /// Mean of the off-diagonal entries.
    pub fn off_diagonal_mean(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let sum: u64 = self.values.iter().map(|&v| u64::from(v)).sum();
        sum as f64 / (self.n * (self.n - 1)) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsScenarioParams {
    pub mean: f64,
    pub std_dev: f64,
}

/// Draws every off-diagonal entry independently from `N(mean, std_dev)`,
/// rounds it to the nearest integer and clamps it to `[0, 4]`. Entries are
/// drawn row by row.
pub fn generate_ts_matrix<R: Rng + ?Sized>(n: usize, params: TsScenarioParams, rng: &mut R) -> Result<TsMatrix, Error> {
    if n < 2 {
        return Err(Error::InvalidParameter("node count"));
    }
    if !(params.std_dev > 0.0) || !params.mean.is_finite() {
        return Err(Error::InvalidParameter("std_dev"));
    }
    let normal = Normal::new(params.mean, params.std_dev).map_err(|_| Error::InvalidDistribution)?;
    let mut m = TsMatrix::zeros(n);
    for u in 0..n {
        for v in 0..n {
            if u != v {
                let x = libm::round(normal.sample(rng)).clamp(0.0, 4.0);
                m.values[u * n + v] = x as u8;
            }
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathTieStrength {
    /// Number of links on the path.
    pub links: usize,
    /// Tie strength of each hop towards the next, source first.
    pub values: Vec<u8>,
    pub mean: f64,
}

/// Geometric mean of integer tie strengths. Any zero makes it zero.
///
/// Values up to 4 factor as `2^a 3^b`; the root is taken of the reduced form
/// `(a, b, n) / gcd(a, b, n)`, so paths whose means are mathematically equal
/// get bit-identical results and tie exactly.
pub fn geometric_mean(values: &[u8]) -> f64 {
    let Some(&first) = values.first() else {
        return 0.0;
    };
    let (lo, hi) = values.iter().fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo == 0 {
        return 0.0;
    }
    if lo == hi {
        return f64::from(lo);
    }
    let n = values.len();
    let mean = if hi <= 4 {
        let (mut a, mut b) = (0u64, 0u64);
        for &v in values {
            match v {
                2 => a += 1,
                3 => b += 1,
                4 => a += 2,
                _ => {}
            }
        }
        let g = gcd(gcd(a, b), n as u64);
        let (a, b, n) = (a / g, b / g, n as u64 / g);
        if a + 2 * b < 53 {
            let product = libm::pow(2.0, a as f64) * libm::pow(3.0, b as f64);
            libm::pow(product, 1.0 / n as f64)
        } else {
            libm::exp((a as f64 * core::f64::consts::LN_2 + b as f64 * libm::log(3.0)) / n as f64)
        }
    } else {
        libm::exp(values.iter().map(|&v| libm::log(f64::from(v))).sum::<f64>() / n as f64)
    };
    mean.clamp(f64::from(lo), f64::from(hi))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Path tie strength in the direction of travel.
pub fn path_mean_ts(path: &[NodeId], ts: &TsMatrix) -> Result<PathTieStrength, Error> {
    if path.len() < 2 {
        return Err(Error::PathTooShort);
    }
    if path.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::RepeatedNode);
    }
    let values: Vec<u8> = path.windows(2).map(|w| ts.get(w[0], w[1])).collect();
    Ok(PathTieStrength { links: values.len(), mean: geometric_mean(&values), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn st(mean: f64, max: f64) -> SignStats {
        SignStats { mean, max }
    }

    #[test]
    fn sign_tables() {
        assert_eq!(SIGNS.iter().filter(|s| s.network == Facebook).count(), 13);
        assert_eq!(SIGNS.iter().filter(|s| s.network == Twitter).count(), 11);
        let private_twitter: Vec<_> = SIGNS
            .iter()
            .filter(|s| s.network == Twitter && s.visibility == Private)
            .map(|s| s.name)
            .collect();
        assert_eq!(private_twitter, ["tw_mentions", "tw_private_messages", "tw_same_private_list"]);
    }

    #[test]
    fn normalize_reference_points() {
        assert_eq!(normalize(2.0, st(2.0, 10.0)), 0.5);
        assert_eq!(normalize(10.0, st(2.0, 10.0)), 1.0);
        assert_eq!(normalize(0.3, st(2.0, 10.0)), 0.0);
        // threshold is mean^2 / max = 0.4
        assert_eq!(normalize(0.4, st(2.0, 10.0)), 0.0);
        assert!(normalize(0.41, st(2.0, 10.0)) > 0.0);
    }

    #[test]
    fn normalize_degenerate_stats() {
        assert_eq!(normalize(3.0, st(3.0, 3.0)), 0.5);
        assert_eq!(normalize(0.0, st(3.0, 3.0)), 0.0);
        assert_eq!(normalize(0.0, st(0.0, 0.0)), 0.0);
    }

    #[test]
    fn default_weights_follow_tag_ordering() {
        let w = TieSignWeights::default();
        assert!((w.sum() - 1.0).abs() < 1e-12);
        let pm = SignType::from_name("fb_private_messages").unwrap();
        let comments = SignType::from_name("fb_comments_friend_objects").unwrap();
        let private_group = SignType::from_name("fb_same_private_group").unwrap();
        let public_group = SignType::from_name("fb_same_public_group").unwrap();
        assert_eq!(w.alpha(pm), 2.0 * w.alpha(comments));
        assert_eq!(w.alpha(private_group), 2.0 * w.alpha(public_group));
        assert_eq!(w.alpha(comments), 2.0 * w.alpha(public_group));
    }

    #[test]
    fn explicit_weights_must_sum_to_one() {
        let mut alpha = [0.0; 24];
        alpha[0] = 0.5;
        assert!(TieSignWeights::new(alpha).is_err());
        alpha[1] = 0.5;
        assert!(TieSignWeights::new(alpha).is_ok());
    }

    fn two_sign_setup() -> (TieSignLedger, TieSignWeights, NormalizationStats) {
        let a = SignType::new(0).unwrap();
        let b = SignType::new(1).unwrap();
        let mut alpha = [0.0; 24];
        alpha[0] = 0.7;
        alpha[1] = 0.3;
        let weights = TieSignWeights::new(alpha).unwrap();
        let mut per = [st(0.0, 0.0); 24];
        per[0] = st(2.0, 10.0);
        per[1] = st(2.0, 10.0);
        let mut ledger = TieSignLedger::new();
        // f = 1.0 for sign a, 0.5 for sign b
        ledger.record(NodeId(0), NodeId(1), a, 10, 0.0);
        ledger.record(NodeId(0), NodeId(1), b, 2, 0.0);
        (ledger, weights, NormalizationStats::new(per))
    }

    #[test]
    fn weighted_sum_of_two_signs() {
        let (ledger, weights, stats) = two_sign_setup();
        let t = tie_strength(NodeId(0), NodeId(1), &ledger, &weights, &stats);
        assert!((t - 0.85).abs() < 1e-12, "{t}");
        // reverse direction has no evidence
        assert_eq!(tie_strength(NodeId(1), NodeId(0), &ledger, &weights, &stats), 0.0);
        assert_eq!(tie_strength(NodeId(0), NodeId(0), &ledger, &weights, &stats), 0.0);
    }

    #[test]
    fn all_zero_and_all_max_ledgers() {
        let weights = TieSignWeights::default();
        let stats = NormalizationStats::new([st(1.0, 5.0); 24]);
        let mut ledger = TieSignLedger::new();
        assert_eq!(tie_strength(NodeId(0), NodeId(1), &ledger, &weights, &stats), 0.0);
        for s in SignType::all() {
            ledger.record(NodeId(0), NodeId(1), s, 5, 0.0);
        }
        let t = tie_strength(NodeId(0), NodeId(1), &ledger, &weights, &stats);
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stats_from_ledger() {
        let s = SignType::new(3).unwrap();
        let mut ledger = TieSignLedger::new();
        ledger.record(NodeId(0), NodeId(1), s, 4, 0.0);
        ledger.record(NodeId(1), NodeId(0), s, 2, 0.0);
        ledger.record(NodeId(2), NodeId(0), SignType::new(0).unwrap(), 1, 0.0);
        let stats = NormalizationStats::from_ledger(&ledger);
        assert_eq!(stats.get(s), st(2.0, 4.0));
        ledger.record(NodeId(0), NodeId(0), s, 100, 0.0);
        assert_eq!(ledger.pair_count(), 3);
    }

    #[test]
    fn decay() {
        let p = DecayParams { rate: core::f64::consts::LN_2 };
        assert_eq!(decayed_tie_strength(0.8, 0.0, p), 0.8);
        assert_eq!(decayed_tie_strength(0.8, 100.0, DecayParams { rate: 0.0 }), 0.8);
        assert!((decayed_tie_strength(0.8, 1.0, p) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn per_sign_decay() {
        let (mut ledger, weights, stats) = two_sign_setup();
        let a = SignType::new(0).unwrap();
        ledger.record(NodeId(0), NodeId(1), a, 0, 1.0);
        let decay = DecayParams { rate: core::f64::consts::LN_2 };
        // sign a updated at t=1, sign b at t=0; evaluate at t=1
        let t = tie_strength_at(NodeId(0), NodeId(1), 1.0, &ledger, &weights, &stats, decay);
        assert!((t - (0.7 + 0.3 * 0.5 * 0.5)).abs() < 1e-12, "{t}");
    }

    #[test]
    fn quantize_scale() {
        assert_eq!(quantize(1.0), Ok(4));
        assert_eq!(quantize(0.0), Ok(0));
        assert_eq!(quantize(0.49), Ok(2));
        assert_eq!(quantize(0.125), Ok(1));
        assert!(quantize(1.01).is_err());
        assert!(quantize(-0.1).is_err());
    }

    #[test]
    fn matrix_from_ledger_pipeline() {
        let (ledger, weights, stats) = two_sign_setup();
        let m = TsMatrix::from_ledger(3, &ledger, &weights, &stats, None);
        // round(4 * 0.85) = 3
        assert_eq!(m.get(NodeId(0), NodeId(1)), 3);
        assert_eq!(m.get(NodeId(1), NodeId(0)), 0);
    }

    #[test]
    fn generated_matrix_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = generate_ts_matrix(27, TsScenarioParams { mean: 4.0, std_dev: 1e-9 }, &mut rng).unwrap();
        for u in 0..27 {
            for v in 0..27 {
                let expect = if u == v { 0 } else { 4 };
                assert_eq!(m.get(NodeId::new(u), NodeId::new(v)), expect);
            }
        }
        assert!(generate_ts_matrix(1, TsScenarioParams { mean: 1.0, std_dev: 1.0 }, &mut rng).is_err());
        assert!(generate_ts_matrix(5, TsScenarioParams { mean: 1.0, std_dev: 0.0 }, &mut rng).is_err());
    }

    /// Expected value of `clamp(round(X), 0, 4)` for `X ~ N(mean, sd)` by
    /// trapezoidal integration of the density.
    fn clipped_rounded_normal_mean(mean: f64, sd: f64) -> f64 {
        let pdf = |x: f64| libm::exp(-0.5 * ((x - mean) / sd).powi(2)) / (sd * libm::sqrt(2.0 * core::f64::consts::PI));
        let (lo, hi, steps) = (mean - 12.0 * sd, mean + 12.0 * sd, 400_000);
        let h = (hi - lo) / steps as f64;
        let g = |x: f64| libm::round(x).clamp(0.0, 4.0) * pdf(x);
        let mut acc = 0.5 * (g(lo) + g(hi));
        for i in 1..steps {
            acc += g(lo + i as f64 * h);
        }
        acc * h
    }

    #[test]
    fn generated_matrix_mean_matches_clipped_normal() {
        let expected = clipped_rounded_normal_mean(1.0, 1.0);
        // frozen from the integration above
        assert!((expected - 1.073_017).abs() < 1e-5, "{expected}");
        let mut total = 0.0;
        let reps = 40;
        for seed in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = generate_ts_matrix(27, TsScenarioParams { mean: 1.0, std_dev: 1.0 }, &mut rng).unwrap();
            assert!(m.values().iter().all(|&v| v <= 4));
            let single = m.off_diagonal_mean();
            assert!((single - 1.0).abs() < 0.2, "{single}");
            total += single;
        }
        let mean = total / reps as f64;
        assert!((mean - expected).abs() < 0.02, "{mean} vs {expected}");
    }

    #[test]
    fn path_ts_examples() {
        let mut rows = alloc::vec![0u8; 16];
        let mut set = |u: usize, v: usize, x: u8| rows[u * 4 + v] = x;
        set(0, 1, 4);
        set(1, 2, 4);
        set(2, 3, 4);
        set(1, 0, 1);
        let m = TsMatrix::from_rows(4, rows.clone()).unwrap();
        let p = |ids: &[u32]| ids.iter().map(|&i| NodeId(i)).collect::<Vec<_>>();
        assert_eq!(path_mean_ts(&p(&[0, 1, 2, 3]), &m).unwrap().mean, 4.0);
        // reverse direction uses the reverse ties
        assert_eq!(path_mean_ts(&p(&[1, 0]), &m).unwrap().mean, 1.0);
        assert_eq!(geometric_mean(&[2, 0, 3]), 0.0);
        assert_eq!(geometric_mean(&[1, 4]), 2.0);
        assert_eq!(geometric_mean(&[4, 4, 4]), 4.0);
        assert_eq!(geometric_mean(&[1, 2, 4]), 2.0);
        assert_eq!(geometric_mean(&[1, 2]).to_bits(), geometric_mean(&[2, 1, 1, 2]).to_bits());
        assert_eq!(geometric_mean(&[3, 4]).to_bits(), geometric_mean(&[4, 3, 3, 4]).to_bits());
        assert!((geometric_mean(&[2, 3]) - 6f64.sqrt()).abs() < 1e-15);
        assert!((geometric_mean(&[1; 30].iter().chain(&[4; 30]).copied().collect::<Vec<_>>()) - 2.0).abs() < 1e-12);
        assert_eq!(path_mean_ts(&p(&[0, 0, 1]), &m), Err(Error::RepeatedNode));
        assert_eq!(path_mean_ts(&p(&[0]), &m), Err(Error::PathTooShort));
        assert!(TsMatrix::from_rows(2, alloc::vec![1, 0, 0, 0]).is_err());
        assert!(TsMatrix::from_rows(2, alloc::vec![0, 5, 0, 0]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn normalize_is_monotone_and_bounded(mean in 0.01f64..50.0, span in 0.0f64..100.0, a in 0.0f64..200.0, b in 0.0f64..200.0) {
            let s = st(mean, mean + span);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (fl, fh) = (normalize(lo, s), normalize(hi, s));
            proptest::prop_assert!((0.0..=1.0).contains(&fl) && (0.0..=1.0).contains(&fh));
            proptest::prop_assert!(fl <= fh);
        }

        #[test]
        fn quantize_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(quantize(lo).unwrap() <= quantize(hi).unwrap());
        }

        #[test]
        fn decay_never_increases(base in 0.0f64..=1.0, rate in 0.0f64..5.0, t1 in 0.0f64..100.0, dt in 0.0f64..100.0) {
            let p = DecayParams { rate };
            let a = decayed_tie_strength(base, t1, p);
            let b = decayed_tie_strength(base, t1 + dt, p);
            proptest::prop_assert!(b <= a && b >= 0.0);
        }

        #[test]
        fn geometric_mean_properties(values in proptest::collection::vec(0u8..=4, 1..12)) {
            let gm = geometric_mean(&values);
            let lo = f64::from(*values.iter().min().unwrap());
            let hi = f64::from(*values.iter().max().unwrap());
            let am = values.iter().map(|&v| f64::from(v)).sum::<f64>() / values.len() as f64;
            proptest::prop_assert!(gm >= lo - 1e-12 && gm <= hi + 1e-12);
            proptest::prop_assert!(am >= gm - 1e-12);
            let mut rev = values.clone();
            rev.reverse();
            proptest::prop_assert_eq!(geometric_mean(&rev).to_bits(), gm.to_bits());
            let doubled: Vec<u8> = values.iter().chain(&values).copied().collect();
            proptest::prop_assert_eq!(geometric_mean(&doubled).to_bits(), gm.to_bits());
        }
    }
}
