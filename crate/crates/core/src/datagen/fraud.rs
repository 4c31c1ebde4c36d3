use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Exp};

use super::accounts::{city_location, fresh_ip, lognormal_amount, scatter, AMOUNT_MAX, AMOUNT_MIN, CITIES};
use super::record::{
    DeviceType, FraudType, GeoPoint, IpAddress, Label, MerchantCategory, TransactionRecord, TransactionType,
};
use super::simulate::{sort_stream, LOCAL_SCATTER_KM};
use crate::error::{Error, Result};
use crate::math;
use crate::rng::{rng, Rng};

/// Share of each fraud typology among injected frauds.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct TypologyMix {
    pub stolen_card: f64,
    pub identity_fraud: f64,
    pub online_payment_fraud: f64,
    pub other: f64,
}

impl Default for TypologyMix {
    fn default() -> Self {
        TypologyMix { stolen_card: 0.40, identity_fraud: 0.30, online_payment_fraud: 0.20, other: 0.10 }
    }
}

impl TypologyMix {
    pub fn shares(&self) -> [f64; 4] {
        [self.stolen_card, self.identity_fraud, self.online_payment_fraud, self.other]
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.shares();
        if s.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid("typology shares must be nonnegative"));
        }
        let total: f64 = s.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(alloc::format!("typology mix sums to {total}, expected 1")));
        }
        Ok(())
    }

    /// Split `n` into per-typology counts by largest remainder.
    pub fn allocate(&self, n: usize) -> [usize; 4] {
        let shares = self.shares();
        let mut counts = [0usize; 4];
        let mut rema = [(0.0f64, 0usize); 4];
        for (i, s) in shares.iter().enumerate() {
            let exact = s * n as f64;
            counts[i] = math::floor(exact) as usize;
            rema[i] = (exact - counts[i] as f64, i);
        }
        let mut left = n - counts.iter().sum::<usize>();
        rema.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, i) in rema.iter() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        counts
    }
}

/// Fraud injection settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FraudSpec {
    pub rate: f64,
    pub mix: TypologyMix,
    /// Fraction of stolen-card, identity and online-payment episodes that
    /// mimic the card's own habits and differ only in timing or network.
    pub near_boundary_share: f64,
}

pub const DEFAULT_NEAR_BOUNDARY_SHARE: f64 = 0.1;

/// Number of frauds that makes `rate` the prevalence once added to `n_legit` rows.
pub fn fraud_count(n_legit: usize, rate: f64) -> usize {
    math::round(rate * n_legit as f64 / (1.0 - rate)) as usize
}

/// Inject labelled frauds into a legitimate stream with the default
/// near-boundary share.
pub fn inject_fraud(
    stream: Vec<TransactionRecord>,
    fraud_rate: f64,
    typology_mix: TypologyMix,
    seed: u64,
) -> Result<Vec<TransactionRecord>> {
    inject_fraud_with(
        stream,
        &FraudSpec { rate: fraud_rate, mix: typology_mix, near_boundary_share: DEFAULT_NEAR_BOUNDARY_SHARE },
        seed,
    )
}

pub fn inject_fraud_with(
    mut stream: Vec<TransactionRecord>,
    spec: &FraudSpec,
    seed: u64,
) -> Result<Vec<TransactionRecord>> {
    spec.mix.validate()?;
    if !(0.0..0.5).contains(&spec.rate) {
        return Err(Error::invalid("fraud_rate must lie in [0, 0.5)"));
    }
    if !(0.0..=1.0).contains(&spec.near_boundary_share) {
        return Err(Error::invalid("near_boundary_share must lie in [0, 1]"));
    }
    for t in &mut stream {
        t.label = Label::Legit;
        t.fraud_type = FraudType::None;
    }
    let n_fraud = fraud_count(stream.len(), spec.rate);
    if n_fraud == 0 {
        return Ok(stream);
    }

    let cards = card_contexts(&stream);
    let eligible: Vec<&CardContext> = cards.values().filter(|c| c.times.len() >= 2).collect();
    if eligible.is_empty() {
        return Err(Error::invalid("no card has enough history for fraud injection"));
    }
    let end_time = stream.iter().map(|t| t.time_of_transaction).fold(0.0, f64::max);

    let mut r = rng(seed ^ 0xF4A0_D000);
    let counts = spec.mix.allocate(n_fraud);
    let mut injected = Vec::with_capacity(n_fraud);
    for (typ, &count) in FraudType::TYPOLOGIES.iter().zip(counts.iter()) {
        let mut remaining = count;
        while remaining > 0 {
            let card = eligible[r.random_range(0..eligible.len())];
            let lo = card.times[1];
            let anchor = if end_time > lo { r.random_range(lo..=end_time) } else { lo };
            let camouflaged = *typ != FraudType::Other && r.random_bool(spec.near_boundary_share);
            let mut episode = match typ {
                FraudType::StolenCard => stolen_card(card, anchor, camouflaged, &mut r),
                FraudType::IdentityFraud => identity_fraud(card, anchor, camouflaged, &mut r),
                FraudType::OnlinePaymentFraud => online_payment_fraud(card, anchor, camouflaged, &mut r),
                _ => structural_outlier(card, anchor, &mut r),
            };
            episode.truncate(remaining);
            remaining -= episode.len();
            for rec in &mut episode {
                rec.label = Label::Fraud;
                rec.fraud_type = *typ;
                rec.transaction_amount = rec.transaction_amount.clamp(AMOUNT_MIN, AMOUNT_MAX);
            }
            injected.extend(episode);
        }
    }

    stream.extend(injected);
    sort_stream(&mut stream);
    rebalance(&mut stream);
    Ok(stream)
}

/// What an attacker's episode is shaped against: the victim card's history.
struct CardContext {
    cardholder_id: u64,
    times: Vec<f64>,
    home: GeoPoint,
    amount_mean: f64,
    amount_sd: f64,
    ips: Vec<IpAddress>,
    devices: Vec<DeviceType>,
    merchants: Vec<MerchantCategory>,
}

impl CardContext {
    fn typical_amount(&self, r: &mut Rng) -> f64 {
        lognormal_amount(self.amount_mean.max(AMOUNT_MIN), self.amount_sd.max(1.0), r)
    }

    fn usual_merchant(&self, r: &mut Rng) -> MerchantCategory {
        self.merchants[r.random_range(0..self.merchants.len())]
    }

    fn usual_ip(&self, r: &mut Rng) -> IpAddress {
        self.ips[r.random_range(0..self.ips.len())]
    }

    fn personal_device(&self, r: &mut Rng) -> DeviceType {
        let own: Vec<DeviceType> = self.devices.iter().copied().filter(|d| DeviceType::PERSONAL.contains(d)).collect();
        if own.is_empty() {
            DeviceType::PERSONAL[r.random_range(0..DeviceType::PERSONAL.len())]
        } else {
            own[r.random_range(0..own.len())]
        }
    }

    fn unseen_device(&self, r: &mut Rng) -> DeviceType {
        let unseen: Vec<DeviceType> =
            DeviceType::PERSONAL.iter().copied().filter(|d| !self.devices.contains(d)).collect();
        if unseen.is_empty() {
            DeviceType::PERSONAL[r.random_range(0..DeviceType::PERSONAL.len())]
        } else {
            unseen[r.random_range(0..unseen.len())]
        }
    }

    fn far_city(&self, min_km: f64, r: &mut Rng) -> GeoPoint {
        let far: Vec<usize> =
            (0..CITIES.len()).filter(|&c| self.home.haversine_km(&city_location(c)) > min_km).collect();
        let c = if far.is_empty() { r.random_range(0..CITIES.len()) } else { far[r.random_range(0..far.len())] };
        city_location(c)
    }

    fn near_home(&self, r: &mut Rng) -> GeoPoint {
        scatter(self.home, LOCAL_SCATTER_KM, r)
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        time: f64,
        amount: f64,
        kind: TransactionType,
        merchant: MerchantCategory,
        loc: GeoPoint,
        device: DeviceType,
        ip: IpAddress,
    ) -> TransactionRecord {
        TransactionRecord::raw(self.cardholder_id, time, amount, kind, merchant, loc, device, ip, 0.0)
    }
}

fn card_contexts(stream: &[TransactionRecord]) -> BTreeMap<u64, CardContext> {
    let mut grouped: BTreeMap<u64, Vec<&TransactionRecord>> = BTreeMap::new();
    for t in stream {
        grouped.entry(t.cardholder_id).or_default().push(t);
    }
    grouped
        .into_iter()
        .map(|(id, txs)| {
            let n = txs.len() as f64;
            let mean = txs.iter().map(|t| t.transaction_amount).sum::<f64>() / n;
            let var = txs.iter().map(|t| (t.transaction_amount - mean).powi(2)).sum::<f64>() / n;
            let mut lats: Vec<f64> = txs.iter().map(|t| t.geolocation.lat).collect();
            let mut lons: Vec<f64> = txs.iter().map(|t| t.geolocation.lon).collect();
            let home = GeoPoint::new(median(&mut lats), median(&mut lons));
            let mut ips: Vec<IpAddress> = txs.iter().map(|t| t.ip_address).collect();
            ips.sort();
            ips.dedup();
            let mut devices: Vec<DeviceType> = txs.iter().map(|t| t.device_information).collect();
            devices.sort();
            devices.dedup();
            let merchants: Vec<MerchantCategory> = txs
                .iter()
                .map(|t| t.merchant_category)
                .filter(|m| *m != MerchantCategory::Cash)
                .collect();
            let ctx = CardContext {
                cardholder_id: id,
                times: txs.iter().map(|t| t.time_of_transaction).collect(),
                home,
                amount_mean: mean,
                amount_sd: math::sqrt(var),
                ips,
                devices,
                merchants: if merchants.is_empty() { alloc::vec![MerchantCategory::Groceries] } else { merchants },
            };
            (id, ctx)
        })
        .collect()
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn gaps(mean_hours: f64) -> Exp<f64> {
    Exp::new(1.0 / mean_hours).expect("positive mean gap")
}

/// Burst of purchases and cash withdrawals at unusual merchants in distant
/// cities, or, when camouflaged, a burst that only stands out by its pace.
fn stolen_card(card: &CardContext, anchor: f64, camouflaged: bool, r: &mut Rng) -> Vec<TransactionRecord> {
    let len = r.random_range(2..=5);
    let pace = gaps(0.25);
    let fraud_ip = fresh_ip(r);
    let sites = [card.far_city(500.0, r), card.far_city(500.0, r)];
    const LOOT: [MerchantCategory; 4] = [
        MerchantCategory::Electronics,
        MerchantCategory::Jewelry,
        MerchantCategory::Retail,
        MerchantCategory::Entertainment,
    ];
    let mut t = anchor;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let rec = if camouflaged {
            card.record(
                t,
                card.typical_amount(r),
                TransactionType::Purchase,
                card.usual_merchant(r),
                card.near_home(r),
                DeviceType::PosTerminal,
                card.usual_ip(r),
            )
        } else {
            let loc = scatter(sites[r.random_range(0..2)], LOCAL_SCATTER_KM, r);
            let amount = card.amount_mean.max(20.0) * r.random_range(2.0..6.0);
            if r.random_bool(0.2) {
                let cash = ((amount / 20.0) as u64).max(1) as f64 * 20.0;
                card.record(t, cash, TransactionType::Withdrawal, MerchantCategory::Cash, loc, DeviceType::Atm, fraud_ip)
            } else {
                let merchant = LOOT[r.random_range(0..LOOT.len())];
                card.record(t, amount, TransactionType::Purchase, merchant, loc, DeviceType::PosTerminal, fraud_ip)
            }
        };
        out.push(rec);
        t += pace.sample(r);
    }
    out
}

/// Card-not-present use from a device and network the holder never used,
/// with amounts that look like the holder's own.
fn identity_fraud(card: &CardContext, anchor: f64, camouflaged: bool, r: &mut Rng) -> Vec<TransactionRecord> {
    let len = if r.random_bool(0.7) { 1 } else { 2 };
    let pace = gaps(2.0);
    let ip = fresh_ip(r);
    let device = if camouflaged { card.personal_device(r) } else { card.unseen_device(r) };
    const TARGETS: [MerchantCategory; 3] = [MerchantCategory::Retail, MerchantCategory::Electronics, MerchantCategory::Travel];
    let mut t = anchor;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let (amount, merchant, loc) = if camouflaged {
            (card.typical_amount(r), card.usual_merchant(r), card.near_home(r))
        } else {
            let loc = card.home.offset_km(r.random_range(5.0..80.0), super::accounts::random_bearing(r));
            (card.typical_amount(r) * r.random_range(0.8..1.5), TARGETS[r.random_range(0..TARGETS.len())], loc)
        };
        out.push(card.record(t, amount, TransactionType::OnlinePayment, merchant, loc, device, ip));
        t += pace.sample(r);
    }
    out
}

/// Rapid online payments whose amounts escalate step by step.
fn online_payment_fraud(card: &CardContext, anchor: f64, camouflaged: bool, r: &mut Rng) -> Vec<TransactionRecord> {
    let len = r.random_range(2..=4);
    let pace = gaps(0.6);
    let (ip, device) = if camouflaged {
        (card.usual_ip(r), card.personal_device(r))
    } else {
        let device = if r.random_bool(0.5) { card.personal_device(r) } else { card.unseen_device(r) };
        (fresh_ip(r), device)
    };
    let factor = if camouflaged { 1.3 } else { 2.0 };
    const TARGETS: [MerchantCategory; 3] =
        [MerchantCategory::Retail, MerchantCategory::Electronics, MerchantCategory::Entertainment];
    let mut amount = card.amount_mean.max(10.0) * r.random_range(0.4..0.8);
    let mut t = anchor;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let merchant = if camouflaged { card.usual_merchant(r) } else { TARGETS[r.random_range(0..TARGETS.len())] };
        out.push(card.record(t, amount, TransactionType::OnlinePayment, merchant, card.near_home(r), device, ip));
        amount *= factor;
        t += pace.sample(r);
    }
    out
}

/// One transaction that is ordinary in every respect but one: an amount at
/// least ten standard deviations above the card's mean, or a location
/// thousands of kilometres from home.
fn structural_outlier(card: &CardContext, anchor: f64, r: &mut Rng) -> Vec<TransactionRecord> {
    let (amount, loc) = if r.random_bool(0.5) {
        let sd = card.amount_sd.max(card.amount_mean * 0.5).max(10.0);
        (card.amount_mean + r.random_range(10.0..15.0) * sd, card.near_home(r))
    } else {
        (card.typical_amount(r), scatter(card.far_city(2000.0, r), LOCAL_SCATTER_KM, r))
    };
    let (kind, device) = if r.random_bool(0.3) {
        (TransactionType::OnlinePayment, card.personal_device(r))
    } else {
        (TransactionType::Purchase, DeviceType::PosTerminal)
    };
    alloc::vec![card.record(anchor, amount, kind, card.usual_merchant(r), loc, device, card.usual_ip(r))]
}

/// Rewrite balances so each card's running balance reflects injected debits.
fn rebalance(stream: &mut [TransactionRecord]) {
    // (last emitted balance, cumulative fraud debit)
    let mut state: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for t in stream.iter_mut() {
        let entry = state.entry(t.cardholder_id).or_insert((f64::NAN, 0.0));
        if t.is_fraud() {
            let before = if entry.0.is_nan() { t.transaction_amount } else { entry.0 };
            t.account_balance = before - t.transaction_amount;
            entry.1 += t.transaction_amount;
        } else {
            t.account_balance -= entry.1;
        }
        entry.0 = t.account_balance;
    }
}
