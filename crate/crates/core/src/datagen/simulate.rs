use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Exp};

use super::accounts::{city_location, fresh_ip, lognormal_amount, sample_index, scatter, AccountProfile, CITIES};
use super::record::{DeviceType, GeoPoint, IpAddress, MerchantCategory, TransactionRecord, TransactionType};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng, Rng};

/// Mean radius (km) of everyday activity around the home location.
pub const LOCAL_SCATTER_KM: f64 = 3.0;
const HOURS_PER_DAY: f64 = 24.0;
const NEW_IP_PROB: f64 = 0.003;
const NEW_DEVICE_PROB: f64 = 0.002;

const TRAVEL_MERCHANTS: [(MerchantCategory, f64); 4] = [
    (MerchantCategory::Travel, 0.3),
    (MerchantCategory::Restaurants, 0.3),
    (MerchantCategory::Retail, 0.2),
    (MerchantCategory::Entertainment, 0.2),
];

const CORPORATE_MERCHANTS: [MerchantCategory; 5] = [
    MerchantCategory::Retail,
    MerchantCategory::Restaurants,
    MerchantCategory::Electronics,
    MerchantCategory::Travel,
    MerchantCategory::Utilities,
];

/// A trip away from home: activity in `[start, end)` hours happens in
/// `city` over a hotel network.
#[derive(Clone, Debug)]
struct Trip {
    start: f64,
    end: f64,
    city: usize,
    ip: IpAddress,
}

/// Simulate legitimate activity for every account over `horizon_days` and
/// merge the streams by `(time, cardholder_id)`. With `target_count` the
/// merged stream is cut after that many records.
pub fn simulate_transactions(
    accounts: &[AccountProfile],
    horizon_days: f64,
    target_count: Option<usize>,
    seed: u64,
) -> Result<Vec<TransactionRecord>> {
    if !(horizon_days >= 1.0) || !horizon_days.is_finite() {
        return Err(Error::invalid("horizon_days must be at least 1"));
    }
    let mut out = Vec::new();
    for account in accounts {
        out.extend(simulate_account(account, horizon_days, seed));
    }
    sort_stream(&mut out);
    if let Some(n) = target_count {
        out.truncate(n);
    }
    Ok(out)
}

/// Stable sort by time with cardholder id as tie-break.
pub(crate) fn sort_stream(stream: &mut [TransactionRecord]) {
    stream.sort_by(|a, b| {
        a.time_of_transaction
            .total_cmp(&b.time_of_transaction)
            .then(a.cardholder_id.cmp(&b.cardholder_id))
    });
}

struct Event {
    time: f64,
    kind: EventKind,
}

enum EventKind {
    Regular,
    Booking,
    Corporate,
}

fn simulate_account(account: &AccountProfile, horizon_days: f64, seed: u64) -> Vec<TransactionRecord> {
    let mut r = rng(derive_seed(seed ^ 0x5157_0000, account.cardholder_id));
    let horizon = horizon_days * HOURS_PER_DAY;

    let mut events = Vec::new();
    let gap = Exp::new(account.activity_rate / HOURS_PER_DAY).expect("positive activity rate");
    let mut t = gap.sample(&mut r);
    while t < horizon {
        events.push(Event { time: t, kind: EventKind::Regular });
        t += gap.sample(&mut r);
    }

    let trips = if account.traveler { plan_trips(account, horizon, &mut r) } else { Vec::new() };
    for trip in &trips {
        let booking = trip.start - r.random_range(1.0..14.0) * HOURS_PER_DAY;
        if booking >= 0.0 {
            events.push(Event { time: booking, kind: EventKind::Booking });
        }
    }
    if account.corporate {
        let bursts = ((horizon_days / 30.0) as usize).max(1);
        for _ in 0..bursts {
            let mut t = r.random_range(0.0..horizon);
            let n = r.random_range(5..=12);
            let within = Exp::new(10.0).expect("positive rate");
            for _ in 0..n {
                if t >= horizon {
                    break;
                }
                events.push(Event { time: t, kind: EventKind::Corporate });
                t += within.sample(&mut r);
            }
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time));

    let mut state = AccountState {
        balance: account.initial_balance,
        next_income: 30.0 * HOURS_PER_DAY,
        ip_pool: account.ip_pool.clone(),
        device_pool: account.device_pool.clone(),
    };
    let mut records = Vec::with_capacity(events.len());
    for ev in events {
        while ev.time >= state.next_income {
            state.balance += account.monthly_income;
            state.next_income += 30.0 * HOURS_PER_DAY;
        }
        let trip = trips.iter().find(|t| ev.time >= t.start && ev.time < t.end);
        let rec = match ev.kind {
            EventKind::Regular => regular(account, &mut state, trip, ev.time, &mut r),
            EventKind::Booking => {
                let amount = (account.spend_mean * r.random_range(2.0..5.0)).clamp(1.0, 10_000.0);
                let device = state.device_pool[r.random_range(0..state.device_pool.len())];
                let ip = state.ip_pool[0];
                let loc = scatter(account.home_location, LOCAL_SCATTER_KM, &mut r);
                state.record(
                    account,
                    ev.time,
                    amount,
                    TransactionType::OnlinePayment,
                    MerchantCategory::Travel,
                    loc,
                    device,
                    ip,
                )
            }
            EventKind::Corporate => {
                let merchant = CORPORATE_MERCHANTS[r.random_range(0..CORPORATE_MERCHANTS.len())];
                let amount = (account.spend_mean * r.random_range(0.5..2.0)).clamp(1.0, 10_000.0);
                let loc = scatter(account.home_location, LOCAL_SCATTER_KM, &mut r);
                if r.random_bool(0.3) {
                    let device = state.device_pool[0];
                    let ip = state.ip_pool[0];
                    state.record(account, ev.time, amount, TransactionType::OnlinePayment, merchant, loc, device, ip)
                } else {
                    let ip = state.ip_pool[0];
                    state.record(
                        account,
                        ev.time,
                        amount,
                        TransactionType::Purchase,
                        merchant,
                        loc,
                        DeviceType::PosTerminal,
                        ip,
                    )
                }
            }
        };
        records.push(rec);
    }
    records
}

fn plan_trips(account: &AccountProfile, horizon: f64, r: &mut Rng) -> Vec<Trip> {
    let n = ((horizon / HOURS_PER_DAY / 60.0) as usize).max(1);
    let mut trips: Vec<Trip> = Vec::new();
    for _ in 0..n {
        let start = r.random_range(0.1 * horizon..0.85 * horizon);
        let end = start + r.random_range(2.0..7.0) * HOURS_PER_DAY;
        if trips.iter().any(|t| start < t.end && end > t.start) {
            continue;
        }
        let home = city_location(account.home_city);
        let candidates: Vec<usize> =
            (0..CITIES.len()).filter(|&c| home.haversine_km(&city_location(c)) > 300.0).collect();
        let city = candidates[r.random_range(0..candidates.len())];
        trips.push(Trip { start, end, city, ip: fresh_ip(r) });
    }
    trips
}

struct AccountState {
    balance: f64,
    next_income: f64,
    ip_pool: Vec<IpAddress>,
    device_pool: Vec<DeviceType>,
}

impl AccountState {
    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        account: &AccountProfile,
        time: f64,
        amount: f64,
        kind: TransactionType,
        merchant: MerchantCategory,
        loc: GeoPoint,
        device: DeviceType,
        ip: IpAddress,
    ) -> TransactionRecord {
        self.balance -= amount;
        TransactionRecord::raw(account.cardholder_id, time, amount, kind, merchant, loc, device, ip, self.balance)
    }
}

fn regular(
    account: &AccountProfile,
    state: &mut AccountState,
    trip: Option<&Trip>,
    time: f64,
    r: &mut Rng,
) -> TransactionRecord {
    if r.random_bool(NEW_IP_PROB) {
        state.ip_pool.push(fresh_ip(r));
    }
    if r.random_bool(NEW_DEVICE_PROB) {
        let unused: Vec<DeviceType> =
            DeviceType::PERSONAL.iter().copied().filter(|d| !state.device_pool.contains(d)).collect();
        if !unused.is_empty() {
            state.device_pool.push(unused[r.random_range(0..unused.len())]);
        }
    }

    let u: f64 = r.random();
    let kind = if u < account.withdrawal_share {
        TransactionType::Withdrawal
    } else if u < account.withdrawal_share + account.online_share {
        TransactionType::OnlinePayment
    } else {
        TransactionType::Purchase
    };

    let (center, ip) = match trip {
        Some(t) => (city_location(t.city), t.ip),
        None => {
            let ip = if state.ip_pool.len() == 1 || r.random_bool(0.7) {
                state.ip_pool[0]
            } else {
                state.ip_pool[r.random_range(1..state.ip_pool.len())]
            };
            (account.home_location, ip)
        }
    };
    let loc = scatter(center, LOCAL_SCATTER_KM, r);

    let mut amount = lognormal_amount(account.spend_mean, account.spend_sd, r);
    let (merchant, device) = match kind {
        TransactionType::Withdrawal => {
            amount = ((amount / 20.0) as u64).max(1) as f64 * 20.0;
            (MerchantCategory::Cash, DeviceType::Atm)
        }
        TransactionType::OnlinePayment => {
            let d = state.device_pool[r.random_range(0..state.device_pool.len())];
            (account.sample_merchant(r), d)
        }
        TransactionType::Purchase => {
            let m = if trip.is_some() && r.random_bool(0.5) {
                let weights: Vec<f64> = TRAVEL_MERCHANTS.iter().map(|(_, w)| *w).collect();
                TRAVEL_MERCHANTS[sample_index(&weights, r)].0
            } else {
                account.sample_merchant(r)
            };
            (m, DeviceType::PosTerminal)
        }
    };
    state.record(account, time, amount, kind, merchant, loc, device, ip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::accounts::generate_accounts;

    fn plain_account(rate: f64) -> AccountProfile {
        let mut a = generate_accounts(1, 5).unwrap().remove(0);
        a.activity_rate = rate;
        a.traveler = false;
        a.corporate = false;
        a
    }

    #[test]
    fn poisson_count_within_99_percent_band() {
        // Poisson(126): 0.5% and 99.5% quantiles are 98 and 156.
        let a = plain_account(4.2);
        let mut inside = 0;
        for seed in 0..50 {
            let n = simulate_transactions(core::slice::from_ref(&a), 30.0, None, seed).unwrap().len();
            if (98..=156).contains(&n) {
                inside += 1;
            }
        }
        assert!(inside >= 47, "{inside}/50 inside the band");
    }

    #[test]
    fn output_is_time_ordered_and_truncated() {
        let accounts = generate_accounts(50, 2).unwrap();
        let s = simulate_transactions(&accounts, 30.0, Some(500), 2).unwrap();
        assert_eq!(s.len(), 500);
        assert!(s.windows(2).all(|w| w[0].time_of_transaction <= w[1].time_of_transaction));
        assert!(s.iter().all(|t| !t.is_fraud()));
    }

    #[test]
    fn horizon_below_one_day_is_rejected() {
        let accounts = generate_accounts(1, 2).unwrap();
        assert!(simulate_transactions(&accounts, 0.5, None, 1).is_err());
    }

    #[test]
    fn traveler_moves_far_from_home() {
        let mut a = plain_account(2.0);
        a.traveler = true;
        let s = simulate_transactions(core::slice::from_ref(&a), 60.0, None, 3).unwrap();
        let far = s.iter().filter(|t| t.geolocation.haversine_km(&a.home_location) > 300.0).count();
        assert!(far > 0);
    }
}
