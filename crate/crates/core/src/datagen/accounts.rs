use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Exp, LogNormal};

use super::record::{DeviceType, GeoPoint, IpAddress, MerchantCategory};
use crate::error::{Error, Result};
use crate::math;
use crate::rng::{derive_seed, rng, Rng};

/// Target mean of the per-transaction amount distribution.
pub const TARGET_AMOUNT_MEAN: f64 = 150.75;
/// Target standard deviation of the per-transaction amount distribution.
pub const TARGET_AMOUNT_SD: f64 = 325.45;
pub const AMOUNT_MIN: f64 = 1.0;
pub const AMOUNT_MAX: f64 = 10_000.0;

const FIRST_CARDHOLDER_ID: u64 = 100_000;

/// Metropolitan centres accounts live in and travel between.
pub const CITIES: [(&str, f64, f64); 24] = [
    ("London", 51.5074, -0.1278),
    ("Paris", 48.8566, 2.3522),
    ("Berlin", 52.5200, 13.4050),
    ("Madrid", 40.4168, -3.7038),
    ("Rome", 41.9028, 12.4964),
    ("Amsterdam", 52.3676, 4.9041),
    ("Warsaw", 52.2297, 21.0122),
    ("Stockholm", 59.3293, 18.0686),
    ("Lisbon", 38.7223, -9.1393),
    ("Athens", 37.9838, 23.7275),
    ("New York", 40.7128, -74.0060),
    ("Chicago", 41.8781, -87.6298),
    ("Los Angeles", 34.0522, -118.2437),
    ("Toronto", 43.6532, -79.3832),
    ("Mexico City", 19.4326, -99.1332),
    ("Sao Paulo", -23.5505, -46.6333),
    ("Buenos Aires", -34.6037, -58.3816),
    ("Lagos", 6.5244, 3.3792),
    ("Nairobi", -1.2921, 36.8219),
    ("Dubai", 25.2048, 55.2708),
    ("Mumbai", 19.0760, 72.8777),
    ("Singapore", 1.3521, 103.8198),
    ("Tokyo", 35.6762, 139.6503),
    ("Sydney", -33.8688, 151.2093),
];

pub fn city_location(index: usize) -> GeoPoint {
    let (_, lat, lon) = CITIES[index];
    GeoPoint::new(lat, lon)
}

/// Behavioural baseline of one simulated cardholder.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AccountProfile {
    pub cardholder_id: u64,
    pub home_city: usize,
    pub home_location: GeoPoint,
    pub spend_mean: f64,
    pub spend_sd: f64,
    /// Probability per entry of [`MerchantCategory::ALL`].
    pub merchant_preference: Vec<f64>,
    /// Expected transactions per day.
    pub activity_rate: f64,
    pub device_pool: Vec<DeviceType>,
    pub ip_pool: Vec<IpAddress>,
    pub online_share: f64,
    pub withdrawal_share: f64,
    pub traveler: bool,
    pub corporate: bool,
    pub initial_balance: f64,
    pub monthly_income: f64,
}

impl AccountProfile {
    /// Draw a purchase amount from the account's log-normal spend law.
    pub fn sample_amount(&self, rng: &mut Rng) -> f64 {
        lognormal_amount(self.spend_mean, self.spend_sd, rng)
    }

    pub fn sample_merchant(&self, rng: &mut Rng) -> MerchantCategory {
        MerchantCategory::ALL[sample_index(&self.merchant_preference, rng)]
    }
}

/// Log-normal draw with the given arithmetic mean and sd, clamped to the amount range.
pub(crate) fn lognormal_amount(mean: f64, sd: f64, rng: &mut Rng) -> f64 {
    let sigma2 = math::ln(1.0 + (sd * sd) / (mean * mean));
    let mu = math::ln(mean) - sigma2 / 2.0;
    let draw = LogNormal::new(mu, math::sqrt(sigma2)).map(|d| d.sample(rng)).unwrap_or(mean);
    draw.clamp(AMOUNT_MIN, AMOUNT_MAX)
}

pub(crate) fn sample_index(weights: &[f64], rng: &mut Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

pub(crate) fn random_bearing(rng: &mut Rng) -> f64 {
    rng.random::<f64>() * 2.0 * core::f64::consts::PI
}

/// Point scattered around `center` with exponentially distributed radius.
pub(crate) fn scatter(center: GeoPoint, mean_km: f64, rng: &mut Rng) -> GeoPoint {
    let r = Exp::new(1.0 / mean_km).map(|d| d.sample(rng)).unwrap_or(0.0);
    center.offset_km(r, random_bearing(rng))
}

pub(crate) fn fresh_ip(rng: &mut Rng) -> IpAddress {
    IpAddress(rng.random::<u32>())
}

/// Draw `n_accounts` cardholder profiles. Each profile depends only on
/// `(seed, index)`.
pub fn generate_accounts(n_accounts: usize, seed: u64) -> Result<Vec<AccountProfile>> {
    if n_accounts == 0 {
        return Err(Error::Empty("n_accounts"));
    }
    Ok((0..n_accounts).map(|i| draw_account(FIRST_CARDHOLDER_ID + i as u64, seed)).collect())
}

fn draw_account(cardholder_id: u64, seed: u64) -> AccountProfile {
    let mut r = rng(derive_seed(seed, cardholder_id));
    let home_city = r.random_range(0..CITIES.len());
    let home_location = scatter(city_location(home_city), 4.0, &mut r);

    // Account means are log-normal with unit coefficient of variation around
    // the target mean; within-account spread is wide enough that the pooled
    // sd lands near the target.
    let spend_mean = lognormal_amount(TARGET_AMOUNT_MEAN, TARGET_AMOUNT_MEAN, &mut r).max(5.0);
    let spend_sd = spend_mean * r.random_range(1.05..1.65);

    let merchant_preference = draw_preferences(&mut r);
    let activity_rate = LogNormal::new(math::ln(0.6), 0.5).map(|d| d.sample(&mut r)).unwrap_or(0.6);

    let mut device_pool = Vec::new();
    let n_devices = if r.random_bool(0.35) { 2 } else { 1 };
    while device_pool.len() < n_devices {
        let d = DeviceType::PERSONAL[r.random_range(0..DeviceType::PERSONAL.len())];
        if !device_pool.contains(&d) {
            device_pool.push(d);
        }
    }
    let n_ips = r.random_range(1..=3);
    let ip_pool = (0..n_ips).map(|_| fresh_ip(&mut r)).collect();

    let initial_balance = spend_mean * r.random_range(15.0..40.0);
    let monthly_income = spend_mean * activity_rate * 30.0 * r.random_range(1.0..1.3);

    AccountProfile {
        cardholder_id,
        home_city,
        home_location,
        spend_mean,
        spend_sd,
        merchant_preference,
        activity_rate,
        device_pool,
        ip_pool,
        online_share: r.random_range(0.10..0.40),
        withdrawal_share: r.random_range(0.03..0.12),
        traveler: r.random_bool(0.08),
        corporate: r.random_bool(0.04),
        initial_balance,
        monthly_income,
    }
}

fn draw_preferences(r: &mut Rng) -> Vec<f64> {
    let mut w: Vec<f64> = MerchantCategory::ALL
        .iter()
        .map(|m| {
            let u: f64 = r.random();
            let base = u * u * u;
            match m {
                MerchantCategory::Cash => 0.0,
                MerchantCategory::Travel | MerchantCategory::Jewelry => 0.15 * base,
                MerchantCategory::Groceries | MerchantCategory::Restaurants | MerchantCategory::Fuel => {
                    base + 0.2
                }
                _ => base + 0.02,
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        assert_eq!(generate_accounts(1, 7).unwrap(), generate_accounts(1, 7).unwrap());
        assert_ne!(generate_accounts(1, 7).unwrap(), generate_accounts(1, 8).unwrap());
    }

    #[test]
    fn zero_accounts_is_an_error() {
        assert!(generate_accounts(0, 1).is_err());
    }

    #[test]
    fn ids_are_unique() {
        let a = generate_accounts(2, 3).unwrap();
        assert_ne!(a[0].cardholder_id, a[1].cardholder_id);
    }

    #[test]
    fn profile_invariants_hold() {
        for a in generate_accounts(300, 11).unwrap() {
            assert!(a.spend_mean > 0.0 && a.spend_sd >= 0.0 && a.activity_rate > 0.0);
            let s: f64 = a.merchant_preference.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(!a.device_pool.is_empty() && !a.ip_pool.is_empty());
        }
    }

    #[test]
    fn pooled_spend_mean_near_target() {
        let accounts = generate_accounts(1000, 1).unwrap();
        let mean = accounts.iter().map(|a| a.spend_mean).sum::<f64>() / 1000.0;
        assert!((mean - TARGET_AMOUNT_MEAN).abs() <= 0.10 * TARGET_AMOUNT_MEAN, "{mean}");
    }

    #[test]
    fn sample_index_respects_zero_weights() {
        let mut r = rng(0);
        for _ in 0..1000 {
            assert_ne!(sample_index(&[0.5, 0.0, 0.5], &mut r), 1);
        }
    }
}
