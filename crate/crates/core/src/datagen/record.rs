use core::fmt;
use core::str::FromStr;

use crate::error::Error;
use crate::math;

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        #[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::invalid(alloc::format!(
                        concat!("unknown ", stringify!($name), " `{}`"),
                        other
                    ))),
                }
            }
        }
    };
}

string_enum!(TransactionType {
    Purchase => "Purchase",
    Withdrawal => "Withdrawal",
    OnlinePayment => "OnlinePayment",
});

string_enum!(MerchantCategory {
    Groceries => "Groceries",
    Restaurants => "Restaurants",
    Fuel => "Fuel",
    Retail => "Retail",
    Entertainment => "Entertainment",
    Travel => "Travel",
    Electronics => "Electronics",
    Health => "Health",
    Utilities => "Utilities",
    Jewelry => "Jewelry",
    Cash => "Cash",
});

string_enum!(
    /// Channel the card was presented through.
    DeviceType {
        Mobile => "Mobile",
        Desktop => "Desktop",
        Tablet => "Tablet",
        PosTerminal => "PosTerminal",
        Atm => "Atm",
    }
);

string_enum!(FraudType {
    StolenCard => "StolenCard",
    IdentityFraud => "IdentityFraud",
    OnlinePaymentFraud => "OnlinePaymentFraud",
    Other => "Other",
    None => "None",
});

string_enum!(Label {
    Legit => "legit",
    Fraud => "fraud",
});

impl DeviceType {
    pub const PERSONAL: &'static [DeviceType] = &[DeviceType::Mobile, DeviceType::Desktop, DeviceType::Tablet];
}

impl FraudType {
    pub const TYPOLOGIES: &'static [FraudType] =
        &[FraudType::StolenCard, FraudType::IdentityFraud, FraudType::OnlinePaymentFraud, FraudType::Other];
}

impl Label {
    pub fn is_fraud(self) -> bool {
        self == Label::Fraud
    }

    pub fn as_f64(self) -> f64 {
        if self.is_fraud() {
            1.0
        } else {
            0.0
        }
    }
}

/// IPv4 address kept as its integer form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IpAddress(pub u32);

impl fmt::Display for IpAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0.to_be_bytes();
        write!(f, "{a}.{b}.{c}.{d}")
    }
}

impl FromStr for IpAddress {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut octets = [0u8; 4];
        let mut parts = s.split('.');
        for o in &mut octets {
            *o = parts
                .next()
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| Error::invalid(alloc::format!("bad ip address `{s}`")))?;
        }
        if parts.next().is_some() {
            return Err(Error::invalid(alloc::format!("bad ip address `{s}`")));
        }
        Ok(IpAddress(u32::from_be_bytes(octets)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

pub const EARTH_RADIUS_KM: f64 = 6371.0;

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        GeoPoint { lat, lon }
    }

    /// Great-circle distance in kilometres.
    pub fn haversine_km(&self, other: &GeoPoint) -> f64 {
        let to_rad = core::f64::consts::PI / 180.0;
        let (p1, p2) = (self.lat * to_rad, other.lat * to_rad);
        let dp = p2 - p1;
        let dl = (other.lon - self.lon) * to_rad;
        let s1 = math::sin(dp / 2.0);
        let s2 = math::sin(dl / 2.0);
        let a = s1 * s1 + math::cos(p1) * math::cos(p2) * s2 * s2;
        2.0 * EARTH_RADIUS_KM * math::asin(math::sqrt(a.clamp(0.0, 1.0)))
    }

    /// Point displaced by `km` along `bearing` (radians), small-offset approximation.
    pub fn offset_km(&self, km: f64, bearing: f64) -> GeoPoint {
        let to_rad = core::f64::consts::PI / 180.0;
        let dlat = km * math::cos(bearing) / 111.32;
        let coslat = math::cos(self.lat * to_rad).abs().max(0.05);
        let dlon = km * math::sin(bearing) / (111.32 * coslat);
        let lat = (self.lat + dlat).clamp(-89.9, 89.9);
        let mut lon = self.lon + dlon;
        if lon > 180.0 {
            lon -= 360.0;
        } else if lon < -180.0 {
            lon += 360.0;
        }
        GeoPoint { lat, lon }
    }
}

/// One simulated card transaction. The first fifteen fields are the
/// published schema; `label` and `fraud_type` are the ground truth.
/// `merchant_entropy` is a generator-side helper that is not written to the
/// dataset files (it is re-derived from merchant history when needed).
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransactionRecord {
    pub transaction_amount: f64,
    pub transaction_type: TransactionType,
    /// Fractional hours since simulation start.
    pub time_of_transaction: f64,
    pub merchant_category: MerchantCategory,
    pub geolocation: GeoPoint,
    pub cardholder_id: u64,
    pub transaction_frequency: u32,
    pub device_information: DeviceType,
    pub ip_address: IpAddress,
    pub account_balance: f64,
    pub avg_transaction_amount: f64,
    pub avg_transaction_interval: f64,
    pub geolocation_deviation: f64,
    pub anomaly_score: f64,
    pub spending_behavior_score: f64,
    pub label: Label,
    pub fraud_type: FraudType,
    pub merchant_entropy: f64,
}

impl TransactionRecord {
    /// Record with raw fields set and every derived field zeroed.
    #[allow(clippy::too_many_arguments)]
    pub fn raw(
        cardholder_id: u64,
        time: f64,
        amount: f64,
        transaction_type: TransactionType,
        merchant_category: MerchantCategory,
        geolocation: GeoPoint,
        device: DeviceType,
        ip: IpAddress,
        balance: f64,
    ) -> Self {
        TransactionRecord {
            transaction_amount: amount,
            transaction_type,
            time_of_transaction: time,
            merchant_category,
            geolocation,
            cardholder_id,
            transaction_frequency: 0,
            device_information: device,
            ip_address: ip,
            account_balance: balance,
            avg_transaction_amount: 0.0,
            avg_transaction_interval: 0.0,
            geolocation_deviation: 0.0,
            anomaly_score: 0.0,
            spending_behavior_score: 0.0,
            label: Label::Legit,
            fraud_type: FraudType::None,
            merchant_entropy: 0.0,
        }
    }

    pub fn is_fraud(&self) -> bool {
        self.label.is_fraud()
    }
}

/// Snake-case names of the fifteen schema columns, in file order.
pub const SCHEMA_COLUMNS: [&str; 15] = [
    "transaction_amount",
    "transaction_type",
    "time_of_transaction",
    "merchant_category",
    "geolocation",
    "cardholder_id",
    "transaction_frequency",
    "device_information",
    "ip_address",
    "account_balance",
    "avg_transaction_amount",
    "avg_transaction_interval",
    "geolocation_deviation",
    "anomaly_score",
    "spending_behavior_score",
];
