//! Downlink NOMA rate model with SIC, plus the time-division OMA reference.
//!
//! Interference terms are received powers `g * P`. A UAV's radiated power
//! `P^s` is the sum of the powers it allocates to its own cluster.

use serde::{Deserialize, Serialize};

/// Dense UAV x user matrix (row = UAV, column = user).
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMatrix {
    uavs: usize,
    users: usize,
    data: Vec<f64>,
}

impl LinkMatrix {
    pub fn zeros(uavs: usize, users: usize) -> Self {
        Self {
            uavs,
            users,
            data: vec![0.0; uavs * users],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let users = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows.len(), users);
        for (u, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), users, "ragged link matrix");
            m.row_mut(u).copy_from_slice(row);
        }
        m
    }

    pub fn uavs(&self) -> usize {
        self.uavs
    }

    pub fn users(&self) -> usize {
        self.users
    }

    #[inline]
    pub fn get(&self, uav: usize, user: usize) -> f64 {
        self.data[uav * self.users + user]
    }

    #[inline]
    pub fn set(&mut self, uav: usize, user: usize, value: f64) {
        self.data[uav * self.users + user] = value;
    }

    pub fn row(&self, uav: usize) -> &[f64] {
        &self.data[uav * self.users..(uav + 1) * self.users]
    }

    pub fn row_mut(&mut self, uav: usize) -> &mut [f64] {
        &mut self.data[uav * self.users..(uav + 1) * self.users]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.uavs).map(|u| self.row(u).iter().sum()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    Noma,
    Oma,
}

/// SIC decoding order of one cluster: user ids, weakest equivalent gain
/// first. The last user decodes and removes everyone before it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DecodingOrder {
    pub order: Vec<usize>,
}

/// Per-slot rates. Vectors are indexed by user id.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub per_user_rate: Vec<f64>,
    pub sinr: Vec<f64>,
    pub per_uav_rate: Vec<f64>,
    pub sum_rate: f64,
}

/// Snapshot of one slot's downlink: gains and allocated powers for every
/// UAV-user pair (powers are zero outside a UAV's cluster).
#[derive(Debug, Clone, Copy)]
pub struct Downlink<'a> {
    pub gains: &'a LinkMatrix,
    pub powers: &'a LinkMatrix,
    /// Radiated power of each UAV, `P^s`.
    pub radiated: &'a [f64],
    pub sigma2: f64,
    pub bandwidth: f64,
}

impl<'a> Downlink<'a> {
    pub fn inter_cluster_interference(&self, user: usize, serving: usize) -> f64 {
        (0..self.gains.uavs())
            .filter(|&s| s != serving)
            .map(|s| self.gains.get(s, user) * self.radiated[s])
            .sum()
    }

    pub fn equivalent_gain(&self, user: usize, serving: usize) -> f64 {
        self.gains.get(serving, user) / (self.inter_cluster_interference(user, serving) + self.sigma2)
    }

    /// SINR of the user at position `pos` of `order`, served by `serving`.
    pub fn sinr(&self, pos: usize, order: &DecodingOrder, serving: usize) -> f64 {
        let k = order.order[pos];
        let g = self.gains.get(serving, k);
        let intra: f64 = order.order[pos + 1..]
            .iter()
            .map(|&i| g * self.powers.get(serving, i))
            .sum();
        g * self.powers.get(serving, k)
            / (intra + self.inter_cluster_interference(k, serving) + self.sigma2)
    }

    pub fn shannon(&self, sinr: f64) -> f64 {
        self.bandwidth * (1.0 + sinr).log2()
    }

    /// NOMA rates for all clusters. `clusters[u]` lists the users served by
    /// UAV `u` and `orders[u]` is the decoding order used for that cluster.
    pub fn noma_rates(&self, orders: &[DecodingOrder]) -> RateReport {
        let mut report = RateReport::empty(self.gains.uavs(), self.gains.users());
        for (u, order) in orders.iter().enumerate() {
            for pos in 0..order.order.len() {
                let k = order.order[pos];
                let gamma = self.sinr(pos, order, u);
                report.record(u, k, gamma, self.shannon(gamma));
            }
        }
        report
    }

    /// Time-division OMA: each of the `K^u` users gets the UAV's full
    /// radiated power for `1/K^u` of the slot, free of intra-cluster
    /// interference.
    pub fn oma_rates(&self, clusters: &[Vec<usize>]) -> RateReport {
        let mut report = RateReport::empty(self.gains.uavs(), self.gains.users());
        for (u, members) in clusters.iter().enumerate() {
            let share = 1.0 / members.len().max(1) as f64;
            for &k in members {
                let gamma = self.gains.get(u, k) * self.radiated[u]
                    / (self.inter_cluster_interference(k, u) + self.sigma2);
                report.record(u, k, gamma, share * self.shannon(gamma));
            }
        }
        report
    }
}

impl RateReport {
    fn empty(uavs: usize, users: usize) -> Self {
        Self {
            per_user_rate: vec![0.0; users],
            sinr: vec![0.0; users],
            per_uav_rate: vec![0.0; uavs],
            sum_rate: 0.0,
        }
    }

    fn record(&mut self, uav: usize, user: usize, sinr: f64, rate: f64) {
        self.sinr[user] = sinr;
        self.per_user_rate[user] = rate;
        self.per_uav_rate[uav] += rate;
        self.sum_rate += rate;
    }
}

/// Ascending order by `key`, ties broken by lower user id.
pub fn decoding_order(users: &[usize], key: impl Fn(usize) -> f64) -> DecodingOrder {
    let mut order = users.to_vec();
    order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
    DecodingOrder { order }
}

/// Checks `G_pi(k) >= G_pi(j)` for all `k > j`.
pub fn order_is_sic_valid(order: &DecodingOrder, key: impl Fn(usize) -> f64) -> bool {
    order.order.windows(2).all(|w| key(w[0]) <= key(w[1]))
}

/// Sum of per-slot sum rates over slots `0..=T`.
pub fn throughput<'a>(reports: impl IntoIterator<Item = &'a RateReport>) -> f64 {
    reports.into_iter().map(|r| r.sum_rate).sum()
}
