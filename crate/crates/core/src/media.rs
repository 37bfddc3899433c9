//! Media domain positions from the users who share them.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::PositionTable;
use crate::error::{Error, Result};
use crate::stats::{mean_std, DipNullCache};

/// Default minimum number of distinct sharers for a domain to be profiled.
pub const DEFAULT_MIN_USERS: usize = 100;

/// Lowercased hostname without scheme, credentials, port or path.
pub fn normalize_domain(raw: &str) -> Result<String> {
    let s = raw.trim();
    let s = s.split_once("://").map_or(s, |(_, rest)| rest);
    let host = s.split(['/', '?', '#']).next().unwrap_or("");
    let host = host.rsplit_once('@').map_or(host, |(_, h)| h);
    let host = host.split(':').next().unwrap_or("");
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    if host.is_empty() || host.contains(char::is_whitespace) {
        return Err(Error::InvalidArgument(format!("not a domain: {raw:?}")));
    }
    Ok(host)
}

/// Number of posts by one user linking to one domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareRecord {
    pub pseudo_id: String,
    pub domain: String,
    pub tweet_count: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionProfile {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// Quintile of `mean` among all retained domains, 1 (lowest) to 5.
    pub quantile: u8,
    pub dip: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainProfile {
    pub domain: String,
    pub media_category: Option<String>,
    pub user_count: usize,
    pub tweet_count: u64,
    /// One entry per position column, in table order.
    pub dimensions: Vec<DimensionProfile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MediaReport {
    pub columns: Vec<String>,
    /// Sorted by decreasing user count, then domain.
    pub profiles: Vec<DomainProfile>,
    pub observed_domains: usize,
    /// Records whose user has no position.
    pub dropped_records: usize,
    /// Distinct positioned users with at least one share.
    pub sharers: usize,
    /// Posts from positioned users across all observed domains.
    pub total_tweets: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct MediaConfig {
    pub min_users: usize,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for MediaConfig {
    fn default() -> Self {
        Self {
            min_users: DEFAULT_MIN_USERS,
            n_boot: 2000,
            seed: 0,
        }
    }
}

/// Profiles every domain shared by at least `cfg.min_users` distinct
/// positioned users. A user counts once per domain regardless of how often
/// they shared it; `tweet_count` sums the posts.
pub fn aggregate_shares<I>(
    records: I,
    positions: &PositionTable,
    cfg: &MediaConfig,
) -> Result<MediaReport>
where
    I: IntoIterator<Item = ShareRecord>,
{
    if cfg.min_users == 0 {
        return Err(Error::InvalidArgument("min_users must be at least 1".into()));
    }
    let mut per_domain: BTreeMap<String, (BTreeSet<usize>, u64)> = BTreeMap::new();
    let mut dropped_records = 0;
    let mut sharers = BTreeSet::new();
    let mut total_tweets = 0u64;
    for rec in records {
        let Some(row) = positions.row_of(&rec.pseudo_id) else {
            dropped_records += 1;
            continue;
        };
        let entry = per_domain.entry(rec.domain).or_default();
        entry.0.insert(row);
        entry.1 += rec.tweet_count;
        sharers.insert(row);
        total_tweets += rec.tweet_count;
    }
    if dropped_records > 0 {
        log::warn!("{dropped_records} share records reference users without positions");
    }
    let observed_domains = per_domain.len();
    let retained: Vec<(String, BTreeSet<usize>, u64)> = per_domain
        .into_iter()
        .filter(|(_, (users, _))| users.len() >= cfg.min_users)
        .map(|(d, (u, t))| (d, u, t))
        .collect();

    let n_cols = positions.columns().len();
    let null = DipNullCache::new(cfg.n_boot, cfg.seed);
    let mut profiles: Vec<DomainProfile> = retained
        .par_iter()
        .map(|(domain, users, tweets)| {
            let dimensions = (0..n_cols)
                .map(|c| {
                    let values: Vec<f64> = users.iter().map(|&r| positions.value(r, c)).collect();
                    let (mean, std) = mean_std(&values).expect("nonempty user set");
                    let (dip, p_value) = if values.len() >= 2 {
                        let d = null.test(&values)?;
                        (d.dip, d.p_value)
                    } else {
                        (f64::NAN, f64::NAN)
                    };
                    Ok(DimensionProfile {
                        mean,
                        std,
                        quantile: 0,
                        dip,
                        p_value,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(DomainProfile {
                domain: domain.clone(),
                media_category: None,
                user_count: users.len(),
                tweet_count: *tweets,
                dimensions,
            })
        })
        .collect::<Result<_>>()?;
    profiles.sort_by(|a, b| {
        b.user_count
            .cmp(&a.user_count)
            .then_with(|| a.domain.cmp(&b.domain))
    });
    for c in 0..n_cols {
        assign_quintiles(&mut profiles, c);
    }
    Ok(MediaReport {
        columns: positions.columns().to_vec(),
        profiles,
        observed_domains,
        dropped_records,
        sharers: sharers.len(),
        total_tweets,
    })
}

/// Empirical quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quintile index from 1 to 5 of each profile's mean on dimension `col`:
/// one plus the number of 20 % breakpoints lying strictly below the mean.
/// Equal means therefore share the lower index.
pub fn assign_quintiles(profiles: &mut [DomainProfile], col: usize) {
    if profiles.is_empty() {
        return;
    }
    let mut means: Vec<f64> = profiles.iter().map(|p| p.dimensions[col].mean).collect();
    means.sort_by(f64::total_cmp);
    let breaks: Vec<f64> = (1..5).map(|k| quantile(&means, k as f64 / 5.0)).collect();
    for p in profiles.iter_mut() {
        let m = p.dimensions[col].mean;
        p.dimensions[col].quantile = 1 + breaks.iter().filter(|&&b| b < m).count() as u8;
    }
}

/// Fills `media_category` from an external classification.
pub fn attach_categories(profiles: &mut [DomainProfile], categories: &HashMap<String, String>) {
    for p in profiles {
        p.media_category = categories.get(&p.domain).cloned();
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    /// Domain means, in profile order.
    pub values: Vec<f64>,
}

/// Distribution of domain means per media category on dimension `col`.
/// Domains without a category are skipped.
pub fn category_distributions(
    profiles: &[DomainProfile],
    categories: &HashMap<String, String>,
    col: usize,
) -> BTreeMap<String, CategorySummary> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for p in profiles {
        if let Some(cat) = categories.get(&p.domain) {
            groups
                .entry(cat.clone())
                .or_default()
                .push(p.dimensions[col].mean);
        }
    }
    groups
        .into_iter()
        .map(|(cat, values)| {
            let (mean, std) = mean_std(&values).expect("nonempty group");
            (
                cat,
                CategorySummary {
                    count: values.len(),
                    mean,
                    std,
                    values,
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(values: &[(&str, f64)]) -> PositionTable {
        let mut t = PositionTable::new(vec!["lrgen_19".into()]);
        for (id, v) in values {
            t.push(id.to_string(), &[*v]).unwrap();
        }
        t
    }

    fn share(user: &str, domain: &str, count: u64) -> ShareRecord {
        ShareRecord {
            pseudo_id: user.into(),
            domain: domain.into(),
            tweet_count: count,
        }
    }

    fn cfg(min_users: usize) -> MediaConfig {
        MediaConfig {
            min_users,
            n_boot: 50,
            seed: 1,
        }
    }

    #[test]
    fn domains_are_normalized() {
        assert_eq!(normalize_domain("https://WWW.Le-Monde.fr/a/b?x=1").unwrap(), "www.le-monde.fr");
        assert_eq!(normalize_domain("lefigaro.fr").unwrap(), "lefigaro.fr");
        assert_eq!(normalize_domain("http://user@host.org:8080/").unwrap(), "host.org");
        assert!(normalize_domain("https:///path").is_err());
        assert!(normalize_domain("  ").is_err());
    }

    #[test]
    fn single_sharer() {
        let t = table(&[("u", 3.5)]);
        let r = aggregate_shares([share("u", "a.fr", 2)], &t, &cfg(1)).unwrap();
        let d = &r.profiles[0].dimensions[0];
        assert_eq!((d.mean, d.std, d.quantile), (3.5, 0.0, 1));
        assert!(d.dip.is_nan());
    }

    #[test]
    fn repeated_shares_count_once() {
        let t = table(&[("a", 2.0), ("b", 4.0), ("c", 6.0)]);
        let recs = vec![share("a", "x.fr", 1), share("b", "x.fr", 1), share("c", "x.fr", 1), share("a", "x.fr", 5)];
        let r = aggregate_shares(recs.clone(), &t, &cfg(1)).unwrap();
        let p = &r.profiles[0];
        assert_eq!((p.user_count, p.tweet_count), (3, 8));
        assert_eq!(p.dimensions[0].mean, 4.0);
        assert!((p.dimensions[0].std - (8.0f64 / 3.0).sqrt()).abs() < 1e-15);
        // duplicating a record changes only the post count
        let mut more = recs;
        more.push(share("b", "x.fr", 3));
        let r2 = aggregate_shares(more, &t, &cfg(1)).unwrap();
        assert_eq!(r2.profiles[0].tweet_count, 11);
        assert_eq!(r2.profiles[0].dimensions, r.profiles[0].dimensions);
    }

    #[test]
    fn threshold_order_and_drops() {
        let t = table(&[("a", 1.0), ("b", 2.0), ("c", 3.0)]);
        let recs = vec![
            share("a", "big.fr", 1),
            share("b", "big.fr", 1),
            share("c", "big.fr", 1),
            share("a", "mid.fr", 1),
            share("b", "mid.fr", 1),
            share("a", "alt.fr", 1),
            share("c", "alt.fr", 1),
            share("a", "small.fr", 1),
            share("ghost", "big.fr", 4),
        ];
        let r = aggregate_shares(recs, &t, &cfg(2)).unwrap();
        let names: Vec<&str> = r.profiles.iter().map(|p| p.domain.as_str()).collect();
        assert_eq!(names, ["big.fr", "alt.fr", "mid.fr"]);
        assert_eq!((r.observed_domains, r.dropped_records, r.sharers, r.total_tweets), (4, 1, 3, 8));
        assert!(aggregate_shares(Vec::new(), &t, &cfg(1)).unwrap().profiles.is_empty());
    }

    fn profiles(means: &[f64]) -> Vec<DomainProfile> {
        means
            .iter()
            .enumerate()
            .map(|(i, &m)| DomainProfile {
                domain: format!("d{i}"),
                media_category: None,
                user_count: 1,
                tweet_count: 1,
                dimensions: vec![DimensionProfile {
                    mean: m,
                    std: 0.0,
                    quantile: 0,
                    dip: f64::NAN,
                    p_value: f64::NAN,
                }],
            })
            .collect()
    }

    #[test]
    fn quintiles_distinct_and_tied() {
        let mut p = profiles(&[0.3, 9.0, 4.0, -2.0, 5.5]);
        assign_quintiles(&mut p, 0);
        let q: Vec<u8> = p.iter().map(|x| x.dimensions[0].quantile).collect();
        assert_eq!(q, [2, 5, 3, 1, 4]);
        let mut p = profiles(&[5.0; 7]);
        assign_quintiles(&mut p, 0);
        assert!(p.iter().all(|x| x.dimensions[0].quantile == 1));
    }

    #[test]
    fn quintiles_match_sort_and_bucket() {
        // distinct means: rank r of N lands in bucket 1 + #{k : 5r > (N-1)k}
        let means = [3.1, 0.4, 8.8, 5.5, 2.2, 7.0, 6.1, 9.9, 1.3, 4.4, 0.9, 6.6, 5.0];
        let mut p = profiles(&means);
        assign_quintiles(&mut p, 0);
        let mut order: Vec<usize> = (0..means.len()).collect();
        order.sort_by(|&a, &b| means[a].total_cmp(&means[b]));
        let n = means.len();
        for (r, &i) in order.iter().enumerate() {
            let want = 1 + (1..5).filter(|k| 5 * r > (n - 1) * k).count() as u8;
            assert_eq!(p[i].dimensions[0].quantile, want, "rank {r}");
        }
    }

    #[test]
    fn categories_summarize_means() {
        let mut p = profiles(&[3.0, 2.5, 7.0, 7.5, 5.0]);
        let cats: HashMap<String, String> = [("d0", "left"), ("d1", "left"), ("d2", "right"), ("d3", "right")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        attach_categories(&mut p, &cats);
        assert_eq!(p[4].media_category, None);
        let s = category_distributions(&p, &cats, 0);
        assert_eq!(s.len(), 2);
        assert!(s["left"].mean < s["right"].mean);
        assert_eq!(s["right"].values, [7.0, 7.5]);
        assert_eq!(s["left"].count, 2);
    }
}
