/// Priority of safety behaviors and of every task tied to a safety check.
pub const P_MAX: f64 = 1.0;

/// One entry in a priority listing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorityRequest {
    pub declared: Option<f64>,
    pub safety: bool,
}

impl PriorityRequest {
    pub fn declared(p: f64) -> Self {
        Self {
            declared: Some(p),
            safety: false,
        }
    }

    pub fn absent() -> Self {
        Self {
            declared: None,
            safety: false,
        }
    }

    pub fn safety() -> Self {
        Self {
            declared: None,
            safety: true,
        }
    }
}

const COLLISION_EPS: f64 = 1e-12;

/// Fills in missing priorities from the default pool.
///
/// Among the `n` non-safety entries, the one at position `i` defaults to
/// `1 - (i + 1) / (n + 1)`. A default that collides with a value already in
/// use steps down by `1 / (10 (n + 1))` until it is free (and climbs instead
/// if stepping down would leave `(0, 1)`). Safety entries resolve to
/// [`P_MAX`]; declared values are returned unchanged.
pub fn default_priorities(listing: &[PriorityRequest]) -> Vec<f64> {
    let pool: Vec<usize> = (0..listing.len()).filter(|&i| !listing[i].safety).collect();
    let n = pool.len() as f64;
    let step = 1.0 / (10.0 * (n + 1.0));

    let mut taken: Vec<f64> = pool.iter().filter_map(|&i| listing[i].declared).collect();
    let mut out: Vec<f64> = listing
        .iter()
        .map(|r| if r.safety { P_MAX } else { r.declared.unwrap_or(f64::NAN) })
        .collect();

    for (rank, &idx) in pool.iter().enumerate() {
        if listing[idx].declared.is_some() {
            continue;
        }
        let base = 1.0 - (rank as f64 + 1.0) / (n + 1.0);
        let free = |p: f64| p > 0.0 && p < 1.0 && taken.iter().all(|t| (t - p).abs() > COLLISION_EPS);
        let chosen = (0u32..)
            .map(|k| base - f64::from(k) * step)
            .take_while(|&p| p > 0.0)
            .find(|&p| free(p))
            .or_else(|| (1u32..).map(|k| base + f64::from(k) * step).take_while(|&p| p < 1.0).find(|&p| free(p)))
            .expect("default pool exhausted");
        taken.push(chosen);
        out[idx] = chosen;
    }
    out
}
