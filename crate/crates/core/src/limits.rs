/// Size caps for the dense (cubic) code paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Largest `n` the exact engine accepts. Three `n x n²` buffers are live at once.
    pub exact_cap: usize,
    /// Largest `n` for oracle-grade dense tensors and low-rank materialization.
    pub oracle_cap: usize,
    /// Largest feature rank the low-rank engine will build.
    pub rank_cap: usize,
    /// Largest `n` / `d` for central finite differences over all `d³` coordinates.
    pub fd_max_n: usize,
    pub fd_max_d: usize,
}

/// Environment variable overriding [`Limits::exact_cap`].
pub const EXACT_CAP_ENV: &str = "TAT_EXACT_CAP";

impl Default for Limits {
    fn default() -> Self {
        Self {
            exact_cap: 256,
            oracle_cap: 32,
            rank_cap: 100_000,
            fd_max_n: 8,
            fd_max_d: 4,
        }
    }
}

impl Limits {
    /// Defaults, with `TAT_EXACT_CAP` applied when set to a positive integer.
    pub fn from_env() -> Self {
        let mut limits = Self::default();
        if let Some(cap) = std::env::var(EXACT_CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&c| c > 0)
        {
            limits.exact_cap = cap;
        }
        limits
    }
}
