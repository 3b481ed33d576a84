use crate::kb::RecordMode;
use crate::kge::KgeError;

#[derive(Debug, Clone, PartialEq)]
pub struct KgeConfig {
    pub dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub min_subword: usize,
    pub max_subword: usize,
    /// Power of two.
    pub bucket_count: u32,
    pub threads: usize,
    pub seed: u64,
    pub mode: RecordMode,
}

impl Default for KgeConfig {
    fn default() -> Self {
        KgeConfig {
            dim: 500,
            epochs: 5,
            lr: 0.05,
            min_subword: 2,
            max_subword: 5,
            bucket_count: 1 << 21,
            threads: 12,
            seed: 42,
            mode: RecordMode::Structure,
        }
    }
}

impl KgeConfig {
    pub fn validate(&self) -> Result<(), KgeError> {
        let bad = |m: String| Err(KgeError::Invalid(m));
        if self.dim == 0 {
            return bad("kge.dim must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("kge.epochs must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("kge.lr must be > 0, got {}", self.lr));
        }
        if self.min_subword == 0 || self.min_subword > self.max_subword {
            return bad(format!("kge.minn {} must be in 1..=kge.maxn {}", self.min_subword, self.max_subword));
        }
        if !self.bucket_count.is_power_of_two() {
            return bad(format!("kge.buckets must be a power of two, got {}", self.bucket_count));
        }
        if self.threads == 0 {
            return bad("kge.threads must be positive".into());
        }
        Ok(())
    }

    pub fn uses_subwords(&self) -> bool {
        self.mode == RecordMode::Semantic
    }

    /// Applies one `kge.*` key from a config file.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
        }
        match key {
            "kge.dim" => self.dim = num(key, value)?,
            "kge.epochs" => self.epochs = num(key, value)?,
            "kge.lr" => self.lr = num(key, value)?,
            "kge.minn" => self.min_subword = num(key, value)?,
            "kge.maxn" => self.max_subword = num(key, value)?,
            "kge.buckets" => self.bucket_count = num(key, value)?,
            "kge.threads" => self.threads = num(key, value)?,
            "kge.seed" => self.seed = num(key, value)?,
            "kge.mode" => self.mode = value.parse().map_err(|e| format!("{key}: {e}"))?,
            _ => return Err(format!("unknown key {key}")),
        }
        Ok(())
    }

    pub const KEYS: &'static [&'static str] = &[
        "kge.dim", "kge.epochs", "kge.lr", "kge.minn", "kge.maxn", "kge.buckets", "kge.threads", "kge.seed",
        "kge.mode",
    ];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_defaults_validate() {
        let c = KgeConfig { mode: RecordMode::Semantic, ..KgeConfig::default() };
        assert_eq!((c.dim, c.min_subword, c.max_subword, c.threads), (500, 2, 5, 12));
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = KgeConfig::default();
        c.min_subword = 6;
        assert!(c.validate().is_err());
        let c = KgeConfig { bucket_count: 1000, ..KgeConfig::default() };
        assert!(c.validate().is_err());
        let mut c = KgeConfig::default();
        assert!(c.apply("kge.dim", "x").is_err());
        assert!(c.apply("kge.nope", "1").is_err());
        c.apply("kge.mode", "semantic").unwrap();
        assert!(c.uses_subwords());
    }
}
