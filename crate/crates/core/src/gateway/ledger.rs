use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PromptRole;

/// Prices per 1K tokens.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceTable {
    pub prompt_per_1k: f64,
    pub completion_per_1k: f64,
}

impl Default for PriceTable {
    /// GPT-4.1 list prices: $2 / 1M input and $8 / 1M output tokens.
    fn default() -> Self {
        PriceTable { prompt_per_1k: 0.002, completion_per_1k: 0.008 }
    }
}

impl PriceTable {
    pub fn load(path: impl AsRef<Path>) -> Result<PriceTable, String> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn cost(&self, prompt_tokens: u64, completion_tokens: u64) -> f64 {
        (prompt_tokens as f64 * self.prompt_per_1k + completion_tokens as f64 * self.completion_per_1k) / 1000.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleUsage {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Cumulative token usage per role and its monetary cost.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UsageLedger {
    pub per_role: BTreeMap<PromptRole, RoleUsage>,
    pub prices: PriceTable,
    pub total_cost: f64,
}

impl UsageLedger {
    pub fn new(prices: PriceTable) -> Self {
        UsageLedger { per_role: BTreeMap::new(), prices, total_cost: 0.0 }
    }

    pub fn record(&mut self, role: PromptRole, prompt_tokens: u64, completion_tokens: u64) {
        let usage = self.per_role.entry(role).or_default();
        usage.calls += 1;
        usage.prompt_tokens += prompt_tokens;
        usage.completion_tokens += completion_tokens;
        self.reprice();
    }

    pub fn prompt_tokens(&self) -> u64 {
        self.per_role.values().map(|u| u.prompt_tokens).sum()
    }

    pub fn completion_tokens(&self) -> u64 {
        self.per_role.values().map(|u| u.completion_tokens).sum()
    }

    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens() + self.completion_tokens()
    }

    pub fn calls(&self) -> u64 {
        self.per_role.values().map(|u| u.calls).sum()
    }

    /// Usage accrued after `earlier` was taken, priced with `prices`.
    pub fn since(&self, earlier: &UsageLedger, prices: PriceTable) -> UsageLedger {
        let mut per_role = BTreeMap::new();
        for (role, now) in &self.per_role {
            let before = earlier.per_role.get(role).copied().unwrap_or_default();
            let delta = RoleUsage {
                calls: now.calls - before.calls,
                prompt_tokens: now.prompt_tokens - before.prompt_tokens,
                completion_tokens: now.completion_tokens - before.completion_tokens,
            };
            if delta != RoleUsage::default() {
                per_role.insert(*role, delta);
            }
        }
        let mut ledger = UsageLedger { per_role, prices, total_cost: 0.0 };
        ledger.reprice();
        ledger
    }

    fn reprice(&mut self) {
        self.total_cost = self.prices.cost(self.prompt_tokens(), self.completion_tokens());
    }
}
