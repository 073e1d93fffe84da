//! Revision chains: the trajectory `x_T … x_0` with the scripts linking
//! consecutive revisions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::script::EditScript;
use crate::vocab::TokenId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionChain {
    pub revisions: Vec<Vec<TokenId>>,
    /// `scripts[k]` rewrites `revisions[k]` into `revisions[k + 1]`.
    pub scripts: Vec<EditScript>,
}

impl RevisionChain {
    pub fn new(revisions: Vec<Vec<TokenId>>, scripts: Vec<EditScript>) -> Result<Self> {
        let chain = Self { revisions, scripts };
        chain.validate()?;
        Ok(chain)
    }

    /// A chain with no steps.
    pub fn single(x: Vec<TokenId>) -> Self {
        Self { revisions: vec![x], scripts: Vec::new() }
    }

    /// Builds a chain by replaying `scripts` from `init`.
    pub fn replay(init: Vec<TokenId>, scripts: Vec<EditScript>) -> Result<Self> {
        let mut revisions = Vec::with_capacity(scripts.len() + 1);
        revisions.push(init);
        for script in &scripts {
            let next = script.apply(revisions.last().expect("non-empty"))?;
            revisions.push(next);
        }
        Ok(Self { revisions, scripts })
    }

    pub fn step_count(&self) -> usize {
        self.scripts.len()
    }

    pub fn first(&self) -> &[TokenId] {
        &self.revisions[0]
    }

    pub fn last(&self) -> &[TokenId] {
        self.revisions.last().expect("a chain has at least one revision")
    }

    /// Replays every script and checks it lands on the next revision.
    pub fn validate(&self) -> Result<()> {
        if self.revisions.len() != self.scripts.len() + 1 {
            return Err(Error::Data(format!(
                "chain has {} revisions for {} scripts",
                self.revisions.len(),
                self.scripts.len()
            )));
        }
        for (k, script) in self.scripts.iter().enumerate() {
            let out = script.apply(&self.revisions[k])?;
            if out != self.revisions[k + 1] {
                return Err(Error::Data(format!("script {k} does not reproduce revision {}", k + 1)));
            }
        }
        Ok(())
    }

    /// Joins two chains that share the revision at the seam.
    pub fn concat(&self, next: &RevisionChain) -> Result<Self> {
        if self.last() != next.first() {
            return Err(Error::Data("chains do not share a revision at the seam".into()));
        }
        let mut revisions = self.revisions.clone();
        revisions.extend(next.revisions.iter().skip(1).cloned());
        let mut scripts = self.scripts.clone();
        scripts.extend(next.scripts.iter().cloned());
        Ok(Self { revisions, scripts })
    }
}

/// One line of a chain JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub revisions: Vec<Vec<TokenId>>,
    pub scripts: Vec<EditScript>,
    pub seed: u64,
}

impl ChainRecord {
    pub fn new(chain: &RevisionChain, seed: u64) -> Self {
        Self { revisions: chain.revisions.clone(), scripts: chain.scripts.clone(), seed }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("chain records always serialize")
    }

    pub fn from_line(line: &str) -> Result<Self> {
        Ok(serde_json::from_str(line)?)
    }

    pub fn into_chain(self) -> Result<RevisionChain> {
        RevisionChain::new(self.revisions, self.scripts)
    }
}
