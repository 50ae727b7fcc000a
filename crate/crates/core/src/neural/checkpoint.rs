//! Plain-text parameter checkpoints.
//!
//! An MLP block is
//!
//! ```text
//! mlp <n_layers + 1> <size_0> <size_1> ... <size_n>
//! weights <k> <rows> <cols>        one line per row, row-major
//! <w_00> <w_01> ...
//! bias <k> <rows>
//! <b_0> <b_1> ...
//! ```
//!
//! repeated for every layer `k`. A policy checkpoint wraps two blocks:
//!
//! ```text
//! isac-policy-checkpoint v1
//! [actor]
//! <mlp block>
//! [log_std] <n>
//! <s_0> <s_1> ...
//! [critic]
//! <mlp block>
//! ```
//!
//! Values use Rust's shortest round-trip formatting, so reading a file back
//! reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use super::{GaussianPolicy, Mlp};
use crate::{Error, Result};

pub const POLICY_CHECKPOINT_HEADER: &str = "isac-policy-checkpoint v1";

fn join(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v}").unwrap();
    }
    s
}

pub fn write_mlp(mlp: &Mlp, out: &mut String) {
    let sizes = mlp.sizes();
    let size_list: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
    writeln!(out, "mlp {} {}", sizes.len(), size_list.join(" ")).unwrap();
    for k in 0..mlp.n_layers() {
        let (w, b) = mlp.layer(k);
        let (rows, cols) = (sizes[k + 1], sizes[k]);
        writeln!(out, "weights {k} {rows} {cols}").unwrap();
        for r in 0..rows {
            writeln!(out, "{}", join(&w[r * cols..(r + 1) * cols])).unwrap();
        }
        writeln!(out, "bias {k} {rows}").unwrap();
        writeln!(out, "{}", join(b)).unwrap();
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l.trim()))
            .ok_or_else(|| Error::Checkpoint("unexpected end of file".into()))
    }

    fn expect_tagged(&mut self, tag: &str) -> Result<(usize, Vec<&'a str>)> {
        let (no, line) = self.next_line()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(tag) {
            return Err(Error::Checkpoint(format!("line {no}: expected `{tag}`, found `{line}`")));
        }
        Ok((no, parts.collect()))
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let (no, line) = self.next_line()?;
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Checkpoint(format!("line {no}: {e}")))?;
        if vals.len() != n {
            return Err(Error::Checkpoint(format!("line {no}: expected {n} values, found {}", vals.len())));
        }
        Ok(vals)
    }
}

fn parse_usizes(no: usize, parts: &[&str]) -> Result<Vec<usize>> {
    parts
        .iter()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Checkpoint(format!("line {no}: {e}")))
}

fn read_mlp_block(lines: &mut Lines<'_>) -> Result<Mlp> {
    let (no, parts) = lines.expect_tagged("mlp")?;
    let nums = parse_usizes(no, &parts)?;
    if nums.is_empty() || nums[0] != nums.len() - 1 {
        return Err(Error::Checkpoint(format!("line {no}: malformed size header")));
    }
    let sizes = &nums[1..];
    let mut params = Vec::new();
    for k in 0..sizes.len().saturating_sub(1) {
        let (rows, cols) = (sizes[k + 1], sizes[k]);
        let (no, parts) = lines.expect_tagged("weights")?;
        if parse_usizes(no, &parts)? != [k, rows, cols] {
            return Err(Error::Checkpoint(format!("line {no}: weight block header mismatch")));
        }
        for _ in 0..rows {
            params.extend(lines.floats(cols)?);
        }
        let (no, parts) = lines.expect_tagged("bias")?;
        if parse_usizes(no, &parts)? != [k, rows] {
            return Err(Error::Checkpoint(format!("line {no}: bias block header mismatch")));
        }
        params.extend(lines.floats(rows)?);
    }
    Mlp::from_params(sizes, params).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn read_mlp(text: &str) -> Result<Mlp> {
    read_mlp_block(&mut Lines { inner: text.lines().enumerate() })
}

/// Actor and critic saved together.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCheckpoint {
    pub actor: GaussianPolicy,
    pub critic: Mlp,
}

impl PolicyCheckpoint {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{POLICY_CHECKPOINT_HEADER}").unwrap();
        writeln!(out, "[actor]").unwrap();
        write_mlp(&self.actor.mean, &mut out);
        writeln!(out, "[log_std] {}", self.actor.log_std.len()).unwrap();
        writeln!(out, "{}", join(&self.actor.log_std)).unwrap();
        writeln!(out, "[critic]").unwrap();
        write_mlp(&self.critic, &mut out);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines { inner: text.lines().enumerate() };
        let (no, header) = lines.next_line()?;
        if header != POLICY_CHECKPOINT_HEADER {
            return Err(Error::Checkpoint(format!("line {no}: unsupported header `{header}`")));
        }
        lines.expect_tagged("[actor]")?;
        let mean = read_mlp_block(&mut lines)?;
        let (no, parts) = lines.expect_tagged("[log_std]")?;
        let n = parse_usizes(no, &parts)?;
        if n.len() != 1 || n[0] != mean.output_len() {
            return Err(Error::Checkpoint(format!("line {no}: log_std length mismatch")));
        }
        let log_std = lines.floats(n[0])?;
        lines.expect_tagged("[critic]")?;
        let critic = read_mlp_block(&mut lines)?;
        if critic.input_len() != mean.input_len() || critic.output_len() != 1 {
            return Err(Error::Checkpoint("critic shape does not match actor".into()));
        }
        Ok(Self { actor: GaussianPolicy { mean, log_std }, critic })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn checkpoint(seed: u64) -> PolicyCheckpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = GaussianPolicy::new(5, 3, &[7, 4], -0.25, &mut rng).unwrap();
        let critic = Mlp::orthogonal(&[5, 6, 1], 1.0, 1.0, &mut rng).unwrap();
        PolicyCheckpoint { actor, critic }
    }

    proptest! {
        #[test]
        fn checkpoint_round_trips_bit_exact(seed in 0u64..1000) {
            let ck = checkpoint(seed);
            let back = PolicyCheckpoint::from_text(&ck.to_text()).unwrap();
            prop_assert_eq!(back, ck);
        }
    }

    #[test]
    fn rejects_wrong_header() {
        let text = checkpoint(1).to_text().replace("v1", "v9");
        assert!(matches!(PolicyCheckpoint::from_text(&text), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn reports_line_of_bad_value() {
        let text = checkpoint(1).to_text();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[4] = "1.0 nope";
        let err = PolicyCheckpoint::from_text(&lines.join("\n")).unwrap_err().to_string();
        assert!(err.contains("line 5"), "{err}");
    }

    #[test]
    fn standalone_mlp_block() {
        let ck = checkpoint(2);
        let mut s = String::new();
        write_mlp(&ck.critic, &mut s);
        assert_eq!(read_mlp(&s).unwrap(), ck.critic);
    }
}
