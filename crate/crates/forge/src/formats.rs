//! JSON encodings of instances, contracts and separation queries, and the
//! DIMACS CNF reader.
//!
//! Numbers go through `serde_json`, which prints the shortest decimal that
//! parses back to the same `f64`, so every encoding round-trips exactly.

use anyhow::{anyhow, bail, Context, Result};
use contract_forge_core::generators::Cnf;
use contract_forge_core::model::SettingOptions;
use contract_forge_core::oracle::SeparationInstance;
use contract_forge_core::{Contract, ExplicitSetting, Instance, Outcome, ProductSetting, Setting, SparseContract};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum InstanceFile {
    Product {
        costs: Vec<f64>,
        rewards: Vec<f64>,
        probs: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        provenance: Option<Value>,
    },
    Explicit {
        costs: Vec<f64>,
        outcome_rewards: Vec<f64>,
        dist: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        provenance: Option<Value>,
    },
}

pub fn instance_to_json(instance: &Instance, provenance: Option<Value>) -> Value {
    let file = match instance {
        Instance::Product(p) => InstanceFile::Product {
            costs: p.costs(),
            rewards: p.rewards().to_vec(),
            probs: p.probs().to_vec(),
            provenance,
        },
        Instance::Explicit(e) => InstanceFile::Explicit {
            costs: e.costs(),
            outcome_rewards: e.outcome_rewards().to_vec(),
            dist: e.dist().to_vec(),
            provenance,
        },
    };
    serde_json::to_value(file).expect("instance encodes to JSON")
}

pub fn instance_from_json(value: Value, options: SettingOptions) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_value(value).context("malformed instance")?;
    Ok(match file {
        InstanceFile::Product {
            costs, rewards, probs, ..
        } => Instance::Product(ProductSetting::with_options(costs, rewards, probs, options)?),
        InstanceFile::Explicit {
            costs,
            outcome_rewards,
            dist,
            ..
        } => Instance::Explicit(ExplicitSetting::with_options(costs, outcome_rewards, dist, options)?),
    })
}

pub fn parse_instance(text: &str, options: SettingOptions) -> Result<Instance> {
    instance_from_json(
        serde_json::from_str(text).context("instance is not valid JSON")?,
        options,
    )
}

/// How sparse payments name their outcome: by item list for product settings,
/// by outcome index for explicit ones. Both decode to the same [`Outcome`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeStyle {
    Items,
    Index,
}

impl OutcomeStyle {
    pub fn for_instance(instance: &Instance) -> OutcomeStyle {
        match instance {
            Instance::Product(_) => OutcomeStyle::Items,
            Instance::Explicit(_) => OutcomeStyle::Index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PaymentEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outcome: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index: Option<u64>,
    pay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum ContractFile {
    Sparse {
        #[serde(default)]
        base: f64,
        #[serde(default)]
        payments: Vec<PaymentEntry>,
    },
    Linear {
        alpha: f64,
    },
    Separable {
        item_payments: Vec<f64>,
    },
    Mixed {
        #[serde(default)]
        base: f64,
        #[serde(default)]
        payments: Vec<PaymentEntry>,
        alpha: f64,
    },
}

fn entries(sparse: &SparseContract, style: OutcomeStyle) -> Vec<PaymentEntry> {
    sparse
        .payments
        .iter()
        .map(|(&s, &pay)| match style {
            OutcomeStyle::Items => PaymentEntry {
                outcome: Some(s.items().collect()),
                index: None,
                pay,
            },
            OutcomeStyle::Index => PaymentEntry {
                outcome: None,
                index: Some(s.0),
                pay,
            },
        })
        .collect()
}

fn sparse_from(base: f64, payments: Vec<PaymentEntry>) -> Result<SparseContract> {
    let mut pairs = Vec::with_capacity(payments.len());
    for (k, p) in payments.into_iter().enumerate() {
        let outcome = match (p.outcome, p.index) {
            (Some(items), None) => Outcome::from_items(&items)?,
            (None, Some(i)) => Outcome(i),
            _ => bail!("payment {k} needs exactly one of \"outcome\" and \"index\""),
        };
        pairs.push((outcome, p.pay));
    }
    Ok(SparseContract::new(base, pairs)?)
}

pub fn contract_to_json(contract: &Contract, style: OutcomeStyle) -> Value {
    let file = match contract {
        Contract::Sparse(s) => ContractFile::Sparse {
            base: s.base,
            payments: entries(s, style),
        },
        Contract::Linear { alpha } => ContractFile::Linear { alpha: *alpha },
        Contract::Separable { item_payments } => ContractFile::Separable {
            item_payments: item_payments.clone(),
        },
        Contract::Mixed { sparse, alpha } => ContractFile::Mixed {
            base: sparse.base,
            payments: entries(sparse, style),
            alpha: *alpha,
        },
    };
    serde_json::to_value(file).expect("contract encodes to JSON")
}

/// Accepts a bare contract or any object carrying one under `"contract"`,
/// such as the output of `solve`.
pub fn contract_from_json(value: Value) -> Result<Contract> {
    let value = match value {
        Value::Object(mut map) if !map.contains_key("kind") => map
            .remove("contract")
            .ok_or_else(|| anyhow!("no contract found: expected \"kind\" or \"contract\""))?,
        v => v,
    };
    let file: ContractFile = serde_json::from_value(value).context("malformed contract")?;
    let contract = match file {
        ContractFile::Sparse { base, payments } => Contract::Sparse(sparse_from(base, payments)?),
        ContractFile::Linear { alpha } => Contract::Linear { alpha },
        ContractFile::Separable { item_payments } => Contract::Separable { item_payments },
        ContractFile::Mixed { base, payments, alpha } => Contract::Mixed {
            sparse: sparse_from(base, payments)?,
            alpha,
        },
    };
    contract.validate()?;
    Ok(contract)
}

pub fn parse_contract(text: &str) -> Result<Contract> {
    contract_from_json(serde_json::from_str(text).context("contract is not valid JSON")?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeparationFile {
    weights: Vec<f64>,
    mixtures: Vec<Vec<f64>>,
    reference: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Value>,
}

pub fn separation_to_json(inst: &SeparationInstance) -> Value {
    serde_json::to_value(SeparationFile {
        weights: inst.weights.clone(),
        mixtures: inst.mixtures.clone(),
        reference: inst.reference.clone(),
        provenance: None,
    })
    .expect("separation instance encodes to JSON")
}

pub fn parse_separation(text: &str) -> Result<SeparationInstance> {
    let f: SeparationFile = serde_json::from_str(text).context("malformed separation instance")?;
    let inst = SeparationInstance {
        weights: f.weights,
        mixtures: f.mixtures,
        reference: f.reference,
    };
    inst.validate()?;
    Ok(inst)
}

/// Reads DIMACS CNF: `c` comment lines, one `p cnf <vars> <clauses>` header,
/// then zero-terminated clauses that may span lines. A line starting with `%`
/// ends the input.
pub fn parse_dimacs(text: &str) -> Result<Cnf> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if let Some(rest) = line.strip_prefix('p') {
            if header.is_some() {
                bail!("line {}: second problem line", lineno + 1);
            }
            let fields: Vec<&str> = rest.split_whitespace().collect();
            match fields.as_slice() {
                ["cnf", v, c] => {
                    header = Some((v.parse().context("variable count")?, c.parse().context("clause count")?))
                }
                _ => bail!("line {}: expected \"p cnf <vars> <clauses>\"", lineno + 1),
            }
            continue;
        }
        if header.is_none() {
            bail!("line {}: clause before the problem line", lineno + 1);
        }
        for tok in line.split_whitespace() {
            let lit: i32 = tok
                .parse()
                .with_context(|| format!("line {}: bad literal {tok:?}", lineno + 1))?;
            if lit == 0 {
                clauses.push(std::mem::take(&mut current));
            } else {
                current.push(lit);
            }
        }
    }
    if !current.is_empty() {
        clauses.push(current);
    }
    let (vars, expected) = header.ok_or_else(|| anyhow!("missing \"p cnf\" problem line"))?;
    if clauses.len() != expected {
        bail!("problem line announces {expected} clauses, found {}", clauses.len());
    }
    Ok(Cnf::new(vars, clauses)?)
}

pub fn cnf_to_dimacs(cnf: &Cnf) -> String {
    let mut out = format!("p cnf {} {}\n", cnf.num_vars, cnf.clauses.len());
    for c in &cnf.clauses {
        for lit in c {
            out.push_str(&lit.to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    out
}
