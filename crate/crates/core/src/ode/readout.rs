use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::units::{Chain, Layer};
use crate::{Error, Result};

/// `coeff · Π var^exponent`
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub coeff: f64,
    pub exponents: BTreeMap<String, f64>,
}

/// Right-hand side of one output as a sum of monomials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equation {
    pub output: String,
    pub terms: Vec<Term>,
}

fn num(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{} =", self.output)?;
        if self.terms.is_empty() {
            return write!(f, " 0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            let sign = if t.coeff < 0.0 { "-" } else { "+" };
            if k == 0 {
                write!(f, " {}{}", if t.coeff < 0.0 { "-" } else { "" }, num(t.coeff.abs()))?;
            } else {
                write!(f, " {sign} {}", num(t.coeff.abs()))?;
            }
            for (var, &e) in &t.exponents {
                if e == 1.0 {
                    write!(f, "*{var}")?;
                } else {
                    write!(f, "*{var}^{}", num(e))?;
                }
            }
        }
        Ok(())
    }
}

/// Reads a RealNPU → NAU chain as one monomial-sum equation per output.
///
/// Exponents are the gate-scaled real weights `ĝ_i · Wr_ji`; exponents and
/// coefficients with magnitude below `prune` are dropped. Variables in a
/// term are ordered by name.
pub fn readout_equations(chain: &Chain, vars: &[&str], prune: f64) -> Result<Vec<Equation>> {
    let (npu, nau) = match chain.layers() {
        [Layer::Npu(n), Layer::Nau(a)] if n.real_only => (n, a),
        _ => {
            return Err(Error::invalid(
                "readout model",
                format!("expected realnpu followed by nau, got {}", chain.describe()),
            ))
        }
    };
    let (hidden, inputs) = npu.wr.shape();
    if inputs != vars.len() {
        return Err(Error::invalid(
            "readout model",
            format!("{inputs} inputs but {} variable names", vars.len()),
        ));
    }
    let monomials: Vec<BTreeMap<String, f64>> = (0..hidden)
        .map(|j| {
            (0..inputs)
                .filter_map(|i| {
                    let gate = if npu.gated { npu.g.data()[i].clamp(0.0, 1.0) } else { 1.0 };
                    let e = gate * npu.wr.get(j, i);
                    (e.abs() >= prune).then(|| (vars[i].to_string(), e))
                })
                .collect()
        })
        .collect();
    let outputs = nau.a.rows();
    Ok((0..outputs)
        .map(|o| {
            let terms = (0..hidden)
                .filter_map(|j| {
                    let c = nau.a.get(o, j).clamp(-1.0, 1.0);
                    (c.abs() >= prune).then(|| Term {
                        coeff: c,
                        exponents: monomials[j].clone(),
                    })
                })
                .collect();
            Equation {
                output: vars.get(o).map_or_else(|| format!("y{o}"), |v| v.to_string()),
                terms,
            }
        })
        .collect())
}
