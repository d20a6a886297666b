use std::sync::Arc;

use super::expr::{Env, Expr};
use super::{DiagKind, Diagnostic, ModelSpec, OpLit, Pos, Probe, SweepSpec};
use crate::error::Error;
use crate::linalg::{c, kron, pauli, CMatrix, C64, I, ONE};
use crate::liouville::{models::plus_state, Jump, LiouvilleState, OpenSystemModel};

/// A compiled model together with the run settings declared in its file.
#[derive(Clone, Debug)]
pub struct CompiledModel {
    pub model: OpenSystemModel,
    pub param_name: String,
    pub default_theta: f64,
    pub probe: LiouvilleState,
    pub sweep: SweepSpec,
}

fn op_matrix(op: &OpLit) -> CMatrix {
    match op {
        OpLit::Pauli { negative, imaginary, letters } => {
            let mut m = CMatrix::identity(1);
            for ch in letters.chars() {
                let f = match ch {
                    'I' => pauli::id(),
                    'X' => pauli::x(),
                    'Y' => pauli::y(),
                    _ => pauli::z(),
                };
                m = kron(&m, &f);
            }
            let mut s = if *imaginary { I } else { ONE };
            if *negative {
                s = -s;
            }
            m.scale(s)
        }
        OpLit::Matrix(rows) => CMatrix::from_rows(rows),
    }
}

fn semantic(pos: Pos, message: String, expected: &[&str]) -> Diagnostic {
    Diagnostic::new(pos, DiagKind::Semantic, message, expected)
}

/// Builds the model: coefficient trees become θ-maps, and their symbolic
/// derivatives supply ∂θH and ∂θγ. H must be Hermitian and rates non-negative
/// at the declared default.
pub fn compile(spec: &ModelSpec) -> Result<CompiledModel, Diagnostic> {
    let param = spec.param.name.clone();
    let mut env = Env { param: param.clone(), ..Env::default() };
    for cd in &spec.consts {
        if cd.value.depends_on(&param) {
            return Err(semantic(cd.pos, format!("constant '{}' depends on the parameter", cd.name), &["a constant expression"]));
        }
        let v = cd.value.eval(&env, 0.0).map_err(|m| semantic(cd.pos, m, &["declared symbol"]))?;
        if !v.is_finite() {
            return Err(semantic(cd.pos, format!("constant '{}' is not finite", cd.name), &["finite value"]));
        }
        env.consts.insert(cd.name.clone(), v);
    }

    let mut dim = spec.dim;
    let ops = spec.hamiltonian.iter().map(|t| (&t.op, t.pos)).chain(spec.dissipators.iter().map(|d| (&d.op, d.pos)));
    for (op, pos) in ops {
        let d = op.dim();
        match dim {
            None => dim = Some(d),
            Some(m) if m != d => {
                return Err(Diagnostic::new(
                    pos,
                    DiagKind::Dimension,
                    format!("operator {op} acts on dimension {d}, model dimension is {m}"),
                    &[&format!("{m}×{m} operator")],
                ))
            }
            _ => {}
        }
    }
    let dim = dim.ok_or_else(|| {
        semantic(spec.param.pos, "model has no operators and no declared dimension".into(), &["dim", "[hamiltonian]"])
    })?;

    let probe = match &spec.probe {
        Probe::Plus => plus_state(dim),
        Probe::Basis(k) if *k < dim => {
            let mut v = vec![C64::new(0.0, 0.0); dim];
            v[*k] = ONE;
            LiouvilleState::pure(&v).expect("unit vector")
        }
        Probe::Basis(k) => {
            return Err(Diagnostic::new(spec.param.pos, DiagKind::Dimension, format!("basis({k}) outside dimension {dim}"), &[&format!("index < {dim}")]))
        }
        Probe::Vector(v) if v.len() == dim => LiouvilleState::pure(v)
            .map_err(|e| semantic(spec.param.pos, format!("invalid probe: {e}"), &["non-zero vector"]))?,
        Probe::Vector(v) => {
            return Err(Diagnostic::new(
                spec.param.pos,
                DiagKind::Dimension,
                format!("probe has {} entries, model dimension is {dim}", v.len()),
                &[&format!("{dim} entries")],
            ))
        }
    };

    let env = Arc::new(env);
    let h_terms: Arc<Vec<(Expr, Expr, CMatrix)>> = Arc::new(
        spec.hamiltonian
            .iter()
            .map(|t| (t.coeff.clone(), t.coeff.derivative(&param), op_matrix(&t.op)))
            .collect(),
    );
    let sum = move |terms: &[(Expr, Expr, CMatrix)], env: &Env, th: f64, deriv: bool| -> CMatrix {
        let mut acc = CMatrix::zeros(dim, dim);
        for (e, de, op) in terms {
            let k = if deriv { de } else { e }.eval(env, th).unwrap_or(f64::NAN);
            acc = &acc + &op.scale(c(k, 0.0));
        }
        acc
    };
    let (ht, he) = (h_terms.clone(), env.clone());
    let (dt, de) = (h_terms, env.clone());
    let mut model = OpenSystemModel::new(dim, move |th| sum(&ht, &he, th, false))
        .with_h_derivative(move |th| sum(&dt, &de, th, true));
    for d in &spec.dissipators {
        let (r, dr) = (d.rate.clone(), d.rate.derivative(&param));
        let (e1, e2) = (env.clone(), env.clone());
        model.push_jump(Jump {
            op: op_matrix(&d.op),
            rate: Arc::new(move |th| r.eval(&e1, th).unwrap_or(f64::NAN)),
            d_rate: Some(Arc::new(move |th| dr.eval(&e2, th).unwrap_or(f64::NAN))),
        });
    }

    let theta = spec.param.default;
    match model.validate_at(theta) {
        Ok(()) => {}
        Err(Error::NegativeRate { index, rate }) => {
            return Err(semantic(
                spec.dissipators[index].pos,
                format!("rate evaluates to {rate} at {} = {theta}", spec.param.name),
                &["non-negative rate"],
            ))
        }
        Err(Error::NotHermitian(err)) => {
            let pos = spec.hamiltonian.first().map(|t| t.pos).unwrap_or_default();
            return Err(semantic(pos, format!("Hamiltonian is not Hermitian (deviation {err:.3e})"), &["Hermitian terms"]))
        }
        Err(e) => {
            let pos = spec.hamiltonian.first().map(|t| t.pos).unwrap_or(spec.param.pos);
            return Err(semantic(pos, e.to_string(), &["finite coefficients"]));
        }
    }
    Ok(CompiledModel { model, param_name: param, default_theta: theta, probe, sweep: spec.sweep.clone() })
}
