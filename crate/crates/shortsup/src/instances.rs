//! Benchmark model builders: quasigroup existence (QG3), balanced incomplete
//! block designs with double-lex symmetry breaking, rectangle packing, and
//! table models defined by short-support lists.
//!
//! In each family the constraint pattern under study (element, lex,
//! non-overlap, table) is marked `Study`; the remaining constraints are
//! plumbing and always propagate with the direct GAC filters.

use crate::literal::{Val, VarId};
use crate::model::{ConstraintDef, ElemTarget, Model, ModelError, Role, Support};
use crate::sources::{parse_support_file, SupportFileError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// QG3 quasigroup existence of order `n`: an n-by-n table `qq` with
/// all-different rows, columns and main diagonal, and for all i,j the
/// property qq[qq[i,j], qq[j,i]] = i expressed through auxiliary index
/// variables aux[i,j] = n*qq[i,j] + qq[j,i] and element constraints over the
/// flattened table.
pub fn build_qg3(n: u32) -> Result<Model, ModelError> {
    if n < 2 {
        return Err(ModelError::BadParam("qg3 needs n >= 2".into()));
    }
    let mut m = Model::new();
    let mut qq = vec![vec![VarId(0); n as usize]; n as usize];
    for i in 0..n {
        for j in 0..n {
            qq[i as usize][j as usize] = m.add_range_var(format!("qq[{i},{j}]"), 0, n - 1);
        }
    }
    let mut aux = vec![vec![VarId(0); n as usize]; n as usize];
    for i in 0..n {
        for j in 0..n {
            aux[i as usize][j as usize] = m.add_range_var(format!("aux[{i},{j}]"), 0, n * n - 1);
        }
    }
    for i in 0..n as usize {
        let row: Vec<VarId> = (0..n as usize).map(|j| qq[i][j]).collect();
        m.add_constraint(ConstraintDef::AllDifferent { vars: row }, Role::Plumbing);
    }
    for j in 0..n as usize {
        let col: Vec<VarId> = (0..n as usize).map(|i| qq[i][j]).collect();
        m.add_constraint(ConstraintDef::AllDifferent { vars: col }, Role::Plumbing);
    }
    let diag: Vec<VarId> = (0..n as usize).map(|i| qq[i][i]).collect();
    m.add_constraint(ConstraintDef::AllDifferent { vars: diag }, Role::Plumbing);
    let flat: Vec<VarId> = (0..n as usize)
        .flat_map(|i| (0..n as usize).map(move |j| (i, j)))
        .map(|(i, j)| qq[i][j])
        .collect();
    for i in 0..n as usize {
        for j in 0..n as usize {
            m.add_constraint(
                ConstraintDef::LinearAux {
                    coeff: n,
                    p: qq[i][j],
                    q: qq[j][i],
                    aux: aux[i][j],
                },
                Role::Plumbing,
            );
            m.add_constraint(
                ConstraintDef::Element {
                    array: flat.clone(),
                    index: aux[i][j],
                    result: ElemTarget::Const(i as Val),
                },
                Role::Study,
            );
        }
    }
    m.branch_order = (0..m.num_vars() as u32).map(VarId).collect();
    Ok(m)
}

/// Balanced incomplete block design with parameters (4n+3, 4n+3, 2n+1, 2n+1,
/// n): a v-by-b 0/1 matrix with fixed row and column sums and a scalar
/// product of n between every pair of rows (decomposed through and-gates),
/// double-lex symmetry breaking on adjacent rows and columns.
pub fn build_bibd(n: u32) -> Result<Model, ModelError> {
    if n < 1 {
        return Err(ModelError::BadParam("bibd needs n >= 1".into()));
    }
    let v = (4 * n + 3) as usize;
    let b = v;
    let r = 2 * n + 1;
    let k = r;
    let lambda = n;
    let mut m = Model::new();
    let mut cell = vec![vec![VarId(0); b]; v];
    for i in 0..v {
        for j in 0..b {
            cell[i][j] = m.add_var(format!("m[{i},{j}]"), vec![0, 1]);
        }
    }
    // and-gates per row pair, one per column
    let mut gates: Vec<((usize, usize), Vec<VarId>)> = Vec::new();
    for p in 0..v {
        for q in p + 1..v {
            let gs: Vec<VarId> = (0..b)
                .map(|j| m.add_var(format!("and[{p},{q},{j}]"), vec![0, 1]))
                .collect();
            gates.push(((p, q), gs));
        }
    }
    for i in 0..v {
        m.add_constraint(
            ConstraintDef::BoolSumEq {
                vars: cell[i].clone(),
                sum: r,
            },
            Role::Plumbing,
        );
    }
    for j in 0..b {
        let col: Vec<VarId> = (0..v).map(|i| cell[i][j]).collect();
        m.add_constraint(ConstraintDef::BoolSumEq { vars: col, sum: k }, Role::Plumbing);
    }
    for ((p, q), gs) in &gates {
        for j in 0..b {
            m.add_constraint(
                ConstraintDef::BoolAnd {
                    a: cell[*p][j],
                    b: cell[*q][j],
                    r: gs[j],
                },
                Role::Plumbing,
            );
        }
        m.add_constraint(
            ConstraintDef::BoolSumEq {
                vars: gs.clone(),
                sum: lambda,
            },
            Role::Plumbing,
        );
    }
    // double lex: each row below-or-equal to the previous, likewise columns
    for i in 0..v - 1 {
        m.add_constraint(
            ConstraintDef::LexLeq {
                xs: cell[i + 1].clone(),
                ys: cell[i].clone(),
            },
            Role::Study,
        );
    }
    for j in 0..b - 1 {
        let col_a: Vec<VarId> = (0..v).map(|i| cell[i][j + 1]).collect();
        let col_b: Vec<VarId> = (0..v).map(|i| cell[i][j]).collect();
        m.add_constraint(ConstraintDef::LexLeq { xs: col_a, ys: col_b }, Role::Study);
    }
    m.branch_order = (0..m.num_vars() as u32).map(VarId).collect();
    Ok(m)
}

/// Packing of all squares from 1x1 to nxn into a width-by-height rectangle:
/// pairwise non-overlap constraints, branching in decreasing square size with
/// x before y, and the largest square's domains halved to break the flip
/// symmetries.
pub fn build_rect_pack(n: u32, width: u32, height: u32) -> Result<Model, ModelError> {
    if n < 1 || width < n || height < n {
        return Err(ModelError::BadParam(
            "rectpack needs n >= 1 and width, height >= n".into(),
        ));
    }
    let mut m = Model::new();
    let mut xs = vec![VarId(0)];
    let mut ys = vec![VarId(0)];
    for i in 1..=n {
        let (mut hx, mut hy) = (width - i, height - i);
        if i == n {
            hx = (width - n) / 2;
            hy = (height - n) / 2;
        }
        xs.push(m.add_range_var(format!("x[{i}]"), 0, hx));
        ys.push(m.add_range_var(format!("y[{i}]"), 0, hy));
    }
    for i in 1..=n as usize {
        for j in i + 1..=n as usize {
            m.add_constraint(
                ConstraintDef::NonOverlap {
                    xi: xs[i],
                    xj: xs[j],
                    yi: ys[i],
                    yj: ys[j],
                    si: i as Val,
                    sj: j as Val,
                },
                Role::Study,
            );
        }
    }
    // branch largest first, x before y
    let mut order = Vec::new();
    for i in (1..=n as usize).rev() {
        order.push(xs[i]);
        order.push(ys[i]);
    }
    m.branch_order = order;
    Ok(m)
}

#[derive(Debug, thiserror::Error)]
pub enum TableModelError {
    #[error(transparent)]
    Parse(#[from] SupportFileError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("support value {0} outside domain 0..{1}")]
    ValueOutOfRange(Val, u32),
}

/// A model with one table constraint read from a support-list file. All
/// variables share the domain {0..d-1} where `d` defaults to one above the
/// largest value appearing in the file.
pub fn build_table_from_file(
    text: &str,
    domain_size: Option<u32>,
) -> Result<Model, TableModelError> {
    let file = parse_support_file(text)?;
    let max_val = file
        .supports
        .iter()
        .flat_map(|s| s.iter().map(|&(_, v)| v))
        .max()
        .unwrap_or(0);
    let d = domain_size.unwrap_or(max_val + 1);
    if max_val >= d {
        return Err(TableModelError::ValueOutOfRange(max_val, d));
    }
    let mut m = Model::new();
    let vars: Vec<VarId> = file
        .scope
        .iter()
        .map(|name| m.add_range_var(name.clone(), 0, d - 1))
        .collect();
    let supports: Vec<Support> = file
        .supports
        .iter()
        .map(|s| s.iter().map(|&(i, v)| (vars[i], v)).collect())
        .collect();
    m.add_constraint(
        ConstraintDef::Table {
            vars: vars.clone(),
            supports,
        },
        Role::Study,
    );
    m.branch_order = vars;
    Ok(m)
}

/// A random table model: `count` short supports over `arity` variables with
/// domains {0..d-1}, each support binding a random non-empty subset of the
/// scope. Deterministic in the seed.
pub fn random_table_model(seed: u64, arity: u32, d: u32, count: u32) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Model::new();
    let vars: Vec<VarId> = (0..arity)
        .map(|i| m.add_range_var(format!("v{i}"), 0, d - 1))
        .collect();
    let mut supports: Vec<Support> = Vec::new();
    for _ in 0..count {
        let len = rng.gen_range(1..=arity as usize);
        let mut picked: Vec<usize> = (0..arity as usize).collect();
        for i in (1..picked.len()).rev() {
            let j = rng.gen_range(0..=i);
            picked.swap(i, j);
        }
        picked.truncate(len);
        picked.sort_unstable();
        let sup: Support = picked
            .into_iter()
            .map(|i| (vars[i], rng.gen_range(0..d)))
            .collect();
        if !supports.contains(&sup) {
            supports.push(sup);
        }
    }
    m.add_constraint(
        ConstraintDef::Table {
            vars: vars.clone(),
            supports,
        },
        Role::Study,
    );
    m.branch_order = vars;
    m
}
