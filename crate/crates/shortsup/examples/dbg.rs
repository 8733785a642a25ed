use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shortsup::config::{build_solver, PropChoice, Instantiation, DEFAULT_SUPPORT_CAP};
use shortsup::engine::SolverOptions;
use shortsup::model::{ConstraintDef, Model, Role};
use shortsup::literal::VarId;
use shortsup::oracle;

fn main() {
    let mut model = Model::new();
    let x0 = model.add_var("x0", vec![0, 1]);
    let y0 = model.add_var("y0", vec![0, 1, 2]);
    model.add_constraint(ConstraintDef::LexLeq { xs: vec![x0], ys: vec![y0] }, Role::Study);
    model.branch_order = vec![x0, y0];

    let choice = PropChoice::HaggisGac(Instantiation::Specific);
    let options = SolverOptions { audit: true, ..Default::default() };
    let mut solver = build_solver(&model, choice, options, DEFAULT_SUPPORT_CAP).unwrap();
    let def = &model.constraints[0].def;

    let mut rng = ChaCha8Rng::seed_from_u64(4246631593685615299);
    solver.push_node();
    solver.initialise().unwrap();
    println!("root: {:?}", solver.core.doms.snapshot());
    let mut snapshots = vec![solver.core.doms.snapshot()];
    for step in 0..12 {
        let depth = snapshots.len() - 1;
        let backtrack = depth > 0 && rng.gen_bool(0.3);
        if backtrack {
            solver.backtrack_node();
            snapshots.pop();
            println!("step {step}: backtrack -> {:?}", solver.core.doms.snapshot());
            assert_eq!(&solver.core.doms.snapshot(), snapshots.last().unwrap());
            continue;
        }
        let candidates: Vec<(VarId, u32)> = (0..model.num_vars() as u32)
            .map(VarId)
            .filter(|&x| solver.core.doms.size(x) > 1)
            .flat_map(|x| solver.core.doms.values(x).into_iter().map(move |v| (x, v)))
            .collect();
        let Some(&(x, v)) = candidates.get(rng.gen_range(0..candidates.len().max(1))) else { break };
        let mut after = solver.core.doms.snapshot();
        after[x.idx()].retain(|&w| w != v);
        let expect = oracle::brute_force_gac(def, &after, oracle::DEFAULT_CAP).unwrap();
        solver.push_node();
        let ok = solver.prune_external(x, v).and_then(|_| solver.drain());
        println!("step {step}: prune {x}->{v} ok={} got {:?} expect {:?}", ok.is_ok(), solver.core.doms.snapshot(), expect);
        match ok {
            Err(_) => { solver.backtrack_node(); }
            Ok(()) => {
                if solver.core.doms.snapshot() != expect { println!("MISMATCH at step {step}"); return; }
                snapshots.push(expect);
            }
        }
    }
}
