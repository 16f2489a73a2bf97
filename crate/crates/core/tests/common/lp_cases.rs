use clsc_core::solver::{LpStatus, MilpProblem, ObjectiveSense, RowSense};

pub struct LpCase {
    pub name: &'static str,
    pub problem: MilpProblem<f64>,
    pub status: LpStatus,
    pub objective: Option<f64>,
}

const INF: f64 = f64::INFINITY;
use ObjectiveSense::{Maximize as Max, Minimize as Min};
use RowSense::{Eq as E, Ge as G, Le as L};

fn lp(sense: ObjectiveSense, bounds: &[(f64, f64)], obj: &[f64], rows: &[(&[f64], RowSense, f64)]) -> MilpProblem<f64> {
    let mut p = MilpProblem::new(sense);
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        p.add_continuous(format!("x{j}"), lo, hi);
    }
    for (i, (a, s, b)) in rows.iter().enumerate() {
        let terms = a.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, c)| (j, *c)).collect();
        p.add_constraint(format!("r{i}"), terms, *s, *b);
    }
    let terms = obj.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, c)| (j, *c)).collect();
    p.set_objective(sense, terms, 0.0);
    p
}

fn case(name: &'static str, problem: MilpProblem<f64>, status: LpStatus, objective: Option<f64>) -> LpCase {
    LpCase {
        name,
        problem,
        status,
        objective,
    }
}

/// Twenty small LPs with hand-derived answers.
pub fn lp_cases() -> Vec<LpCase> {
    use LpStatus::*;
    let nn = (0.0, INF);
    let mut v = Vec::new();

    // vertex (3, 1)
    v.push(case(
        "two-row max",
        lp(Max, &[nn, nn], &[3.0, 2.0], &[(&[1.0, 1.0], L, 4.0), (&[1.0, 3.0], L, 6.0), (&[1.0, 0.0], L, 3.0)]),
        Optimal,
        Some(11.0),
    ));
    // x = 8/5, y = 6/5
    v.push(case(
        "covering min",
        lp(Min, &[nn, nn], &[1.0, 1.0], &[(&[1.0, 2.0], G, 4.0), (&[3.0, 1.0], G, 6.0)]),
        Optimal,
        Some(14.0 / 5.0),
    ));
    v.push(case(
        "equality with lower bound",
        lp(Max, &[nn, (2.0, INF)], &[1.0, 0.0], &[(&[1.0, 1.0], E, 5.0)]),
        Optimal,
        Some(3.0),
    ));
    // z = 3, x = 4.5, y = 2.5
    v.push(case(
        "mixed equalities",
        lp(Min, &[nn, nn, (0.0, 3.0)], &[2.0, 3.0, 1.0], &[(&[1.0, 1.0, 1.0], E, 10.0), (&[1.0, -1.0, 0.0], E, 2.0)]),
        Optimal,
        Some(19.5),
    ));
    v.push(case(
        "negative lower bounds",
        lp(Max, &[(-5.0, 2.0), (-3.0, 4.0)], &[1.0, 1.0], &[(&[1.0, -1.0], L, 1.0)]),
        Optimal,
        Some(6.0),
    ));
    v.push(case(
        "free column",
        lp(Min, &[(-INF, INF)], &[1.0], &[(&[1.0], G, -7.0)]),
        Optimal,
        Some(-7.0),
    ));
    v.push(case(
        "upper-bounded only",
        lp(Max, &[(-INF, 3.0), nn], &[1.0, 0.0], &[(&[1.0, 1.0], L, 10.0)]),
        Optimal,
        Some(3.0),
    ));
    let mut constant = lp(Max, &[(0.0, 2.0)], &[1.0], &[]);
    constant.objective.constant = 5.0;
    v.push(case("objective constant", constant, Optimal, Some(7.0)));
    v.push(case(
        "fixed column",
        lp(Min, &[(2.0, 2.0), nn], &[1.0, 1.0], &[(&[1.0, 1.0], G, 5.0)]),
        Optimal,
        Some(5.0),
    ));
    v.push(case(
        "redundant equalities",
        lp(Max, &[(0.0, 10.0), (0.0, 10.0)], &[1.0, -1.0], &[(&[1.0, 1.0], E, 2.0), (&[2.0, 2.0], E, 4.0)]),
        Optimal,
        Some(2.0),
    ));
    // supplies 20, 30; demands 25, 25; ship 20 + 5 on the cheap arcs and 25 on the other
    v.push(case(
        "transportation",
        lp(
            Min,
            &[nn, nn, nn, nn],
            &[1.0, 3.0, 2.0, 1.0],
            &[
                (&[1.0, 1.0, 0.0, 0.0], L, 20.0),
                (&[0.0, 0.0, 1.0, 1.0], L, 30.0),
                (&[1.0, 0.0, 1.0, 0.0], G, 25.0),
                (&[0.0, 1.0, 0.0, 1.0], G, 25.0),
            ],
        ),
        Optimal,
        Some(55.0),
    ));
    // only z is worth producing: 4 per unit, row 2 limits it to 5
    v.push(case(
        "three products",
        lp(Max, &[nn, nn, nn], &[2.0, 3.0, 4.0], &[(&[3.0, 2.0, 1.0], L, 10.0), (&[2.0, 5.0, 3.0], L, 15.0)]),
        Optimal,
        Some(20.0),
    ));

    v.push(case(
        "contradictory rows",
        lp(Max, &[nn, nn], &[1.0, 1.0], &[(&[1.0, 1.0], L, 1.0), (&[1.0, 1.0], G, 2.0)]),
        Infeasible,
        None,
    ));
    v.push(case(
        "row against bound",
        lp(Min, &[(0.0, 2.0)], &[1.0], &[(&[1.0], G, 3.0)]),
        Infeasible,
        None,
    ));
    v.push(case(
        "equality out of reach",
        lp(Max, &[(0.0, 1.0), (0.0, 1.0)], &[1.0, 0.0], &[(&[1.0, 1.0], E, 5.0)]),
        Infeasible,
        None,
    ));

    v.push(case(
        "open ray",
        lp(Max, &[nn, nn], &[1.0, 1.0], &[(&[1.0, -1.0], L, 1.0)]),
        Unbounded,
        None,
    ));
    v.push(case(
        "free column descending",
        lp(Min, &[(-INF, INF), nn], &[1.0, 0.0], &[(&[1.0, 1.0], L, 4.0)]),
        Unbounded,
        None,
    ));
    v.push(case(
        "ray through equality",
        lp(Max, &[nn, nn, nn], &[1.0, 0.0, 0.0], &[(&[1.0, -1.0, 0.0], E, 2.0), (&[0.0, 0.0, 1.0], L, 1.0)]),
        Unbounded,
        None,
    ));

    // Beale's cycling example; optimum -5/4 at x0 = 1, x2 = 1
    v.push(case(
        "cycling example",
        lp(
            Min,
            &[nn, nn, nn, nn],
            &[-0.75, 20.0, -0.5, 6.0],
            &[
                (&[0.25, -8.0, -1.0, 9.0], L, 0.0),
                (&[0.5, -12.0, -0.5, 3.0], L, 0.0),
                (&[0.0, 0.0, 1.0, 0.0], L, 1.0),
            ],
        ),
        Optimal,
        Some(-1.25),
    ));
    // four rows tight at (1, 1)
    v.push(case(
        "degenerate vertex",
        lp(
            Max,
            &[nn, nn],
            &[1.0, 1.0],
            &[(&[1.0, 0.0], L, 1.0), (&[0.0, 1.0], L, 1.0), (&[1.0, 1.0], L, 2.0), (&[2.0, 1.0], L, 3.0)],
        ),
        Optimal,
        Some(2.0),
    ));
    v
}
