use queuetoll_core::continuum::{
    self, equilibrium_residual, solve_continuum_equilibrium, solve_continuum_optimum, ContinuumSpec, ThresholdAllocation,
};
use queuetoll_core::pricing::{self, PigouvianPrices};
use queuetoll_core::scenario::{Scenario, System};
use queuetoll_core::sim;
use queuetoll_core::social_opt::{self, StructureReport};
use queuetoll_core::wardrop::{self, PriceVector};
use queuetoll_core::{model, Error, RoutingMatrix, SystemSpec};
use serde_json::json;

use crate::report::{Cell, Report, Status, Table};

/// Failures that end a command early.
#[derive(Debug)]
pub enum Failure {
    /// Bad scenario, bad flags or a rejected input; exit code 1.
    Invalid(String),
    /// A solver could not produce an answer; exit code 2.
    NoConvergence(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NoSolution(_) => Failure::NoConvergence(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

pub type Outcome = std::result::Result<Report, Failure>;

#[derive(Debug, Clone, Copy, Default)]
pub struct Flags {
    pub oracle: bool,
    pub solve: bool,
}

fn invalid<T>(msg: &str) -> std::result::Result<T, Failure> {
    Err(Failure::Invalid(msg.into()))
}

/// `rank[j]` is the position of queue `j` in `order`.
fn ranks(order: &[usize], n: usize) -> Vec<Option<usize>> {
    let mut r = vec![None; n];
    for (k, &j) in order.iter().enumerate() {
        r[j] = Some(k);
    }
    r
}

fn rank_cell(r: Option<usize>) -> Cell {
    r.map_or(Cell::Text("unused".into()), Cell::from)
}

fn routing_table(name: &str, p: &RoutingMatrix, rank: &[Option<usize>]) -> Table {
    let mut headers = vec!["class".to_string()];
    headers.extend((0..p.cols()).map(|j| match rank[j] {
        Some(r) => format!("q{j} (rank {r})"),
        None => format!("q{j} (unused)"),
    }));
    let mut t = Table::with_headers(name, headers);
    for i in 0..p.rows() {
        let mut row: Vec<Cell> = vec![i.into()];
        row.extend(p.row(i).iter().map(|&x| Cell::Num(x)));
        t.push(row);
    }
    t
}

fn queue_table(spec: &SystemSpec, p: &RoutingMatrix, rank: &[Option<usize>], prices: Option<&PriceVector>) -> Table {
    let gamma = model::aggregate_rates(spec, p).expect("checked matrix");
    let mut headers = vec!["queue", "rank", "capacity", "flow", "cost D"];
    if prices.is_some() {
        headers.push("price");
    }
    let mut t = Table::new("queues", &headers);
    for (j, q) in spec.queues().iter().enumerate() {
        let mut row = vec![
            j.into(),
            rank_cell(rank[j]),
            q.capacity().into(),
            gamma[j].into(),
            q.value(gamma[j]).into(),
        ];
        if let Some(c) = prices {
            row.push(c.as_slice()[j].into());
        }
        t.push(row);
    }
    t
}

fn structure_tables(report: &mut Report, name: &str, s: &StructureReport) {
    let mut t = Table::new(name, &["classes", "queues", "violation"]);
    for v in &s.violations {
        t.push(vec![
            format!("{}, {}", v.classes.0, v.classes.1).into(),
            format!("{}, {}", v.queues.0, v.queues.1).into(),
            v.description.clone().into(),
        ]);
    }
    if !t.rows.is_empty() {
        report.tables.push(t);
    }
}

fn order_text(order: &[usize]) -> String {
    order.iter().map(|j| format!("q{j}")).collect::<Vec<_>>().join(" < ")
}

fn interval_table(cspec: &ContinuumSpec, alloc: &ThresholdAllocation, prices: Option<&PriceVector>) -> Table {
    let mut headers = vec!["rank", "queue", "beta low", "beta high", "flow", "cost D"];
    if prices.is_some() {
        headers.push("price");
    }
    let mut t = Table::new("intervals", &headers);
    for (k, &j) in alloc.used_queue_order.iter().enumerate() {
        let (lo, hi) = alloc.interval(cspec, k);
        let g = alloc.flows[j];
        let mut row: Vec<Cell> = vec![
            k.into(),
            j.into(),
            lo.into(),
            hi.into(),
            g.into(),
            cspec.queues()[j].value(g).into(),
        ];
        if let Some(c) = prices {
            row.push(c.as_slice()[j].into());
        }
        t.push(row);
    }
    t
}

/// Intervals higher in sensitivity must sit on strictly cheaper queues, and
/// an unused queue must be no cheaper empty than the worst used one.
fn continuum_delay_order(cspec: &ContinuumSpec, alloc: &ThresholdAllocation, tol: f64) -> bool {
    let d: Vec<f64> = alloc
        .used_queue_order
        .iter()
        .map(|&j| cspec.queues()[j].value(alloc.flows[j]))
        .collect();
    let worst = d.last().copied().unwrap_or(f64::INFINITY);
    d.windows(2).all(|w| w[0] < w[1] + tol)
        && (0..cspec.num_queues())
            .filter(|j| !alloc.used_queue_order.contains(j))
            .all(|j| cspec.queues()[j].value(0.0) >= worst - tol)
}

pub fn optimize(sc: &Scenario, flags: Flags) -> Outcome {
    let tol = sc.solver.check_tol;
    match &sc.system {
        System::Discrete(spec) => {
            let res = social_opt::solve_social_optimum(spec, &sc.solver.optimize)?;
            let structure = social_opt::check_optimal_structure(spec, &res.p_star, tol)?;
            let oracle = if flags.oracle {
                Some(social_opt::grid_oracle(
                    spec,
                    sc.solver.oracle_resolution,
                    sc.solver.optimize.execution,
                )?)
            } else {
                None
            };
            let rank = ranks(&structure.queue_order, spec.num_queues());
            let mut r = Report::new(
                "social optimum",
                json!({ "optimum": res, "structure": structure, "oracle": oracle.as_ref().map(|o| json!({
                    "u": o.u_star, "p": o.p_star, "resolution": sc.solver.oracle_resolution,
                    "delta": res.u_star - o.u_star,
                })) }),
            );
            r.line("social cost U", res.u_star);
            r.line("kkt residual", res.kkt_residual);
            r.line("restarts", res.restarts_used);
            r.line("converged", res.converged);
            r.line("queues by cost", order_text(&structure.queue_order));
            r.line("structure consistent", structure.is_consistent);
            if let Some(o) = &oracle {
                r.line("oracle U", o.u_star);
                r.line("oracle delta", res.u_star - o.u_star);
            }
            r.tables.push(routing_table("routing", &res.p_star, &rank));
            r.tables.push(queue_table(spec, &res.p_star, &rank, None));
            structure_tables(&mut r, "structure violations", &structure);
            if !res.converged {
                r.status = Status::NotConverged;
            }
            Ok(r)
        }
        System::Continuum(cspec) => {
            if flags.oracle {
                return invalid("--oracle is only available for discrete systems");
            }
            let res = solve_continuum_optimum(cspec, &sc.solver.continuum)?;
            let ordered = continuum_delay_order(cspec, &res.allocation, 1e-8);
            let mut r = Report::new("continuum social optimum", json!({ "optimum": res, "delay_ordered": ordered }));
            r.line("social cost U", res.cost);
            r.line("kkt residual", res.kkt_residual);
            r.line("orderings tried", res.orderings_tried);
            r.line("converged", res.converged);
            r.line("intervals ordered by cost", ordered);
            r.tables.push(interval_table(cspec, &res.allocation, None));
            if !res.converged {
                r.status = Status::NotConverged;
            }
            Ok(r)
        }
    }
}

pub fn equilibrium(sc: &Scenario) -> Outcome {
    let Some(prices) = &sc.prices else {
        return invalid("the scenario has no prices; equilibrium needs them");
    };
    match &sc.system {
        System::Discrete(spec) => {
            let res = wardrop::solve_equilibrium(spec, prices, &sc.solver.equilibrium)?;
            let structure = match wardrop::check_equilibrium_structure(spec, prices, &res.p_w, sc.solver.check_tol) {
                Ok(s) => Some(s),
                Err(Error::InvalidPrices(_)) => None,
                Err(e) => return Err(e.into()),
            };
            let rank = ranks(&prices.price_order(), spec.num_queues());
            let mut r = Report::new("wardrop equilibrium", json!({ "equilibrium": res, "structure": structure }));
            r.line("residual", res.residual);
            r.line("iterations", res.iterations);
            r.line("converged", res.converged);
            r.line("social cost U", model::social_cost(spec, &res.p_w)?);
            r.line(
                "queues by price",
                prices.price_order().iter().map(|j| format!("q{j}")).collect::<Vec<_>>().join(" > "),
            );
            match &structure {
                Some(s) => r.line("structure consistent", s.is_consistent),
                None => r.line("structure consistent", "not checked (tied prices)"),
            }
            r.tables.push(routing_table("routing", &res.p_w, &rank));
            r.tables.push(queue_table(spec, &res.p_w, &rank, Some(prices)));
            let mut classes = Table::new("classes", &["class", "expected cost"]);
            for (i, c) in res.per_class_cost.iter().enumerate() {
                classes.push(vec![i.into(), (*c).into()]);
            }
            r.tables.push(classes);
            if let Some(s) = &structure {
                structure_tables(&mut r, "structure violations", s);
            }
            if !res.converged {
                r.status = Status::NotConverged;
            }
            Ok(r)
        }
        System::Continuum(cspec) => {
            let res = solve_continuum_equilibrium(cspec, prices, &sc.solver.continuum_equilibrium)?;
            let mut r = Report::new("continuum equilibrium", json!({ "equilibrium": res }));
            r.line("residual", res.residual);
            r.line("social cost U", continuum::continuum_cost(cspec, &res.allocation)?);
            r.tables.push(interval_table(cspec, &res.allocation, Some(prices)));
            if res.residual > sc.solver.continuum_equilibrium.tol {
                r.status = Status::NotConverged;
            }
            Ok(r)
        }
    }
}

fn price_tables(r: &mut Report, p: &PigouvianPrices) {
    let n = p.by_queue.len();
    let rank = ranks(&p.delay_order, n);
    let mut by_queue = Table::new("prices by queue", &["queue", "rank", "price"]);
    for (j, (&rk, &c)) in rank.iter().zip(p.by_queue.as_slice()).enumerate() {
        by_queue.push(vec![j.into(), rank_cell(rk), c.into()]);
    }
    let mut sorted = Table::new("prices in cost order", &["rank", "queue", "price", "used"]);
    for (k, &j) in p.delay_order.iter().enumerate() {
        sorted.push(vec![k.into(), j.into(), p.sorted[k].into(), (!p.unused.contains(&j)).into()]);
    }
    r.tables.push(by_queue);
    r.tables.push(sorted);
}

pub fn prices(sc: &Scenario, flags: Flags) -> Outcome {
    let tol = sc.solver.check_tol;
    match &sc.system {
        System::Discrete(spec) => {
            let mut status = Status::Ok;
            let p = match (sc.routing_matrix(), flags.solve) {
                (_, true) => {
                    let res = social_opt::solve_social_optimum(spec, &sc.solver.optimize)?;
                    if !res.converged {
                        status = Status::NotConverged;
                    }
                    res.p_star
                }
                (Some(p), false) => p.clone(),
                (None, false) => return invalid("the scenario has no routing; add one or pass --solve"),
            };
            let prices = pricing::pigouvian_prices(spec, &p)?;
            let cert = pricing::certify_prices(spec, &p, &prices.by_queue, tol)?;
            let mut r = Report::new(
                "pigouvian prices",
                json!({ "prices": prices, "certification": cert, "tolerance": tol, "routing": p }),
            );
            r.line("certified", cert.certified);
            r.line("wardrop residual at these prices", cert.residual);
            r.line("tolerance", tol);
            price_tables(&mut r, &prices);
            r.status = status;
            Ok(r)
        }
        System::Continuum(cspec) => {
            let mut status = Status::Ok;
            let alloc = match (sc.threshold_allocation()?, flags.solve) {
                (_, true) => {
                    let res = solve_continuum_optimum(cspec, &sc.solver.continuum)?;
                    if !res.converged {
                        status = Status::NotConverged;
                    }
                    res.allocation
                }
                (Some(a), false) => a,
                (None, false) => return invalid("the scenario has no thresholds; add them or pass --solve"),
            };
            let prices = continuum::continuum_pigouvian_prices(cspec, &alloc)?;
            let residual = equilibrium_residual(cspec, &prices.by_queue, &alloc)?;
            let certified = residual <= tol;
            let mut r = Report::new(
                "continuum pigouvian prices",
                json!({ "prices": prices, "certification": { "certified": certified, "residual": residual }, "tolerance": tol, "allocation": alloc }),
            );
            r.line("certified", certified);
            r.line("indifference residual at these prices", residual);
            r.line("tolerance", tol);
            price_tables(&mut r, &prices);
            r.tables.push(interval_table(cspec, &alloc, Some(&prices.by_queue)));
            r.status = status;
            Ok(r)
        }
    }
}

pub fn verify(sc: &Scenario) -> Outcome {
    let tol = sc.solver.check_tol;
    match &sc.system {
        System::Discrete(spec) => {
            let Some(p) = sc.routing_matrix() else {
                return invalid("the scenario has no routing matrix to verify");
            };
            let optimal = social_opt::check_optimal_structure(spec, p, tol)?;
            let mut pass = optimal.is_consistent;
            let mut r = Report::new("structure checks", serde_json::Value::Null);
            r.line("sorted by cost", order_text(&optimal.queue_order));
            r.line("optimum structure", optimal.is_consistent);
            structure_tables(&mut r, "optimum structure violations", &optimal);
            let mut eq_json = serde_json::Value::Null;
            if let Some(prices) = &sc.prices {
                let residual = wardrop::wardrop_residual(spec, prices, p, tol)?;
                let structure = match wardrop::check_equilibrium_structure(spec, prices, p, tol) {
                    Ok(s) => Some(s),
                    Err(Error::InvalidPrices(_)) => None,
                    Err(e) => return Err(e.into()),
                };
                pass &= residual <= tol && structure.as_ref().is_none_or(|s| s.is_consistent);
                r.line("wardrop residual", residual);
                r.line("wardrop residual within tolerance", residual <= tol);
                match &structure {
                    Some(s) => {
                        r.line("equilibrium structure", s.is_consistent);
                        structure_tables(&mut r, "equilibrium structure violations", s);
                    }
                    None => r.line("equilibrium structure", "not checked (tied prices)"),
                }
                eq_json = json!({ "residual": residual, "structure": structure });
            }
            r.line("tolerance", tol);
            r.line("all checks pass", pass);
            r.json = json!({ "pass": pass, "tolerance": tol, "optimum_structure": optimal, "equilibrium": eq_json });
            if !pass {
                r.status = Status::NotConverged;
            }
            Ok(r)
        }
        System::Continuum(cspec) => {
            let Some(alloc) = sc.threshold_allocation()? else {
                return invalid("the scenario has no thresholds to verify");
            };
            let ordered = continuum_delay_order(cspec, &alloc, tol);
            let mut pass = ordered;
            let mut r = Report::new("structure checks", serde_json::Value::Null);
            r.line("intervals ordered by cost", ordered);
            let mut residual = None;
            if let Some(prices) = &sc.prices {
                let res = equilibrium_residual(cspec, prices, &alloc)?;
                pass &= res <= tol;
                r.line("indifference residual", res);
                residual = Some(res);
            }
            r.line("tolerance", tol);
            r.line("all checks pass", pass);
            r.json = json!({ "pass": pass, "tolerance": tol, "delay_ordered": ordered, "indifference_residual": residual });
            r.tables.push(interval_table(cspec, &alloc, sc.prices.as_ref()));
            if !pass {
                r.status = Status::NotConverged;
            }
            Ok(r)
        }
    }
}

pub fn simulate(sc: &Scenario, flags: Flags) -> Outcome {
    let System::Discrete(spec) = &sc.system else {
        return invalid("simulation is only available for discrete systems");
    };
    let Some(cfg) = &sc.sim else {
        return invalid("the scenario has no sim section");
    };
    let p = match (sc.routing_matrix(), flags.solve) {
        (_, true) => social_opt::solve_social_optimum(spec, &sc.solver.optimize)?.p_star,
        (Some(p), false) => p.clone(),
        (None, false) => return invalid("the scenario has no routing; add one or pass --solve"),
    };
    let (report, cmp) = sim::compare_to_analytic(spec, &p, cfg)?;
    let u = model::social_cost(spec, &p)?;
    let mut r = Report::new(
        "simulation",
        json!({ "report": report, "comparison": cmp, "analytic_social_cost": u }),
    );
    r.line("discipline", format!("{:?}", cfg.discipline).to_lowercase());
    r.line("horizon", cfg.horizon);
    r.line("warmup", report.warmup);
    r.line("replications", report.replications as usize);
    r.line("events", report.events_processed);
    r.line("analytic U", u);
    r.line("empirical U", report.social_cost.map(|e| e.mean));
    r.line("U half-width", report.social_cost.map(|e| e.half_width));
    let mut t = Table::new(
        "comparison",
        &[
            "queue",
            "measure",
            "analytic",
            "empirical",
            "half-width",
            "z",
            "little z",
            "divergent",
            "note",
        ],
    );
    for (c, q) in cmp.iter().zip(&report.queues) {
        t.push(vec![
            c.queue.into(),
            c.measure.clone().into(),
            c.analytic.into(),
            c.empirical.map(|e| e.mean).into(),
            c.empirical.map(|e| e.half_width).into(),
            c.z_score.into(),
            q.little_z.into(),
            q.divergent.into(),
            c.note.clone().map_or(Cell::Empty, Cell::from),
        ]);
    }
    r.tables.push(t);
    let gamma = model::aggregate_rates(spec, &p)?;
    let mut q = Table::new(
        "queues",
        &[
            "queue",
            "flow",
            "work rate",
            "arrival rate",
            "mean sojourn",
            "mean in system",
            "departures",
        ],
    );
    for s in &report.queues {
        q.push(vec![
            s.queue.into(),
            gamma[s.queue].into(),
            s.work_rate.map(|e| e.mean).into(),
            s.arrival_rate.map(|e| e.mean).into(),
            s.mean_sojourn.map(|e| e.mean).into(),
            s.mean_in_system.map(|e| e.mean).into(),
            s.departures.into(),
        ]);
    }
    r.tables.push(q);
    let mut classes = Table::new("classes", &["class", "departures", "mean sojourn", "mean cost"]);
    for c in &report.classes {
        classes.push(vec![
            c.class.into(),
            c.departures.into(),
            c.mean_sojourn.map(|e| e.mean).into(),
            c.mean_cost.map(|e| e.mean).into(),
        ]);
    }
    r.tables.push(classes);
    Ok(r)
}
