//! One replication of the event-driven simulation.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{Discipline, JobSizeFamily};
use crate::cost::CostModel;
use crate::rng::{self, Purpose, StreamKey};

#[derive(Debug, Clone, Copy)]
pub(super) struct Job {
    arrival: f64,
    size: f64,
    class: usize,
    /// Time spent before first receiving service.
    wait: f64,
}

struct Timed {
    key: f64,
    id: usize,
}

impl PartialEq for Timed {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Timed {}
impl PartialOrd for Timed {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Timed {
    // Reversed so the max-heap pops the earliest key.
    fn cmp(&self, o: &Self) -> Ordering {
        o.key.total_cmp(&self.key).then(o.id.cmp(&self.id))
    }
}

enum Server {
    Fcfs {
        line: VecDeque<Job>,
        /// Service start of the head job.
        started: f64,
    },
    /// Egalitarian processor sharing on a virtual clock that advances at
    /// `rate / n`; a job leaves when the clock passes its virtual finish.
    Ps {
        clock: f64,
        heap: BinaryHeap<Timed>,
        jobs: Vec<Option<Job>>,
        free: Vec<usize>,
    },
    /// Preemptive LCFS: the newest job is served, others keep their
    /// remaining work on the stack.
    LcfsPr { stack: Vec<(Job, f64)> },
}

struct Queue {
    rate: f64,
    server: Server,
    /// Time the state was last advanced to.
    last: f64,
}

impl Queue {
    fn new(rate: f64, discipline: Discipline) -> Self {
        let server = match discipline {
            Discipline::Fcfs => Server::Fcfs {
                line: VecDeque::new(),
                started: 0.0,
            },
            Discipline::Ps => Server::Ps {
                clock: 0.0,
                heap: BinaryHeap::new(),
                jobs: Vec::new(),
                free: Vec::new(),
            },
            Discipline::LcfsPr => Server::LcfsPr { stack: Vec::new() },
        };
        Self { rate, server, last: 0.0 }
    }

    fn len(&self) -> usize {
        match &self.server {
            Server::Fcfs { line, .. } => line.len(),
            Server::Ps { heap, .. } => heap.len(),
            Server::LcfsPr { stack } => stack.len(),
        }
    }

    /// Brings service progress up to `t`.
    fn advance(&mut self, t: f64) {
        let dt = t - self.last;
        match &mut self.server {
            Server::Fcfs { .. } => {}
            Server::Ps { clock, heap, .. } => {
                if !heap.is_empty() {
                    *clock += dt * self.rate / heap.len() as f64;
                }
            }
            Server::LcfsPr { stack } => {
                if let Some(top) = stack.last_mut() {
                    top.1 -= dt * self.rate;
                }
            }
        }
        self.last = t;
    }

    fn next_departure(&self) -> f64 {
        match &self.server {
            Server::Fcfs { line, started } => line.front().map_or(f64::INFINITY, |j| started + j.size / self.rate),
            Server::Ps { clock, heap, .. } => heap.peek().map_or(f64::INFINITY, |h| {
                self.last + (h.key - clock).max(0.0) * heap.len() as f64 / self.rate
            }),
            Server::LcfsPr { stack } => stack.last().map_or(f64::INFINITY, |(_, rem)| self.last + rem.max(0.0) / self.rate),
        }
    }

    fn arrive(&mut self, t: f64, mut job: Job) {
        self.advance(t);
        match &mut self.server {
            Server::Fcfs { line, started } => {
                if line.is_empty() {
                    *started = t;
                }
                line.push_back(job);
            }
            Server::Ps { clock, heap, jobs, free } => {
                job.wait = 0.0;
                let key = *clock + job.size;
                let id = match free.pop() {
                    Some(id) => {
                        jobs[id] = Some(job);
                        id
                    }
                    None => {
                        jobs.push(Some(job));
                        jobs.len() - 1
                    }
                };
                heap.push(Timed { key, id });
            }
            Server::LcfsPr { stack } => {
                job.wait = 0.0;
                stack.push((job, job.size));
            }
        }
    }

    fn depart(&mut self, t: f64) -> Job {
        self.advance(t);
        match &mut self.server {
            Server::Fcfs { line, started } => {
                let mut job = line.pop_front().expect("departure from a busy queue");
                job.wait = *started - job.arrival;
                *started = t;
                job
            }
            Server::Ps { clock, heap, jobs, free } => {
                let h = heap.pop().expect("departure from a busy queue");
                if heap.is_empty() {
                    *clock = 0.0;
                }
                free.push(h.id);
                jobs[h.id].take().expect("live job")
            }
            Server::LcfsPr { stack } => stack.pop().expect("departure from a busy queue").0,
        }
    }
}

/// Per-batch accumulators of one replication.
#[derive(Debug, Clone)]
pub(super) struct BatchData {
    /// `[batch][queue]`
    pub arrivals: Vec<Vec<u64>>,
    pub work: Vec<Vec<f64>>,
    pub departures: Vec<Vec<u64>>,
    pub sojourn: Vec<Vec<f64>>,
    pub over_threshold: Vec<Vec<u64>>,
    pub area: Vec<Vec<f64>>,
    /// `[batch][class]`
    pub class_departures: Vec<Vec<u64>>,
    pub class_sojourn: Vec<Vec<f64>>,
    pub class_cost: Vec<Vec<f64>>,
    pub events: u64,
}

impl BatchData {
    fn new(batches: usize, n: usize, m: usize) -> Self {
        let q = || vec![vec![0; n]; batches];
        let qf = || vec![vec![0.0; n]; batches];
        Self {
            arrivals: q(),
            work: qf(),
            departures: q(),
            sojourn: qf(),
            over_threshold: q(),
            area: qf(),
            class_departures: vec![vec![0; m]; batches],
            class_sojourn: vec![vec![0.0; m]; batches],
            class_cost: vec![vec![0.0; m]; batches],
            events: 0,
        }
    }
}

pub(super) struct Setup<'a> {
    pub rates: Vec<f64>,
    pub sensitivities: Vec<f64>,
    pub customer_sensitivities: Vec<f64>,
    pub mean_sizes: Vec<f64>,
    pub size_families: Vec<JobSizeFamily>,
    /// Row-major `M x N` routing probabilities.
    pub routing: &'a [f64],
    pub queues: &'a [CostModel],
    pub discipline: Discipline,
    pub thresholds: Vec<Option<f64>>,
    pub horizon: f64,
    pub warmup: f64,
    pub batches: usize,
    pub seed: u64,
}

struct ClassStreams {
    arrivals: ChaCha8Rng,
    routing: ChaCha8Rng,
    sizes: ChaCha8Rng,
    gap: Exp<f64>,
    size: Option<Exp<f64>>,
}

pub(super) fn replicate(setup: &Setup<'_>, replication: u32) -> BatchData {
    let n = setup.queues.len();
    let m = setup.rates.len();
    let b = setup.batches;
    let len = (setup.horizon - setup.warmup) / b as f64;
    let batch_of = |t: f64| -> Option<usize> { (t >= setup.warmup).then(|| (((t - setup.warmup) / len) as usize).min(b - 1)) };
    let mut data = BatchData::new(b, n, m);
    let mut queues: Vec<Queue> = setup.queues.iter().map(|q| Queue::new(q.capacity(), setup.discipline)).collect();
    let mut streams: Vec<ClassStreams> = (0..m)
        .map(|i| {
            let key = |p| StreamKey::new(replication, i as u16, p);
            ClassStreams {
                arrivals: rng::stream(setup.seed, key(Purpose::Interarrival)),
                routing: rng::stream(setup.seed, key(Purpose::Routing)),
                sizes: rng::stream(setup.seed, key(Purpose::JobSize)),
                gap: Exp::new(setup.rates[i]).expect("positive rate"),
                size: match setup.size_families[i] {
                    JobSizeFamily::Exponential => Some(Exp::new(1.0 / setup.mean_sizes[i]).expect("positive mean")),
                    JobSizeFamily::Deterministic => None,
                },
            }
        })
        .collect();
    let mut next_arrival: Vec<f64> = streams.iter_mut().map(|s| s.gap.sample(&mut s.arrivals)).collect();
    let mut next_departure = vec![f64::INFINITY; n];
    let mut now = 0.0;

    loop {
        let (mut t, mut who, mut is_arrival) = (f64::INFINITY, 0, true);
        for (i, &a) in next_arrival.iter().enumerate() {
            if a < t {
                (t, who, is_arrival) = (a, i, true);
            }
        }
        for (j, &d) in next_departure.iter().enumerate() {
            if d < t {
                (t, who, is_arrival) = (d, j, false);
            }
        }
        let t_end = t.min(setup.horizon);
        accumulate_area(&mut data.area, &queues, now, t_end, setup.warmup, len, b);
        now = t_end;
        if t > setup.horizon {
            break;
        }
        data.events += 1;
        if is_arrival {
            let i = who;
            let s = &mut streams[i];
            let u: f64 = s.routing.random();
            let row = &setup.routing[i * n..(i + 1) * n];
            let mut j = 0;
            let mut acc = row[0];
            while u >= acc && j + 1 < n {
                j += 1;
                acc += row[j];
            }
            // Never route onto a zero-probability queue through rounding.
            while row[j] == 0.0 && j > 0 {
                j -= 1;
            }
            let size = match &s.size {
                Some(d) => d.sample(&mut s.sizes),
                None => setup.mean_sizes[i],
            };
            queues[j].arrive(
                t,
                Job {
                    arrival: t,
                    size,
                    class: i,
                    wait: 0.0,
                },
            );
            next_departure[j] = queues[j].next_departure();
            if let Some(k) = batch_of(t) {
                data.arrivals[k][j] += 1;
                data.work[k][j] += size;
            }
            next_arrival[i] = t + s.gap.sample(&mut s.arrivals);
        } else {
            let j = who;
            let job = queues[j].depart(t);
            next_departure[j] = queues[j].next_departure();
            if let Some(k) = batch_of(t) {
                let sojourn = t - job.arrival;
                let i = job.class;
                data.departures[k][j] += 1;
                data.sojourn[k][j] += sojourn;
                let cost = match setup.thresholds[j] {
                    Some(th) if matches!(setup.queues[j], CostModel::Mm1TailProbability { .. }) => {
                        let over = job.wait > th;
                        setup.customer_sensitivities[i] * if over { 1.0 } else { 0.0 }
                    }
                    _ => setup.sensitivities[i] * sojourn,
                };
                if let Some(th) = setup.thresholds[j] {
                    if job.wait > th {
                        data.over_threshold[k][j] += 1;
                    }
                }
                data.class_departures[k][i] += 1;
                data.class_sojourn[k][i] += sojourn;
                data.class_cost[k][i] += cost;
            }
        }
    }
    data
}

/// Adds `n_j(t) dt` over `[from, to)` to the batch windows it overlaps.
fn accumulate_area(area: &mut [Vec<f64>], queues: &[Queue], from: f64, to: f64, warmup: f64, len: f64, b: usize) {
    let mut a = from.max(warmup);
    let window_end = |k: usize| if k + 1 == b { f64::INFINITY } else { warmup + (k + 1) as f64 * len };
    let mut k = (((a.max(warmup) - warmup) / len) as usize).min(b - 1);
    while a < to {
        // Rounding can put `a` on the closing edge of window `k`.
        while window_end(k) <= a {
            k += 1;
        }
        let end = window_end(k).min(to);
        let dt = end - a;
        for (j, q) in queues.iter().enumerate() {
            area[k][j] += q.len() as f64 * dt;
        }
        a = end;
    }
}
