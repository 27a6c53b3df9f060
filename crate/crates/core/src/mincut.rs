//! Exact minimization of one flow step by maximum flow.
//!
//! The step energy is the discrete perimeter plus a per-cell bulk term, over
//! all sets containing the obstacle and avoiding the frame. All pairwise
//! weights are nonnegative, so the energy is submodular and a single min-cut
//! finds global minimizers. Capacities are scaled to integers before solving
//! (granularity 1e-6 of the smallest pair weight, the scale is recorded);
//! from then on the quantized energy is the ground truth, quantized ties are
//! genuine ties, and every lattice statement below is exact in integers.
//! The two residual reachability sets of one max flow give the inclusion-wise
//! minimal and maximal minimizers.

use crate::{sdf::ScalarField, Error, GridSpec, Result, Stencil, VoxelSet};

/// Quantization granularity relative to the smallest pair weight.
const GRANULARITY: f64 = 1e-6;

/// Clamp for quantized bulk terms. Any magnitude above the sum of incident
/// pair capacities acts identically (the cell is dominated), so saturating
/// far above that sum is exact while keeping additions overflow-free.
const BULK_CLAMP: i64 = 1_000_000_000_000_000;

/// The data of one step minimization: grid, perimeter weights, bulk field
/// and the obstacle that every feasible set must contain. The frame is
/// implicitly forced out.
#[derive(Clone, Debug)]
pub struct StepInstance {
    spec: GridSpec,
    stencil: Stencil,
    u: ScalarField,
    forced_in: VoxelSet,
}

/// Extreme minimizers of one step instance, with solver diagnostics.
#[derive(Clone, Debug)]
pub struct StepSolution {
    /// Inclusion-wise minimal minimizer.
    pub e_min: VoxelSet,
    /// Inclusion-wise maximal minimizer; every minimizer is contained in it.
    pub e_max: VoxelSet,
    /// Real-valued step energy of the maximal minimizer.
    pub energy: f64,
    /// Max-flow value in energy units (after terminal netting).
    pub flow_value: f64,
    pub stats: SolveStats,
}

#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct SolveStats {
    pub nodes: usize,
    pub edges: usize,
    pub augmentations: u64,
    /// Integer capacity units per unit of energy.
    pub scale: f64,
    /// Cells decided by domination before the flow computation.
    pub presolved_in: usize,
    pub presolved_out: usize,
}

impl StepInstance {
    pub fn new(stencil: Stencil, u: ScalarField, forced_in: VoxelSet) -> Result<Self> {
        let spec = u.spec().clone();
        if *forced_in.spec() != spec || stencil.dim() != spec.dim() {
            return Err(Error::SpecMismatch);
        }
        if u.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("bulk field has non-finite values".into()));
        }
        Ok(StepInstance { spec, stencil, u, forced_in })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    pub fn forced_in(&self) -> &VoxelSet {
        &self.forced_in
    }

    /// Integer capacity units per unit of energy.
    pub fn scale(&self) -> f64 {
        let dx = self.spec.spacing();
        let unit = dx.powi(self.spec.dim() as i32 - 1);
        let min_pair = self
            .stencil
            .pair_costs()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
            * unit;
        1.0 / (GRANULARITY * min_pair)
    }

    /// Quantized pair capacities per stencil offset.
    fn pair_caps(&self) -> Vec<i64> {
        let dx = self.spec.spacing();
        let unit = dx.powi(self.spec.dim() as i32 - 1);
        let scale = self.scale();
        self.stencil
            .pair_costs()
            .iter()
            .map(|c| (c * unit * scale).round() as i64)
            .collect()
    }

    /// Quantized bulk term per cell, clamped far above domination level.
    fn bulk_caps(&self) -> Vec<i64> {
        let scale = self.scale();
        let cell = self.spec.cell_measure();
        self.u
            .values()
            .iter()
            .map(|&v| {
                let b = (v * cell * scale).round();
                b.clamp(-(BULK_CLAMP as f64), BULK_CLAMP as f64) as i64
            })
            .collect()
    }
}

/// Real-valued step energy: perimeter plus the bulk sum over members.
pub fn step_energy(e: &VoxelSet, inst: &StepInstance) -> Result<f64> {
    if *e.spec() != inst.spec {
        return Err(Error::SpecMismatch);
    }
    let per = inst.stencil.perimeter(e)?;
    let cell = inst.spec.cell_measure();
    let bulk: f64 = e
        .member_indices()
        .iter()
        .map(|&i| inst.u.at_linear(i))
        .sum::<f64>()
        * cell;
    Ok(per + bulk)
}

/// The integer objective the solver minimizes, evaluated on any set:
/// quantized cut capacities over all cut pairs plus quantized bulk over all
/// members. Differs from the solver-internal value only by a constant shared
/// by every feasible set.
pub fn quantized_energy(inst: &StepInstance, e: &VoxelSet) -> Result<i64> {
    if *e.spec() != inst.spec {
        return Err(Error::SpecMismatch);
    }
    let caps = inst.pair_caps();
    let bulk = inst.bulk_caps();
    let spec = &inst.spec;
    let mut total: i64 = 0;
    for (k, &off) in inst.stencil.offsets().iter().enumerate() {
        let (ox, oy, oz) = (off[0] as i64, off[1] as i64, off[2] as i64);
        for v in spec.cells() {
            let a = e.contains(v);
            let b = e.contains_signed(v[0] as i64 + ox, v[1] as i64 + oy, v[2] as i64 + oz);
            if a != b {
                total += caps[k];
            }
        }
    }
    for i in e.member_indices() {
        total += bulk[i];
    }
    Ok(total)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum CellState {
    Free,
    In,
    Out,
}

/// Exact domination presolve. A free cell whose bulk term outweighs every
/// possible pairwise saving belongs to no minimizer (or to all of them, for
/// the opposite sign); forcing it preserves the full minimizer lattice.
/// Forcing one cell can make neighbors decidable, so iterate to the fixpoint,
/// which is unique because the conditions are monotone in the forced sets.
fn presolve(
    inst: &StepInstance,
    bulk: &[i64],
    caps: &[i64],
    states: &mut [CellState],
) -> (usize, usize) {
    let spec = &inst.spec;
    let [nx, ny, nz] = spec.shape3();
    let offsets = inst.stencil.offsets();
    // signed neighbor deltas, both orientations
    let mut deltas: Vec<([i64; 3], i64)> = Vec::with_capacity(offsets.len() * 2);
    for (k, off) in offsets.iter().enumerate() {
        let o = [off[0] as i64, off[1] as i64, off[2] as i64];
        deltas.push((o, caps[k]));
        deltas.push(([-o[0], -o[1], -o[2]], caps[k]));
    }
    let state_at = |states: &[CellState], x: i64, y: i64, z: i64| -> CellState {
        if x < 0 || y < 0 || z < 0 || x >= nx as i64 || y >= ny as i64 || z >= nz as i64 {
            return CellState::Out;
        }
        states[(x as usize) + nx * ((y as usize) + ny * (z as usize))]
    };
    let mut queue: Vec<usize> = (0..spec.cell_count())
        .filter(|&i| states[i] == CellState::Free)
        .collect();
    let mut queued = vec![false; spec.cell_count()];
    for &i in &queue {
        queued[i] = true;
    }
    let (mut n_in, mut n_out) = (0usize, 0usize);
    let mut head = 0;
    while head < queue.len() {
        let i = queue[head];
        head += 1;
        queued[i] = false;
        if states[i] != CellState::Free {
            continue;
        }
        let v = spec.unlinear(i);
        let (x, y, z) = (v[0] as i64, v[1] as i64, v[2] as i64);
        let (mut to_out, mut to_in, mut to_free) = (0i64, 0i64, 0i64);
        for &(d, cap) in &deltas {
            match state_at(states, x + d[0], y + d[1], z + d[2]) {
                CellState::Out => to_out += cap,
                CellState::In => to_in += cap,
                CellState::Free => to_free += cap,
            }
        }
        let decided = if bulk[i] + to_out - to_in - to_free > 0 {
            states[i] = CellState::Out;
            n_out += 1;
            true
        } else if bulk[i] + to_out - to_in + to_free < 0 {
            states[i] = CellState::In;
            n_in += 1;
            true
        } else {
            false
        };
        if decided {
            for &(d, _) in &deltas {
                let (px, py, pz) = (x + d[0], y + d[1], z + d[2]);
                if state_at(states, px, py, pz) == CellState::Free {
                    let j = (px as usize) + nx * ((py as usize) + ny * (pz as usize));
                    if !queued[j] {
                        queued[j] = true;
                        queue.push(j);
                    }
                }
            }
        }
    }
    (n_in, n_out)
}

struct Dinic {
    head: Vec<u32>,
    next: Vec<u32>,
    to: Vec<u32>,
    cap: Vec<i64>,
    level: Vec<u32>,
    current: Vec<u32>,
    augmentations: u64,
}

const NONE: u32 = u32::MAX;

impl Dinic {
    fn new(n: usize) -> Self {
        Dinic {
            head: vec![NONE; n],
            next: Vec::new(),
            to: Vec::new(),
            cap: Vec::new(),
            level: vec![NONE; n],
            current: vec![NONE; n],
            augmentations: 0,
        }
    }

    fn add_edge(&mut self, u: u32, v: u32, cap_uv: i64, cap_vu: i64) {
        for (a, b, c) in [(u, v, cap_uv), (v, u, cap_vu)] {
            self.next.push(self.head[a as usize]);
            self.to.push(b);
            self.cap.push(c);
            self.head[a as usize] = (self.to.len() - 1) as u32;
        }
    }

    fn bfs(&mut self, s: u32, t: u32) -> bool {
        self.level.fill(NONE);
        self.level[s as usize] = 0;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            let mut a = self.head[u as usize];
            while a != NONE {
                let v = self.to[a as usize];
                if self.cap[a as usize] > 0 && self.level[v as usize] == NONE {
                    self.level[v as usize] = self.level[u as usize] + 1;
                    if v == t {
                        continue;
                    }
                    queue.push_back(v);
                }
                a = self.next[a as usize];
            }
        }
        self.level[t as usize] != NONE
    }

    fn dfs(&mut self, u: u32, t: u32, pushed: i64) -> i64 {
        if u == t {
            return pushed;
        }
        while self.current[u as usize] != NONE {
            let a = self.current[u as usize] as usize;
            let v = self.to[a];
            if self.cap[a] > 0 && self.level[v as usize] == self.level[u as usize] + 1 {
                let d = self.dfs(v, t, pushed.min(self.cap[a]));
                if d > 0 {
                    self.cap[a] -= d;
                    self.cap[a ^ 1] += d;
                    return d;
                }
            }
            self.current[u as usize] = self.next[a];
        }
        0
    }

    fn max_flow(&mut self, s: u32, t: u32) -> i64 {
        let mut flow = 0i64;
        while self.bfs(s, t) {
            self.current.copy_from_slice(&self.head);
            loop {
                let pushed = self.dfs(s, t, i64::MAX);
                if pushed == 0 {
                    break;
                }
                flow += pushed;
                self.augmentations += 1;
            }
        }
        flow
    }

    /// Nodes reachable from `s` along positive residual arcs.
    fn reachable_from(&self, s: u32) -> Vec<bool> {
        let mut seen = vec![false; self.head.len()];
        let mut stack = vec![s];
        seen[s as usize] = true;
        while let Some(u) = stack.pop() {
            let mut a = self.head[u as usize];
            while a != NONE {
                let v = self.to[a as usize];
                if self.cap[a as usize] > 0 && !seen[v as usize] {
                    seen[v as usize] = true;
                    stack.push(v);
                }
                a = self.next[a as usize];
            }
        }
        seen
    }

    /// Nodes that can reach `t` along positive residual arcs.
    fn coreachable_to(&self, t: u32) -> Vec<bool> {
        let mut seen = vec![false; self.head.len()];
        let mut stack = vec![t];
        seen[t as usize] = true;
        while let Some(v) = stack.pop() {
            // arc (v -> w) has its pair (w -> v) at the twin index; positive
            // residual on the twin means w can step to v
            let mut a = self.head[v as usize];
            while a != NONE {
                let w = self.to[a as usize];
                if self.cap[(a ^ 1) as usize] > 0 && !seen[w as usize] {
                    seen[w as usize] = true;
                    stack.push(w);
                }
                a = self.next[a as usize];
            }
        }
        seen
    }
}

/// Globally minimize the step energy over all sets with
/// `forced_in <= E <= interior`, returning the minimal and maximal
/// minimizers of the quantized energy.
pub fn solve_extremes(inst: &StepInstance) -> Result<StepSolution> {
    let spec = &inst.spec;
    let caps = inst.pair_caps();
    let bulk = inst.bulk_caps();
    let n_cells = spec.cell_count();

    let mut states = vec![CellState::Free; n_cells];
    for v in spec.cells() {
        let i = spec.linear(v);
        if spec.is_frame(v) {
            states[i] = CellState::Out;
        }
    }
    for i in inst.forced_in.member_indices() {
        states[i] = CellState::In;
    }
    let (presolved_in, presolved_out) = presolve(inst, &bulk, &caps, &mut states);

    // node ids for the remaining free cells
    let mut node_of = vec![NONE; n_cells];
    let mut free_cells = Vec::new();
    for (i, &st) in states.iter().enumerate() {
        if st == CellState::Free {
            node_of[i] = free_cells.len() as u32;
            free_cells.push(i);
        }
    }
    let n = free_cells.len();
    let s = n as u32;
    let t = n as u32 + 1;
    let mut dinic = Dinic::new(n + 2);
    let mut source_cap = vec![0i64; n];
    let mut sink_cap = vec![0i64; n];
    let [nx, ny, nz] = spec.shape3();
    let mut edges = 0usize;
    for (ni, &i) in free_cells.iter().enumerate() {
        let v = spec.unlinear(i);
        let (x, y, z) = (v[0] as i64, v[1] as i64, v[2] as i64);
        if bulk[i] > 0 {
            sink_cap[ni] += bulk[i];
        } else {
            source_cap[ni] += -bulk[i];
        }
        for (k, off) in inst.stencil.offsets().iter().enumerate() {
            // each unordered pair is visited once: offsets have antipodes
            // collapsed, so scanning the positive orientation from every
            // cell covers each pair exactly once; the reverse orientation
            // matters only for terminals of pairs whose other endpoint is
            // not free, handled from this side below.
            for dir in [1i64, -1] {
                let (px, py, pz) = (
                    x + dir * off[0] as i64,
                    y + dir * off[1] as i64,
                    z + dir * off[2] as i64,
                );
                let partner_state =
                    if px < 0 || py < 0 || pz < 0 || px >= nx as i64 || py >= ny as i64 || pz >= nz as i64 {
                        CellState::Out
                    } else {
                        states[(px as usize) + nx * ((py as usize) + ny * (pz as usize))]
                    };
                match partner_state {
                    CellState::Free => {
                        if dir == 1 {
                            let pj = (px as usize) + nx * ((py as usize) + ny * (pz as usize));
                            dinic.add_edge(ni as u32, node_of[pj], caps[k], caps[k]);
                            edges += 1;
                        }
                    }
                    CellState::In => source_cap[ni] += caps[k],
                    CellState::Out => sink_cap[ni] += caps[k],
                }
            }
        }
    }
    // net the terminals; netting shifts every cut by the same constant
    for ni in 0..n {
        let net = source_cap[ni] - sink_cap[ni];
        if net > 0 {
            dinic.add_edge(s, ni as u32, net, 0);
            edges += 1;
        } else if net < 0 {
            dinic.add_edge(ni as u32, t, -net, 0);
            edges += 1;
        }
    }

    let scale = inst.scale();
    let flow = dinic.max_flow(s, t);

    let reach_s = dinic.reachable_from(s);
    let reach_t = dinic.coreachable_to(t);

    let mut e_min = inst.forced_in.clone();
    let mut e_max = inst.forced_in.clone();
    for (ni, &i) in free_cells.iter().enumerate() {
        if states[i] != CellState::Free {
            unreachable!();
        }
        let v = spec.unlinear(i);
        if reach_s[ni] {
            e_min.insert(v)?;
        }
        if !reach_t[ni] {
            e_max.insert(v)?;
        }
    }
    for (i, &st) in states.iter().enumerate() {
        if st == CellState::In && !inst.forced_in.contains_linear(i) {
            let v = spec.unlinear(i);
            e_min.insert(v)?;
            e_max.insert(v)?;
        }
    }

    debug_assert!(e_min.subset(&e_max)?);
    debug_assert_eq!(quantized_energy(inst, &e_min)?, quantized_energy(inst, &e_max)?);

    let energy = step_energy(&e_max, inst)?;
    Ok(StepSolution {
        e_min,
        e_max,
        energy,
        flow_value: flow as f64 / scale,
        stats: SolveStats {
            nodes: n,
            edges,
            augmentations: dinic.augmentations,
            scale,
            presolved_in,
            presolved_out,
        },
    })
}

/// All minimizers of the quantized step energy, by exhaustive enumeration
/// over the free cells. Test oracle; refuses more than `cap <= 24` free
/// cells.
pub fn enumerate_minimizers(inst: &StepInstance, cap: usize) -> Result<Vec<VoxelSet>> {
    if cap > 24 {
        return Err(Error::InvalidParam(format!("enumeration cap {cap} exceeds 24")));
    }
    let spec = &inst.spec;
    let caps = inst.pair_caps();
    let bulk = inst.bulk_caps();
    let free: Vec<usize> = spec
        .cells()
        .filter(|&v| !spec.is_frame(v) && !inst.forced_in.contains(v))
        .map(|v| spec.linear(v))
        .collect();
    if free.len() > cap {
        return Err(Error::TooManyFreeCells(free.len(), cap));
    }
    let k = free.len();
    let mut slot_of = std::collections::HashMap::new();
    for (j, &i) in free.iter().enumerate() {
        slot_of.insert(i, j);
    }

    // partner lists: (free slot or fixed membership, pair capacity)
    enum Partner {
        Free(usize),
        Fixed(bool),
    }
    let [nx, ny, nz] = spec.shape3();
    let partners: Vec<Vec<(Partner, i64)>> = free
        .iter()
        .map(|&i| {
            let v = spec.unlinear(i);
            let mut list = Vec::new();
            for (ki, off) in inst.stencil.offsets().iter().enumerate() {
                for dir in [1i64, -1] {
                    let (px, py, pz) = (
                        v[0] as i64 + dir * off[0] as i64,
                        v[1] as i64 + dir * off[1] as i64,
                        v[2] as i64 + dir * off[2] as i64,
                    );
                    let p = if px < 0
                        || py < 0
                        || pz < 0
                        || px >= nx as i64
                        || py >= ny as i64
                        || pz >= nz as i64
                    {
                        Partner::Fixed(false)
                    } else {
                        let j = (px as usize) + nx * ((py as usize) + ny * (pz as usize));
                        let pv = spec.unlinear(j);
                        if spec.is_frame(pv) {
                            Partner::Fixed(false)
                        } else if inst.forced_in.contains_linear(j) {
                            Partner::Fixed(true)
                        } else {
                            Partner::Free(slot_of[&j])
                        }
                    };
                    list.push((p, caps[ki]));
                }
            }
            list
        })
        .collect();

    let base = quantized_energy(inst, &inst.forced_in)?;
    let mut mask: u64 = 0;
    let mut energy = base;
    let mut best = base;
    let mut argmin: Vec<u64> = vec![0];
    // Gray-code walk over all subsets with incremental energy updates
    for step in 1u64..(1u64 << k) {
        let j = step.trailing_zeros() as usize;
        let was_in = mask >> j & 1 == 1;
        let mut delta: i64 = if was_in { -bulk[free[j]] } else { bulk[free[j]] };
        for (p, cap) in &partners[j] {
            let partner_in = match p {
                Partner::Fixed(m) => *m,
                Partner::Free(sl) => mask >> sl & 1 == 1,
            };
            // toggling j cuts the pair if both sides were equal, uncuts otherwise
            delta += if partner_in == was_in { *cap } else { -*cap };
        }
        mask ^= 1 << j;
        energy += delta;
        if energy < best {
            best = energy;
            argmin.clear();
            argmin.push(mask);
        } else if energy == best {
            argmin.push(mask);
        }
    }

    argmin.sort_unstable();
    argmin
        .into_iter()
        .map(|m| {
            let mut set = inst.forced_in.clone();
            for (j, &i) in free.iter().enumerate() {
                if m >> j & 1 == 1 {
                    set.insert(spec.unlinear(i))?;
                }
            }
            Ok(set)
        })
        .collect()
}
