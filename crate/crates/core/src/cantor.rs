//! Finite-stage Cantor sets, thickness, the gap-lemma trichotomy and the
//! stable/unstable Cantor sets of the model on its line of tangencies.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{tangency_point, Branch, ModelMap, Word};
use crate::renorm::{stable_preimage, unstable_image};

pub const DEFAULT_TRICHOTOMY_DEPTH: usize = 12;
/// Relative tolerance under which two gaps count as equally long.
const LENGTH_TIE: f64 = 1e-9;

/// Symmetric self-similar construction: each bridge keeps two copies scaled
/// by `ratio`, one at each end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    #[serde(rename = "r")]
    pub ratio: f64,
}

impl Generator {
    pub fn thickness(&self) -> f64 {
        self.ratio / (1.0 - 2.0 * self.ratio)
    }

    fn split(&self, lo: f64, hi: f64) -> (f64, f64) {
        let len = hi - lo;
        (lo + self.ratio * len, hi - self.ratio * len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorApprox {
    pub base: (f64, f64),
    #[serde(default)]
    pub gaps: Vec<(f64, f64)>,
    #[serde(default)]
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
}

impl CantorApprox {
    /// Checks the invariants and, for a generator given without gaps, fills
    /// in the expansion to `depth`.
    pub fn normalized(mut self) -> Result<Self> {
        if !(self.base.0 < self.base.1) {
            return Err(Error::validation(format!(
                "empty Cantor base {:?}",
                self.base
            )));
        }
        if let Some(g) = self.generator {
            if !(g.ratio > 0.0 && g.ratio < 0.5) {
                return Err(Error::validation(format!(
                    "generator ratio must lie in (0, 1/2), got {}",
                    g.ratio
                )));
            }
            if self.gaps.is_empty() {
                return affine_cantor(g.ratio, self.depth, self.base);
            }
        }
        self.gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut prev = self.base.0;
        for &(lo, hi) in &self.gaps {
            if !(lo < hi) || lo <= prev || hi >= self.base.1 {
                return Err(Error::validation(format!(
                    "gap ({lo}, {hi}) is empty, overlaps another gap or touches the base ends"
                )));
            }
            prev = hi;
        }
        Ok(self)
    }

    pub fn diameter(&self) -> f64 {
        self.base.1 - self.base.0
    }

    pub fn translated(&self, d: f64) -> Self {
        CantorApprox {
            base: (self.base.0 + d, self.base.1 + d),
            gaps: self.gaps.iter().map(|&(a, b)| (a + d, b + d)).collect(),
            depth: self.depth,
            generator: self.generator,
        }
    }

    /// Gap boundary points together with the base end points.
    pub fn boundary_points(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.gaps.len() + 2);
        v.push(self.base.0);
        for &(a, b) in &self.gaps {
            v.push(a);
            v.push(b);
        }
        v.push(self.base.1);
        v
    }
}

/// Middle-gap construction with two copies of ratio `r` per stage.
pub fn affine_cantor(r: f64, depth: usize, base: (f64, f64)) -> Result<CantorApprox> {
    if !(r > 0.0 && r < 0.5) {
        return Err(Error::validation(format!(
            "ratio must lie in (0, 1/2), got {r}"
        )));
    }
    if !(base.0 < base.1) {
        return Err(Error::validation(format!("empty Cantor base {base:?}")));
    }
    let g = Generator { ratio: r };
    let mut bridges = vec![base];
    let mut gaps = Vec::new();
    for _ in 0..depth {
        let mut next = Vec::with_capacity(2 * bridges.len());
        for &(lo, hi) in &bridges {
            let (a, b) = g.split(lo, hi);
            gaps.push((a, b));
            next.push((lo, a));
            next.push((b, hi));
        }
        bridges = next;
    }
    gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(CantorApprox {
        base,
        gaps,
        depth,
        generator: Some(g),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThicknessWitness {
    pub boundary: f64,
    pub gap: (f64, f64),
    pub bridge: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThicknessReport {
    pub tau: f64,
    pub witness: Option<ThicknessWitness>,
}

/// Thickness of the finite-stage set: the minimum over gap boundary points of
/// bridge length over gap length.
pub fn thickness(k: &CantorApprox) -> ThicknessReport {
    let gaps = &k.gaps;
    if gaps.is_empty() {
        return ThicknessReport {
            tau: f64::INFINITY,
            witness: None,
        };
    }
    let len = |i: usize| gaps[i].1 - gaps[i].0;
    let mut order: Vec<usize> = (0..gaps.len()).collect();
    // stable sort keeps the leftmost gap first among equal lengths
    order.sort_by(|&i, &j| len(j).total_cmp(&len(i)));

    let mut placed = BTreeSet::new();
    let mut best = ThicknessReport {
        tau: f64::INFINITY,
        witness: None,
    };
    let mut start = 0;
    while start < order.len() {
        let l0 = len(order[start]);
        let mut end = start;
        while end < order.len() && len(order[end]) >= l0 * (1.0 - LENGTH_TIE) {
            placed.insert(order[end]);
            end += 1;
        }
        for &i in &order[start..end] {
            let g = gaps[i];
            let left_end = placed
                .range(..i)
                .next_back()
                .map_or(k.base.0, |&j| gaps[j].1);
            let right_end = placed
                .range(i + 1..)
                .next()
                .map_or(k.base.1, |&j| gaps[j].0);
            let candidates = [(g.0, (left_end, g.0)), (g.1, (g.1, right_end))];
            for (u, bridge) in candidates {
                let tau = (bridge.1 - bridge.0) / len(i);
                if tau < best.tau {
                    best = ThicknessReport {
                        tau,
                        witness: Some(ThicknessWitness {
                            boundary: u,
                            gap: g,
                            bridge,
                        }),
                    };
                }
            }
        }
        start = end;
    }
    best
}

/// Thickness of the limit set: exact for generated sets, the finite-stage
/// value otherwise.
pub fn limit_thickness(k: &CantorApprox) -> f64 {
    match k.generator {
        Some(g) => g.thickness(),
        None => thickness(k).tau,
    }
}

/// A bridge of the construction tree: a closed interval together with the
/// part of the gap list lying inside it.
#[derive(Debug, Clone, Copy)]
struct Bridge {
    lo: f64,
    hi: f64,
    node: Option<usize>,
    level: usize,
}

/// Construction tree of a Cantor set: each bridge splits at its longest gap.
struct BridgeTree<'a> {
    set: &'a CantorApprox,
    left: Vec<Option<usize>>,
    right: Vec<Option<usize>>,
    root: Option<usize>,
}

impl<'a> BridgeTree<'a> {
    fn new(set: &'a CantorApprox) -> Self {
        let n = set.gaps.len();
        let len = |i: usize| set.gaps[i].1 - set.gaps[i].0;
        let mut left = vec![None; n];
        let mut right = vec![None; n];
        let mut stack: Vec<usize> = Vec::new();
        // Cartesian tree keyed by gap length, longest at the root
        #[allow(clippy::needless_range_loop)]
        for i in 0..n {
            let mut last = None;
            while let Some(&top) = stack.last() {
                if len(top) < len(i) * (1.0 - LENGTH_TIE) {
                    last = stack.pop();
                } else {
                    break;
                }
            }
            left[i] = last;
            if let Some(&top) = stack.last() {
                right[top] = Some(i);
            }
            stack.push(i);
        }
        BridgeTree {
            set,
            left,
            right,
            root: stack.first().copied(),
        }
    }

    fn base(&self) -> Bridge {
        Bridge {
            lo: self.set.base.0,
            hi: self.set.base.1,
            node: self.root,
            level: 0,
        }
    }

    fn split(&self, b: &Bridge) -> Option<((f64, f64), Bridge, Bridge)> {
        if let Some(g) = self.set.generator {
            let gap = g.split(b.lo, b.hi);
            let l = Bridge {
                lo: b.lo,
                hi: gap.0,
                node: None,
                level: b.level + 1,
            };
            let r = Bridge {
                lo: gap.1,
                hi: b.hi,
                node: None,
                level: b.level + 1,
            };
            return Some((gap, l, r));
        }
        let i = b.node?;
        let gap = self.set.gaps[i];
        let l = Bridge {
            lo: b.lo,
            hi: gap.0,
            node: self.left[i],
            level: b.level + 1,
        };
        let r = Bridge {
            lo: gap.1,
            hi: b.hi,
            node: self.right[i],
            level: b.level + 1,
        };
        Some((gap, l, r))
    }

    /// Gap of the set containing the closed interval `[lo, hi]`, if any;
    /// `None` inside the outer `Option` stands for the unbounded complement.
    fn containing_gap(&self, lo: f64, hi: f64, max_level: usize) -> Option<Option<(f64, f64)>> {
        let mut b = self.base();
        if hi < b.lo || lo > b.hi {
            return Some(None);
        }
        loop {
            if lo < b.lo || hi > b.hi || b.level >= max_level {
                return None;
            }
            let (gap, l, r) = self.split(&b)?;
            if lo > gap.0 && hi < gap.1 {
                return Some(Some(gap));
            }
            if hi <= l.hi {
                b = l;
            } else if lo >= r.lo {
                b = r;
            } else {
                return None;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Trichotomy {
    /// `K1` lies in a gap of `K2`; `gap = None` is the unbounded complement.
    FirstInGapOfSecond {
        gap: Option<(f64, f64)>,
    },
    SecondInGapOfFirst {
        gap: Option<(f64, f64)>,
    },
    /// A chain of overlapping bridge pairs reached `depth` levels in both sets.
    Intersect {
        depth: usize,
    },
    NoCase {
        depth: usize,
    },
}

pub fn gap_trichotomy(k1: &CantorApprox, k2: &CantorApprox) -> Result<Trichotomy> {
    gap_trichotomy_to_depth(k1, k2, DEFAULT_TRICHOTOMY_DEPTH)
}

pub fn gap_trichotomy_to_depth(
    k1: &CantorApprox,
    k2: &CantorApprox,
    depth: usize,
) -> Result<Trichotomy> {
    let (t1, t2) = (limit_thickness(k1), limit_thickness(k2));
    if !(t1 * t2 > 1.0) {
        return Err(Error::Precondition(format!(
            "gap lemma needs thickness product above 1, got {t1} * {t2} = {}",
            t1 * t2
        )));
    }
    let tree1 = BridgeTree::new(k1);
    let tree2 = BridgeTree::new(k2);
    let search_level = depth.max(k1.depth).max(k2.depth).max(64);
    if let Some(gap) = tree2.containing_gap(k1.base.0, k1.base.1, search_level) {
        return Ok(Trichotomy::FirstInGapOfSecond { gap });
    }
    if let Some(gap) = tree1.containing_gap(k2.base.0, k2.base.1, search_level) {
        return Ok(Trichotomy::SecondInGapOfFirst { gap });
    }
    match linked_depth(&tree1, &tree2, tree1.base(), tree2.base(), depth) {
        Some(d) => Ok(Trichotomy::Intersect { depth: d }),
        None => Ok(Trichotomy::NoCase { depth }),
    }
}

fn overlap(a: &Bridge, b: &Bridge) -> bool {
    a.lo <= b.hi && b.lo <= a.hi
}

/// Depth-first search for a nested chain of overlapping bridge pairs,
/// refining the longer bridge of each pair. Returns the depth reached.
fn linked_depth(
    t1: &BridgeTree,
    t2: &BridgeTree,
    b1: Bridge,
    b2: Bridge,
    depth: usize,
) -> Option<usize> {
    let s1 = if b1.level < depth {
        t1.split(&b1)
    } else {
        None
    };
    let s2 = if b2.level < depth {
        t2.split(&b2)
    } else {
        None
    };
    let refine_first = match (&s1, &s2) {
        (None, None) => return Some(b1.level.min(b2.level)),
        (Some(_), None) => true,
        (None, Some(_)) => false,
        (Some(_), Some(_)) => b1.hi - b1.lo >= b2.hi - b2.lo,
    };
    if refine_first {
        let (_, l, r) = s1.expect("checked above");
        for c in [l, r] {
            if overlap(&c, &b2) {
                if let Some(d) = linked_depth(t1, t2, c, b2, depth) {
                    return Some(d);
                }
            }
        }
    } else {
        let (_, l, r) = s2.expect("checked above");
        for c in [l, r] {
            if overlap(&b1, &c) {
                if let Some(d) = linked_depth(t1, t2, b1, c, depth) {
                    return Some(d);
                }
            }
        }
    }
    None
}

fn words_up_to(depth: usize) -> impl Iterator<Item = Word> {
    (0..depth).flat_map(|len| (0..(1u64 << len)).map(move |bits| Word::from_bits(bits, len)))
}

fn sorted_gaps(mut gaps: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
    gaps
}

/// Ordinates of the stable leaves of the horseshoe along the line of
/// tangencies, to `depth` stages.
pub fn stable_cantor_set(m: &ModelMap, depth: usize) -> CantorApprox {
    let s = m.saddle;
    let (_, w_hi) = s.strip(Branch::Left);
    let (w_lo, _) = s.strip(Branch::Right);
    let gaps = words_up_to(depth)
        .map(|u| {
            let a = stable_preimage(&s, &u, w_hi);
            let b = stable_preimage(&s, &u, w_lo);
            (a.min(b), a.max(b))
        })
        .collect();
    CantorApprox {
        base: (0.0, 1.0),
        gaps: sorted_gaps(gaps),
        depth,
        generator: s.is_affine().then(|| Generator {
            ratio: 1.0 / s.sigma,
        }),
    }
}

/// Abscissas of the unstable leaves of the horseshoe, to `depth` stages.
pub fn unstable_abscissas(m: &ModelMap, depth: usize) -> CantorApprox {
    let s = m.saddle;
    let lo = s.forward_x(Branch::Left, 1.0);
    let hi = s.forward_x(Branch::Right, 0.0);
    let gaps = words_up_to(depth)
        .map(|u| {
            let a = unstable_image(&s, &u, lo);
            let b = unstable_image(&s, &u, hi);
            (a.min(b), a.max(b))
        })
        .collect();
    CantorApprox {
        base: (0.0, 1.0),
        gaps: sorted_gaps(gaps),
        depth,
        generator: s.is_affine().then_some(Generator { ratio: s.lambda }),
    }
}

/// Vertex height on the line of tangencies of the fold image of the leaf `x`.
pub fn vertex_height(m: &ModelMap, x: f64) -> Result<f64> {
    if m.is_exactly_quadratic() {
        Ok(m.fold.c + m.mu() + m.total_k() + m.fold.gamma * x)
    } else {
        Ok(tangency_point(m, x)?.y)
    }
}

/// Vertex heights over the unstable abscissas: the unstable Cantor set on
/// the line of tangencies.
pub fn unstable_cantor_set(m: &ModelMap, depth: usize) -> Result<CantorApprox> {
    let kx = unstable_abscissas(m, depth);
    let h0 = vertex_height(m, kx.base.0)?;
    let h1 = vertex_height(m, kx.base.1)?;
    let gaps = kx
        .gaps
        .iter()
        .map(|&(a, b)| {
            let (ha, hb) = (vertex_height(m, a)?, vertex_height(m, b)?);
            Ok((ha.min(hb), ha.max(hb)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CantorApprox {
        base: (h0.min(h1), h0.max(h1)),
        gaps: sorted_gaps(gaps),
        depth,
        generator: if m.is_exactly_quadratic() {
            kx.generator
        } else {
            None
        },
    })
}

/// A parameter at which a gap boundary point of the unstable set coincides
/// with a gap boundary point of the stable set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tangency {
    pub t: f64,
    /// Abscissa of the unstable leaf.
    pub x0: f64,
    /// Ordinate of the stable leaf.
    pub y_s: f64,
}

/// Tangency parameter of the leaves `x0` and `y_s` for the primary family
/// (exactly quadratic fold).
pub fn tangency_parameter(m: &ModelMap, x0: f64, y_s: f64) -> f64 {
    y_s - m.fold.c - m.baseline - m.total_k() - m.fold.gamma * x0
}

/// Up to `count` tangency parameters in `[t_lo, t_hi]`, in increasing order,
/// built from gap boundary points of depth below `depth`.
pub fn tangency_parameters(
    m: &ModelMap,
    (t_lo, t_hi): (f64, f64),
    depth: usize,
    count: usize,
) -> Vec<Tangency> {
    let list_depth = if m.saddle.is_affine() {
        0
    } else {
        depth.min(16)
    };
    let kx = unstable_abscissas(m, list_depth);
    let ks = stable_cantor_set(m, list_depth);
    let xtree = BridgeTree::new(&kx);
    let ytree = BridgeTree::new(&ks);

    let mut xs = vec![kx.base.0, kx.base.1];
    let mut level = vec![xtree.base()];
    for _ in 0..depth.min(16) {
        let mut next = Vec::with_capacity(2 * level.len());
        for b in &level {
            if let Some((gap, l, r)) = xtree.split(b) {
                xs.push(gap.0);
                xs.push(gap.1);
                next.push(l);
                next.push(r);
            }
        }
        level = next;
    }

    let mut out = Vec::new();
    for &x0 in &xs {
        let offset = tangency_offset(m, x0);
        collect_boundaries(
            &ytree,
            ytree.base(),
            (t_lo + offset, t_hi + offset),
            depth,
            &mut |y_s| {
                out.push(Tangency {
                    t: tangency_parameter(m, x0, y_s),
                    x0,
                    y_s,
                });
            },
        );
        if out.len() >= 64 * count.max(1) {
            break;
        }
    }
    out.retain(|tg| tg.t >= t_lo && tg.t <= t_hi);
    out.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.x0.total_cmp(&b.x0)));
    out.dedup_by(|a, b| a.t == b.t);
    out.truncate(count);
    out
}

fn tangency_offset(m: &ModelMap, x0: f64) -> f64 {
    m.fold.c + m.baseline + m.total_k() + m.fold.gamma * x0
}

/// Gap boundary points of a set inside `window`, by descent through the
/// bridges meeting it.
fn collect_boundaries(
    tree: &BridgeTree,
    b: Bridge,
    window: (f64, f64),
    depth: usize,
    emit: &mut dyn FnMut(f64),
) {
    if b.hi < window.0 || b.lo > window.1 {
        return;
    }
    if b.level == 0 {
        for e in [b.lo, b.hi] {
            if e >= window.0 && e <= window.1 {
                emit(e);
            }
        }
    }
    if b.level >= depth {
        return;
    }
    let Some((gap, l, r)) = tree.split(&b) else {
        return;
    };
    for e in [gap.0, gap.1] {
        if e >= window.0 && e <= window.1 {
            emit(e);
        }
    }
    collect_boundaries(tree, l, window, depth, emit);
    collect_boundaries(tree, r, window, depth, emit);
}
