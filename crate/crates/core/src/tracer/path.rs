//! Rendering paths and training suffixes.
//!
//! A rendering path starts at the primary hit and ends in a cache query as
//! soon as its area spread exceeds `c * a0`. A training path continues the
//! same path past that query vertex with a suffix that is terminated by the
//! same heuristic (measured from the query vertex), and whose tail is again
//! a cache query. A fraction of training suffixes ignores the heuristic and
//! is ended by Russian roulette only, giving unbiased targets.
//!
//! Cache lookups are deferred: tracing returns every radiance estimate as an
//! affine function `offset + weight * L` of the (not yet known) cached value
//! `L`, so a whole frame's queries can be answered in one batched inference.

use glam::DVec3;
use rand::Rng;

use super::bsdf::sample_bsdf;
use super::light::{bsdf_hit_emission, next_event_estimate, ShadingPoint};
use super::scene::{Hit, Scene};
use super::spread::{primary_spread, SpreadAccumulator};
use crate::cache::{RadianceCache, RadianceQuery, TrainingRecord};
use crate::math::{max_component, Ray, Rgb};

/// One surface vertex of a traced path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathVertex {
    pub position: DVec3,
    /// Surface normal facing the incoming ray.
    pub normal: DVec3,
    /// Unit direction back towards the previous vertex.
    pub wo: DVec3,
    pub material: usize,
    /// Density of the direction sampled at the previous vertex to reach this
    /// one (1 for the primary vertex).
    pub pdf: f64,
    /// Reached through a delta lobe.
    pub delta: bool,
    /// `|cos|` between the incoming direction and `normal`.
    pub cos_theta: f64,
    /// Path throughput from the camera up to this vertex.
    pub throughput: Rgb,
    /// Distance to the previous vertex.
    pub segment_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    /// Area spread exceeded `c * a0`; the path ends in a cache query.
    Spread,
    RussianRoulette,
    Escaped,
    /// The BSDF sample was absorbed (black surface or below-horizon lobe sample).
    Absorbed,
    /// Vertex limit reached; treated like a spread termination.
    MaxDepth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathMode {
    Render,
    Train,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSettings {
    /// Spread threshold factor `c`.
    pub spread_factor: f64,
    /// Fraction of training suffixes ended by Russian roulette only.
    pub unbiased_fraction: f64,
    /// Use the cache at the end of training suffixes; zero otherwise.
    pub self_training: bool,
    pub max_vertices: usize,
    /// Russian roulette only applies to vertices past this index (1-based).
    pub rr_start: usize,
}

impl Default for TraceSettings {
    fn default() -> Self {
        Self {
            spread_factor: 0.01,
            unbiased_fraction: 1.0 / 16.0,
            self_training: true,
            max_vertices: 32,
            rr_start: 3,
        }
    }
}

/// `offset + weight * L` for a cached radiance `L` resolved later.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineRadiance {
    pub offset: Rgb,
    pub weight: Rgb,
}

impl AffineRadiance {
    pub fn resolve(&self, cached: Rgb) -> Rgb {
        self.offset + self.weight * cached
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSuffix {
    pub unbiased: bool,
    pub termination: Termination,
    /// Cache query at the last suffix vertex, when its value is needed.
    pub tail_query: Option<RadianceQuery>,
    /// Query and scattered-radiance estimate at every training vertex.
    pub records: Vec<(RadianceQuery, AffineRadiance)>,
}

/// A traced path whose cache lookups have not been performed yet.
#[derive(Debug, Clone, PartialEq)]
pub struct DeferredPath {
    pub vertices: Vec<PathVertex>,
    /// Emission of the primary vertex towards the camera.
    pub emitted: Rgb,
    /// Scattered radiance at the primary vertex along the rendering path.
    pub render: AffineRadiance,
    pub render_query: Option<RadianceQuery>,
    pub render_termination: Termination,
    /// Present on training paths only.
    pub training: Option<TrainingSuffix>,
}

/// A path with its cache lookups resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedPath {
    pub vertices: Vec<PathVertex>,
    pub radiance: Rgb,
    pub training_targets: Option<Vec<TrainingRecord>>,
    pub termination: Termination,
    pub training_termination: Option<Termination>,
    pub unbiased: bool,
}

impl DeferredPath {
    fn escaped(mode: PathMode) -> Self {
        Self {
            vertices: Vec::new(),
            emitted: Rgb::ZERO,
            render: AffineRadiance {
                offset: Rgb::ZERO,
                weight: Rgb::ZERO,
            },
            render_query: None,
            render_termination: Termination::Escaped,
            training: (mode == PathMode::Train).then(|| TrainingSuffix {
                unbiased: false,
                termination: Termination::Escaped,
                tail_query: None,
                records: Vec::new(),
            }),
        }
    }

    /// Pixel radiance given the cached value at the rendering query.
    pub fn radiance(&self, render_cached: Rgb) -> Rgb {
        self.emitted + self.render.resolve(render_cached)
    }

    /// Training records given the cached value at the suffix tail.
    pub fn records(&self, tail_cached: Rgb) -> Vec<TrainingRecord> {
        self.training
            .as_ref()
            .map(|t| {
                t.records
                    .iter()
                    .map(|(q, a)| TrainingRecord {
                        query: *q,
                        target: a.resolve(tail_cached),
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn resolve(self, render_cached: Rgb, tail_cached: Rgb) -> TracedPath {
        let radiance = self.radiance(render_cached);
        let training_targets = self.training.as_ref().map(|_| self.records(tail_cached));
        TracedPath {
            radiance,
            training_targets,
            termination: self.render_termination,
            training_termination: self.training.as_ref().map(|t| t.termination),
            unbiased: self.training.as_ref().is_some_and(|t| t.unbiased),
            vertices: self.vertices,
        }
    }
}

fn query_at(scene: &Scene, v: &PathVertex) -> RadianceQuery {
    let m = &scene.materials[v.material];
    RadianceQuery {
        position: v.position,
        direction: v.wo,
        normal: v.normal,
        roughness: m.roughness,
        diffuse: m.diffuse,
        specular: m.specular,
    }
}

fn vertex_from_hit(hit: &Hit, dir: DVec3, pdf: f64, delta: bool, throughput: Rgb) -> PathVertex {
    PathVertex {
        position: hit.position,
        normal: hit.normal,
        wo: -dir,
        material: hit.material,
        pdf,
        delta,
        cos_theta: hit.normal.dot(dir).abs(),
        throughput,
        segment_length: hit.t,
    }
}

#[derive(Debug, Clone, Copy)]
enum PathEnd {
    /// Scattered radiance at this vertex comes from the cache.
    Query(usize),
    /// The estimate stops at this vertex (nothing beyond it).
    Stop(usize, Termination),
}

/// Per-vertex quantities of the scattered-radiance recursion
/// `L(i) = nee(i) + bsdf(i) * (emitted(i) + L(i + 1))`.
#[derive(Default)]
struct Recursion {
    nee: Vec<Rgb>,
    bsdf: Vec<Rgb>,
    emitted: Vec<Rgb>,
}

impl Recursion {
    fn ensure(&mut self, i: usize) {
        if self.nee.len() <= i {
            self.nee.resize(i + 1, Rgb::ZERO);
            self.bsdf.resize(i + 1, Rgb::ZERO);
            self.emitted.resize(i + 1, Rgb::ZERO);
        }
    }

    /// Affine estimates at vertices `0..=last` where `last` is the query
    /// vertex (`Query`) or the final vertex (`Stop`).
    fn unroll(&self, end: PathEnd) -> Vec<AffineRadiance> {
        let (last, mut cur) = match end {
            PathEnd::Query(k) => (
                k,
                AffineRadiance {
                    offset: Rgb::ZERO,
                    weight: Rgb::ONE,
                },
            ),
            PathEnd::Stop(e, _) => (
                e,
                AffineRadiance {
                    offset: self.nee[e],
                    weight: Rgb::ZERO,
                },
            ),
        };
        let mut out = vec![cur; last + 1];
        for i in (0..last).rev() {
            cur = AffineRadiance {
                offset: self.nee[i] + self.bsdf[i] * (self.emitted[i] + cur.offset),
                weight: self.bsdf[i] * cur.weight,
            };
            out[i] = cur;
        }
        out
    }
}

/// Traces one camera path without touching the cache.
pub fn trace_deferred<R: Rng + ?Sized>(
    scene: &Scene,
    ray: Ray,
    mode: PathMode,
    settings: &TraceSettings,
    rng: &mut R,
) -> DeferredPath {
    let Some(hit) = scene.intersect(&ray) else {
        return DeferredPath::escaped(mode);
    };
    let max_vertices = settings.max_vertices.max(2);
    let emitted = scene.emitted(&hit, ray.dir);
    let first = vertex_from_hit(&hit, ray.dir, 1.0, false, Rgb::ONE);
    let threshold = settings.spread_factor * primary_spread(ray.origin, hit.position, first.cos_theta);
    let unbiased = mode == PathMode::Train && rng.gen::<f64>() < settings.unbiased_fraction;

    let mut vertices = vec![first];
    let mut rec = Recursion::default();
    let mut render_spread = SpreadAccumulator::new();
    let mut suffix_spread = SpreadAccumulator::new();
    let mut render_end: Option<(usize, Termination)> = None;

    let end = loop {
        let i = vertices.len() - 1;
        let v = vertices[i];
        rec.ensure(i);
        match render_end {
            None => {
                let reason = if i >= 1 && render_spread.value() > threshold {
                    Some(Termination::Spread)
                } else if i + 1 >= max_vertices {
                    Some(Termination::MaxDepth)
                } else {
                    None
                };
                if let Some(reason) = reason {
                    render_end = Some((i, reason));
                    if mode == PathMode::Render {
                        break PathEnd::Query(i);
                    }
                }
            }
            Some(_) => {
                if !unbiased && suffix_spread.value() > threshold {
                    break PathEnd::Query(i);
                }
                if i + 1 >= max_vertices {
                    break PathEnd::Query(i);
                }
            }
        }
        let in_suffix = render_end.is_some();

        let material = &scene.materials[v.material];
        let shading = ShadingPoint {
            position: v.position,
            normal: v.normal,
            wo: v.wo,
            material,
        };
        rec.nee[i] = next_event_estimate(scene, &shading, rng);

        let u = [rng.gen::<f64>(), rng.gen::<f64>()];
        let sample = match sample_bsdf(material, v.wo, v.normal, u) {
            Ok(Some(s)) => s,
            _ => break PathEnd::Stop(i, Termination::Absorbed),
        };
        let mut bsdf = sample.throughput;
        if unbiased && in_suffix && i + 1 > settings.rr_start {
            let survive = max_component(v.throughput * bsdf).min(1.0);
            if !(rng.gen::<f64>() < survive) {
                break PathEnd::Stop(i, Termination::RussianRoulette);
            }
            bsdf /= survive;
        }
        rec.bsdf[i] = bsdf;

        let next_ray = Ray::new(v.position, sample.direction);
        let Some(next_hit) = scene.intersect(&next_ray) else {
            break PathEnd::Stop(i, Termination::Escaped);
        };
        rec.emitted[i] = bsdf_hit_emission(scene, v.position, &next_hit, sample.direction, sample.pdf, sample.delta);
        let next = vertex_from_hit(&next_hit, sample.direction, sample.pdf, sample.delta, v.throughput * bsdf);
        let spread = if in_suffix { &mut suffix_spread } else { &mut render_spread };
        spread.add_segment(next.segment_length, next.pdf, next.cos_theta, next.delta);
        vertices.push(next);
    };

    let needs_query = |k: usize| Some(query_at(scene, &vertices[k]));
    let (render, render_query, render_termination) = match (render_end, end) {
        (Some((k, reason)), _) => (rec.unroll(PathEnd::Query(k))[0], needs_query(k), reason),
        (None, PathEnd::Stop(e, reason)) => (rec.unroll(PathEnd::Stop(e, reason))[0], None, reason),
        (None, PathEnd::Query(_)) => unreachable!("queries always follow the rendering termination"),
    };

    let training = (mode == PathMode::Train).then(|| {
        let estimates = rec.unroll(end);
        let (count, termination, tail_query) = match end {
            PathEnd::Query(m) => {
                let reason = if m + 1 >= max_vertices {
                    Termination::MaxDepth
                } else {
                    Termination::Spread
                };
                let tail = settings.self_training.then(|| query_at(scene, &vertices[m]));
                (m, reason, tail)
            }
            PathEnd::Stop(e, reason) => (e + 1, reason, None),
        };
        let records = (0..count)
            .map(|i| {
                let mut a = estimates[i];
                if tail_query.is_none() {
                    a.weight = Rgb::ZERO;
                }
                (query_at(scene, &vertices[i]), a)
            })
            .collect();
        TrainingSuffix {
            unbiased,
            termination,
            tail_query,
            records,
        }
    });

    DeferredPath {
        vertices,
        emitted,
        render,
        render_query,
        render_termination,
        training,
    }
}

/// Traces one path and resolves its cache lookups immediately.
pub fn trace_path<C: RadianceCache + ?Sized, R: Rng + ?Sized>(
    scene: &Scene,
    cache: &C,
    ray: Ray,
    mode: PathMode,
    settings: &TraceSettings,
    rng: &mut R,
) -> TracedPath {
    let path = trace_deferred(scene, ray, mode, settings, rng);
    let mut queries = Vec::with_capacity(2);
    queries.extend(path.render_query);
    queries.extend(path.training.as_ref().and_then(|t| t.tail_query));
    let answers = if queries.is_empty() {
        Vec::new()
    } else {
        cache.query(&queries)
    };
    let mut it = answers.into_iter();
    let render_cached = path.render_query.map(|_| it.next().unwrap()).unwrap_or(Rgb::ZERO);
    let tail_cached = path
        .training
        .as_ref()
        .and_then(|t| t.tail_query)
        .map(|_| it.next().unwrap())
        .unwrap_or(Rgb::ZERO);
    path.resolve(render_cached, tail_cached)
}
