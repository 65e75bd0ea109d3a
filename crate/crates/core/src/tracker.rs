//! Multi-target management: one particle filter per obstacle.
//!
//! Each frame, every active filter is updated only with the positive pixels
//! that lie within its own neighbourhood (a radius around its projected
//! cloud). A segment claimed by several filters goes to the one whose
//! projected cloud is centred nearest to it. Positive pixels outside every neighbourhood are out-of-distribution
//! (OOD); OOD clusters that persist for `tau_min_obs` frames spawn a new
//! filter. Filters that see nothing for `n_dismiss` frames are dismissed, and
//! filters whose estimates coincide for `n_fuse` frames are merged.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{ConfigError, FilterError};
use crate::geometry::{CameraIntrinsics, CameraPose, PixelPoint};
use crate::mask::{connected_components, label_components, squared_distance_transform, BinaryMask};
use crate::pf::{self, FilterParams, Observation, ParticleSet, StepOutcome};
use crate::rng::{stream, Purpose};
use crate::simworld::FrameRecord;

/// How positive pixels are shared among filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrackerMode {
    /// At most one filter. OOD clusters are only followed while no filter
    /// is live.
    Single,
    /// One filter per OOD cluster, each updated with its own neighbourhood.
    #[default]
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerParams {
    pub mode: TrackerMode,
    /// Neighbourhood radius in units of the projected cloud SD.
    pub theta_po_sd: f64,
    /// Lower bound on the neighbourhood radius, pixels.
    pub theta_po_floor_px: f64,
    pub n_dismiss: usize,
    pub n_fuse: usize,
    pub tau_min_obs: usize,
    pub min_component_px: usize,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            mode: TrackerMode::Multi,
            theta_po_sd: 1.0,
            theta_po_floor_px: 20.0,
            n_dismiss: 5,
            n_fuse: 5,
            tau_min_obs: 5,
            min_component_px: 4,
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.theta_po_sd > 0.0 && self.theta_po_sd.is_finite()) {
            return Err(ConfigError::invalid("tracker.theta_po_sd", "must be positive"));
        }
        if !(self.theta_po_floor_px >= 0.0 && self.theta_po_floor_px.is_finite()) {
            return Err(ConfigError::invalid("tracker.theta_po_floor_px", "must be >= 0"));
        }
        if self.n_dismiss < 1 {
            return Err(ConfigError::invalid("tracker.n_dismiss", "must be >= 1"));
        }
        if self.n_fuse < 1 {
            return Err(ConfigError::invalid("tracker.n_fuse", "must be >= 1"));
        }
        if self.tau_min_obs < 2 {
            return Err(ConfigError::invalid("tracker.tau_min_obs", "must be >= 2"));
        }
        if self.min_component_px < 1 {
            return Err(ConfigError::invalid("tracker.min_component_px", "must be >= 1"));
        }
        Ok(())
    }

    /// Largest centroid jump that still continues a candidate.
    pub fn match_radius_px(&self) -> f64 {
        4.0 * self.theta_po_floor_px
    }
}

/// Mean of the u and v standard deviations of the cloud's projections, over
/// particles in front of the camera. Zero if there are none.
pub fn projected_spread(ps: &ParticleSet, intrinsics: &CameraIntrinsics, pose: &CameraPose) -> f64 {
    projected_moments(ps, intrinsics, pose).map_or(0.0, |(_, sd)| sd)
}

/// Mean projection and [`projected_spread`] of the cloud, or `None` if no
/// particle is in front of the camera.
pub fn projected_moments(
    ps: &ParticleSet,
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
) -> Option<(PixelPoint, f64)> {
    let (mut n, mut su, mut sv, mut suu, mut svv) = (0usize, 0.0, 0.0, 0.0, 0.0);
    // Shifted sums keep the variance well conditioned.
    let (cu, cv) = (intrinsics.cx, intrinsics.cy);
    for p in ps.positions() {
        if let Some(px) = crate::geometry::project_point(p, intrinsics, pose) {
            if !(px.u.is_finite() && px.v.is_finite()) {
                continue;
            }
            let (du, dv) = (px.u - cu, px.v - cv);
            n += 1;
            su += du;
            sv += dv;
            suu += du * du;
            svv += dv * dv;
        }
    }
    if n == 0 {
        return None;
    }
    let nf = n as f64;
    let (mu, mv) = (su / nf, sv / nf);
    let var_u = (suu / nf - mu * mu).max(0.0);
    let var_v = (svv / nf - mv * mv).max(0.0);
    let sd = 0.5 * (libm::sqrt(var_u) + libm::sqrt(var_v));
    Some((PixelPoint::new(cu + mu, cv + mv), sd))
}

/// Splits pixels claimed by several neighbourhoods. Each contested pixel goes
/// to the claimant whose mean projection is nearest the centroid of the
/// pixel's connected segment; ties go to the earlier claimant.
pub fn partition_claims(mask: &BinaryMask, claims: &mut [(BinaryMask, Option<PixelPoint>)]) {
    if claims.len() < 2 {
        return;
    }
    let (labels, comps) = label_components(mask);
    let w = mask.width() as usize;
    for px in mask.positives() {
        let idx = px.v as usize * w + px.u as usize;
        let claimants = claims.iter().filter(|(m, _)| m.get(px)).count();
        if claimants < 2 {
            continue;
        }
        let c = comps[labels[idx].expect("positive pixel is labelled")].centroid;
        let owner = claims
            .iter()
            .enumerate()
            .filter(|(_, (m, _))| m.get(px))
            .map(|(i, (_, centre))| {
                let d2 = centre.map_or(f64::INFINITY, |q| {
                    (q.u - c.u) * (q.u - c.u) + (q.v - c.v) * (q.v - c.v)
                });
                (d2, i)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, i)| i)
            .expect("at least two claimants");
        for (i, (m, _)) in claims.iter_mut().enumerate() {
            if i != owner {
                m.set(px, false);
            }
        }
    }
}

/// Neighbourhood radius of a cloud: `max(theta_po_sd * spread, floor)`.
pub fn neighbourhood_radius(
    ps: &ParticleSet,
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
    params: &TrackerParams,
) -> f64 {
    (params.theta_po_sd * projected_spread(ps, intrinsics, pose)).max(params.theta_po_floor_px)
}

/// Positive pixels of `mask` within `radius` of some discretised in-frame
/// particle projection.
pub fn neighbourhood(
    mask: &BinaryMask,
    ps: &ParticleSet,
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
    radius: f64,
) -> BinaryMask {
    let mut out = BinaryMask::new(mask.width(), mask.height());
    let Some(bbox) = mask.bbox() else {
        return out;
    };
    // Any particle within `radius` of a positive pixel lies in this window,
    // so a transform over it decides `d <= radius` exactly.
    let Some(win) = bbox
        .expand(libm::ceil(radius) as i64)
        .clip(mask.width(), mask.height())
    else {
        return out;
    };
    let (w, h) = (win.width() as usize, win.height() as usize);
    let mut seeds = alloc::vec![false; w * h];
    let mut any = false;
    for p in ps.positions() {
        if let Some(px) = pf::project_particle(p, intrinsics, pose) {
            if win.contains(px) {
                seeds[(px.v - win.min.v) as usize * w + (px.u - win.min.u) as usize] = true;
                any = true;
            }
        }
    }
    if !any {
        return out;
    }
    let d2 = squared_distance_transform(&seeds, w, h);
    let r2 = radius * radius;
    for px in mask.positives() {
        if d2[(px.v - win.min.v) as usize * w + (px.u - win.min.u) as usize] <= r2 {
            out.set(px, true);
        }
    }
    out
}

/// Positive pixels farther than each cloud's neighbourhood radius from all
/// of its projections. With no clouds this is the mask itself.
pub fn ood_pixels(
    mask: &BinaryMask,
    clouds: &[&ParticleSet],
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
    params: &TrackerParams,
) -> BinaryMask {
    let mut claimed = BinaryMask::new(mask.width(), mask.height());
    for ps in clouds {
        let r = neighbourhood_radius(ps, intrinsics, pose, params);
        claimed.union_with(&neighbourhood(mask, ps, intrinsics, pose, r));
    }
    subtract(mask, &claimed)
}

fn subtract(mask: &BinaryMask, claimed: &BinaryMask) -> BinaryMask {
    let bits = mask
        .bits()
        .iter()
        .zip(claimed.bits())
        .map(|(a, b)| *a && !*b)
        .collect();
    BinaryMask::from_bits(mask.width(), mask.height(), bits).expect("same shape")
}

/// 8-connected clusters of at least `min_px` pixels as `(centroid, size)`,
/// largest first.
pub fn cluster_pixels(mask: &BinaryMask, min_px: usize) -> Vec<(PixelPoint, usize)> {
    connected_components(mask, min_px)
        .into_iter()
        .map(|c| (c.centroid, c.size))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackPhase {
    Active,
    Dismissed,
}

/// A confirmed filter. Dismissed tracks keep their bookkeeping but drop
/// their particles.
#[derive(Debug, Clone)]
pub struct Track {
    id: u32,
    phase: TrackPhase,
    filter: Option<ParticleSet>,
    miss_count: usize,
    updates: usize,
    overlap: BTreeMap<u32, usize>,
    spawned_frame: u64,
    dismissed_frame: Option<u64>,
}

impl Track {
    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn phase(&self) -> TrackPhase {
        self.phase
    }

    pub fn is_active(&self) -> bool {
        self.phase == TrackPhase::Active
    }

    pub fn particles(&self) -> Option<&ParticleSet> {
        self.filter.as_ref()
    }

    pub fn miss_count(&self) -> usize {
        self.miss_count
    }

    /// Number of measurement updates applied so far.
    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn spawned_frame(&self) -> u64 {
        self.spawned_frame
    }

    pub fn dismissed_frame(&self) -> Option<u64> {
        self.dismissed_frame
    }

    fn dismiss(&mut self, frame: u64) {
        self.phase = TrackPhase::Dismissed;
        self.filter = None;
        self.dismissed_frame = Some(frame);
        self.overlap.clear();
    }
}

/// An OOD cluster seen on consecutive frames, not yet a filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub history: Vec<Observation>,
}

impl Candidate {
    fn last_centroid(&self) -> PixelPoint {
        self.history.last().expect("non-empty history").centroid
    }
}

/// What happened during one [`Tracker::update`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameReport {
    pub frame_index: u64,
    pub updated: Vec<u32>,
    pub missed: Vec<u32>,
    pub spawned: Vec<u32>,
    pub dismissed: Vec<u32>,
    /// `(survivor, absorbed)`.
    pub fused: Vec<(u32, u32)>,
    pub ood_pixels: usize,
    pub candidates: usize,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    intrinsics: CameraIntrinsics,
    filter: FilterParams,
    params: TrackerParams,
    seed: u64,
    tracks: Vec<Track>,
    candidates: Vec<Candidate>,
    next_id: u32,
}

impl Tracker {
    /// The filter's and the tracker's `tau_min_obs` must agree.
    pub fn new(
        intrinsics: CameraIntrinsics,
        filter: FilterParams,
        params: TrackerParams,
        seed: u64,
    ) -> Result<Self, ConfigError> {
        filter.validate()?;
        params.validate()?;
        if filter.tau_min_obs != params.tau_min_obs {
            return Err(ConfigError::invalid(
                "tracker.tau_min_obs",
                "must equal filter.tau_min_obs",
            ));
        }
        Ok(Self {
            intrinsics,
            filter,
            params,
            seed,
            tracks: Vec::new(),
            candidates: Vec::new(),
            next_id: 0,
        })
    }

    /// All tracks ever confirmed, in id order.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn active(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter().filter(|t| t.is_active())
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    /// Active tracks that were stepped on frame `frame_index`, i.e. spawned
    /// on an earlier frame. A track spawned on this frame still holds its
    /// initial draw and is not scored yet.
    pub fn scored(&self, frame_index: u64) -> impl Iterator<Item = (u32, &ParticleSet)> {
        self.active()
            .filter(move |t| t.spawned_frame < frame_index)
            .filter_map(|t| t.filter.as_ref().map(|ps| (t.id, ps)))
    }

    /// Adds an active track with the given particles, as if it had been
    /// confirmed on `frame_index`. Returns its id.
    pub fn insert_track(&mut self, particles: ParticleSet, frame_index: u64) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        self.tracks.push(Track {
            id,
            phase: TrackPhase::Active,
            filter: Some(particles),
            miss_count: 0,
            updates: 0,
            overlap: BTreeMap::new(),
            spawned_frame: frame_index,
            dismissed_frame: None,
        });
        id
    }

    pub fn update(&mut self, frame: &FrameRecord) -> Result<FrameReport, FilterError> {
        self.update_with(&frame.mask, &frame.reported_pose, frame.index)
    }

    pub fn update_with(
        &mut self,
        mask: &BinaryMask,
        pose: &CameraPose,
        frame_index: u64,
    ) -> Result<FrameReport, FilterError> {
        let mut report = FrameReport {
            frame_index,
            ..Default::default()
        };
        let k = self.intrinsics;

        // Neighbourhoods come from the clouds as they were before this
        // frame's update, so OOD detection and the updates agree.
        let mut claimed = BinaryMask::new(mask.width(), mask.height());
        let mut owners: Vec<usize> = Vec::new();
        let mut claims: Vec<(BinaryMask, Option<PixelPoint>)> = Vec::new();
        for (i, t) in self.tracks.iter().enumerate() {
            if let Some(ps) = t.filter.as_ref() {
                let moments = projected_moments(ps, &k, pose);
                let sd = moments.map_or(0.0, |(_, sd)| sd);
                let r = (self.params.theta_po_sd * sd).max(self.params.theta_po_floor_px);
                let own = neighbourhood(mask, ps, &k, pose, r);
                claimed.union_with(&own);
                owners.push(i);
                claims.push((own, moments.map(|(c, _)| c)));
            }
        }
        partition_claims(mask, &mut claims);

        let mut exhausted: Vec<usize> = Vec::new();
        for (i, (own, _)) in owners.into_iter().zip(claims) {
            let track = &mut self.tracks[i];
            let ps = track.filter.as_mut().expect("active track has particles");
            let mut rng = stream(self.seed, frame_index, Purpose::TrackFilter, track.id);
            match pf::step_with_mask(ps, &own, pose, &k, &self.filter, &mut rng)? {
                StepOutcome::Updated { .. } => {
                    track.miss_count = 0;
                    track.updates += 1;
                    report.updated.push(track.id);
                }
                StepOutcome::NoObservation | StepOutcome::NoParticleInFrame => {
                    track.miss_count += 1;
                    report.missed.push(track.id);
                    if track.miss_count >= self.params.n_dismiss {
                        exhausted.push(i);
                    }
                }
            }
        }

        let ood = subtract(mask, &claimed);
        report.ood_pixels = ood.count();
        let live = self
            .tracks
            .iter()
            .enumerate()
            .any(|(i, t)| t.is_active() && !exhausted.contains(&i));
        if self.params.mode == TrackerMode::Single && live {
            self.candidates.clear();
        } else {
            self.advance_candidates(&ood, pose, frame_index, &mut report);
        }
        // Fusion runs first so a duplicate starved of pixels is reported as
        // fused rather than dismissed.
        self.fuse(frame_index, &mut report);
        for i in exhausted {
            let track = &mut self.tracks[i];
            if track.filter.is_some() {
                let id = track.id;
                track.dismiss(frame_index);
                for t in self.tracks.iter_mut() {
                    t.overlap.remove(&id);
                }
                report.dismissed.push(id);
            }
        }
        report.candidates = self.candidates.len();
        Ok(report)
    }

    fn advance_candidates(
        &mut self,
        ood: &BinaryMask,
        pose: &CameraPose,
        frame_index: u64,
        report: &mut FrameReport,
    ) {
        let clusters = cluster_pixels(ood, self.params.min_component_px);
        let radius2 = self.params.match_radius_px() * self.params.match_radius_px();
        let mut previous: Vec<Option<Candidate>> =
            core::mem::take(&mut self.candidates).into_iter().map(Some).collect();
        let mut next = Vec::new();
        for (centroid, _) in clusters {
            let nearest = previous
                .iter()
                .enumerate()
                .filter_map(|(i, c)| {
                    let c = c.as_ref()?;
                    let last = c.last_centroid();
                    let d2 = (last.u - centroid.u) * (last.u - centroid.u)
                        + (last.v - centroid.v) * (last.v - centroid.v);
                    (d2 <= radius2).then_some((d2, i))
                })
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let obs = Observation {
                pose: *pose,
                centroid,
            };
            let mut cand = match nearest {
                Some((_, i)) => previous[i].take().expect("unmatched"),
                None => Candidate {
                    history: Vec::with_capacity(self.params.tau_min_obs),
                },
            };
            cand.history.push(obs);
            if cand.history.len() < self.params.tau_min_obs {
                next.push(cand);
                continue;
            }
            let id = self.next_id;
            let mut rng = stream(self.seed, frame_index, Purpose::TrackSpawn, id);
            let first = cand.history.first().expect("non-empty");
            let last = cand.history.last().expect("non-empty");
            if let Ok(ps) = pf::initialize(first, last, &self.intrinsics, &self.filter, &mut rng) {
                self.insert_track(ps, frame_index);
                report.spawned.push(id);
                if self.params.mode == TrackerMode::Single {
                    next.clear();
                    break;
                }
            }
        }
        self.candidates = next;
    }

    fn fuse(&mut self, frame_index: u64, report: &mut FrameReport) {
        let summaries: Vec<(usize, pf::PosteriorSummary)> = self
            .tracks
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.filter.as_ref().map(|ps| (i, pf::summarize(ps))))
            .collect();
        let mut absorbed: Vec<usize> = Vec::new();
        for (a, (ia, sa)) in summaries.iter().enumerate() {
            for (ib, sb) in summaries.iter().skip(a + 1) {
                let dist = (sa.mean - sb.mean).norm();
                let sd = libm::sqrt(sa.covariance.trace()).min(libm::sqrt(sb.covariance.trace()));
                let id_b = self.tracks[*ib].id;
                let id_a = self.tracks[*ia].id;
                if dist <= sd {
                    let count = {
                        let c = self.tracks[*ia].overlap.entry(id_b).or_insert(0);
                        *c += 1;
                        *c
                    };
                    self.tracks[*ib].overlap.insert(id_a, count);
                    if count >= self.params.n_fuse
                        && !absorbed.contains(ia)
                        && !absorbed.contains(ib)
                    {
                        let (ta, tb) = (&self.tracks[*ia], &self.tracks[*ib]);
                        // Lower id wins a tie; tracks are stored in id order.
                        let (win, lose) = if tb.updates > ta.updates {
                            (*ib, *ia)
                        } else {
                            (*ia, *ib)
                        };
                        absorbed.push(lose);
                        report.fused.push((self.tracks[win].id, self.tracks[lose].id));
                    }
                } else {
                    self.tracks[*ia].overlap.remove(&id_b);
                    self.tracks[*ib].overlap.remove(&id_a);
                }
            }
        }
        for i in absorbed {
            let id = self.tracks[i].id;
            self.tracks[i].dismiss(frame_index);
            for t in self.tracks.iter_mut() {
                t.overlap.remove(&id);
            }
            report.dismissed.push(id);
        }
    }
}
