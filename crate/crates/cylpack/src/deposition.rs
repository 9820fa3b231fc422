//! Template construction and greedy sequential deposition.
//!
//! A column is grown in two stages. First a *template* seeds the surface:
//! sphere 1 sits at the origin, sphere 2 at the template pitch
//! `(dphi21, dz21)`, and further spheres continue at multiples of `dphi21`
//! until every angle of the circumference lies within the contact window of
//! some seed. Second, spheres are *deposited* one at a time, each dropped at
//! the angle where the support envelope — the upper contact surface of all
//! material below — is lowest, mimicking gravity along the cylinder axis.
//!
//! The envelope at angle `theta` is `max_j z_j + sqrt(1 - (D-1)^2
//! sin^2((theta - phi_j)/2))` over sites `j` whose window contains `theta`.
//! Its minima can only occur at a crossing of two branches, at a branch's
//! interior minimum (the antipode of a site, for `D <= 2`), at a window edge
//! (for `D > 2`), so the deposit angle is found by exact enumeration of those
//! candidates; a coarse scan grid acts as a safety net against enumeration
//! gaps. Ties in height are broken toward the smallest angular advance from
//! the previously placed sphere, which keeps runs bitwise deterministic.

use crate::error::{Error, Result};
use crate::geometry::{
    angular_window, center_distance, contact_offset, wrap_angle, DiameterRatio, SurfaceSite,
};
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

/// Template seed parameters: the angular and axial offsets of sphere 2
/// relative to sphere 1, and the handedness of the seeding spiral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemplateParams {
    /// Angular pitch in `[0, pi]`.
    pub dphi21: f64,
    /// Axial pitch in `[0, 1]`. Must be `Some` exactly when the contact
    /// equation has no solution at `dphi21` (the contact solution fixes the
    /// offset otherwise).
    pub dz21: Option<f64>,
    /// `+1` or `-1`: the sense in which angles advance.
    pub direction: i8,
}

impl TemplateParams {
    pub fn new(dphi21: f64, dz21: Option<f64>, direction: i8) -> Result<Self> {
        let p = TemplateParams {
            dphi21,
            dz21,
            direction,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dphi21.is_finite() || !(0.0..=PI).contains(&self.dphi21) {
            return Err(Error::InvalidParameter(format!(
                "dphi21 = {} must lie in [0, pi]",
                self.dphi21
            )));
        }
        if let Some(dz) = self.dz21 {
            if !dz.is_finite() || !(0.0..=1.0).contains(&dz) {
                return Err(Error::InvalidParameter(format!(
                    "dz21 = {} must lie in [0, 1]",
                    dz
                )));
            }
        }
        if self.direction != 1 && self.direction != -1 {
            return Err(Error::InvalidParameter(format!(
                "direction = {} must be +1 or -1",
                self.direction
            )));
        }
        Ok(())
    }
}

/// Knobs for deposition runs. `validate` is called by every entry point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepositionConfig {
    /// Stop once the post-template material spans at least this many
    /// diameters axially.
    pub target_length: f64,
    /// Number of fixed angles in the safety-net envelope scan.
    pub scan_grid: usize,
    /// Slack allowed on the unit contact distance during validation.
    pub contact_tol: f64,
    /// Heights within this of the minimum count as tied (the tie then goes
    /// to the smallest angular advance).
    pub degeneracy_tol: f64,
    /// Spheres per deposition step; `1` is plain sequential deposition,
    /// larger values drop a symmetric ring of spheres per step.
    pub group_size: usize,
    /// Upper bound on template size before the seed is declared invalid.
    pub max_template_sites: usize,
}

impl Default for DepositionConfig {
    fn default() -> Self {
        DepositionConfig {
            target_length: 20.0,
            scan_grid: 4096,
            contact_tol: 1e-9,
            degeneracy_tol: 1e-9,
            group_size: 1,
            max_template_sites: 64,
        }
    }
}

impl DepositionConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.target_length.is_finite() || self.target_length < 10.0 {
            return Err(Error::InvalidParameter(format!(
                "target_length = {} must be at least 10 diameters",
                self.target_length
            )));
        }
        if self.scan_grid < 256 {
            return Err(Error::InvalidParameter(format!(
                "scan_grid = {} must be at least 256",
                self.scan_grid
            )));
        }
        for (name, tol) in [
            ("contact_tol", self.contact_tol),
            ("degeneracy_tol", self.degeneracy_tol),
        ] {
            if !(tol > 0.0 && tol <= 1e-6) {
                return Err(Error::InvalidParameter(format!(
                    "{} = {} must lie in (0, 1e-6]",
                    name, tol
                )));
            }
        }
        if !(1..=4).contains(&self.group_size) {
            return Err(Error::InvalidParameter(format!(
                "group_size = {} must lie in 1..=4",
                self.group_size
            )));
        }
        if self.max_template_sites < 2 {
            return Err(Error::InvalidParameter(
                "max_template_sites must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// A grown (or growing) column of sphere centers.
#[derive(Debug, Clone)]
pub struct Column {
    pub ratio: DiameterRatio,
    /// All sites in deposition order; the first `template_len` are seeds.
    pub sites: Vec<SurfaceSite>,
    pub template_len: usize,
    pub direction: i8,
}

impl Column {
    /// Sites deposited after the template.
    pub fn post_template(&self) -> &[SurfaceSite] {
        &self.sites[self.template_len.min(self.sites.len())..]
    }

    /// Axial span of the post-template material.
    pub fn post_extent(&self) -> f64 {
        let post = self.post_template();
        if post.len() < 2 {
            return 0.0;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in post {
            lo = lo.min(s.z);
            hi = hi.max(s.z);
        }
        hi - lo
    }
}

/// Height of the support envelope of `col` at angle `phi` (need not be
/// wrapped): the highest in-window contact branch, or `None` when no site's
/// window reaches `phi`.
///
/// Columns grown by this crate never put material *above* the envelope, but
/// hand-built ones can; the result is then bumped upward through successive
/// branch heights until it clears all overlaps.
pub fn support_height(col: &Column, phi: f64) -> Option<f64> {
    let w = angular_window(col.ratio);
    let span = col.ratio.span();
    let theta = wrap_angle(phi);
    let mut branches: Vec<f64> = Vec::new();
    for s in &col.sites {
        let dphi = wrap_angle(theta - wrap_angle(s.phi));
        if dphi.abs() > w {
            continue;
        }
        let c = span * (0.5 * dphi).sin();
        let r = 1.0 - c * c;
        if r >= -1e-12 {
            branches.push(s.z + r.max(0.0).sqrt());
        }
    }
    if branches.is_empty() {
        return None;
    }
    branches.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut h = *branches.last().unwrap();
    // Climb to the next branch height while anything overlaps the probe.
    let overlaps = |h: f64| {
        let probe = SurfaceSite::new(usize::MAX, theta, h);
        col.sites
            .iter()
            .any(|s| center_distance(col.ratio, s, &probe) < 1.0 - 1e-9)
    };
    let mut idx = branches.len();
    while overlaps(h) {
        // Branch heights at or below the current maximum cannot clear it;
        // walk upward through the remaining distinct values.
        while idx > 0 && branches[idx - 1] <= h + 1e-12 {
            idx -= 1;
        }
        if idx == branches.len() {
            return None;
        }
        h = branches[idx];
        idx = branches.len();
    }
    Some(h)
}

/// Builds the template column for the given seed parameters.
///
/// Sphere 1 sits at `(0, 0)`; sphere 2 at `dphi21` with its axial offset
/// taken from the contact equation when solvable (supplying `dz21` then is an
/// error) and from `dz21` otherwise (omitting it then is an error). Seeding
/// continues at multiples of `dphi21` — resting on prior seeds where a
/// contact window reaches, at multiples of `dz21` otherwise — until the
/// contact windows of the seeds cover the full circumference. A final
/// all-pairs overlap check rejects degenerate seeds.
pub fn build_template(
    d: DiameterRatio,
    params: &TemplateParams,
    cfg: &DepositionConfig,
) -> Result<Column> {
    cfg.validate()?;
    params.validate()?;
    let w = angular_window(d);
    let dir = params.direction as f64;

    let mut sites = vec![SurfaceSite::new(0, 0.0, 0.0)];
    let z2 = match (contact_offset(d, params.dphi21), params.dz21) {
        (Some(c), None) => c.dz,
        (Some(_), Some(_)) => {
            return Err(Error::UnexpectedAxialOffset {
                dphi21: params.dphi21,
            })
        }
        (None, Some(dz)) => dz,
        (None, None) => {
            return Err(Error::MissingAxialOffset {
                dphi21: params.dphi21,
            })
        }
    };
    sites.push(SurfaceSite::new(1, dir * params.dphi21, z2));

    while !windows_cover_circle(&sites, w) {
        if sites.len() >= cfg.max_template_sites {
            return Err(Error::InvalidTemplate(format!(
                "contact windows do not cover the circumference after {} seeds \
                 (dphi21 = {})",
                sites.len(),
                params.dphi21
            )));
        }
        let n = sites.len();
        let phi = dir * n as f64 * params.dphi21;
        let col = Column {
            ratio: d,
            sites: sites.clone(),
            template_len: n,
            direction: params.direction,
        };
        let z = match support_height(&col, phi) {
            Some(h) => h,
            None => match params.dz21 {
                Some(dz) => n as f64 * dz,
                None => {
                    return Err(Error::MissingAxialOffset {
                        dphi21: params.dphi21,
                    })
                }
            },
        };
        sites.push(SurfaceSite::new(n, phi, z));
    }

    for i in 0..sites.len() {
        for j in i + 1..sites.len() {
            if center_distance(d, &sites[i], &sites[j]) < 1.0 - cfg.contact_tol {
                return Err(Error::InvalidTemplate(format!(
                    "seeds {} and {} overlap (dphi21 = {}, dz21 = {:?})",
                    i, j, params.dphi21, params.dz21
                )));
            }
        }
    }

    let template_len = sites.len();
    Ok(Column {
        ratio: d,
        sites,
        template_len,
        direction: params.direction,
    })
}

/// True when every angle lies within `w` of some site (max circular gap
/// between consecutive wrapped angles at most `2w`).
fn windows_cover_circle(sites: &[SurfaceSite], w: f64) -> bool {
    let mut angles: Vec<f64> = sites.iter().map(|s| wrap_angle(s.phi)).collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut max_gap: f64 = TWO_PI - (angles[angles.len() - 1] - angles[0]);
    for pair in angles.windows(2) {
        max_gap = max_gap.max(pair[1] - pair[0]);
    }
    max_gap <= 2.0 * w + 1e-12
}

/// One candidate landing spot for the next sphere.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    /// Angular advance from the previous sphere, in the deposition
    /// direction, in `[0, 2 pi)`.
    u: f64,
    height: f64,
}

/// Incremental deposition state.
///
/// `active` holds the indices (sorted by height) of sites that can still
/// support future material: once the envelope minimum has passed `z + 1` a
/// site's branch lies strictly below every future envelope and is dropped.
/// `grid` caches the exact envelope over *all* sites on fixed angles and is
/// only consulted as a safety net.
struct Engine {
    d: DiameterRatio,
    span: f64,
    window: f64,
    dir: f64,
    cfg: DepositionConfig,
    sites: Vec<SurfaceSite>,
    wrapped: Vec<f64>,
    active: Vec<usize>,
    grid: Vec<f64>,
    grid_angles: Vec<f64>,
    prev_phi: f64,
    /// Lower bound on the envelope minimum; drives pruning.
    env_floor: f64,
    post_zmin: f64,
    post_zmax: f64,
    template_len: usize,
    direction: i8,
}

impl Engine {
    fn from_column(col: Column, cfg: &DepositionConfig) -> Result<Self> {
        cfg.validate()?;
        if col.sites.is_empty() {
            return Err(Error::InvalidParameter(
                "cannot deposit onto an empty column".into(),
            ));
        }
        let g = cfg.scan_grid;
        let grid_angles: Vec<f64> = (0..g)
            .map(|k| wrap_angle(TWO_PI * k as f64 / g as f64))
            .collect();
        let mut eng = Engine {
            d: col.ratio,
            span: col.ratio.span(),
            window: angular_window(col.ratio),
            dir: col.direction as f64,
            cfg: *cfg,
            sites: Vec::new(),
            wrapped: Vec::new(),
            active: Vec::new(),
            grid: vec![f64::NEG_INFINITY; g],
            grid_angles,
            prev_phi: col.sites.last().unwrap().phi,
            env_floor: f64::NEG_INFINITY,
            post_zmin: f64::INFINITY,
            post_zmax: f64::NEG_INFINITY,
            template_len: col.template_len,
            direction: col.direction,
        };
        for s in &col.sites {
            eng.fold_in(s.phi, s.z);
            if s.index >= col.template_len {
                eng.post_zmin = eng.post_zmin.min(s.z);
                eng.post_zmax = eng.post_zmax.max(s.z);
            }
        }
        Ok(eng)
    }

    fn into_column(self) -> Column {
        Column {
            ratio: self.d,
            sites: self.sites,
            template_len: self.template_len,
            direction: self.direction,
        }
    }

    fn post_extent(&self) -> f64 {
        if self.post_zmax > self.post_zmin {
            self.post_zmax - self.post_zmin
        } else {
            0.0
        }
    }

    /// Contact branch of site `j` at wrapped angle `theta`, if in window.
    fn branch(&self, j: usize, theta: f64) -> Option<f64> {
        self.branch_at(self.wrapped[j], self.sites[j].z, theta)
    }

    fn branch_at(&self, site_w: f64, site_z: f64, theta: f64) -> Option<f64> {
        let dphi = wrap_angle(theta - site_w);
        if dphi.abs() > self.window {
            return None;
        }
        let c = self.span * (0.5 * dphi).sin();
        let r = 1.0 - c * c;
        if r < -1e-12 {
            None
        } else {
            Some(site_z + r.max(0.0).sqrt())
        }
    }

    /// Envelope over the active set at wrapped angle `theta`.
    fn envelope(&self, theta: f64) -> f64 {
        let mut h = f64::NEG_INFINITY;
        // Scan from the highest site down: once z + 1 cannot beat the
        // running maximum no lower site can either.
        for &j in self.active.iter().rev() {
            if self.sites[j].z + 1.0 <= h {
                break;
            }
            if let Some(v) = self.branch(j, theta) {
                if v > h {
                    h = v;
                }
            }
        }
        h
    }

    /// Registers a new site everywhere except the `sites` vector itself.
    fn fold_in(&mut self, phi: f64, z: f64) {
        let index = self.sites.len();
        let w = wrap_angle(phi);
        self.sites.push(SurfaceSite::new(index, phi, z));
        self.wrapped.push(w);
        // Keep `active` sorted by (z, index).
        let pos = self
            .active
            .partition_point(|&j| (self.sites[j].z, j) < (z, index));
        self.active.insert(pos, index);
        for k in 0..self.grid.len() {
            if let Some(v) = self.branch_at(w, z, self.grid_angles[k]) {
                if v > self.grid[k] {
                    self.grid[k] = v;
                }
            }
        }
    }

    fn prune(&mut self) {
        let floor = self.env_floor;
        let sites = &self.sites;
        self.active.retain(|&j| sites[j].z + 1.0 >= floor - 1e-9);
    }

    /// Crossing angles of the contact branches of sites `a` and `b`.
    ///
    /// With the lower site at `(0, 0)` in relative coordinates and the upper
    /// at `(delta, dz)`, equal branch heights mean `sqrt(A) - sqrt(B) = dz`
    /// with `A = c + k cos(alpha)`, `B = c + k cos(alpha - delta)`,
    /// `k = (D-1)^2/2`, `c = 1 - k`. Squaring twice gives a quadratic in
    /// `x = cos(alpha - delta/2)`; spurious roots from the squaring are
    /// removed by checking the unsquared residual, and survivors get a few
    /// Newton iterations to clean up the conditioning of the double square.
    fn crossing_angles(&self, a: usize, b: usize, out: &mut [f64; 4]) -> usize {
        let (i, j) = if self.sites[a].z <= self.sites[b].z {
            (a, b)
        } else {
            (b, a)
        };
        let delta = wrap_angle(self.wrapped[j] - self.wrapped[i]);
        let dz = self.sites[j].z - self.sites[i].z;
        let k = 0.5 * self.span * self.span;
        let c = 1.0 - k;
        let (sh, ch) = (0.5 * delta).sin_cos();
        let a2 = -4.0 * k * k * sh * sh;
        let a1 = -4.0 * dz * dz * k * ch;
        let a0 = 4.0 * k * k * sh * sh + dz.powi(4) - 4.0 * dz * dz * c;

        let mut roots = [0.0f64; 2];
        let nroots = if a2.abs() < 1e-300 {
            if a1.abs() < 1e-300 {
                0
            } else {
                roots[0] = -a0 / a1;
                1
            }
        } else {
            let disc = a1 * a1 - 4.0 * a2 * a0;
            if disc < 0.0 {
                0
            } else {
                // Numerically stable quadratic roots.
                let q = -0.5 * (a1 + a1.signum() * disc.sqrt());
                roots[0] = q / a2;
                let n = if q.abs() > 1e-300 {
                    roots[1] = a0 / q;
                    2
                } else {
                    roots[1] = 0.0;
                    2
                };
                n
            }
        };

        let mut count = 0;
        for &x in roots.iter().take(nroots) {
            if !x.is_finite() || x.abs() > 1.0 + 1e-9 {
                continue;
            }
            let am = x.clamp(-1.0, 1.0).acos();
            for sgn in [1.0, -1.0] {
                let mut alpha = 0.5 * delta + sgn * am;
                // Unsquared residual at alpha, and its derivative.
                let eval = |alpha: f64| -> Option<(f64, f64)> {
                    let va = c + k * alpha.cos();
                    let vb = c + k * (alpha - delta).cos();
                    if va < 1e-12 || vb < 1e-12 {
                        return None;
                    }
                    let (sa, sb) = (va.sqrt(), vb.sqrt());
                    let g = sa - sb - dz;
                    let gp = -0.5 * k * (alpha.sin() / sa - (alpha - delta).sin() / sb);
                    Some((g, gp))
                };
                let Some((mut g, mut gp)) = eval(alpha) else {
                    continue;
                };
                if g.abs() > 1e-5 {
                    continue;
                }
                for _ in 0..3 {
                    if g.abs() < 1e-14 || gp.abs() < 1e-12 {
                        break;
                    }
                    alpha -= g / gp;
                    match eval(alpha) {
                        Some((g2, gp2)) => {
                            g = g2;
                            gp = gp2;
                        }
                        None => break,
                    }
                }
                if g.abs() > 1e-7 {
                    continue;
                }
                let theta = wrap_angle(self.wrapped[i] + alpha);
                // Deduplicate (the two quadratic roots can coincide).
                if out[..count].iter().any(|t| (t - theta).abs() < 1e-10) {
                    continue;
                }
                if count < 4 {
                    out[count] = theta;
                    count += 1;
                }
            }
        }
        count
    }

    /// Picks the landing spot for the next sphere: the lowest point of the
    /// envelope, ties broken toward the smallest angular advance.
    fn select_next(&self) -> Candidate {
        let prev_w = wrap_angle(self.prev_phi);
        let mut cands: Vec<Candidate> = Vec::with_capacity(64);
        let mut running = f64::INFINITY;

        let consider = |cands: &mut Vec<Candidate>, running: &mut f64, theta: f64| {
            let h = self.envelope(theta);
            if h.is_finite() {
                let u = (self.dir * (theta - prev_w)).rem_euclid(TWO_PI);
                cands.push(Candidate { u, height: h });
                if h < *running {
                    *running = h;
                }
            }
        };

        // Resting directly on top of the previous sphere (zero advance).
        consider(&mut cands, &mut running, prev_w);

        // Interior branch minima (antipodes) for D <= 2, window edges beyond.
        for &j in &self.active {
            if self.span <= 1.0 {
                consider(&mut cands, &mut running, wrap_angle(self.wrapped[j] + PI));
            } else {
                consider(
                    &mut cands,
                    &mut running,
                    wrap_angle(self.wrapped[j] + self.window),
                );
                consider(
                    &mut cands,
                    &mut running,
                    wrap_angle(self.wrapped[j] - self.window),
                );
            }
        }

        // Crossings of branch pairs. `active` is sorted by height and a
        // crossing is never lower than the higher site, so once a site's
        // height exceeds the running minimum (plus the tie band) no later
        // pair can matter.
        let tol = self.cfg.degeneracy_tol;
        let mut thetas = [0.0f64; 4];
        for (ai, &i) in self.active.iter().enumerate() {
            if self.sites[i].z > running + tol {
                break;
            }
            for &j in self.active.iter().skip(ai + 1) {
                if self.sites[j].z > running + tol {
                    break;
                }
                let n = self.crossing_angles(i, j, &mut thetas);
                for &theta in thetas.iter().take(n) {
                    consider(&mut cands, &mut running, theta);
                }
            }
        }

        // Safety net: if the coarse scan sees something meaningfully lower
        // than every exact candidate, refine it and add it to the pool.
        let (gi, gmin) = self
            .grid
            .iter()
            .enumerate()
            .fold((0usize, f64::INFINITY), |best, (k, &v)| {
                if v < best.1 {
                    (k, v)
                } else {
                    best
                }
            });
        if gmin < running - tol {
            let step = TWO_PI / self.grid.len() as f64;
            let center = self.grid_angles[gi];
            let (theta, _) = golden_min(
                |t| {
                    let h = self.envelope(wrap_angle(t));
                    if h.is_finite() {
                        h
                    } else {
                        f64::INFINITY
                    }
                },
                center - step,
                center + step,
                60,
            );
            consider(&mut cands, &mut running, wrap_angle(theta));
        }

        // Two-pass selection: lowest height, then smallest advance among
        // candidates within the degeneracy band.
        let hmin = running;
        let mut best: Option<Candidate> = None;
        for c in cands {
            if c.height <= hmin + tol {
                let better = match best {
                    None => true,
                    Some(b) => c.u < b.u,
                };
                if better {
                    best = Some(c);
                }
            }
        }
        best.expect("envelope has at least the stacking candidate")
    }

    fn deposit_one(&mut self) {
        let c = self.select_next();
        let phi = self.prev_phi + self.dir * c.u;
        self.fold_in(phi, c.height);
        self.prev_phi = phi;
        self.env_floor = c.height;
        self.post_zmin = self.post_zmin.min(c.height);
        self.post_zmax = self.post_zmax.max(c.height);
        self.prune();
    }

    /// Heights of a ring of `group_size` spheres at equal angular spacing,
    /// each resting on the existing material plus the ring members already
    /// placed; returns the positions and the highest member (the roof).
    fn group_profile(&self, u_off: f64, placed: &mut Vec<(f64, f64)>) -> f64 {
        let u = self.cfg.group_size;
        let step = TWO_PI / u as f64;
        let prev_w = wrap_angle(self.prev_phi);
        placed.clear();
        let mut roof = f64::NEG_INFINITY;
        for k in 0..u {
            let theta = wrap_angle(prev_w + self.dir * (u_off + k as f64 * step));
            let mut h = self.envelope(theta);
            for &(wm, zm) in placed.iter() {
                if let Some(v) = self.branch_at(wm, zm, theta) {
                    if v > h {
                        h = v;
                    }
                }
            }
            if !h.is_finite() {
                return f64::INFINITY;
            }
            placed.push((theta, h));
            roof = roof.max(h);
        }
        roof
    }

    fn deposit_group(&mut self) -> Result<()> {
        let u = self.cfg.group_size;
        if u == 1 {
            self.deposit_one();
            return Ok(());
        }
        let g = self.cfg.scan_grid;
        let gstep = TWO_PI / g as f64;
        let tol = self.cfg.degeneracy_tol;
        let mut scratch = Vec::with_capacity(u);

        // Scan the ring offset, minimizing the roof of the group.
        let mut roofs = Vec::with_capacity(g);
        let mut rmin = f64::INFINITY;
        for k in 0..g {
            let r = self.group_profile(k as f64 * gstep, &mut scratch);
            if r < rmin {
                rmin = r;
            }
            roofs.push(r);
        }
        if !rmin.is_finite() {
            return Err(Error::InvalidTemplate(
                "group deposition found no supported ring placement".into(),
            ));
        }
        let mut best_u = f64::INFINITY;
        for (k, &r) in roofs.iter().enumerate() {
            if r <= rmin + tol {
                let uo = k as f64 * gstep;
                if uo < best_u {
                    best_u = uo;
                }
            }
        }
        let coarse_roof = self.group_profile(best_u, &mut scratch);
        let (refined_u, refined_roof) = golden_min(
            |uo| self.group_profile(uo, &mut scratch),
            best_u - gstep,
            best_u + gstep,
            60,
        );
        let chosen = if refined_roof < coarse_roof - 1e-12 {
            refined_u
        } else {
            best_u
        };

        let roof = self.group_profile(chosen, &mut scratch);
        debug_assert!(roof.is_finite());
        let step = TWO_PI / u as f64;
        let base_phi = self.prev_phi + self.dir * chosen;
        let members: Vec<(f64, f64)> = scratch
            .iter()
            .enumerate()
            .map(|(k, &(_, z))| (base_phi + self.dir * k as f64 * step, z))
            .collect();
        for (phi, z) in members {
            self.fold_in(phi, z);
            self.post_zmin = self.post_zmin.min(z);
            self.post_zmax = self.post_zmax.max(z);
            self.prev_phi = phi;
        }
        // The envelope never shrinks, so the last single-deposit floor is
        // still a valid lower bound; groups only tighten it when their
        // lowest member clears it anyway.
        self.prune();
        Ok(())
    }
}

/// Golden-section minimization on `[a, b]` with a fixed iteration count
/// (deterministic); returns the bracket midpoint and its value.
fn golden_min(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    (x, fx)
}

/// Computes the next deposit for `col` without modifying it.
///
/// Appending the returned site to `col.sites` reproduces one step of
/// [`run_deposition`] exactly.
pub fn deposit_next(col: &Column, cfg: &DepositionConfig) -> Result<SurfaceSite> {
    let eng = Engine::from_column(col.clone(), cfg)?;
    let c = eng.select_next();
    let phi = eng.prev_phi + eng.dir * c.u;
    Ok(SurfaceSite::new(col.sites.len(), phi, c.height))
}

/// Computes the next deposition *group* for `col` without modifying it:
/// `group_size` spheres at equal angular spacing, placed sequentially and
/// positioned to minimize the roof of the group. With `group_size = 1` this
/// reduces exactly to [`deposit_next`].
pub fn deposit_group(col: &Column, cfg: &DepositionConfig) -> Result<Vec<SurfaceSite>> {
    let mut eng = Engine::from_column(col.clone(), cfg)?;
    let before = eng.sites.len();
    eng.deposit_group()?;
    Ok(eng.sites[before..].to_vec())
}

/// Grows a full column: template, then deposition until the post-template
/// material spans `cfg.target_length` diameters.
pub fn run_deposition(
    d: DiameterRatio,
    params: &TemplateParams,
    cfg: &DepositionConfig,
) -> Result<Column> {
    let template = build_template(d, params, cfg)?;
    let mut eng = Engine::from_column(template, cfg)?;
    // Generous bound: no packing in range exceeds ~8 spheres per diameter.
    let cap = eng.template_len
        + cfg.group_size * (200 + 12 * cfg.target_length.ceil() as usize);
    while eng.post_extent() < cfg.target_length {
        if cfg.group_size == 1 {
            eng.deposit_one();
        } else {
            eng.deposit_group()?;
        }
        if eng.sites.len() > cap {
            return Err(Error::InvalidTemplate(
                "deposition failed to make axial progress".into(),
            ));
        }
    }
    Ok(eng.into_column())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratio(v: f64) -> DiameterRatio {
        DiameterRatio::new(v).unwrap()
    }

    fn quick_cfg() -> DepositionConfig {
        DepositionConfig {
            target_length: 10.0,
            scan_grid: 256,
            ..DepositionConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(DepositionConfig::default().validate().is_ok());
        let mut c = DepositionConfig::default();
        c.target_length = 5.0;
        assert!(c.validate().is_err());
        let mut c = DepositionConfig::default();
        c.scan_grid = 16;
        assert!(c.validate().is_err());
        let mut c = DepositionConfig::default();
        c.group_size = 9;
        assert!(c.validate().is_err());
    }

    #[test]
    fn template_param_validation() {
        assert!(TemplateParams::new(1.0, None, 1).is_ok());
        assert!(TemplateParams::new(-0.1, None, 1).is_err());
        assert!(TemplateParams::new(1.0, Some(2.0), 1).is_err());
        assert!(TemplateParams::new(1.0, None, 0).is_err());
    }

    #[test]
    fn template_rejects_redundant_or_missing_offset() {
        let cfg = quick_cfg();
        // Contact solvable: dz21 must be absent.
        let p = TemplateParams::new(1.0, Some(0.5), 1).unwrap();
        assert!(matches!(
            build_template(ratio(1.5), &p, &cfg),
            Err(Error::UnexpectedAxialOffset { .. })
        ));
        // Contact unsolvable: dz21 required.
        let p = TemplateParams::new(2.5, None, 1).unwrap();
        assert!(matches!(
            build_template(ratio(2.4), &p, &cfg),
            Err(Error::MissingAxialOffset { .. })
        ));
    }

    #[test]
    fn template_len_two_when_window_is_full() {
        let cfg = quick_cfg();
        for d in [1.0, 1.5, 2.0] {
            for dphi in [0.0, 1.0, PI] {
                let p = TemplateParams::new(dphi, None, 1).unwrap();
                let col = build_template(ratio(d), &p, &cfg).unwrap();
                assert_eq!(col.template_len, 2);
            }
        }
    }

    #[test]
    fn template_chains_until_coverage() {
        // At D = 2.4 with a 2pi/3 pitch the third seed closes the circle;
        // both later seeds are out of every window, so axial offsets chain.
        let cfg = quick_cfg();
        let p = TemplateParams::new(2.0 * PI / 3.0, Some(0.5), 1).unwrap();
        let col = build_template(ratio(2.4), &p, &cfg).unwrap();
        assert_eq!(col.template_len, 3);
        assert!((col.sites[1].z - 0.5).abs() < 1e-15);
        assert!((col.sites[2].z - 1.0).abs() < 1e-15);
    }

    #[test]
    fn support_height_basics() {
        let col = Column {
            ratio: ratio(2.4),
            sites: vec![SurfaceSite::new(0, 0.0, 0.0)],
            template_len: 1,
            direction: 1,
        };
        // Directly on top.
        assert!((support_height(&col, 0.0).unwrap() - 1.0).abs() < 1e-15);
        // Window edge: grazing contact.
        let w = angular_window(col.ratio);
        assert!(support_height(&col, 0.99 * w).unwrap() < 0.2);
        // Out of reach.
        assert!(support_height(&col, PI).is_none());
    }

    #[test]
    fn unit_ratio_stacks_straight_up() {
        let p = TemplateParams::new(0.0, None, 1).unwrap();
        let col = run_deposition(ratio(1.0), &p, &quick_cfg()).unwrap();
        assert!(col.post_extent() >= 10.0);
        for pair in col.sites.windows(2) {
            assert!((pair[1].z - pair[0].z - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zigzag_at_moderate_ratio() {
        // Well below the helix transition the optimal antipodal seed
        // reproduces the zigzag: steps of pi with the contact rise.
        let p = TemplateParams::new(PI, None, 1).unwrap();
        let col = run_deposition(ratio(1.5), &p, &quick_cfg()).unwrap();
        let rise = contact_offset(col.ratio, PI).unwrap().dz;
        let post = col.post_template();
        for pair in post.windows(2) {
            let dphi = wrap_angle(pair[1].phi - pair[0].phi);
            assert!((dphi.abs() - PI).abs() < 1e-9, "step {}", dphi);
            assert!((pair[1].z - pair[0].z - rise).abs() < 1e-9);
        }
    }

    #[test]
    fn doublets_at_ratio_two() {
        // At D = 2 the antipodal seed pair lies level and each deposit lands
        // in a crossing at exactly sqrt(1/2) above the supporting pair.
        let p = TemplateParams::new(PI, None, 1).unwrap();
        let col = run_deposition(ratio(2.0), &p, &quick_cfg()).unwrap();
        let layer = 0.5f64.sqrt();
        for s in col.post_template() {
            let layers = s.z / layer;
            assert!(
                (layers - layers.round()).abs() < 1e-7,
                "z = {} is not on the doublet layer grid",
                s.z
            );
        }
        // Two spheres per layer.
        let post = col.post_template();
        let mut zs: Vec<f64> = post.iter().map(|s| s.z).collect();
        zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in zs.chunks_exact(2) {
            assert!((pair[0] - pair[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn deposit_next_matches_run_deposition() {
        let d = ratio(1.7);
        let p = TemplateParams::new(2.0, None, 1).unwrap();
        let cfg = quick_cfg();
        let full = run_deposition(d, &p, &cfg).unwrap();
        let mut col = build_template(d, &p, &cfg).unwrap();
        while col.sites.len() < full.sites.len() {
            let s = deposit_next(&col, &cfg).unwrap();
            col.sites.push(s);
        }
        for (a, b) in full.sites.iter().zip(col.sites.iter()) {
            assert_eq!(a.phi, b.phi);
            assert_eq!(a.z, b.z);
        }
    }

    #[test]
    fn group_of_one_reduces_to_single_deposit() {
        let d = ratio(1.9);
        let p = TemplateParams::new(2.2, None, 1).unwrap();
        let cfg = quick_cfg();
        let col = build_template(d, &p, &cfg).unwrap();
        let single = deposit_next(&col, &cfg).unwrap();
        let group = deposit_group(&col, &cfg).unwrap();
        assert_eq!(group.len(), 1);
        assert_eq!(group[0].phi, single.phi);
        assert_eq!(group[0].z, single.z);
    }

    #[test]
    fn deposits_never_overlap() {
        for (d, dphi) in [(1.5, PI), (1.94, 2.6), (2.2, 1.3), (2.65, 0.9)] {
            let p = TemplateParams::new(dphi, None, 1).unwrap();
            let col = run_deposition(ratio(d), &p, &quick_cfg()).unwrap();
            for i in 0..col.sites.len() {
                for j in i + 1..col.sites.len() {
                    let dist = center_distance(col.ratio, &col.sites[i], &col.sites[j]);
                    assert!(
                        dist >= 1.0 - 1e-7,
                        "sites {} and {} at distance {} (d = {})",
                        i,
                        j,
                        dist,
                        d
                    );
                }
            }
        }
    }

    #[test]
    fn post_template_heights_never_decrease() {
        for (d, dphi) in [(1.3, 3.0), (1.992, 2.4), (2.5, 1.1)] {
            let p = TemplateParams::new(dphi, None, 1).unwrap();
            let col = run_deposition(ratio(d), &p, &quick_cfg()).unwrap();
            let post = col.post_template();
            for pair in post.windows(2) {
                assert!(pair[1].z >= pair[0].z - 1e-12);
            }
        }
    }
}
