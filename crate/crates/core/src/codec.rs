//! Binary snapshot of an [`OnlineEstimator`].
//!
//! Layout: the magic bytes `FDASNAP\0`, a little-endian `u32` version, then
//! every field in a fixed order. Floats are stored as raw little-endian
//! `f64` so a round trip is bit-exact. Optional values always occupy their
//! full width behind a one-byte flag, so the size depends only on the
//! configuration, never on how many blocks were absorbed. Bandwidth chains
//! are not stored.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::bandwidth::{DesignMode, PilotConstants, PilotState};
use crate::bank::{CandidateBank, Slot};
use crate::counts::CountLedger;
use crate::error::FdaError;
use crate::estimate::{CurveEstimate, SurfaceEstimate};
use crate::grid::GridSpec;
use crate::kernel::{Kernel, KernelFamily};
use crate::smoother::{Design, LocalStats};
use crate::stream::{BandwidthRule, OnlineEstimator, StreamConfig};

pub const MAGIC: &[u8; 8] = b"FDASNAP\0";
pub const VERSION: u32 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.f64(*x);
        }
    }
    fn grid(&mut self, g: &GridSpec) {
        self.f64(g.lo());
        self.f64(g.hi());
        self.u64(g.len() as u64);
    }
    fn opt_f64(&mut self, v: Option<f64>) {
        self.u8(v.is_some() as u8);
        self.f64(v.unwrap_or(0.0));
    }
    fn bank(&mut self, b: &CandidateBank) {
        self.u8(b.design().code());
        self.u64(b.axis_points() as u64);
        self.f64(b.exponent());
        self.u64(b.len() as u64);
        self.u64(b.blocks());
        for s in b.slots() {
            self.f64(s.centroid);
            self.f64s(s.stats.raw());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn bad(msg: impl Into<String>) -> FdaError {
    FdaError::Snapshot(msg.into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> crate::Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(bad(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> crate::Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> crate::Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> crate::Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> crate::Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| bad("count overflows usize"))
    }
    fn f64(&mut self) -> crate::Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> crate::Result<Vec<f64>> {
        if (self.buf.len() - self.pos) / 8 < n {
            return Err(bad(format!("truncated at byte {}", self.pos)));
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn grid(&mut self) -> crate::Result<GridSpec> {
        let lo = self.f64()?;
        let hi = self.f64()?;
        let n = self.usize()?;
        GridSpec::new(lo, hi, n)
    }
    fn opt_f64(&mut self) -> crate::Result<Option<f64>> {
        let flag = self.u8()?;
        let v = self.f64()?;
        match flag {
            0 => Ok(None),
            1 => Ok(Some(v)),
            _ => Err(bad("invalid option flag")),
        }
    }
    fn bank(&mut self) -> crate::Result<CandidateBank> {
        let design = Design::from_code(self.u8()?).ok_or_else(|| bad("unknown design"))?;
        let axis = self.usize()?;
        let exponent = self.f64()?;
        let count = self.usize()?;
        let blocks = self.u64()?;
        let len = LocalStats::zeros_n(design, axis).raw().len();
        let mut slots = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let centroid = self.f64()?;
            let data = self.f64s(len)?;
            slots.push(Slot {
                centroid,
                stats: LocalStats::from_raw(design, axis, data)?,
            });
        }
        CandidateBank::from_parts(design, axis, exponent, slots, blocks)
    }
}

/// Serializes the full estimator state.
pub fn encode(est: &OnlineEstimator) -> Vec<u8> {
    let mut w = Writer { buf: Vec::new() };
    w.buf.extend_from_slice(MAGIC);
    w.buf.extend_from_slice(&VERSION.to_le_bytes());

    let c = &est.config;
    w.u64(c.slots_mean as u64);
    w.u64(c.slots_cov as u64);
    w.u8(c.kernel.code());
    w.grid(&c.curve_grid);
    w.grid(&c.surface_grid);
    w.u8(c.mode as u8);
    constants(&mut w, &c.pilots);
    match c.rule {
        BandwidthRule::PlugIn => {
            w.u8(0);
            w.f64(0.0);
            w.f64(0.0);
        }
        BandwidthRule::Pinned { mu, gamma } => {
            w.u8(1);
            w.f64(mu);
            w.f64(gamma);
        }
    }
    w.f64(c.ridge);

    let l = &est.ledger;
    w.f64s(&l.totals);
    w.u64(l.n_subjects);
    w.u64(l.n_blocks);
    w.f64s(&l.last);
    w.u64(l.last_subjects);

    w.bank(&est.mean_bank);
    w.bank(&est.cov_bank);

    let p = &est.pilots;
    constants(&mut w, &p.constants);
    w.u8(p.mode as u8);
    w.f64s(&[p.theta_mu, p.nu_mu, p.theta_gamma, p.nu_gamma, p.sigma2]);
    for b in [
        &p.cubic,
        &p.aux,
        &p.resid,
        &p.gamma_check,
        &p.spread,
        &p.curv2,
    ] {
        w.bank(b);
    }
    w.f64s(&p.r_curve);
    w.f64s(&p.f_curve);
    w.f64s(&p.gamma_surface);
    w.f64s(&p.spread_surface);
    w.u64(p.mean_updates);
    w.u64(p.cov_updates);

    w.opt_f64(est.h_mu);
    w.opt_f64(est.h_gamma);

    let nc = c.curve_grid.len();
    w.u8(est.mean.is_some() as u8);
    match &est.mean {
        Some(m) => {
            w.f64s(&m.values);
            w.f64(m.bandwidth);
            w.u64(m.block_index);
            w.u64(m.gaps as u64);
        }
        None => {
            w.f64s(&alloc::vec![0.0; nc + 1]);
            w.u64(0);
            w.u64(0);
        }
    }
    let ns = c.surface_grid.len();
    w.u8(est.cov.is_some() as u8);
    match &est.cov {
        Some(s) => {
            w.f64s(&s.values);
            w.f64(s.bandwidth);
            w.u64(s.block_index);
            w.u64(s.gaps as u64);
        }
        None => {
            w.f64s(&alloc::vec![0.0; ns * ns + 1]);
            w.u64(0);
            w.u64(0);
        }
    }
    w.buf
}

fn constants(w: &mut Writer, k: &PilotConstants) {
    w.f64s(&[k.g_mu, k.r_mu, k.g_gamma, k.r_gamma]);
    w.u64(k.j_mean as u64);
    w.u64(k.j_cov as u64);
    w.u64(k.freeze_mean_after);
    w.u64(k.freeze_cov_after);
    w.f64s(&[k.theta_floor, k.nu_floor, k.trim, k.presmooth_scale]);
}

fn read_constants(r: &mut Reader) -> crate::Result<PilotConstants> {
    Ok(PilotConstants {
        g_mu: r.f64()?,
        r_mu: r.f64()?,
        g_gamma: r.f64()?,
        r_gamma: r.f64()?,
        j_mean: r.usize()?,
        j_cov: r.usize()?,
        freeze_mean_after: r.u64()?,
        freeze_cov_after: r.u64()?,
        theta_floor: r.f64()?,
        nu_floor: r.f64()?,
        trim: r.f64()?,
        presmooth_scale: r.f64()?,
    })
}

fn read_mode(r: &mut Reader) -> crate::Result<DesignMode> {
    match r.u8()? {
        0 => Ok(DesignMode::Sparse),
        1 => Ok(DesignMode::Dense),
        _ => Err(bad("unknown design mode")),
    }
}

/// Restores an estimator written by [`encode`].
pub fn decode(bytes: &[u8]) -> crate::Result<OnlineEstimator> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len()).map_err(|_| bad("not a snapshot"))? != MAGIC {
        return Err(bad("not a snapshot"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported snapshot version {version}")));
    }

    let slots_mean = r.usize()?;
    let slots_cov = r.usize()?;
    let family = KernelFamily::from_code(r.u8()?).ok_or_else(|| bad("unknown kernel"))?;
    let curve_grid = r.grid()?;
    let surface_grid = r.grid()?;
    let mode = read_mode(&mut r)?;
    let pilots_c = read_constants(&mut r)?;
    let tag = r.u8()?;
    let (mu, gamma) = (r.f64()?, r.f64()?);
    let rule = match tag {
        0 => BandwidthRule::PlugIn,
        1 => BandwidthRule::Pinned { mu, gamma },
        _ => return Err(bad("unknown bandwidth rule")),
    };
    let ridge = r.f64()?;
    let config = StreamConfig {
        slots_mean,
        slots_cov,
        kernel: family,
        curve_grid,
        surface_grid,
        mode,
        pilots: pilots_c,
        rule,
        ridge,
    };
    config.validate()?;

    let mut ledger = CountLedger::new();
    for t in ledger.totals.iter_mut() {
        *t = r.f64()?;
    }
    ledger.n_subjects = r.u64()?;
    ledger.n_blocks = r.u64()?;
    for t in ledger.last.iter_mut() {
        *t = r.f64()?;
    }
    ledger.last_subjects = r.u64()?;

    let mean_bank = r.bank()?;
    let cov_bank = r.bank()?;

    let constants = read_constants(&mut r)?;
    let pmode = read_mode(&mut r)?;
    let f = r.f64s(5)?;
    let mut pilots = PilotState::new(constants, pmode, curve_grid, surface_grid)?;
    pilots.theta_mu = f[0];
    pilots.nu_mu = f[1];
    pilots.theta_gamma = f[2];
    pilots.nu_gamma = f[3];
    pilots.sigma2 = f[4];
    pilots.cubic = r.bank()?;
    pilots.aux = r.bank()?;
    pilots.resid = r.bank()?;
    pilots.gamma_check = r.bank()?;
    pilots.spread = r.bank()?;
    pilots.curv2 = r.bank()?;
    let nc = curve_grid.len();
    let ns = surface_grid.len();
    pilots.r_curve = r.f64s(nc)?;
    pilots.f_curve = r.f64s(nc)?;
    pilots.gamma_surface = r.f64s(ns * ns)?;
    pilots.spread_surface = r.f64s(ns * ns)?;
    pilots.mean_updates = r.u64()?;
    pilots.cov_updates = r.u64()?;

    let h_mu = r.opt_f64()?;
    let h_gamma = r.opt_f64()?;

    let has_mean = r.u8()?;
    let values = r.f64s(nc)?;
    let bandwidth = r.f64()?;
    let block_index = r.u64()?;
    let gaps = r.usize()?;
    let mean = (has_mean == 1).then_some(CurveEstimate {
        grid: curve_grid,
        values,
        bandwidth,
        block_index,
        gaps,
    });
    let has_cov = r.u8()?;
    let values = r.f64s(ns * ns)?;
    let bandwidth = r.f64()?;
    let block_index = r.u64()?;
    let gaps = r.usize()?;
    let cov = (has_cov == 1).then_some(SurfaceEstimate {
        grid: surface_grid,
        values,
        bandwidth,
        block_index,
        gaps,
    });
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    if mean_bank.len() != slots_mean || cov_bank.len() != slots_cov {
        return Err(bad("bank size disagrees with configuration"));
    }
    Ok(OnlineEstimator {
        kernel: Kernel::new(family)?,
        config,
        ledger,
        mean_bank,
        cov_bank,
        pilots,
        h_mu,
        h_gamma,
        mean,
        cov,
    })
}

impl OnlineEstimator {
    pub fn to_bytes(&self) -> Vec<u8> {
        encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> crate::Result<Self> {
        decode(bytes)
    }
}
