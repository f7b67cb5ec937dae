//! CSV emission and ingestion for cap profiles and flow snapshots.
//!
//! Headers are fixed by the external interface: `r,v,v_prime,phi` for caps
//! and `r,u,W,nH,absA` (`r,theta,u,W,nH,absA` in polar mode) for snapshots.
//! Values use Rust's shortest round-trip float formatting, which is
//! deterministic, so identical runs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context};

use kflow_core::barrier::CapProfile;
use kflow_core::estimates::shape_operator_norm_values;
use kflow_core::flow::{
    gradient_w_values, mean_curvature_values, polar_gradient_w_values, FlowTrace, GridKind,
};
use kflow_core::WarpedModel;

pub const CAP_HEADER: &str = "r,v,v_prime,phi";
pub const SNAP_HEADER_RADIAL: &str = "r,u,W,nH,absA";
pub const SNAP_HEADER_POLAR: &str = "r,theta,u,W,nH,absA";

pub fn write_cap_csv(path: &Path, model: &WarpedModel, cap: &CapProfile) -> anyhow::Result<()> {
    let mut out = String::new();
    writeln!(out, "# model={} n={}", model.name(), model.dimension())?;
    writeln!(out, "# R={} H_R={}", cap.radius, cap.mean_curvature)?;
    writeln!(out, "{CAP_HEADER}")?;
    for node in &cap.nodes {
        writeln!(out, "{},{},{},{}", node.r, node.v, node.v_prime, node.phi)?;
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// One CSV per snapshot, fields recomputed from the stored state.
pub fn write_snapshot_csv(path: &Path, trace: &FlowTrace, k: usize) -> anyhow::Result<()> {
    let snap = &trace.snapshots[k];
    let mut out = String::new();
    match &trace.grid {
        GridKind::Radial(grid) => {
            let w = gradient_w_values(&trace.model, grid, &snap.state.u);
            let nh = mean_curvature_values(&trace.model, grid, &snap.state.u);
            let abs_a = shape_operator_norm_values(&trace.model, grid, &snap.state.u);
            writeln!(out, "{SNAP_HEADER_RADIAL}")?;
            for i in 0..grid.m {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    grid.radius(i),
                    snap.state.u[i],
                    w[i],
                    nh[i],
                    abs_a[i]
                )?;
            }
        }
        GridKind::Polar(grid) => {
            // polar mode: |A| is produced only for the radialized average,
            // written per ring (repeated along theta)
            let w = polar_gradient_w_values(&trace.model, grid, &snap.state.u);
            let radial_u: Vec<f64> = {
                let mut v = Vec::with_capacity(grid.m_r);
                v.push(snap.state.u[0]);
                for i in 1..grid.m_r {
                    let mut acc = 0.0;
                    for j in 0..grid.m_theta {
                        acc += snap.state.u[grid.idx(i, j)];
                    }
                    v.push(acc / grid.m_theta as f64);
                }
                v
            };
            let rgrid = kflow_core::flow::RadialGrid {
                r0: grid.r0,
                m: grid.m_r,
                h: grid.h_r,
            };
            let nh_radial = mean_curvature_values(&trace.model, &rgrid, &radial_u);
            let abs_a_radial = shape_operator_norm_values(&trace.model, &rgrid, &radial_u);
            writeln!(out, "{SNAP_HEADER_POLAR}")?;
            writeln!(
                out,
                "0,0,{},{},{},{}",
                snap.state.u[0], w[0], nh_radial[0], abs_a_radial[0]
            )?;
            for i in 1..grid.m_r {
                for j in 0..grid.m_theta {
                    let idx = grid.idx(i, j);
                    writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        grid.ring_radius(i),
                        grid.theta(j),
                        snap.state.u[idx],
                        w[idx],
                        nh_radial[i],
                        abs_a_radial[i]
                    )?;
                }
            }
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Parsed snapshot file: the height column, in storage order.
pub fn read_snapshot_u(path: &Path, polar: bool) -> anyhow::Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().context("empty snapshot file")?;
    let expected = if polar {
        SNAP_HEADER_POLAR
    } else {
        SNAP_HEADER_RADIAL
    };
    if header != expected {
        bail!("unexpected snapshot header '{header}' (expected '{expected}')");
    }
    let u_col = if polar { 2 } else { 1 };
    let mut u = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let field = line
            .split(',')
            .nth(u_col)
            .with_context(|| format!("line {}: missing u column", lineno + 2))?;
        u.push(
            field
                .parse::<f64>()
                .with_context(|| format!("line {}: bad float '{field}'", lineno + 2))?,
        );
    }
    Ok(u)
}

/// Parsed cap file: `(r, v)` pairs.
pub fn read_cap_rv(path: &Path) -> anyhow::Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().context("empty cap file")?;
    if header != CAP_HEADER {
        bail!("unexpected cap header '{header}'");
    }
    let mut out = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let r: f64 = it.next().context("missing r")?.parse()?;
        let v: f64 = it.next().context("missing v")?.parse()?;
        out.push((r, v));
    }
    Ok(out)
}
