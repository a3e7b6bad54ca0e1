//! The intracity growth-function station model, in absolute EV counts.
//!
//! `z_s_t` carries the previous year's city total on the selected segment
//! `s`, so `r·g(Z/r) − Z = Σ_s (r·o_s·w_s_t + (m_s − 1)·z_s_t)`. Each site's
//! users grow by at most its catchment share of that city-wide increment.
//! Without a capacity limit, users `h_i_j_t` are gated by the site being
//! open.

use crate::growth::GfInstance;

use super::model::{MilpModel, ObjectiveSense, RowSense, VarKind};
use super::MilpError;

fn seg_name(prefix: &str, s: usize, t: usize) -> String {
    format!("{prefix}_{}_{}", s + 1, t + 1)
}

pub fn gf_x_name(j: usize, t: usize) -> String {
    format!("x_{}_{}", j + 1, t + 1)
}

pub fn gf_y_name(j: usize, t: usize) -> String {
    format!("y_{}_{}", j + 1, t + 1)
}

pub fn gf_h_name(p: usize, j: usize, t: usize) -> String {
    format!("h_{}_{}_{}", p + 1, j + 1, t + 1)
}

/// Segment table in absolute units. Past full penetration the function is
/// the identity; that piece is appended when catchments overlap enough for
/// the site totals to exceed the city.
fn segments(gf: &GfInstance) -> Vec<(f64, f64, f64, f64)> {
    let r = gf.total_population;
    let mut out: Vec<(f64, f64, f64, f64)> = gf
        .growth
        .segments
        .iter()
        .map(|s| (r * s.q_lo, r * s.q_hi, s.slope, r * s.intercept))
        .collect();
    let reach: f64 = (0..gf.n_sites()).map(|j| gf.catchment_population(j)).sum();
    if reach > r {
        out.push((r, reach, 1.0, 0.0));
    }
    out
}

pub fn build_gf(gf: &GfInstance) -> Result<MilpModel, MilpError> {
    gf.growth
        .check()
        .map_err(|e| MilpError::Growth(e.to_string()))?;
    let r = gf.total_population;
    if !(r > 0.0) {
        return Err(MilpError::Growth("city population must be positive".into()));
    }
    let n_t = gf.horizon;
    let m = gf.n_sites();
    let segs = segments(gf);
    let mut model = MilpModel::new("gf", ObjectiveSense::Maximize);

    let mut x = vec![vec![0; m]; n_t];
    let mut y = vec![vec![0; m]; n_t];
    let mut h = vec![vec![Vec::new(); m]; n_t];
    let mut w = vec![Vec::new(); n_t];
    let mut z = vec![Vec::new(); n_t];
    for t in 0..n_t {
        for j in 0..m {
            let e = f64::from(gf.max_outlets[j]);
            let init = f64::from(gf.initial_outlets[j]);
            let (xl, yl) = if t == 0 {
                (init, if init > 0.0 { 1.0 } else { 0.0 })
            } else {
                (0.0, 0.0)
            };
            x[t][j] = model.add_var(gf_x_name(j, t), xl, e, VarKind::Integer)?;
            y[t][j] = model.add_var(gf_y_name(j, t), yl, 1.0, VarKind::Binary)?;
            for &p in &gf.catchments[j] {
                h[t][j].push(model.add_var(
                    gf_h_name(p, j, t),
                    0.0,
                    f64::INFINITY,
                    VarKind::Continuous,
                )?);
            }
        }
        for s in 0..segs.len() {
            w[t].push(model.add_var(seg_name("w", s, t), 0.0, 1.0, VarKind::Binary)?);
            z[t].push(model.add_var(
                seg_name("z", s, t),
                0.0,
                f64::INFINITY,
                VarKind::Continuous,
            )?);
        }
    }

    for t in 0..n_t {
        let tn = t + 1;
        // budget: c^U Σ(x^t − x^{t−1}) + Σ c^F (y^t − y^{t−1}) ≤ B^t
        let mut terms = Vec::new();
        let mut rhs = gf.budgets[t];
        for j in 0..m {
            terms.push((x[t][j], gf.outlet_cost));
            terms.push((y[t][j], gf.opening_cost[j]));
            if t == 0 {
                let init = f64::from(gf.initial_outlets[j]);
                rhs += gf.outlet_cost * init + if init > 0.0 { gf.opening_cost[j] } else { 0.0 };
            } else {
                terms.push((x[t - 1][j], -gf.outlet_cost));
                terms.push((y[t - 1][j], -gf.opening_cost[j]));
            }
        }
        model.add_row(format!("budget_{tn}"), terms, RowSense::Le, rhs)?;

        for j in 0..m {
            let jn = j + 1;
            let e = f64::from(gf.max_outlets[j]);
            model.add_row(
                format!("ub_{jn}_{tn}"),
                vec![(x[t][j], 1.0), (y[t][j], -e)],
                RowSense::Le,
                0.0,
            )?;
            model.add_row(
                format!("open_{jn}_{tn}"),
                vec![(x[t][j], 1.0), (y[t][j], -1.0)],
                RowSense::Ge,
                0.0,
            )?;
            if t > 0 {
                model.add_row(
                    format!("keepx_{jn}_{tn}"),
                    vec![(x[t][j], 1.0), (x[t - 1][j], -1.0)],
                    RowSense::Ge,
                    0.0,
                )?;
                model.add_row(
                    format!("keepy_{jn}_{tn}"),
                    vec![(y[t][j], 1.0), (y[t - 1][j], -1.0)],
                    RowSense::Ge,
                    0.0,
                )?;
            }
        }

        // Σ_s z^{st} = Σ h^{t−1}
        let mut terms: Vec<(usize, f64)> = z[t].iter().map(|&v| (v, 1.0)).collect();
        if t > 0 {
            terms.extend(h[t - 1].iter().flatten().map(|&v| (v, -1.0)));
        }
        model.add_row(format!("setz_{tn}"), terms, RowSense::Eq, 0.0)?;
        for (s, &(lo, hi, _, _)) in segs.iter().enumerate() {
            let sn = s + 1;
            model.add_row(
                format!("seglo_{sn}_{tn}"),
                vec![(z[t][s], 1.0), (w[t][s], -lo)],
                RowSense::Ge,
                0.0,
            )?;
            model.add_row(
                format!("seghi_{sn}_{tn}"),
                vec![(z[t][s], 1.0), (w[t][s], -hi)],
                RowSense::Le,
                0.0,
            )?;
        }
        model.add_row(
            format!("oneseg_{tn}"),
            w[t].iter().map(|&v| (v, 1.0)).collect(),
            RowSense::Eq,
            1.0,
        )?;

        for j in 0..m {
            let jn = j + 1;
            let share = gf.catchment_population(j) / r;
            let mut terms: Vec<(usize, f64)> = h[t][j].iter().map(|&v| (v, 1.0)).collect();
            if t > 0 {
                terms.extend(h[t - 1][j].iter().map(|&v| (v, -1.0)));
            }
            for (s, &(_, _, slope, intercept)) in segs.iter().enumerate() {
                terms.push((w[t][s], -share * intercept));
                terms.push((z[t][s], -share * (slope - 1.0)));
            }
            model.add_row(format!("growth_{jn}_{tn}"), terms, RowSense::Le, 0.0)?;
            if t > 0 {
                let mut terms: Vec<(usize, f64)> = h[t][j].iter().map(|&v| (v, 1.0)).collect();
                terms.extend(h[t - 1][j].iter().map(|&v| (v, -1.0)));
                model.add_row(format!("keeph_{jn}_{tn}"), terms, RowSense::Ge, 0.0)?;
            }
            match gf.capacity[t] {
                Some(a) => {
                    let mut terms: Vec<(usize, f64)> =
                        h[t][j].iter().map(|&v| (v, gf.home_fraction)).collect();
                    terms.push((x[t][j], -a));
                    model.add_row(format!("cap_{jn}_{tn}"), terms, RowSense::Le, 0.0)?;
                }
                None => {
                    for (n, &p) in gf.catchments[j].iter().enumerate() {
                        model.add_row(
                            format!("gate_{}_{jn}_{tn}", p + 1),
                            vec![(h[t][j][n], 1.0), (y[t][j], -gf.node_population[p])],
                            RowSense::Le,
                            0.0,
                        )?;
                    }
                }
            }
        }
    }

    let objective = h[n_t - 1].iter().flatten().map(|&v| (v, 1.0)).collect();
    model.set_objective(objective, 0.0);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::{GfInstance, GfSolution, GrowthFunction};

    fn two_site() -> GfInstance {
        GfInstance {
            horizon: 2,
            node_ids: vec![1, 2, 3],
            node_population: vec![100.0, 200.0, 300.0],
            total_population: 600.0,
            catchments: vec![vec![0, 1], vec![2]],
            max_outlets: vec![2, 2],
            initial_outlets: vec![0, 0],
            outlet_cost: 50.0,
            opening_cost: vec![100.0, 100.0],
            budgets: vec![150.0, 150.0],
            home_fraction: 0.566,
            capacity: vec![None, None],
            growth: GrowthFunction::from_points(&[0.1, 0.2]).unwrap(),
        }
    }

    #[test]
    fn shape_and_feasible_point() {
        let gf = two_site();
        let model = build_gf(&gf).unwrap();
        // per year: x, y per site; 3 h; 3 segments (w, z)
        assert_eq!(model.n_vars(), 2 * (4 + 3 + 6));
        // recursion solution opening site 2 in year 1 and site 1 in year 2
        let sol = GfSolution {
            outlets: vec![vec![0, 1], vec![1, 1]],
        };
        sol.check(&gf).unwrap();
        let hs = crate::growth::gf_recursion(&gf, &sol);
        let mut v = vec![0.0; model.n_vars()];
        let set = |v: &mut Vec<f64>, name: &str, val: f64| v[model.var(name).unwrap()] = val;
        for t in 0..2 {
            for j in 0..2 {
                set(&mut v, &gf_x_name(j, t), f64::from(sol.outlets[t][j]));
                set(
                    &mut v,
                    &gf_y_name(j, t),
                    f64::from(sol.outlets[t][j].min(1)),
                );
            }
        }
        // year 1: Z=0 on segment 1; site 2 gets 300/600 of 60
        set(&mut v, "w_1_1", 1.0);
        assert!((hs[0][1] - 30.0).abs() < 1e-9);
        set(&mut v, "h_3_2_1", 30.0);
        // year 2: Z=30 (share .05) on segment 1, g = .1 + .05 → 90 total, +60
        set(&mut v, "w_1_2", 1.0);
        set(&mut v, "z_1_2", 30.0);
        assert!((hs[1][1] - 60.0).abs() < 1e-9);
        assert!((hs[1][0] - 30.0).abs() < 1e-9);
        set(&mut v, "h_3_2_2", 60.0);
        set(&mut v, "h_1_1_2", 10.0);
        set(&mut v, "h_2_1_2", 20.0);
        assert!(
            model.max_violation(&v) < 1e-9,
            "{}",
            model.max_violation(&v)
        );
        assert!((model.objective_value(&v) - 90.0).abs() < 1e-9);
    }

    #[test]
    fn finite_capacity_replaces_gates() {
        let mut gf = two_site();
        gf.capacity = vec![Some(10.0), Some(10.0)];
        let model = build_gf(&gf).unwrap();
        assert!(model.row("cap_1_2").is_some());
        assert!(model.row("gate_1_1_1").is_none());
    }
}
