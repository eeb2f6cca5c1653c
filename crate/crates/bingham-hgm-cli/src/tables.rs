//! Recompute the published reference tables and print them next to the
//! printed figures. Values only: the timing columns are hardware-bound, and
//! the published spa columns are second-order; the spa column here is the
//! first-order approximation and is labeled as such.

use bingham_hgm::*;
use serde_json::json;

use crate::TableName;

const TABLE1: [&[f64]; 9] = [
    &[1.137579, 0.604270],
    &[1.185742, 0.421987, 0.394412],
    &[1.210162, 0.321833, 0.308437, 0.295857],
    &[1.224897, 0.259286, 0.251813, 0.244669, 0.237834],
    &[1.234745, 0.216746, 0.212168, 0.207741, 0.203460, 0.199319],
    &[1.241789, 0.186029, 0.183026, 0.180101, 0.177252, 0.174476, 0.171771],
    &[
        1.247075, 0.162847, 0.160774, 0.158744, 0.156756, 0.154810, 0.152903, 0.151036,
    ],
    &[
        1.251187, 0.144750, 0.143260, 0.141795, 0.140356, 0.138941, 0.137550, 0.136182, 0.134837,
    ],
    &[
        1.254477, 0.130242, 0.129136, 0.128045, 0.126970, 0.125910, 0.124866, 0.123836, 0.122821,
        0.121820,
    ],
];

// (p, a, b, printed C/C(0))
const TABLE2: [(usize, f64, u32, f64); 12] = [
    (5, 0.05, 1, 1.105961),
    (5, 0.1, 1, 1.224897),
    (5, 1.0, 1, 9.769432),
    (5, 10.0, 1, 3.824e14),
    (5, 1.0 / 60.0, 2, 1.106713),
    (5, 1.0, 2, 5.253880e4),
    (10, 1.0 / 90.0, 1, 1.051360),
    (10, 1.0 / 45.0, 1, 1.105546),
    (10, 2.0 / 45.0, 1, 1.223062),
    (10, 1.0, 1, 1.757059e2),
    (10, 1.0 / 570.0, 2, 1.051466),
    (10, 1.0, 2, 3.802e28),
];

const KAPPAS: [f64; 6] = [5.0, 10.0, 30.0, 50.0, 100.0, 200.0];

// printed columns (spa2 = the published second-order spa, ex = closed form)
struct SpaTable {
    second: f64,
    spa2_a: [f64; 6],
    hg_a: [f64; 6],
    spa2_b: [f64; 6],
    hg_b: [f64; 6],
    spa2_c: [f64; 6],
    ex_c: [f64; 6],
}

const TABLE3: SpaTable = SpaTable {
    second: -2.0,
    spa2_a: [4.237006, 2.982628, 1.708766, 1.321178, 0.932895, 0.659185],
    hg_a: [4.238950, 2.985576, 1.711919, 1.323994, 0.935094, 0.660814],
    spa2_b: [3.376766, 1.689684, 0.555494, 0.332102, 0.165587, 0.082676],
    hg_b: [3.372017, 1.689355, 0.556123, 0.332661, 0.165940, 0.082871],
    spa2_c: [5.942975, 3.429004, 1.248280, 0.761347, 0.385272, 0.193779],
    ex_c: [5.936835, 3.425468, 1.246421, 0.760180, 0.384675, 0.193477],
};

const TABLE4: SpaTable = SpaTable {
    second: -22.0,
    spa2_a: [1.258672, 0.874523, 0.497757, 0.384440, 0.271249, 0.191595],
    hg_a: [1.273161, 0.883394, 0.503213, 0.388775, 0.274375, 0.193826],
    spa2_b: [1.032128, 0.500707, 0.162251, 0.096784, 0.048182, 0.024039],
    hg_b: [1.044072, 0.505223, 0.163901, 0.097828, 0.048725, 0.024316],
    spa2_c: [0.921027, 0.506236, 0.177602, 0.107526, 0.054115, 0.027144],
    ex_c: [0.921726, 0.506341, 0.177495, 0.107458, 0.054081, 0.027127],
};

// (p, printed discrete error, printed continuous error)
const TABLE5: [(usize, f64, f64); 9] = [
    (2, 2.41e-7, 1.04e-8),
    (3, 6.53e-7, 1.81e-8),
    (4, 5.40e-7, 1.41e-8),
    (5, 1.45e-6, 1.78e-8),
    (6, 1.69e-6, 1.09e-8),
    (7, 2.76e-6, 1.17e-8),
    (8, 6.14e-6, 1.29e-8),
    (9, 1.65e-5, 2.29e-8),
    (10, 1.69e-5, 2.06e-8),
];

pub fn run(name: TableName, as_json: bool) -> Result<()> {
    match name {
        TableName::Table1 => table1(as_json),
        TableName::Table2 => table2(as_json),
        TableName::Table3 => table34(&TABLE3, "table3", as_json),
        TableName::Table4 => table34(&TABLE4, "table4", as_json),
        TableName::Table5 => table5(as_json),
    }
}

fn table1(as_json: bool) -> Result<()> {
    let mut rows = Vec::new();
    for (idx, printed) in TABLE1.iter().enumerate() {
        let p = idx + 2;
        let theta: Vec<f64> = (1..=p).map(|i| (p - i) as f64 / (2.0 * p as f64)).collect();
        let mt = canonicalize(&theta, 0.0)?;
        let (c, n_used) = series_norm_const(&mt, 1e-6)?;
        let g = series_grad(&mt, 1e-6)?;
        let f = mt.shift().exp();
        let mut tilde = vec![f * c];
        tilde.extend(g.values()[..p - 1].iter().map(|v| f * v));
        rows.push((p, tilde, printed.to_vec(), n_used));
    }
    if as_json {
        let items: Vec<_> = rows
            .iter()
            .map(|(p, tilde, printed, n)| {
                json!({"p": p, "tilde_g": tilde, "printed": printed, "series_n": n})
            })
            .collect();
        println!(
            "{}",
            json!({"schema": 1, "command": "table", "name": "table1", "rows": items})
        );
        return Ok(());
    }
    println!("Table 1: tilde-G(theta)/C(0) at theta = ((p-i)/(2p)), series eps 1e-6");
    println!("{:>3} {:>3} {:>12} {:>12} {:>10}", "p", "i", "computed", "printed", "diff");
    for (p, tilde, printed, _) in rows {
        for (i, (c, pr)) in tilde.iter().zip(&printed).enumerate() {
            println!("{p:>3} {i:>3} {c:>12.6} {pr:>12.6} {:>10.1e}", c - pr);
        }
    }
    Ok(())
}

fn table2(as_json: bool) -> Result<()> {
    let ctl = OdeControl::default();
    let mut rows = Vec::new();
    for (p, a, b, printed) in TABLE2 {
        let theta: Vec<f64> = (1..=p)
            .map(|i| a * ((p - i) as f64).powi(b as i32))
            .collect();
        let l1: f64 = theta.iter().map(|t| t.abs()).sum();
        let report = hg_norm_const_report(&theta, 1e-6, &ctl)?;
        let hg_val = report.log_c_over_c0.exp();
        let mt = canonicalize(&theta, 0.0)?;
        let series_val = match series_norm_const(&mt, 1e-6) {
            Ok((v, _)) => Some(v * mt.shift().exp()),
            Err(Error::SeriesBudget { .. }) => None,
            Err(e) => return Err(e),
        };
        rows.push((p, a, b, l1, hg_val, series_val, printed, report.used_log_form));
    }
    if as_json {
        let items: Vec<_> = rows
            .iter()
            .map(|(p, a, b, l1, hg, series, printed, log_form)| {
                json!({"p": p, "a": a, "b": b, "l1": l1, "hg": hg, "series": series,
                       "printed": printed, "log_form": log_form})
            })
            .collect();
        println!(
            "{}",
            json!({"schema": 1, "command": "table", "name": "table2", "rows": items})
        );
        return Ok(());
    }
    println!("Table 2: C(theta)/C(0) at theta = (a(p-i)^b); PS = power series (NA where the");
    println!("truncation budget is exceeded), HG = propagation (logarithmic form where marked)");
    println!(
        "{:>3} {:>9} {:>2} {:>6} {:>13} {:>13} {:>13} {:>4}",
        "p", "a", "b", "|th|1", "PS", "HG", "printed", "log"
    );
    for (p, a, b, l1, hg, series, printed, log_form) in rows {
        let ps = series
            .map(|v| format!("{v:>13.6e}"))
            .unwrap_or_else(|| format!("{:>13}", "NA"));
        println!(
            "{p:>3} {a:>9.5} {b:>2} {l1:>6.1} {ps} {hg:>13.6e} {printed:>13.6e} {:>4}",
            if log_form { "yes" } else { "" }
        );
    }
    Ok(())
}

fn table34(t: &SpaTable, name: &str, as_json: bool) -> Result<()> {
    let ctl = OdeControl::default();
    let mut rows = Vec::new();
    for (i, &kappa) in KAPPAS.iter().enumerate() {
        let theta_a = vec![0.0, -1.0, t.second, -kappa];
        let theta_b = vec![0.0, -1.0, t.second, -kappa, -kappa];
        let phi_c = vec![0.0, -1.0, t.second, -kappa];

        let raw = |theta: &[f64]| -> Result<f64> {
            let (log_c, _) = hg_norm_const(theta, 1e-8, &ctl)?;
            Ok((log_c + uniform_mass(theta.len())?.ln_value).exp())
        };
        let spa_a = spa1(&theta_a)?;
        let hg_a = raw(&theta_a)?;
        let spa_b = spa1(&theta_b)?;
        let hg_b = raw(&theta_b)?;
        // complex case: first-order SPA on the doubled real embedding
        let mut embedding = Vec::new();
        for &v in &phi_c {
            embedding.push(v);
            embedding.push(v);
        }
        let spa_c = spa1(&embedding)?;
        let ex_c = complex_bingham_const(&phi_c)?;
        let hg_c = raw(&embedding)?;
        rows.push(json!({
            "kappa": kappa,
            "real": {"spa1": spa_a, "hg": hg_a, "printed_spa2": t.spa2_a[i], "printed_hg": t.hg_a[i]},
            "real_double": {"spa1": spa_b, "hg": hg_b, "printed_spa2": t.spa2_b[i], "printed_hg": t.hg_b[i]},
            "complex": {"spa1": spa_c, "ex": ex_c, "hg": hg_c, "printed_spa2": t.spa2_c[i], "printed_ex": t.ex_c[i]},
        }));
    }
    if as_json {
        println!(
            "{}",
            json!({"schema": 1, "command": "table", "name": name, "rows": rows})
        );
        return Ok(());
    }
    println!(
        "{}: raw constants for theta = (0,-1,{},-k), (0,-1,{},-k,-k) and the complex",
        name, t.second, t.second
    );
    println!("case phi = (0,-1,{},-k). spa1 is first order (the printed spa is second order).", t.second);
    println!(
        "{:>4} | {:>10} {:>10} {:>10} | {:>10} {:>10} {:>10} | {:>10} {:>10} {:>10}",
        "k", "spa1", "hg", "printed", "spa1", "hg", "printed", "spa1", "ex", "hg"
    );
    for row in &rows {
        let g = |path: &str, key: &str| row[path][key].as_f64().unwrap();
        println!(
            "{:>4} | {:>10.6} {:>10.6} {:>10.6} | {:>10.6} {:>10.6} {:>10.6} | {:>10.6} {:>10.6} {:>10.6}",
            row["kappa"].as_f64().unwrap(),
            g("real", "spa1"),
            g("real", "hg"),
            g("real", "printed_hg"),
            g("real_double", "spa1"),
            g("real_double", "hg"),
            g("real_double", "printed_hg"),
            g("complex", "spa1"),
            g("complex", "ex"),
            g("complex", "hg"),
        );
    }
    Ok(())
}

fn table5(as_json: bool) -> Result<()> {
    let ctl = OdeControl::default();
    let mut rows = Vec::new();
    for (p, printed_disc, printed_cont) in TABLE5 {
        let s: Vec<f64> = (1..=p)
            .map(|i| 2.0 * i as f64 / (p as f64 * (p as f64 + 1.0)))
            .collect();
        let stats = SuffStats::from_moments(s, 1)?;
        let t0 = default_initial_point(&stats)?;

        let t_start = std::time::Instant::now();
        let disc = fit_discrete(&stats, &t0, DEFAULT_GRAD_TOL, &ctl)?;
        let disc_time = t_start.elapsed().as_secs_f64();

        let t_start = std::time::Instant::now();
        let cont = fit_continuous(&stats, &t0, DEFAULT_EPSILON, DEFAULT_POLISH_STEPS, &ctl)?;
        let cont_time = t_start.elapsed().as_secs_f64();

        rows.push(json!({
            "p": p,
            "error_discrete": disc.residual,
            "error_continuous": cont.residual,
            "printed_error_discrete": printed_disc,
            "printed_error_continuous": printed_cont,
            "time_discrete_s": disc_time,
            "time_continuous_s": cont_time,
            "theta_hat": cont.theta_hat.expand(),
        }));
    }
    if as_json {
        println!(
            "{}",
            json!({"schema": 1, "command": "table", "name": "table5", "rows": rows})
        );
        return Ok(());
    }
    println!("Table 5: MLE error max_i |d_i log C(theta_hat) - s_i| for s = (2i/(p(p+1))),");
    println!("errors re-evaluated by a fresh propagation; times are this machine's");
    println!(
        "{:>3} {:>13} {:>13} {:>13} {:>13} {:>8} {:>8}",
        "p", "discrete", "(printed)", "continuous", "(printed)", "t_d [s]", "t_c [s]"
    );
    for row in &rows {
        println!(
            "{:>3} {:>13.2e} {:>13.2e} {:>13.2e} {:>13.2e} {:>8.3} {:>8.3}",
            row["p"].as_u64().unwrap(),
            row["error_discrete"].as_f64().unwrap(),
            row["printed_error_discrete"].as_f64().unwrap(),
            row["error_continuous"].as_f64().unwrap(),
            row["printed_error_continuous"].as_f64().unwrap(),
            row["time_discrete_s"].as_f64().unwrap(),
            row["time_continuous_s"].as_f64().unwrap(),
        );
    }
    Ok(())
}
