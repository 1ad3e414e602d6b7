// Temporary calibration probe - deleted before ship.
use ustomo::scene::SosField;
use ustomo::wavesim::*;

fn envelope_peak_time(trace: &[f64], dt: f64) -> f64 {
    // Discrete analytic-signal envelope via a plain O(N^2) DFT.
    let n = trace.len();
    let mut re = vec![0.0f64; n];
    let mut im = vec![0.0f64; n];
    for k in 0..n {
        let mut sr = 0.0;
        let mut si = 0.0;
        for (t, &x) in trace.iter().enumerate() {
            let ph = -2.0 * std::f64::consts::PI * (k * t % n) as f64 / n as f64;
            sr += x * ph.cos();
            si += x * ph.sin();
        }
        re[k] = sr;
        im[k] = si;
    }
    // analytic: zero negative freqs, double positives
    for k in 1..n {
        if k < (n + 1) / 2 {
            re[k] *= 2.0;
            im[k] *= 2.0;
        } else if k > n / 2 {
            re[k] = 0.0;
            im[k] = 0.0;
        }
    }
    let mut best = (0usize, -1.0f64);
    for t in 0..n {
        let mut sr = 0.0;
        let mut si = 0.0;
        for k in 0..n {
            if re[k] == 0.0 && im[k] == 0.0 {
                continue;
            }
            let ph = 2.0 * std::f64::consts::PI * (k * t % n) as f64 / n as f64;
            let (c, s) = (ph.cos(), ph.sin());
            sr += re[k] * c - im[k] * s;
            si += re[k] * s + im[k] * c;
        }
        let mag = (sr * sr + si * si).sqrt();
        if mag > best.1 {
            best = (t, mag);
        }
    }
    best.0 as f64 * dt
}

#[test]
#[ignore]
fn probe_desk_physics() {
    let desk = presets::desk();
    for (name, cfg) in [
        ("physical", &desk.physical),
        ("accurate", &desk.accurate),
        ("surrogate", &desk.surrogate),
    ] {
        let field = SosField::constant(1500.0, cfg);
        let t_start = std::time::Instant::now();
        let traces = simulate(&field, cfg, &desk.geometry, &desk.waveform, 0).unwrap();
        let sim_time = t_start.elapsed().as_secs_f64();

        // receiver 8 of 16 is at angle pi (opposite the transmitter at 0)
        let tx = snap_node(cfg, desk.geometry.transmitter_position(0));
        let rx_idx = desk.geometry.n_receivers() / 2;
        let rx = snap_node(cfg, desk.geometry.receiver_position(rx_idx));
        let d = (((tx.0 as f64 - rx.0 as f64) * cfg.dx).powi(2)
            + ((tx.1 as f64 - rx.1 as f64) * cfg.dx).powi(2))
        .sqrt();
        let trace: Vec<f64> = traces.row(rx_idx).to_vec();
        let t_peak = envelope_peak_time(&trace, cfg.dt);
        let t_expect = desk.waveform.t0 + d / 1500.0;
        let rms = (trace.iter().map(|x| x * x).sum::<f64>() / trace.len() as f64).sqrt();
        let peak = trace.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
        println!(
            "{name}: sim {sim_time:.2}s  d={d:.4}  t_peak={t_peak:.3e} expect={t_expect:.3e} relerr={:.3}%  rms={rms:.3e} peak={peak:.3e}",
            100.0 * (t_peak - t_expect).abs() / t_expect
        );

        // ABC energy
        let e = interior_energy_history(&field, cfg, &desk.geometry, &desk.waveform, 0).unwrap();
        let pk = e.iter().cloned().fold(0.0f64, f64::max);
        let last = *e.last().unwrap();
        println!("{name}: energy final/peak = {:.4}", last / pk);
    }
}

#[test]
#[ignore]
fn probe_surrogate_abc_scan() {
    let desk = presets::desk();
    for cells in [6usize, 7, 8] {
        for eta in [1.2e6, 1.6e6, 2.0e6, 3.0e6] {
            let dx = 0.2 / 128.0;
            let cfg = ModelConfig {
                n_grid: 128 + 2 * cells,
                dx,
                abc_thickness: cells as f64 * dx,
                eta_max: eta,
                ..desk.surrogate.clone()
            };
            let field = SosField::constant(1500.0, &cfg);
            let traces = simulate(&field, &cfg, &desk.geometry, &desk.waveform, 0).unwrap();
            let tx = snap_node(&cfg, desk.geometry.transmitter_position(0));
            let rx_idx = desk.geometry.n_receivers() / 2;
            let rx = snap_node(&cfg, desk.geometry.receiver_position(rx_idx));
            let d = (((tx.0 as f64 - rx.0 as f64) * cfg.dx).powi(2)
                + ((tx.1 as f64 - rx.1 as f64) * cfg.dx).powi(2))
            .sqrt();
            let trace: Vec<f64> = traces.row(rx_idx).to_vec();
            let t_peak = envelope_peak_time(&trace, cfg.dt);
            let t_expect = desk.waveform.t0 + d / 1500.0;
            let e =
                interior_energy_history(&field, &cfg, &desk.geometry, &desk.waveform, 0).unwrap();
            let pk = e.iter().cloned().fold(0.0f64, f64::max);
            let last = *e.last().unwrap();

            // model gap vs accurate tier on a training scene
            let params = ustomo::scene::SceneParams::training(42);
            let f_acc = ustomo::scene::generate_field(&params, &desk.accurate).unwrap();
            let f_sur = ustomo::scene::project(&f_acc, &cfg).unwrap();
            let m_acc = simulate(&f_acc, &desk.accurate, &desk.geometry, &desk.waveform, 0).unwrap();
            let m_sur = simulate(&f_sur, &cfg, &desk.geometry, &desk.waveform, 0).unwrap();
            let mut num = 0.0;
            let mut den = 0.0;
            for (a, s) in m_acc.iter().zip(m_sur.iter()) {
                num += (a - s) * (a - s);
                den += a * a;
            }
            println!(
                "cells={cells} eta={eta:.1e}: arrival relerr {:.2}%  energy {:.4}  gap {:.3}",
                100.0 * (t_peak - t_expect).abs() / t_expect,
                last / pk,
                (num / den).sqrt()
            );
        }
    }
}

#[test]
#[ignore]
fn probe_reciprocity_and_model_gap() {
    let desk = presets::desk();
    let cfg = &desk.surrogate;
    // reciprocity on the accurate tier with a 2-element ring
    let geo = SensorGeometry::ring(0.09, 2, 2);
    let field = SosField::constant(1500.0, &desk.accurate);
    let ab = simulate(&field, &desk.accurate, &geo, &desk.waveform, 0).unwrap();
    let ba = simulate(&field, &desk.accurate, &geo, &desk.waveform, 1).unwrap();
    let t_ab: Vec<f64> = ab.row(1).to_vec();
    let t_ba: Vec<f64> = ba.row(0).to_vec();
    let num: f64 = t_ab.iter().zip(&t_ba).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = t_ab.iter().map(|a| a * a).sum();
    println!("reciprocity rel L2 = {:.3e}", (num / den).sqrt());

    // model gap: same scene through accurate vs surrogate tiers
    let params = ustomo::scene::SceneParams::training(42);
    let f_acc = ustomo::scene::generate_field(&params, &desk.accurate).unwrap();
    let f_sur = ustomo::scene::project(&f_acc, cfg).unwrap();
    let m_acc = simulate_all(&f_acc, &desk.accurate, &desk.geometry, &desk.waveform).unwrap();
    let m_sur = simulate_all(&f_sur, cfg, &desk.geometry, &desk.waveform).unwrap();
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, s) in m_acc.data.iter().zip(m_sur.data.iter()) {
        num += (a - s) * (a - s);
        den += s * s;
    }
    println!("acc-vs-surr rel L2 = {:.3}", (num / den).sqrt());
    let m_rms = (m_acc.data.iter().map(|x| x * x).sum::<f64>() / m_acc.data.len() as f64).sqrt();
    println!("trace ensemble rms = {:.3e}  (noise sigma 5e-4 => snr {:.1} dB)",
        m_rms, 20.0 * (m_rms / 5.0e-4).log10());
}
