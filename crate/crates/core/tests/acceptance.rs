//! Acceptance suite: one test per criterion, each printing a PASS line
//! (visible with `cargo test --test acceptance -- --nocapture`).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use esrpcb_core::dataset::{AnnotatedImage, DefectClass, GtBox};
use esrpcb_core::edge::{canny, CannyParams, EdgeChannels, EdgeMode};
use esrpcb_core::fusion::{
    iou, nms, read_detections_jsonl, wbf, write_detections_jsonl, BBox, ConfMode, Detection,
};
use esrpcb_core::image::{load_image, save_image, GrayMap, ImageBuffer};
use esrpcb_core::metrics::{
    average_precision, evaluate_map, mse, psnr, ssim, LabeledDetection, SsimParams,
};
use esrpcb_core::nn::{
    encode_weights, finite_difference_check, load_weights, save_weights, GradCheckConfig, Network,
    NetworkConfig,
};
use esrpcb_core::train::{prepare_inputs, synthetic_patch_pairs, train_on_pairs, TrainerConfig};

#[test]
fn criterion_1_parameter_counts_exact() {
    let block = {
        // one ResCat block at 64 filters: 36,928 + 36,928 + 8,256
        let net = Network::zeroed(NetworkConfig {
            n_blocks: 2,
            ..NetworkConfig::esrpcb_c()
        })
        .unwrap();
        let one = Network::zeroed(NetworkConfig {
            n_blocks: 1,
            ..NetworkConfig::esrpcb_c()
        })
        .unwrap();
        net.count_params() - one.count_params()
    };
    assert_eq!(block, 82_112);

    let c = Network::zeroed(NetworkConfig::esrpcb_c()).unwrap();
    assert_eq!(c.count_params(), 1_613_315);
    let s = Network::zeroed(NetworkConfig::esrpcb_s()).unwrap();
    assert_eq!(s.count_params(), 1_613_891);
    let e = Network::zeroed(NetworkConfig::edsr_baseline()).unwrap();
    assert_eq!(e.count_params(), 1_515_523);
    println!(
        "ACCEPTANCE 1 (parameter counts): PASS — block 82112, C 1613315, S 1613891, EDSR 1515523"
    );
}

#[test]
fn criterion_2_mac_counts_within_2_percent() {
    let c = Network::zeroed(NetworkConfig::esrpcb_c()).unwrap();
    let c_macs = c.count_macs(150, 150) as f64;
    let c_dev = (c_macs / 46.88e9 - 1.0).abs();
    assert!(c_dev < 0.02, "ESRPCB_C {c_macs} deviates {c_dev:.4}");

    let e = Network::zeroed(NetworkConfig::edsr_baseline()).unwrap();
    let e_macs = e.count_macs(150, 150) as f64;
    let e_dev = (e_macs / 44.64e9 - 1.0).abs();
    assert!(e_dev < 0.02, "EDSR {e_macs} deviates {e_dev:.4}");
    println!(
        "ACCEPTANCE 2 (MAC counts at 150x150): PASS — C {:.2}G (ref 46.88G, {:+.2}%), EDSR {:.2}G (ref 44.64G, {:+.2}%)",
        c_macs / 1e9,
        (c_macs / 46.88e9 - 1.0) * 100.0,
        e_macs / 1e9,
        (e_macs / 44.64e9 - 1.0) * 100.0
    );
}

#[test]
fn criterion_3_gradient_correctness() {
    let report = finite_difference_check(GradCheckConfig {
        n_blocks: 2,
        filters: 8,
        input_size: 8,
        step: 1e-3,
        seed: 0,
    })
    .unwrap();
    assert!(
        report.max_rel_error < 1e-4,
        "max relative error {} at {}",
        report.max_rel_error,
        report.worst
    );
    assert!(
        report.kink_skipped * 10 < report.elements_checked,
        "too many kink exclusions: {}/{}",
        report.kink_skipped,
        report.elements_checked
    );
    println!(
        "ACCEPTANCE 3 (gradient correctness): PASS — max rel err {:.2e} over {} elements ({} kink samples excluded)",
        report.max_rel_error, report.elements_checked, report.kink_skipped
    );
}

// --- WBF / NMS oracles -------------------------------------------------------

fn random_instances(seed: u64, count: usize) -> Vec<Vec<Vec<Detection>>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let n_models = rng.gen_range(1..=3usize);
        let mut models = Vec::with_capacity(n_models);
        for _ in 0..n_models {
            let n_boxes = rng.gen_range(0..=10usize);
            let mut dets = Vec::with_capacity(n_boxes);
            for _ in 0..n_boxes {
                let x1 = rng.gen_range(0.0..0.8f32);
                let y1 = rng.gen_range(0.0..0.8f32);
                let w = rng.gen_range(0.05..0.2f32);
                let h = rng.gen_range(0.05..0.2f32);
                dets.push(Detection {
                    image_id: if rng.gen_bool(0.7) { "a" } else { "b" }.to_string(),
                    class_id: rng.gen_range(0..3u32),
                    score: rng.gen_range(0.05..1.0f32),
                    bbox: BBox::new(x1, y1, x1 + w, y1 + h),
                });
            }
            models.push(dets);
        }
        out.push(models);
    }
    out
}

/// Independent WBF reference: keeps explicit member lists only and
/// recomputes every cluster's fused box from scratch by walking the member
/// list, instead of maintaining streaming sums.
fn reference_wbf(
    model_outputs: &[Vec<Detection>],
    iou_thr: f32,
    conf_mode: ConfMode,
) -> Vec<Detection> {
    use std::collections::BTreeMap;
    let n_models = model_outputs.len();

    fn fuse_members(members: &[Detection]) -> (f32, BBox) {
        let t = members.len() as f32;
        let mut sum = 0.0f32;
        let mut wx1 = 0.0f32;
        let mut wy1 = 0.0f32;
        let mut wx2 = 0.0f32;
        let mut wy2 = 0.0f32;
        for m in members {
            sum += m.score;
            wx1 += m.score * m.bbox.x1;
            wy1 += m.score * m.bbox.y1;
            wx2 += m.score * m.bbox.x2;
            wy2 += m.score * m.bbox.y2;
        }
        (
            sum / t,
            BBox::new(wx1 / sum, wy1 / sum, wx2 / sum, wy2 / sum),
        )
    }

    let mut groups: BTreeMap<(String, u32), Vec<(usize, usize)>> = BTreeMap::new();
    for (m, dets) in model_outputs.iter().enumerate() {
        for (i, d) in dets.iter().enumerate() {
            groups
                .entry((d.image_id.clone(), d.class_id))
                .or_default()
                .push((m, i));
        }
    }

    let mut fused_out = Vec::new();
    for ((image_id, class_id), mut refs) in groups {
        refs.sort_by(|&(ma, ia), &(mb, ib)| {
            let sa = model_outputs[ma][ia].score;
            let sb = model_outputs[mb][ib].score;
            sb.partial_cmp(&sa)
                .unwrap()
                .then(ma.cmp(&mb))
                .then(ia.cmp(&ib))
        });
        let mut clusters: Vec<Vec<Detection>> = Vec::new();
        for (m, i) in refs {
            let det = &model_outputs[m][i];
            let mut best: Option<(usize, f32)> = None;
            for (ci, members) in clusters.iter().enumerate() {
                let (_, fused_box) = fuse_members(members);
                let overlap = iou(&fused_box, &det.bbox);
                if overlap >= iou_thr && best.is_none_or(|(_, b)| overlap > b) {
                    best = Some((ci, overlap));
                }
            }
            match best {
                Some((ci, _)) => clusters[ci].push(det.clone()),
                None => clusters.push(vec![det.clone()]),
            }
        }
        for members in clusters {
            let (score, bbox) = fuse_members(&members);
            let t = members.len();
            let factor = match conf_mode {
                ConfMode::AvgMin => t.min(n_models) as f32 / n_models as f32,
                ConfMode::AvgT => t as f32 / n_models as f32,
            };
            fused_out.push(Detection {
                image_id: image_id.clone(),
                class_id,
                score: score * factor,
                bbox,
            });
        }
    }
    fused_out.sort_by(|a, b| {
        (&a.image_id, a.class_id)
            .cmp(&(&b.image_id, b.class_id))
            .then(b.score.partial_cmp(&a.score).unwrap())
    });
    fused_out
}

fn assert_bitwise_eq(a: &[Detection], b: &[Detection], context: &str) {
    assert_eq!(a.len(), b.len(), "{context}: lengths differ");
    for (x, y) in a.iter().zip(b) {
        assert_eq!(x.image_id, y.image_id, "{context}");
        assert_eq!(x.class_id, y.class_id, "{context}");
        assert_eq!(x.score.to_bits(), y.score.to_bits(), "{context}: score");
        for (p, q) in [
            (x.bbox.x1, y.bbox.x1),
            (x.bbox.y1, y.bbox.y1),
            (x.bbox.x2, y.bbox.x2),
            (x.bbox.y2, y.bbox.y2),
        ] {
            assert_eq!(p.to_bits(), q.to_bits(), "{context}: coordinate");
        }
    }
}

#[test]
fn criterion_4_wbf_matches_brute_force() {
    // hand-worked cases first
    let a = vec![Detection {
        image_id: "img".to_string(),
        class_id: 0,
        score: 0.8,
        bbox: BBox::new(0.2, 0.2, 0.6, 0.6),
    }];
    let b = vec![Detection {
        score: 0.6,
        ..a[0].clone()
    }];
    let fused = wbf(&[a, b], 0.55, ConfMode::AvgMin).unwrap();
    assert_eq!(fused.len(), 1);
    assert!((fused[0].score - 0.7).abs() < 1e-6);

    let a = vec![Detection {
        image_id: "img".to_string(),
        class_id: 0,
        score: 0.9,
        bbox: BBox::new(0.10, 0.1, 0.6, 0.6),
    }];
    let b = vec![Detection {
        score: 0.3,
        bbox: BBox::new(0.20, 0.1, 0.6, 0.6),
        ..a[0].clone()
    }];
    let fused = wbf(&[a, b], 0.55, ConfMode::AvgMin).unwrap();
    assert!((fused[0].bbox.x1 - 0.125).abs() < 1e-6);

    // 1,000 seeded random instances, both rescale modes
    let mut checked = 0usize;
    for (k, instance) in random_instances(0xC0FFEE, 1000).into_iter().enumerate() {
        for conf_mode in [ConfMode::AvgMin, ConfMode::AvgT] {
            let ours = wbf(&instance, 0.55, conf_mode).unwrap();
            let reference = reference_wbf(&instance, 0.55, conf_mode);
            assert_bitwise_eq(&ours, &reference, &format!("instance {k} {conf_mode:?}"));
            checked += 1;
        }
    }
    println!("ACCEPTANCE 4 (WBF oracle equivalence): PASS — {checked} comparisons bit-identical");
}

/// Independent NMS reference: suppression propagation over the full O(n²)
/// pair matrix instead of candidate-vs-kept checks.
fn reference_nms(dets: &[Detection], iou_thr: f32) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut suppressed = vec![false; dets.len()];
    for (rank, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        for &j in &order[rank + 1..] {
            if !suppressed[j] && iou(&dets[i].bbox, &dets[j].bbox) >= iou_thr {
                suppressed[j] = true;
            }
        }
    }
    order
        .into_iter()
        .filter(|&i| !suppressed[i])
        .map(|i| dets[i].clone())
        .collect()
}

#[test]
fn criterion_5_nms_matches_brute_force() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xBEEF);
    for k in 0..1000usize {
        let n = rng.gen_range(0..=10usize);
        let dets: Vec<Detection> = (0..n)
            .map(|_| {
                let x1 = rng.gen_range(0.0..0.7f32);
                let y1 = rng.gen_range(0.0..0.7f32);
                Detection {
                    image_id: "img".to_string(),
                    class_id: 0,
                    score: rng.gen_range(0.0..1.0f32),
                    bbox: BBox::new(
                        x1,
                        y1,
                        x1 + rng.gen_range(0.05..0.3f32),
                        y1 + rng.gen_range(0.05..0.3f32),
                    ),
                }
            })
            .collect();
        let thr = rng.gen_range(0.2..0.8f32);
        let ours = nms(&dets, thr).unwrap();
        let reference = reference_nms(&dets, thr);
        assert_bitwise_eq(&ours, &reference, &format!("instance {k}"));
    }
    println!("ACCEPTANCE 5 (NMS oracle equivalence): PASS — 1000 instances identical");
}

// --- Canny properties --------------------------------------------------------

fn canny_mask(gray: &GrayMap, low: f32, high: f32) -> GrayMap {
    let params = CannyParams {
        low,
        high,
        ..CannyParams::default()
    };
    let EdgeChannels::CannyBinary { mask } = canny(gray, &params).unwrap().channels else {
        unreachable!()
    };
    mask
}

fn is_subset(inner: &GrayMap, outer: &GrayMap) -> bool {
    inner
        .data()
        .iter()
        .zip(outer.data())
        .all(|(&i, &o)| i == 0.0 || o == 1.0)
}

#[test]
fn criterion_6_canny_properties() {
    // constant image: empty map
    let flat = GrayMap::new(24, 24, vec![80.0; 576]).unwrap();
    assert!(canny_mask(&flat, 100.0, 200.0).data().iter().all(|&v| v == 0.0));

    // sharp step: exactly one edge column through the interior
    let mut step = GrayMap::new(24, 16, vec![0.0; 384]).unwrap();
    for y in 0..16 {
        step.set(12, y, 128.0);
        for x in 13..24 {
            step.set(x, y, 255.0);
        }
    }
    let mask = canny_mask(&step, 100.0, 200.0);
    for y in 3..13 {
        let cols: Vec<usize> = (0..24).filter(|&x| mask.at(x, y) == 1.0).collect();
        assert_eq!(cols, vec![12], "row {y}: edge must be 1 pixel wide");
    }

    // binary output and threshold monotonicity over 100 random textures
    let mut rng = ChaCha12Rng::seed_from_u64(606);
    for _ in 0..100 {
        let tex = GrayMap::new(
            24,
            24,
            (0..576).map(|_| rng.gen_range(0.0..256.0f32)).collect(),
        )
        .unwrap();
        let base = canny_mask(&tex, 100.0, 200.0);
        assert!(base.data().iter().all(|&v| v == 0.0 || v == 1.0));
        let higher_high = canny_mask(&tex, 100.0, 220.0);
        let higher_low = canny_mask(&tex, 120.0, 200.0);
        assert!(is_subset(&higher_high, &base), "raising T_high must shrink");
        assert!(is_subset(&higher_low, &base), "raising T_low must shrink");
    }
    println!("ACCEPTANCE 6 (Canny properties): PASS — binary, monotone, 1-px step line, empty on constant");
}

#[test]
fn criterion_7_metric_closed_forms() {
    // PSNR at MSE 1
    let a = ImageBuffer::filled(16, 16, 3, 100).unwrap();
    let b = ImageBuffer::filled(16, 16, 3, 101).unwrap();
    assert_eq!(mse(&a, &b).unwrap(), 1.0);
    let p = psnr(&a, &b).unwrap();
    assert!((p - 48.1308).abs() < 1e-3, "PSNR {p}");

    // SSIM identities
    let tex = ImageBuffer::new(16, 16, 3, (0..768).map(|i| (i * 37 % 256) as u8).collect())
        .unwrap();
    let s_self = ssim(&tex, &tex, &SsimParams::default()).unwrap();
    assert!((s_self - 1.0).abs() < 1e-9, "SSIM(x,x) = {s_self}");
    let c100 = ImageBuffer::filled(16, 16, 3, 100).unwrap();
    let c50 = ImageBuffer::filled(16, 16, 3, 50).unwrap();
    let s_const = ssim(&c100, &c50, &SsimParams::default()).unwrap();
    assert!((s_const - 0.80011).abs() < 1e-4, "constant SSIM {s_const}");

    // AP hand case: FP at 0.9, TP at 0.8, one GT
    let mk = |score: f32, is_tp: bool| LabeledDetection {
        det: Detection {
            image_id: "a".to_string(),
            class_id: 0,
            score,
            bbox: BBox::new(0.1, 0.1, 0.3, 0.3),
        },
        is_tp,
    };
    let ap = average_precision(&[mk(0.9, false), mk(0.8, true)], 1);
    assert_eq!(ap, 0.5);

    // perfect predictions on a 6-class set
    let mut dets = Vec::new();
    let mut gts = Vec::new();
    for class in 0..6u32 {
        for k in 0..4usize {
            let x = 0.02 + 0.15 * k as f32;
            let y = 0.05 + 0.1 * class as f32;
            let bx = BBox::new(x, y, x + 0.1, y + 0.08);
            dets.push(Detection {
                image_id: "img".to_string(),
                class_id: class,
                score: 1.0,
                bbox: bx,
            });
            gts.push(esrpcb_core::fusion::GroundTruth {
                image_id: "img".to_string(),
                class_id: class,
                bbox: bx,
            });
        }
    }
    let result = evaluate_map(&dets, &gts, 0.5).unwrap();
    assert_eq!(result.map50, 1.0);
    println!("ACCEPTANCE 7 (metric closed forms): PASS — PSNR {p:.4}, SSIM const {s_const:.5}, AP 0.5, mAP50 1.0");
}

#[test]
fn criterion_8_toy_training_halves_loss() {
    // fixed-seed 500-step run over a 16-patch synthetic set on a 2-block
    // toy network, plus one held-out patch for the PSNR comparison
    let pairs = synthetic_patch_pairs(17, 16, 2024).unwrap();
    let (train_pairs, holdout) = pairs.split_at(16);
    let canny = CannyParams::default();
    let examples = prepare_inputs(train_pairs, EdgeMode::Canny, &canny).unwrap();

    let net_cfg = NetworkConfig {
        n_blocks: 2,
        filters: 8,
        scale: 4,
        edge_mode: EdgeMode::Canny,
        ..NetworkConfig::esrpcb_c()
    };
    let mut net = Network::build_seeded(net_cfg, 7).unwrap();

    let holdout_input =
        prepare_inputs(&holdout[..1], EdgeMode::Canny, &canny).unwrap().remove(0);
    let hr_img = ImageBuffer::from_tensor(&holdout[0].hr).unwrap();
    let psnr_of = |net: &Network| -> f64 {
        let sr = net.forward(&holdout_input.0).unwrap();
        let sr_img = ImageBuffer::from_tensor(&sr).unwrap();
        psnr(&sr_img, &hr_img).unwrap()
    };
    let psnr_init = psnr_of(&net);

    let cfg = TrainerConfig {
        patch_size: 16,
        batch_size: 4,
        steps: 500,
        lr: 1e-3,
        lr_halve_every: 100_000,
        seed: 0,
    };
    let run = train_on_pairs(&mut net, &examples, &cfg).unwrap();
    let psnr_trained = psnr_of(&net);

    assert!(
        run.final_loss < 0.5 * run.initial_loss,
        "loss {} -> {} did not halve",
        run.initial_loss,
        run.final_loss
    );
    assert!(
        psnr_trained > psnr_init,
        "holdout PSNR {psnr_init:.2} -> {psnr_trained:.2} did not improve"
    );
    println!(
        "ACCEPTANCE 8 (toy training): PASS — loss {:.4} -> {:.4} ({:.1}% of initial), holdout PSNR {:.2} -> {:.2} dB",
        run.initial_loss,
        run.final_loss,
        100.0 * run.final_loss / run.initial_loss,
        psnr_init,
        psnr_trained
    );
}

#[test]
fn criterion_9_round_trips() {
    let dir = tempfile::tempdir().unwrap();

    // weights: save -> load -> save byte-identical
    let net = Network::build_seeded(
        NetworkConfig {
            n_blocks: 2,
            filters: 6,
            ..NetworkConfig::esrpcb_c()
        },
        99,
    )
    .unwrap();
    let w1 = dir.path().join("a.esrw");
    save_weights(&net, &w1).unwrap();
    let reloaded = load_weights(&w1).unwrap();
    assert_eq!(encode_weights(&reloaded), std::fs::read(&w1).unwrap());

    // PPM: save -> load -> save byte-identical
    let img = ImageBuffer::new(9, 7, 3, (0..189).map(|v| (v * 29 % 256) as u8).collect())
        .unwrap();
    let p1 = dir.path().join("x.ppm");
    save_image(&img, &p1).unwrap();
    let loaded = load_image(&p1).unwrap();
    let p2 = dir.path().join("y.ppm");
    save_image(&loaded, &p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

    // detection JSONL: write -> read value-identical
    let dets: Vec<Detection> = (0..20)
        .map(|i| Detection {
            image_id: format!("img{:02}", i % 4),
            class_id: (i % 6) as u32,
            score: 1.0 / (i as f32 + 1.5),
            bbox: BBox::new(
                0.01 + 0.002 * i as f32,
                0.3,
                0.5 + 0.013 * i as f32,
                0.9,
            ),
        })
        .collect();
    let j = dir.path().join("d.jsonl");
    let mut buf = Vec::new();
    write_detections_jsonl(&dets, &mut buf).unwrap();
    std::fs::write(&j, &buf).unwrap();
    assert_eq!(read_detections_jsonl(&j).unwrap(), dets);

    println!("ACCEPTANCE 9 (round trips): PASS — weights bitwise, PPM bitwise, JSONL value-identical");
}

/// Criterion 10 records what is deliberately out of desk-scale reach: the
/// published PSNR/SSIM table values and full-dataset mAP scores need
/// GPU-scale training plus external detectors. The protocols (sweep,
/// evaluate) are exercised by the CLI tests instead.
#[test]
fn criterion_10_out_of_scope_documented() {
    // the toy network exists and runs the full pipeline end to end; the
    // published numbers themselves are intentionally not asserted anywhere
    let manifest_shape = AnnotatedImage {
        path: "demo.png".to_string(),
        width: 600,
        height: 600,
        boxes: vec![GtBox {
            class: DefectClass::Short,
            x1: 10.0,
            y1: 10.0,
            x2: 60.0,
            y2: 60.0,
        }],
    };
    assert_eq!(manifest_shape.source_id(), "demo");
    println!("ACCEPTANCE 10 (explicit non-goals): PASS — full-scale table values replaced by criteria 1-9");
}
