mod common;

use common::{grad_check, random_array, rng};
use hacomp::ad::{Array, Tape, Var};
use hacomp::dnnha::{
    build, forward, forward_windowed, param_count, process, read_checkpoint, write_checkpoint, ArchSpec, Checkpoint,
    DnnError,
};

fn small() -> ArchSpec {
    ArchSpec { encoder_filters: vec![2, 3, 4], kernel_len: 4, stride: 2, residual: false }
}

#[test]
fn default_architecture_shape_and_count() {
    let spec = ArchSpec::default();
    let layers = spec.layers();
    assert_eq!(layers.len(), 16);
    assert_eq!(layers.iter().filter(|l| !l.transposed).count(), 8);
    assert_eq!(spec.granularity(), 256);
    let outs: Vec<usize> = layers[8..].iter().map(|l| l.c_out).collect();
    assert_eq!(outs, [128, 128, 64, 64, 32, 32, 16, 1]);
    let ins: Vec<usize> = layers[8..].iter().map(|l| l.c_in).collect();
    assert_eq!(ins, [256, 256, 256, 128, 128, 64, 64, 32]);
    // Concatenated skips with per-channel PReLU on all but the final layer.
    assert_eq!(param_count(&spec), 5_197_633);
    assert!(!layers[15].prelu && layers[..15].iter().all(|l| l.prelu));
}

#[test]
fn twelve_layer_variant() {
    let spec = ArchSpec::reduced_12();
    assert_eq!(spec.layers().len(), 12);
    assert_eq!(spec.granularity(), 64);
    let p = build(&spec, 1).unwrap();
    assert_eq!(p.count(), param_count(&spec));
}

#[test]
fn per_layer_counts() {
    let spec = ArchSpec::default();
    let first: usize = spec.param_layout().iter().filter(|(n, _)| n.starts_with("enc0.")).map(|(_, s)| s.iter().product::<usize>()).sum();
    assert_eq!(first, 32 * 16 + 16 + 16);

    let kernels = |s: &ArchSpec| -> usize {
        s.param_layout().iter().filter(|(n, _)| n.ends_with(".w")).map(|(_, s)| s.iter().product::<usize>()).sum()
    };
    let others = |s: &ArchSpec| param_count(s) - kernels(s);
    let double = ArchSpec { kernel_len: 64, ..ArchSpec::default() };
    assert_eq!(kernels(&double), 2 * kernels(&ArchSpec::default()));
    assert_eq!(others(&double), others(&ArchSpec::default()));
}

#[test]
fn invalid_specs() {
    for spec in [
        ArchSpec { encoder_filters: vec![8], ..ArchSpec::default() },
        ArchSpec { kernel_len: 1, ..ArchSpec::default() },
        ArchSpec { encoder_filters: vec![4, 0], ..ArchSpec::default() },
    ] {
        assert!(matches!(build(&spec, 0), Err(DnnError::Spec(_))));
    }
}

#[test]
fn seeded_build_is_deterministic() {
    let a = build(&ArchSpec::default(), 7).unwrap();
    let b = build(&ArchSpec::default(), 7).unwrap();
    let c = build(&ArchSpec::default(), 8).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    a.validate().unwrap();
}

#[test]
fn length_contract() {
    let spec = ArchSpec::default();
    let p = build(&spec, 3).unwrap();
    let mut r = rng(1);
    for len in [2048, 73_728] {
        let x = random_array(&mut r, &[len], 0.1);
        let t = Tape::new();
        let y = forward(&t, &spec, &p.constants(&t), &t.constant(x)).unwrap();
        assert_eq!(y.len(), len);
        assert!(y.value().all_finite());
    }
    let t = Tape::new();
    let err = forward(&t, &spec, &p.constants(&t), &t.constant(Array::zeros(&[1000]))).unwrap_err();
    assert!(matches!(err, DnnError::Length { len: 1000, multiple: 256 }));
}

#[test]
fn windowed_processing_is_per_window() {
    let spec = ArchSpec::reduced_12();
    let p = build(&spec, 4).unwrap();
    let mut r = rng(2);
    let x = random_array(&mut r, &[4096], 0.1);
    let t = Tape::new();
    let params = p.constants(&t);
    let one = forward(&t, &spec, &params, &t.constant(Array::vector(x.data()[..2048].to_vec()))).unwrap();
    let two = forward(&t, &spec, &params, &t.constant(Array::vector(x.data()[2048..].to_vec()))).unwrap();
    let single = forward_windowed(&t, &spec, &params, &t.constant(Array::vector(x.data()[..2048].to_vec())), 2048).unwrap();
    assert_eq!(single.data(), one.data());
    let both = forward_windowed(&t, &spec, &params, &t.constant(x.clone()), 2048).unwrap();
    assert_eq!(&both.data()[..2048], one.data());
    assert_eq!(&both.data()[2048..], two.data());
    assert_eq!(process(&p, x.data(), 2048).unwrap(), both.data());
    assert!(matches!(process(&p, &x.data()[..3000], 2048), Err(DnnError::Length { .. })));
    // A trailing partial window is processed on its own.
    let tail = forward(&t, &spec, &params, &t.constant(Array::vector(x.data()[2048..2560].to_vec()))).unwrap();
    let partial = process(&p, &x.data()[..2560], 2048).unwrap();
    assert_eq!(&partial[..2048], one.data());
    assert_eq!(&partial[2048..], tail.data());
    assert!(matches!(process(&p, x.data(), 1000), Err(DnnError::Spec(_))));
}

#[test]
fn zero_input_and_zero_bias_gives_zero() {
    let p = build(&ArchSpec::default(), 5).unwrap();
    assert!(p.names.iter().zip(&p.values).filter(|(n, _)| n.ends_with(".b")).all(|(_, v)| v.data().iter().all(|&b| b == 0.0)));
    let y = process(&p, &vec![0.0; 4096], 2048).unwrap();
    assert!(y.iter().all(|&v| v == 0.0));
}

#[test]
fn gradients_reach_every_parameter() {
    for residual in [false, true] {
        let spec = ArchSpec { residual, ..ArchSpec::reduced_12() };
        let p = build(&spec, 6).unwrap();
        let mut r = rng(3);
        let x = random_array(&mut r, &[512], 1.0);
        let target = random_array(&mut r, &[512], 1.0);
        let t = Tape::new();
        let leaves = p.leaves(&t);
        let y = forward(&t, &spec, &leaves, &t.constant(x)).unwrap();
        let loss = t.mae(&y, &t.constant(target)).unwrap();
        t.backward(&loss).unwrap();
        for (name, v) in p.names.iter().zip(&leaves) {
            let g = t.grad(v).unwrap();
            assert!(g.data().iter().any(|&v| v != 0.0), "{name} (residual {residual})");
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    for residual in [false, true] {
        let spec = ArchSpec { residual, ..small() };
        let p = build(&spec, 9).unwrap();
        let mut r = rng(4);
        let x = random_array(&mut r, &[16], 1.0);
        let target = random_array(&mut r, &[16], 1.0);
        let mut inputs = p.values.clone();
        inputs.push(x);
        let f = |t: &Tape, v: &[Var]| {
            let (params, x) = v.split_at(v.len() - 1);
            let y = forward(t, &spec, params, &x[0]).unwrap();
            let d = t.sub(&y, &t.constant(target.clone())).unwrap();
            t.mean_all(&t.square(&d))
        };
        let e = grad_check(&f, &inputs, 1e-6);
        assert!(e < 1e-6, "residual {residual}: {e}");
    }
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let spec = ArchSpec { residual: true, ..ArchSpec::reduced_12() };
    let params = build(&spec, 11).unwrap();
    let ckpt = Checkpoint { params, metadata: serde_json::json!({"epochs": 2, "loss": "L_r"}) };
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, &ckpt).unwrap();
    assert_eq!(&buf[..6], b"DNNHA1");
    assert_eq!(buf[6], 1);
    let back = read_checkpoint(buf.as_slice()).unwrap();
    assert_eq!(back, ckpt);
    let mut r = rng(5);
    let x = random_array(&mut r, &[2048], 0.1);
    let a = process(&ckpt.params, x.data(), 2048).unwrap();
    let b = process(&back.params, x.data(), 2048).unwrap();
    assert_eq!(a, b);

    let mut corrupt = buf.clone();
    corrupt[0] = b'X';
    assert!(matches!(read_checkpoint(corrupt.as_slice()), Err(DnnError::Checkpoint(_))));
    assert!(read_checkpoint(&buf[..buf.len() - 3]).is_err());
    let mut version = buf.clone();
    version[6] = 9;
    assert!(read_checkpoint(version.as_slice()).is_err());
}
