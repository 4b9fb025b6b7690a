use gliofuse_netkit::graph::{Layer, LayerKind};
use gliofuse_netkit::{build_msavnet, build_unet3d, build_vnet, Architecture, BuildConfig, NetworkGraph, Tensor5};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn input(shape: [usize; 5], seed: u64) -> Tensor5 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor5::from_fn(shape, |_, _, _, _, _| rng.gen_range(-1.0..1.0)).unwrap()
}

fn small(arch: Architecture) -> NetworkGraph {
    let config = BuildConfig {
        base_features: 4,
        ..BuildConfig::new(3, arch.default_depth())
    };
    arch.build(&config).unwrap()
}

#[test]
fn full_size_builders_on_32_cubes() {
    let x = input([1, 4, 32, 32, 32], 1);
    for net in [build_unet3d(32, 4, 4).unwrap(), build_vnet(4).unwrap(), build_msavnet(4).unwrap()] {
        let y = net.forward(&x).unwrap();
        assert_eq!(y.shape(), [1, 4, 32, 32, 32], "{}", net.name());
        assert!(y.data().iter().all(|v| v.is_finite()));
    }
}

#[test]
fn randomized_valid_sizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for arch in Architecture::ALL {
        let net = small(arch);
        let f = net.divisor();
        for _ in 0..3 {
            let dims: [usize; 3] = std::array::from_fn(|a| f[a] * rng.gen_range(1..4));
            let y = net.forward(&input([1, 4, dims[0], dims[1], dims[2]], rng.gen())).unwrap();
            assert_eq!(y.shape(), [1, 3, dims[0], dims[1], dims[2]]);
        }
        assert!(net.forward(&input([1, 4, f[0] + 1, f[1], f[2]], 0)).is_err());
        assert!(net.forward(&input([1, 3, f[0], f[1], f[2]], 0)).is_err());
    }
}

#[test]
fn vnet_structure() {
    let net = build_vnet(4).unwrap();
    let first = net.layers().iter().find_map(|l| match &l.layer {
        Layer::Conv3d(c) => Some(c),
        _ => None,
    });
    assert_eq!(first.unwrap().out_channels, 32);
    let residual_convs: Vec<_> = net
        .layers()
        .iter()
        .filter(|l| l.name.contains(".res.conv"))
        .collect();
    assert!(!residual_convs.is_empty());
    for l in residual_convs {
        assert_eq!(l.layer.kernel(), Some([5, 5, 5]), "{}", l.name);
    }
    let shapes = net.output_shapes([1, 4, 16, 16, 16]).unwrap();
    let mut joins = 0;
    for (i, l) in net.layers().iter().enumerate() {
        assert_ne!(l.kind(), LayerKind::ConcatSkip);
        if l.kind() == LayerKind::AddSkip {
            joins += 1;
            assert_eq!(shapes[i][1], shapes[i - 1][1], "{}", l.name);
        }
    }
    assert!(joins > 0);
    // down-sampling by strided convolution, up-sampling by transposed convolution
    assert!(net.layers().iter().any(|l| matches!(&l.layer, Layer::Conv3d(c) if c.stride == [2; 3])));
    assert!(net.layers().iter().any(|l| l.kind() == LayerKind::TransposedConv3d));
    assert!(!net.layers().iter().any(|l| l.kind() == LayerKind::Downsample));
}

#[test]
fn unet_concatenation_doubles_channels() {
    let net = build_unet3d(8, 4, 3).unwrap();
    let shapes = net.output_shapes([1, 4, 8, 8, 8]).unwrap();
    let mut joins = 0;
    for (i, l) in net.layers().iter().enumerate() {
        if l.kind() == LayerKind::ConcatSkip {
            joins += 1;
            assert_eq!(shapes[i][1], 2 * shapes[i - 1][1]);
        }
        if let Layer::Conv3d(c) = &l.layer {
            if l.name != "head" {
                assert_eq!(c.kernel, [3; 3]);
            }
        }
    }
    assert_eq!(joins, 2);
    assert_eq!(net.layers().last().unwrap().layer.kernel(), Some([1; 3]));
}

#[test]
fn msavnet_gates_every_skip() {
    let net = build_msavnet(4).unwrap();
    let decoder_skips: Vec<_> = net.skips().iter().filter(|s| !s.name.ends_with(".add")).collect();
    assert!(!decoder_skips.is_empty());
    for s in &decoder_skips {
        assert_eq!(net.layers()[s.to].kind(), LayerKind::AttentionGate, "{}", s.name);
    }
    let gates = net.layers().iter().filter(|l| l.kind() == LayerKind::AttentionGate).count();
    assert_eq!(gates, decoder_skips.len());
    assert!(net.layers().iter().any(|l| l.name.starts_with("center.")));
    assert!(net.layers().iter().any(|l| l.kind() == LayerKind::Downsample));
}

#[test]
fn open_gates_equal_the_additive_variant() {
    let mut net = small(Architecture::MsaVnet);
    net.force_open_gates();
    let plain = net.without_attention();
    assert!(plain.layers().iter().all(|l| l.kind() != LayerKind::AttentionGate));
    let x = input([1, 4, 8, 8, 8], 3);
    assert_eq!(net.forward(&x).unwrap(), plain.forward(&x).unwrap());
}

#[test]
fn forward_is_deterministic() {
    for arch in Architecture::ALL {
        let x = input([1, 4, 8, 8, 8], 4);
        let a = small(arch).forward(&x).unwrap();
        let b = small(arch).forward(&x).unwrap();
        assert_eq!(a.data(), b.data());
        let other_seed = arch
            .build(&BuildConfig {
                base_features: 4,
                seed: 1,
                ..BuildConfig::new(3, arch.default_depth())
            })
            .unwrap();
        assert_ne!(other_seed.forward(&x).unwrap(), a);
    }
}

#[test]
fn batch_samples_are_independent() {
    for arch in Architecture::ALL {
        let net = small(arch);
        let x = input([1, 4, 8, 8, 8], 5);
        let single = net.forward(&x).unwrap();
        let doubled = net.forward(&Tensor5::concat_batch(&[x.clone(), x]).unwrap()).unwrap();
        assert_eq!(doubled.sample(0), single.sample(0));
        assert_eq!(doubled.sample(1), single.sample(0));
    }
}

#[test]
fn unet_has_more_parameters_than_vnet() {
    let unet = build_unet3d(32, 4, 4).unwrap().param_count();
    let vnet = build_vnet(4).unwrap().param_count();
    assert!(unet > vnet, "{unet} vs {vnet}");
}

#[test]
fn summary_lists_every_layer() {
    let net = small(Architecture::Vnet);
    let text = net.summary([1, 4, 8, 8, 8]).unwrap();
    assert_eq!(text.lines().count(), net.layers().len() + 3);
    assert!(text.contains(&format!("total parameters: {}", net.param_count())));
    assert!(text.contains("dec0.skip <- enc0.res.add"));
}
