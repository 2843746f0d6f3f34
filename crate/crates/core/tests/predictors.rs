use cimnet_core::predict::{Model, ModelKind, SvrParams};
use cimnet_core::search::{joint_search, SearchParams, SimulatorOracle};
use cimnet_core::{
    kendall_tau, rng, AnalyticCompiler, ArchSpace, Codec, ConfigSpace, Family, Objectives, ProxyParams,
    Scope, SearchMode, SearchSetting, TargetTransform,
};

fn labeled(codec: &Codec, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Objectives>) {
    let oracle = SimulatorOracle::new(codec, ProxyParams::default(), &AnalyticCompiler).unwrap();
    let mut r = rng::seeded(seed);
    let mut x = vec![];
    let mut y = vec![];
    while x.len() < n {
        let g = codec.sample(&mut r);
        if let Some(o) = oracle.evaluate_one(&g) {
            x.push(g.features());
            y.push(o);
        }
    }
    (x, y)
}

#[test]
fn svr_ranks_like_ridge() {
    for f in [Family::Mbv3, Family::Vit] {
        let codec = Codec::new(ArchSpace::preset(f), ConfigSpace::default(), Scope::JOINT).unwrap();
        let (x, y) = labeled(&codec, 400, 31);
        let (train_x, test_x) = x.split_at(200);
        let cycles: Vec<f64> = y.iter().map(|o| o.cycles).collect();
        let (train_y, test_y) = cycles.split_at(200);
        let tau = |kind| {
            let m = Model::fit(kind, train_x, train_y, TargetTransform::Log, 5).unwrap();
            let p: Vec<f64> = test_x.iter().map(|r| m.predict(r)).collect();
            kendall_tau(test_y, &p).unwrap()
        };
        let ridge = tau(ModelKind::Ridge { lambda: None });
        let svr = tau(ModelKind::Svr(SvrParams::default()));
        assert!((ridge - svr).abs() <= 0.1, "{f}: ridge τ {ridge}, svr τ {svr}");
    }
}

#[test]
fn search_front_is_true_and_deterministic() {
    let codec = Codec::new(ArchSpace::mbv3(), ConfigSpace::default(), Scope::JOINT).unwrap();
    let params = SearchParams {
        k: 3,
        m: 200,
        n: 40,
        seed: 9,
        setting: SearchSetting::new(SearchMode::ElasticArchElasticCfg),
        predictor: ModelKind::default(),
    };
    let run = || {
        let mut oracle = SimulatorOracle::new(&codec, ProxyParams::default(), &AnalyticCompiler).unwrap();
        joint_search(&codec, &params, &mut oracle).unwrap()
    };
    let a = run();
    assert_eq!(a, run());
    assert_eq!(a.evaluated.len(), 120);
    assert_eq!(a.iterations.len(), 3);
    for (k, it) in a.iterations.iter().enumerate() {
        assert_eq!(it.training_size, 40 * (k + 1));
    }
    let oracle = SimulatorOracle::new(&codec, ProxyParams::default(), &AnalyticCompiler).unwrap();
    for p in &a.final_front {
        assert!(a.evaluated.iter().any(|e| e.genome == p.genome && e.feasible));
        let truth = oracle.evaluate_one(&p.genome).unwrap();
        assert_eq!((p.accuracy, p.cycles), (truth.accuracy, truth.cycles));
        let (_, cfg) = codec.decode(&p.genome).unwrap();
        assert!(codec.config_space().validate(&cfg).is_ok());
    }
}

#[test]
fn static_arch_search_keeps_the_canonical_network() {
    let codec = Codec::new(
        ArchSpace::vit_base(),
        ConfigSpace::default(),
        SearchMode::StaticArchElasticCfg.scope(),
    )
    .unwrap();
    let params = SearchParams {
        k: 2,
        m: 100,
        n: 30,
        seed: 4,
        setting: SearchSetting::new(SearchMode::StaticArchElasticCfg),
        predictor: ModelKind::default(),
    };
    let mut oracle = SimulatorOracle::new(&codec, ProxyParams::default(), &AnalyticCompiler).unwrap();
    let h = joint_search(&codec, &params, &mut oracle).unwrap();
    for e in &h.evaluated {
        assert_eq!(&codec.decode(&e.genome).unwrap().0, codec.static_arch());
    }
}
