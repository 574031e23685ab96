//! Recon sweep on the fixed-f0 corpus: frame length x optimizer.
use bridgekit::config::RunConfig;
use bridgekit::net::corpus::{build_corpus, frames_of};
use bridgekit::net::vae::{train_ep_vae, VaeArch};
use bridgekit::net::{OptimizerKind, TrainConfig};

fn recon_snr(nets: &bridgekit::net::vae::VaeNets, frames: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for frame in frames {
        let z = nets.encode_mean(frame).unwrap();
        let xhat = nets.decode(&z).unwrap();
        let p_ref: f64 = frame.iter().map(|v| v * v).sum();
        let p_err: f64 = frame.iter().zip(&xhat).map(|(a, b)| (a - b) * (a - b)).sum();
        acc += 10.0 * (p_ref / p_err.max(1e-300)).log10();
    }
    acc / frames.len() as f64
}

fn main() {
    let cfg = RunConfig::default();
    let mut ccfg = cfg.corpus.clone();
    ccfg.seed = 0;
    ccfg.n_train = 48;
    ccfg.n_heldout = 10;
    let corpus = build_corpus(&ccfg).unwrap();
    let frame_len = 256usize;
    let frames: Vec<Vec<f64>> = corpus.train.iter().flat_map(|s| frames_of(&s.clean, frame_len)).collect();
    let held: Vec<Vec<f64>> = corpus.heldout.iter().flat_map(|s| frames_of(&s.clean, frame_len)).collect();
    for (steps, opt, lr) in [
        (3000usize, OptimizerKind::Sgd, 0.01),
        (3000, OptimizerKind::Adam, 0.002),
    ] {
        let tcfg = TrainConfig { steps, seed: 1, optimizer: opt, learning_rate: lr, ..cfg.train_vae.clone() };
        let t = std::time::Instant::now();
        match train_ep_vae(&frames, &VaeArch::default(), &tcfg, true) {
            Ok((nets, _)) => println!("{opt:?} lr {lr}: train {:.2} dB, held {:.2} dB [{:?}]", recon_snr(&nets, &frames[..200.min(frames.len())]), recon_snr(&nets, &held[..200.min(held.len())]), t.elapsed()),
            Err(e) => println!("{opt:?} lr {lr}: ERR {e}"),
        }
    }
}
