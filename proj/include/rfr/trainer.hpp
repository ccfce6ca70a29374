#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <thread>
#include <vector>

#include "rfr/adam.hpp"
#include "rfr/backbone.hpp"
#include "rfr/checkpoint.hpp"
#include "rfr/flowcore.hpp"
#include "rfr/metrics.hpp"
#include "rfr/png_io.hpp"
#include "rfr/rng.hpp"
#include "rfr/sampler.hpp"
#include "rfr/synthdata.hpp"

// Training loop for the reformulated objective with all variants: t-sampling
// strategies, x0 vs velocity parameterization, bridge path, condition
// dropout, the composite-loss hook, a half-cosine learning-rate schedule,
// periodic validation and CSV logging.

namespace rfr::train {

struct TrainManifest {
    synth::TaskKind task = synth::TaskKind::lowlight;
    synth::DegradeSpec degrade;

    bool bridge = false;
    net::Parameterization parameterization = net::Parameterization::x0_pred;
    flow::TStrategy t_strategy = flow::TStrategy::beta;
    bool time_embedding = false;
    int time_embed_dim = 16;
    double cfg_dropout_prob = 0.0;
    bool composite_loss = false;
    double lambda_grad = 0.1;

    int base_width = 16;
    int depth = 2;

    int batch_size = 8;
    long iterations = 5000;
    double lr_init = 1e-4;
    double lr_min = 1e-6;
    int p = 1;
    double t_min = 1e-3;
    double logit_mu = 0.0;
    double logit_sigma = 1.0;
    uint64_t seed = 1;
    long validation_every = 500;
    long checkpoint_every = 1000;

    int crop = 64;
    int canvas = 96;
    bool augment = true;
    int validation_size = 32;
    uint64_t validation_seed = 777;
    int val_steps = 3;
    uint64_t val_sampler_seed = 0x5EED;
    int threads = 1;  // 1 = bitwise-reproducible single-thread mode

    void validate() const {
        degrade.validate();
        if (batch_size < 1 || iterations < 1)
            throw std::invalid_argument("TrainManifest: batch_size and iterations must be >= 1");
        if (lr_min > lr_init)
            throw std::invalid_argument("TrainManifest: lr_min must not exceed lr_init");
        if (!(cfg_dropout_prob >= 0.0 && cfg_dropout_prob < 1.0))
            throw std::invalid_argument("TrainManifest: cfg_dropout_prob outside [0,1)");
        if (p != 1 && p != 2) throw std::invalid_argument("TrainManifest: p must be 1 or 2");
        if (!(t_min > 0 && t_min < 1))
            throw std::invalid_argument("TrainManifest: t_min outside (0,1)");
        if (bridge && !synth::same_shape_task(task))
            throw std::invalid_argument("TrainManifest: bridge path needs a same-shape task");
        if (bridge && cfg_dropout_prob > 0)
            throw std::invalid_argument(
                "TrainManifest: bridge path has no concatenated condition to drop");
        if (parameterization == net::Parameterization::v_pred && task == synth::TaskKind::sr2x)
            throw std::invalid_argument("TrainManifest: v-prediction needs a same-domain state");
        if (parameterization == net::Parameterization::v_pred && composite_loss)
            throw std::invalid_argument(
                "TrainManifest: the composite hook reweights the pixel term of an x0 predictor");
        if (crop < 16 || crop > canvas)
            throw std::invalid_argument("TrainManifest: crop must lie in [16, canvas]");
        // for sr2x the network runs on the LR grid, so the divisibility
        // requirement applies after the 2x reduction
        const int grid = (task == synth::TaskKind::sr2x) ? (2 << depth) : (1 << depth);
        if (crop % grid)
            throw std::invalid_argument("TrainManifest: crop must be divisible by " +
                                        std::to_string(grid));
        if (validation_size < 1)
            throw std::invalid_argument("TrainManifest: empty validation set");
        if (validation_every < 1 || checkpoint_every < 1)
            throw std::invalid_argument("TrainManifest: intervals must be >= 1");
    }

    flow::TSamplerConfig t_sampler() const {
        flow::TSamplerConfig c;
        c.strategy = t_strategy;
        c.p = p;
        c.t_min = t_min;
        c.logit_mu = logit_mu;
        c.logit_sigma = logit_sigma;
        return c;
    }

    // The bridge variant feeds the state alone; the standard path feeds
    // concat(condition, state).
    net::BackboneConfig backbone() const {
        net::BackboneConfig c;
        const int cond_c = synth::condition_channels(task);
        const int out_c = synth::target_channels(task);
        c.in_channels = bridge ? out_c : cond_c + out_c;
        c.out_channels = out_c;
        c.base_width = base_width;
        c.depth = depth;
        c.parameterization = parameterization;
        c.time_embedding = time_embedding;
        c.time_embed_dim = time_embed_dim;
        c.upsample_factor = synth::upsample_factor(task);
        if (task == synth::TaskKind::sr2x)
            c.anchor = net::AnchorMode::upsample;
        else if (task == synth::TaskKind::colorize && !bridge)
            c.anchor = net::AnchorMode::broadcast;
        else
            c.anchor = net::AnchorMode::slice;
        return c;
    }

    net::CheckpointMeta meta(uint64_t iteration = 0) const {
        net::CheckpointMeta m;
        m.cfg = backbone();
        m.task = task;
        m.bridge = bridge;
        m.cfg_dropout_prob = cfg_dropout_prob;
        m.t_min = t_min;
        m.p = p;
        m.iteration = iteration;
        return m;
    }
};

/// Half-cosine schedule from lr_init at iter 0 to lr_min at iter == total.
inline double cosine_lr(long iter, long total, double lr_init, double lr_min) {
    if (total <= 0) throw std::invalid_argument("cosine_lr: total must be positive");
    if (iter < 0 || iter > total) throw std::invalid_argument("cosine_lr: iter outside [0,total]");
    return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + std::cos(M_PI * double(iter) / double(total)));
}

struct SampleProbe {
    double t = 0;
    bool dropped = false;
    double sample_loss = 0;
};

// Heavyweight per-sample capture for identity checks in tests.
struct TensorProbe {
    TensorF target, eps, net_out;
    double t = 0;
};

struct ValMetrics {
    double psnr = 0, ssim = 0, val_loss = 0;
};

struct TrainResult {
    double final_loss = 0;
    double best_val_loss = 1e30;
    long best_iteration = -1;
    ValMetrics best_val;
    ValMetrics final_val;
    double seconds = 0;
    double forward_ms = 0;  // mean per-sample forward+backward cost
    std::string best_checkpoint, final_checkpoint;
};

class Trainer {
   public:
    explicit Trainer(TrainManifest m) : m_(std::move(m)) {
        m_.validate();
        params_ = net::init_backbone<float>(m_.backbone(), m_.seed);
        adam_.init_like(params_);
        valset_ = synth::make_valset(m_.task, m_.degrade, m_.validation_size, m_.crop,
                                     m_.validation_seed);
        int n_threads = m_.threads > 0 ? m_.threads
                                       : int(std::thread::hardware_concurrency() ? std::thread::hardware_concurrency() : 1);
        n_threads = std::max(1, std::min(n_threads, m_.batch_size));
        lanes_.resize(n_threads);
        sample_grads_.resize(m_.batch_size);
        for (auto& g : sample_grads_) g.init_like(params_);
        grads_.init_like(params_);
    }

    const TrainManifest& manifest() const { return m_; }
    const net::BackboneParams<float>& params() const { return params_; }
    const std::vector<synth::Pair>& valset() const { return valset_; }

    void set_sample_hook(std::function<void(const SampleProbe&)> h) { sample_hook_ = std::move(h); }
    void set_tensor_hook(std::function<void(const TensorProbe&)> h) { tensor_hook_ = std::move(h); }

    /// One optimizer step (0-based iteration index). Returns the batch loss.
    double step(long iter) {
        const int B = m_.batch_size;
        const int lanes = int(lanes_.size());
        std::vector<double> losses(B, 0.0);
        std::vector<SampleProbe> probes(B);

        auto run_lane = [&](int lane) {
            for (int b = lane; b < B; b += lanes)
                losses[b] = run_sample(iter, b, lanes_[lane], sample_grads_[b], probes[b]);
        };
        if (lanes == 1) {
            run_lane(0);
        } else {
            std::vector<std::thread> pool;
            for (int l = 0; l < lanes; ++l) pool.emplace_back(run_lane, l);
            for (auto& th : pool) th.join();
        }

        // ordered reduction keeps results independent of the lane count
        grads_.zero();
        for (int b = 0; b < B; ++b)
            for (size_t k = 0; k < grads_.blocks.size(); ++k) {
                const auto& src = sample_grads_[b].blocks[k];
                auto& dst = grads_.blocks[k];
                for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
            }
        double loss = 0;
        for (int b = 0; b < B; ++b) loss += losses[b];
        loss /= B;
        if (sample_hook_)
            for (const auto& pr : probes) sample_hook_(pr);
        if (!std::isfinite(loss))
            throw NumericalError("train: non-finite loss at iteration " + std::to_string(iter) +
                                 (last_checkpoint_.empty()
                                      ? std::string(" (no checkpoint written yet)")
                                      : " (last good checkpoint: " + last_checkpoint_ + ")"));
        double lr = cosine_lr(iter, m_.iterations, m_.lr_init, m_.lr_min);
        net::adam_step(params_, grads_, adam_, lr);
        return loss;
    }

    ValMetrics validate_now(int steps_n) {
        ValMetrics vm;
        sampler::SamplerOptions opts;
        opts.steps_N = steps_n;
        opts.parameterization = m_.parameterization;
        auto meta = m_.meta();
        TensorF hole_mask;
        for (size_t i = 0; i < valset_.size(); ++i) {
            opts.seed = mix_seed(m_.val_sampler_seed, i);
            opts.mask = nullptr;
            if (m_.task == synth::TaskKind::inpaint) {
                hole_mask = extract_mask(valset_[i].condition);
                opts.mask = &hole_mask;
            }
            TensorF out = sampler::infer(params_, meta, valset_[i].condition, opts, &lanes_[0].ws);
            vm.psnr += metrics::psnr(out, valset_[i].target);
            vm.ssim += metrics::ssim(out, valset_[i].target);
            vm.val_loss += mean_abs_diff(out, valset_[i].target);
        }
        const double n = double(valset_.size());
        vm.psnr /= n;
        vm.ssim /= n;
        vm.val_loss /= n;
        return vm;
    }

    /// Full training run with CSV logs, checkpoints and sample PNGs under
    /// `out_dir`.
    TrainResult run(const std::filesystem::path& out_dir) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        std::ofstream train_csv(out_dir / "train.csv");
        std::ofstream val_csv(out_dir / "val.csv");
        if (!train_csv || !val_csv) throw IoError("train: cannot create CSV logs");
        train_csv << "iter,loss,lr,seconds\n";
        val_csv << "iter,psnr,ssim,val_loss\n";

        TrainResult res;
        auto t_start = std::chrono::steady_clock::now();
        char buf[256];
        for (long it = 0; it < m_.iterations; ++it) {
            double loss = step(it);
            double lr = cosine_lr(it, m_.iterations, m_.lr_init, m_.lr_min);
            double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
            std::snprintf(buf, sizeof buf, "%ld,%.10g,%.10g,%.3f\n", it, loss, lr, secs);
            train_csv << buf;
            res.final_loss = loss;

            const long done = it + 1;
            if (done % m_.validation_every == 0 || done == m_.iterations) {
                ValMetrics vm = validate_now(m_.val_steps);
                std::snprintf(buf, sizeof buf, "%ld,%.10g,%.10g,%.10g\n", it, vm.psnr, vm.ssim,
                              vm.val_loss);
                val_csv << buf;
                res.final_val = vm;
                if (vm.val_loss < res.best_val_loss) {
                    res.best_val_loss = vm.val_loss;
                    res.best_iteration = it;
                    res.best_val = vm;
                    res.best_checkpoint = (out_dir / "best.ckpt").string();
                    net::save_checkpoint(res.best_checkpoint, params_, m_.meta(uint64_t(done)));
                }
            }
            if (done % m_.checkpoint_every == 0) {
                last_checkpoint_ = (out_dir / "latest.ckpt").string();
                net::save_checkpoint(last_checkpoint_, params_, m_.meta(uint64_t(done)));
            }
        }
        res.final_checkpoint = (out_dir / "final.ckpt").string();
        net::save_checkpoint(res.final_checkpoint, params_, m_.meta(uint64_t(m_.iterations)));
        res.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        res.forward_ms = 1e3 * res.seconds / (double(m_.iterations) * m_.batch_size * 3);
        write_sample_pngs(out_dir / "samples");
        return res;
    }

    static TensorF extract_mask(const TensorF& inpaint_condition) {
        TensorF mask(1, inpaint_condition.height, inpaint_condition.width);
        const float* src = inpaint_condition.plane(3);
        std::copy(src, src + mask.plane_size(), mask.data.begin());
        return mask;
    }

   private:
    struct Lane {
        net::Workspace<float> ws;
    };

    double run_sample(long iter, int b, Lane& lane, net::Gradients<float>& g,
                      SampleProbe& probe) {
        g.zero();
        const uint64_t s = mix_seed(m_.seed, uint64_t(iter), uint64_t(b));
        synth::Pair pr = synth::make_sample(m_.task, m_.degrade, m_.canvas, m_.crop, m_.augment,
                                            mix_seed(s, 0xDA7A));
        Rng rng(mix_seed(s, 0xF70));

        const flow::TSamplerConfig tcfg = m_.t_sampler();
        double draw = m_.t_strategy == flow::TStrategy::logit_normal ? rng.gaussian()
                                                                     : rng.uniform();
        const double t = flow::sample_t(tcfg, draw);

        // The state lives in the condition's spatial domain (the LR grid for
        // super-resolution); the target and the loss stay in the output
        // domain.
        const int out_c = synth::target_channels(m_.task);
        TensorF state_target = m_.task == synth::TaskKind::sr2x
                                   ? synth::box_downsample(pr.target, 2)
                                   : pr.target;
        TensorF eps = gaussian_tensor<float>(out_c, state_target.height, state_target.width, rng);
        flow::FlowSample<float> smp = flow::make_flow_sample(
            pr.condition, std::move(state_target), std::move(eps), t, m_.bridge);

        bool dropped = false;
        TensorF input;
        if (m_.bridge) {
            input = smp.state_yt;
        } else {
            const TensorF* cond = &smp.condition_x;
            TensorF null_cond;
            if (m_.cfg_dropout_prob > 0 && rng.uniform() < m_.cfg_dropout_prob) {
                null_cond = TensorF(smp.condition_x.channels, smp.condition_x.height,
                                    smp.condition_x.width);
                cond = &null_cond;
                dropped = true;
            }
            input = sampler::assemble_input(cond, smp.state_yt);
        }

        std::optional<double> tt;
        if (m_.time_embedding) tt = t;
        TensorF f = net::forward(params_, input, tt, lane.ws);

        // inpainting restricts the loss to the hole
        TensorF loss_mask;
        const TensorF* mask_ptr = nullptr;
        if (m_.task == synth::TaskKind::inpaint) {
            loss_mask = extract_mask(pr.condition);
            for (auto& v : loss_mask.data) v = 1.0f - v;  // 1 inside the hole
            mask_ptr = &loss_mask;
        }

        double loss;
        TensorF grad_out;
        if (m_.parameterization == net::Parameterization::x0_pred) {
            loss = flow::rfr_loss_grad(pr.target, f, t, m_.p, mask_ptr, grad_out);
            if (m_.composite_loss) {
                double aux =
                    flow::grad_diff_loss_grad(pr.target, f, m_.lambda_grad, mask_ptr, grad_out);
                loss += m_.lambda_grad * aux;
            }
        } else {
            loss = flow::velocity_loss_grad(pr.target, smp.noise_eps, f, mask_ptr, grad_out);
        }

        const float scale = 1.0f / float(m_.batch_size);
        for (auto& v : grad_out.data) v *= scale;
        net::backward(params_, lane.ws, grad_out, g);

        probe.t = t;
        probe.dropped = dropped;
        probe.sample_loss = loss;
        if (tensor_hook_) {
            TensorProbe tp;
            tp.target = pr.target;
            tp.eps = smp.noise_eps;
            tp.net_out = f;
            tp.t = t;
            tensor_hook_(tp);
        }
        return loss;
    }

    TrainManifest m_;
    net::BackboneParams<float> params_;
    net::AdamState<float> adam_;
    net::Gradients<float> grads_;
    std::vector<net::Gradients<float>> sample_grads_;
    std::vector<Lane> lanes_;
    std::vector<synth::Pair> valset_;
    std::string last_checkpoint_;
    std::function<void(const SampleProbe&)> sample_hook_;
    std::function<void(const TensorProbe&)> tensor_hook_;

    void write_sample_pngs(const std::filesystem::path& dir) {
        std::filesystem::create_directories(dir);
        sampler::SamplerOptions opts;
        opts.steps_N = m_.val_steps;
        opts.parameterization = m_.parameterization;
        auto meta = m_.meta();
        const int n = std::min<int>(4, int(valset_.size()));
        char name[64];
        TensorF hole_mask;
        for (int i = 0; i < n; ++i) {
            opts.seed = mix_seed(m_.val_sampler_seed, i);
            opts.mask = nullptr;
            if (m_.task == synth::TaskKind::inpaint) {
                hole_mask = extract_mask(valset_[i].condition);
                opts.mask = &hole_mask;
            }
            TensorF out = sampler::infer(params_, meta, valset_[i].condition, opts, &lanes_[0].ws);
            std::snprintf(name, sizeof name, "val_%02d_input.png", i);
            io::write_png((dir / name).string(), valset_[i].condition);
            std::snprintf(name, sizeof name, "val_%02d_output.png", i);
            io::write_png((dir / name).string(), out);
            std::snprintf(name, sizeof name, "val_%02d_target.png", i);
            io::write_png((dir / name).string(), valset_[i].target);
        }
    }
};

}  // namespace rfr::train
