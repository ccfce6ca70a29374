// Command-line surface: training runs, inference, one-command ablations and
// the invariant self-check suite.

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rfr/experiment.hpp"
#include "rfr/png_io.hpp"
#include "rfr/selfcheck.hpp"
#include "rfr/trainer.hpp"

namespace fs = std::filesystem;
using namespace rfr;

namespace {

struct CommonOverrides {
    std::optional<std::string> config_path;
    std::optional<std::string> name;
    std::optional<std::string> task;
    std::optional<long> iterations;
    std::optional<long> seed;
    std::optional<int> width;
    std::optional<int> batch;
    std::optional<int> crop;
    std::optional<std::string> t_strategy;
    std::optional<std::string> parameterization;
    std::optional<std::string> path_kind;
    std::optional<bool> time_embedding;
    std::optional<double> cfg_dropout;
    std::optional<bool> composite;
    std::optional<long> validation_every;
    std::optional<int> validation_size;
    std::optional<int> threads;
    bool single_thread = false;
    std::optional<std::string> out_dir;
};

void add_common_options(CLI::App* cmd, CommonOverrides& o) {
    cmd->add_option("--config", o.config_path, "experiment config file");
    cmd->add_option("--name", o.name, "experiment name (output subdirectory)");
    cmd->add_option("--task", o.task,
                    "identity|deblur|lowlight|colorcast|sr2x|inpaint|colorize");
    cmd->add_option("--iterations", o.iterations, "training iterations");
    cmd->add_option("--seed", o.seed, "training seed");
    cmd->add_option("--width", o.width, "backbone base width");
    cmd->add_option("--batch", o.batch, "batch size");
    cmd->add_option("--crop", o.crop, "training crop size");
    cmd->add_option("--t-strategy", o.t_strategy, "beta|uniform|logit_normal");
    cmd->add_option("--parameterization", o.parameterization, "x0_pred|v_pred");
    cmd->add_option("--path", o.path_kind, "standard|bridge");
    cmd->add_option("--time-embedding", o.time_embedding, "enable sinusoidal time embedding");
    cmd->add_option("--cfg-dropout", o.cfg_dropout, "condition dropout probability");
    cmd->add_option("--composite-loss", o.composite, "enable the composite-loss hook");
    cmd->add_option("--validation-every", o.validation_every, "validation interval");
    cmd->add_option("--validation-size", o.validation_size, "validation set size");
    cmd->add_option("--threads", o.threads, "worker threads over the batch");
    cmd->add_flag("--single-thread", o.single_thread,
                  "force the bitwise-reproducible single-thread mode");
    cmd->add_option("--out", o.out_dir, "output directory (default $RFR_OUT_ROOT/<name>)");
}

exp::Experiment resolve_experiment(const CommonOverrides& o) {
    exp::Experiment e;
    if (o.config_path) e = exp::parse_config_file(*o.config_path);
    auto set = [&](const std::string& sec, const std::string& key, const std::string& val) {
        exp::apply_setting(e, sec, key, val);
    };
    if (o.name) e.name = *o.name;
    if (o.task) set("task", "kind", *o.task);
    if (o.iterations) set("train", "iterations", std::to_string(*o.iterations));
    if (o.seed) set("train", "seed", std::to_string(*o.seed));
    if (o.width) set("model", "base_width", std::to_string(*o.width));
    if (o.batch) set("train", "batch_size", std::to_string(*o.batch));
    if (o.crop) set("task", "crop", std::to_string(*o.crop));
    if (o.t_strategy) set("train", "t_strategy", *o.t_strategy);
    if (o.parameterization) set("model", "parameterization", *o.parameterization);
    if (o.path_kind) set("train", "path", *o.path_kind);
    if (o.time_embedding) set("model", "time_embedding", *o.time_embedding ? "true" : "false");
    if (o.cfg_dropout) set("train", "cfg_dropout_prob", std::to_string(*o.cfg_dropout));
    if (o.composite) set("train", "composite_loss", *o.composite ? "true" : "false");
    if (o.validation_every)
        set("train", "validation_every", std::to_string(*o.validation_every));
    if (o.validation_size) set("train", "validation_size", std::to_string(*o.validation_size));
    if (o.threads) e.manifest.threads = *o.threads;
    if (o.single_thread) e.manifest.threads = 1;
    exp::finalize(e);
    return e;
}

fs::path run_dir(const exp::Experiment& e, const CommonOverrides& o) {
    if (o.out_dir) return *o.out_dir;
    return exp::output_root() / e.name;
}

void persist_manifest(const exp::Experiment& e, const fs::path& dir) {
    fs::create_directories(dir);
    std::ofstream f(dir / "manifest.cfg");
    if (!f) throw IoError("cannot write manifest to " + dir.string());
    f << exp::serialize(e);
}

struct EvalSummary {
    double psnr = 0, psnr_y = 0, ssim = 0, val_loss = 0;
    bool has_y = false;
};

EvalSummary evaluate_checkpoint(const net::BackboneParams<float>& params,
                                const net::CheckpointMeta& meta,
                                const std::vector<synth::Pair>& set,
                                sampler::SamplerOptions opts) {
    EvalSummary s;
    TensorF hole_mask;
    for (size_t i = 0; i < set.size(); ++i) {
        sampler::SamplerOptions o = opts;
        o.seed = mix_seed(opts.seed, i);
        if (meta.task == synth::TaskKind::inpaint) {
            hole_mask = train::Trainer::extract_mask(set[i].condition);
            o.mask = &hole_mask;
        }
        TensorF out = sampler::infer(params, meta, set[i].condition, o);
        auto rep = metrics::evaluate(out, set[i].target);
        s.psnr += rep.psnr_rgb;
        s.ssim += rep.ssim;
        s.val_loss += mean_abs_diff(out, set[i].target);
        if (rep.psnr_y) {
            s.psnr_y += *rep.psnr_y;
            s.has_y = true;
        }
    }
    double n = double(set.size());
    s.psnr /= n;
    s.psnr_y /= n;
    s.ssim /= n;
    s.val_loss /= n;
    return s;
}

// last validation row of a completed run's val.csv
std::array<double, 3> final_val_row(const fs::path& run) {
    std::ifstream f(run / "val.csv");
    if (!f) throw IoError("compare_against: missing " + (run / "val.csv").string());
    std::string line, last;
    std::getline(f, line);  // header
    while (std::getline(f, line))
        if (!line.empty()) last = line;
    if (last.empty()) throw IoError("compare_against: empty val.csv in " + run.string());
    std::array<double, 3> row{};
    std::stringstream ss(last);
    std::string tok;
    std::getline(ss, tok, ',');  // iter
    for (auto& v : row) {
        std::getline(ss, tok, ',');
        v = std::stod(tok);
    }
    return row;
}

int cmd_train(const CommonOverrides& o) {
    exp::Experiment e = resolve_experiment(o);
    fs::path dir = run_dir(e, o);
    persist_manifest(e, dir);
    std::cout << "training '" << e.name << "' -> " << dir.string() << "\n";
    train::Trainer trainer(e.manifest);
    auto res = trainer.run(dir);
    std::printf("final loss %.6g | best val: iter %ld psnr %.2f dB ssim %.4f loss %.5g\n",
                res.final_loss, res.best_iteration, res.best_val.psnr, res.best_val.ssim,
                res.best_val_loss);
    std::printf("wall %.1f s | ~%.2f ms per forward pass | ~%.2f ms per %d-step inference\n",
                res.seconds, res.forward_ms, res.forward_ms * e.sampler.steps_N,
                e.sampler.steps_N);
    std::cout << "checkpoints: " << res.best_checkpoint << ", " << res.final_checkpoint << "\n";
    if (!e.compare_against.empty()) {
        std::ofstream cmp(dir / "comparison.csv");
        char buf[160];
        cmp << "arm,psnr,ssim,val_loss\n";
        std::snprintf(buf, sizeof buf, "%s,%.4f,%.5f,%.6g\n", e.name.c_str(),
                      res.final_val.psnr, res.final_val.ssim, res.final_val.val_loss);
        cmp << buf;
        for (const auto& other : e.compare_against) {
            auto row = final_val_row(exp::output_root() / other);
            std::snprintf(buf, sizeof buf, "%s,%.4f,%.5f,%.6g\n", other.c_str(), row[0],
                          row[1], row[2]);
            cmp << buf;
        }
        std::cout << "comparison: " << (dir / "comparison.csv").string() << "\n";
    }
    return 0;
}

std::string variant_string(const net::CheckpointMeta& meta, const sampler::SamplerOptions& o) {
    std::string v = net::parameterization_name(meta.cfg.parameterization);
    if (meta.bridge) v += "+bridge";
    if (meta.cfg.time_embedding) v += "+temb";
    if (o.cfg_scale > 0) v += "+cfg";
    return v;
}

void write_metrics_header(std::ofstream& f) { f << "id,task,variant,N,psnr,psnr_y,ssim,lpips\n"; }

void write_metrics_row(std::ofstream& f, int id, const net::CheckpointMeta& meta,
                       const sampler::SamplerOptions& o, const metrics::MetricsReport& rep) {
    char buf[256];
    if (rep.psnr_y)
        std::snprintf(buf, sizeof buf, "%d,%s,%s,%d,%.4f,%.4f,%.5f,\n", id,
                      synth::task_name(meta.task), variant_string(meta, o).c_str(), o.steps_N,
                      rep.psnr_rgb, *rep.psnr_y, rep.ssim);
    else
        std::snprintf(buf, sizeof buf, "%d,%s,%s,%d,%.4f,,%.5f,\n", id,
                      synth::task_name(meta.task), variant_string(meta, o).c_str(), o.steps_N,
                      rep.psnr_rgb, rep.ssim);
    f << buf;
}

int cmd_infer(const std::string& checkpoint, std::vector<std::string> inputs,
              std::vector<std::string> targets, std::optional<long> task_seed, int count,
              int size, sampler::SamplerOptions opts, bool fresh_mask_noise,
              bool quantized_metrics, const std::string& out) {
    auto [params, meta] = net::load_checkpoint(checkpoint);
    opts.parameterization = meta.cfg.parameterization;
    opts.mask_fresh_noise = fresh_mask_noise;
    fs::path dir = out.empty() ? exp::output_root() / "infer" : fs::path(out);
    fs::create_directories(dir);

    std::vector<synth::Pair> pairs;
    if (task_seed) {
        synth::DegradeSpec spec;
        pairs = synth::make_valset(meta.task, spec, count, size, uint64_t(*task_seed));
    } else {
        if (inputs.empty())
            throw std::invalid_argument("infer: need --input PNGs or --task-seed");
        if (!targets.empty() && targets.size() != inputs.size())
            throw std::invalid_argument("infer: --target count must match --input count");
        for (size_t i = 0; i < inputs.size(); ++i) {
            synth::Pair p;
            p.condition = io::read_png(inputs[i]);
            if (p.condition.channels != synth::condition_channels(meta.task))
                throw std::invalid_argument("infer: " + inputs[i] +
                                            " has the wrong channel count for task " +
                                            synth::task_name(meta.task));
            if (!targets.empty()) p.target = io::read_png(targets[i]);
            pairs.push_back(std::move(p));
        }
    }

    const bool have_targets = !pairs.empty() && pairs[0].target.size() > 0;
    std::ofstream mcsv;
    if (have_targets) {
        mcsv.open(dir / "metrics.csv");
        write_metrics_header(mcsv);
    }

    net::Workspace<float> ws;
    TensorF hole_mask;
    double infer_seconds = 0;
    char name[64];
    for (size_t i = 0; i < pairs.size(); ++i) {
        sampler::SamplerOptions o = opts;
        o.seed = mix_seed(opts.seed, i);
        if (meta.task == synth::TaskKind::inpaint) {
            hole_mask = train::Trainer::extract_mask(pairs[i].condition);
            o.mask = &hole_mask;
        }
        auto t0 = std::chrono::steady_clock::now();
        TensorF result = sampler::infer(params, meta, pairs[i].condition, o, &ws);
        infer_seconds +=
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::snprintf(name, sizeof name, "%03zu_output.png", i);
        io::write_png((dir / name).string(), result);
        std::snprintf(name, sizeof name, "%03zu_input.png", i);
        io::write_png((dir / name).string(), pairs[i].condition);
        if (have_targets) {
            auto rep = metrics::evaluate(result, pairs[i].target, 99.0, quantized_metrics);
            write_metrics_row(mcsv, int(i), meta, o, rep);
        }
    }
    double per_infer = infer_seconds / double(pairs.size());
    std::printf("%zu image(s) -> %s | %.2f ms per %d-step inference (%.2f ms per forward)\n",
                pairs.size(), dir.string().c_str(), 1e3 * per_infer, opts.steps_N,
                1e3 * per_infer / opts.steps_N);
    if (have_targets) std::cout << "metrics: " << (dir / "metrics.csv").string() << "\n";
    return 0;
}

int cmd_selfcheck() {
    auto t0 = std::chrono::steady_clock::now();
    auto results = check::run_selfcheck();
    bool all = true;
    for (const auto& r : results) {
        std::printf("[%s] %-30s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.c_str());
        all = all && r.pass;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%zu checks in %.1f s: %s\n", results.size(), secs,
                all ? "all passed" : "FAILURES present");
    return all ? 0 : 2;
}

int cmd_export_valset(const std::string& task_s, int count, int size, long seed,
                      const std::string& out) {
    synth::TaskKind task = synth::task_from_name(task_s);
    synth::DegradeSpec spec;
    auto pairs = synth::make_valset(task, spec, count, size, uint64_t(seed));
    fs::path dir(out);
    fs::create_directories(dir);
    std::ofstream idx(dir / "index.csv");
    idx << "id,task,seed\n";
    char name[64];
    for (size_t i = 0; i < pairs.size(); ++i) {
        std::snprintf(name, sizeof name, "input_%03zu.png", i);
        io::write_png((dir / name).string(), pairs[i].condition);
        std::snprintf(name, sizeof name, "target_%03zu.png", i);
        io::write_png((dir / name).string(), pairs[i].target);
        idx << i << "," << synth::task_name(task) << "," << mix_seed(uint64_t(seed), i, 0x11)
            << "\n";
    }
    std::cout << count << " pairs -> " << dir.string() << "\n";
    return 0;
}

// --------------------------------------------------------------------------
// Ablations: paired runs differing in exactly one variant flag, plus the
// step sweep over a single checkpoint.
// --------------------------------------------------------------------------

struct ArmResult {
    std::string arm;
    EvalSummary eval;
};

ArmResult run_arm(exp::Experiment e, const std::string& arm, const fs::path& root,
                  double eval_cfg_scale = 0.0) {
    e.name += "_" + arm;
    fs::path dir = root / arm;
    persist_manifest(e, dir);
    std::cout << "[ablate] arm '" << arm << "' -> " << dir.string() << "\n";
    train::Trainer trainer(e.manifest);
    trainer.run(dir);
    auto [params, meta] = net::load_checkpoint((dir / "best.ckpt").string());
    sampler::SamplerOptions opts = e.sampler;
    opts.cfg_scale = eval_cfg_scale;
    opts.seed = e.manifest.val_sampler_seed;
    opts.parameterization = meta.cfg.parameterization;
    auto valset = synth::make_valset(e.manifest.task, e.manifest.degrade,
                                     e.manifest.validation_size, e.manifest.crop,
                                     e.manifest.validation_seed);
    return {arm, evaluate_checkpoint(params, meta, valset, opts)};
}

void write_comparison(const fs::path& root, const std::vector<ArmResult>& arms) {
    std::ofstream f(root / "comparison.csv");
    f << "arm,psnr,ssim,val_loss\n";
    char buf[160];
    for (const auto& a : arms) {
        std::snprintf(buf, sizeof buf, "%s,%.4f,%.5f,%.6g\n", a.arm.c_str(), a.eval.psnr,
                      a.eval.ssim, a.eval.val_loss);
        f << buf;
    }
    std::cout << "[ablate] comparison -> " << (root / "comparison.csv").string() << "\n";
}

int cmd_ablate(const std::string& kind, const CommonOverrides& o) {
    exp::Experiment base = resolve_experiment(o);
    fs::path root = o.out_dir ? fs::path(*o.out_dir)
                              : exp::output_root() / (base.name + "_ablate_" + kind);
    fs::create_directories(root);

    if (kind == "steps") {
        exp::Experiment e = base;
        fs::path dir = root / "base";
        persist_manifest(e, dir);
        train::Trainer trainer(e.manifest);
        trainer.run(dir);
        auto [params, meta] = net::load_checkpoint((dir / "best.ckpt").string());
        auto valset = synth::make_valset(e.manifest.task, e.manifest.degrade,
                                         e.manifest.validation_size, e.manifest.crop,
                                         e.manifest.validation_seed);
        sampler::SamplerOptions opts = e.sampler;
        opts.seed = e.manifest.val_sampler_seed;
        opts.parameterization = meta.cfg.parameterization;
        auto rows = sampler::step_sweep(params, meta, valset, {1, 3, 5, 7, 10}, opts);
        std::ofstream f(root / "sweep.csv");
        f << "N,psnr,ssim,seconds\n";
        char buf[128];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%d,%.4f,%.5f,%.4f\n", r.N, r.psnr, r.ssim,
                          r.seconds);
            f << buf;
        }
        std::cout << "[ablate] sweep -> " << (root / "sweep.csv").string() << "\n";
        return 0;
    }

    std::vector<ArmResult> arms;
    if (kind == "sampling") {
        for (auto [strategy, arm] :
             {std::pair{"beta", "beta"}, {"uniform", "uniform"}, {"logit_normal", "logit_normal"}}) {
            exp::Experiment e = base;
            exp::apply_setting(e, "train", "t_strategy", strategy);
            exp::finalize(e);
            arms.push_back(run_arm(e, arm, root));
        }
    } else if (kind == "parameterization") {
        for (auto [v, arm] : {std::pair{"x0_pred", "x0"}, {"v_pred", "vpred"}}) {
            exp::Experiment e = base;
            exp::apply_setting(e, "model", "parameterization", v);
            exp::finalize(e);
            arms.push_back(run_arm(e, arm, root));
        }
    } else if (kind == "time_embedding") {
        for (auto [v, arm] : {std::pair{"false", "plain"}, {"true", "temb"}}) {
            exp::Experiment e = base;
            exp::apply_setting(e, "model", "time_embedding", v);
            exp::finalize(e);
            arms.push_back(run_arm(e, arm, root));
        }
    } else if (kind == "bridge") {
        if (!synth::same_shape_task(base.manifest.task))
            throw std::invalid_argument("ablate bridge: task must have matching shapes");
        for (auto [v, arm] : {std::pair{"standard", "standard"}, {"bridge", "bridge"}}) {
            exp::Experiment e = base;
            exp::apply_setting(e, "train", "path", v);
            exp::finalize(e);
            arms.push_back(run_arm(e, arm, root));
        }
    } else if (kind == "cfg") {
        {
            exp::Experiment e = base;
            exp::apply_setting(e, "train", "cfg_dropout_prob", "0");
            exp::finalize(e);
            arms.push_back(run_arm(e, "plain", root));
        }
        {
            exp::Experiment e = base;
            exp::apply_setting(e, "train", "cfg_dropout_prob", "0.1");
            exp::finalize(e);
            arms.push_back(run_arm(e, "cfg_s4", root, 4.0));
        }
    } else {
        throw std::invalid_argument("ablate: unknown kind " + kind);
    }
    write_comparison(root, arms);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"image-to-image rectified flow reformulation toolkit"};
    app.require_subcommand(1);

    CommonOverrides train_o;
    CLI::App* train_cmd = app.add_subcommand("train", "train a model (Algorithm-1 loop)");
    add_common_options(train_cmd, train_o);

    std::string ckpt;
    std::vector<std::string> in_pngs, tgt_pngs;
    std::optional<long> task_seed;
    int count = 8, size = 64;
    sampler::SamplerOptions iopts;
    bool no_clip = false, fresh_mask = false, quantized_metrics = false;
    std::string infer_out;
    long infer_seed = 2024;
    CLI::App* infer_cmd = app.add_subcommand("infer", "few-step Euler inference");
    infer_cmd->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
    infer_cmd->add_option("--input", in_pngs, "condition PNG(s)");
    infer_cmd->add_option("--target", tgt_pngs, "ground-truth PNG(s) for metrics");
    infer_cmd->add_option("--task-seed", task_seed, "generate inputs from this synthetic seed");
    infer_cmd->add_option("--count", count, "number of generated inputs");
    infer_cmd->add_option("--size", size, "generated input size");
    infer_cmd->add_option("--steps", iopts.steps_N, "Euler steps N")->default_val(3);
    infer_cmd->add_option("--seed", infer_seed, "noise seed");
    infer_cmd->add_option("--cfg-scale", iopts.cfg_scale, "classifier-free guidance scale");
    infer_cmd->add_flag("--no-clip", no_clip, "skip the final [0,1] clip");
    infer_cmd->add_flag("--fresh-mask-noise", fresh_mask,
                        "renoise masked regions with fresh draws");
    infer_cmd->add_flag("--quantized-psnr", quantized_metrics,
                        "compute metrics on 8-bit quantized values (matches the written PNGs)");
    infer_cmd->add_option("--out", infer_out, "output directory");

    std::string ablate_kind;
    CommonOverrides ablate_o;
    CLI::App* ablate_cmd = app.add_subcommand("ablate", "one-command paired-variant studies");
    ablate_cmd
        ->add_option("--kind", ablate_kind,
                     "steps|sampling|parameterization|time_embedding|bridge|cfg")
        ->required();
    add_common_options(ablate_cmd, ablate_o);

    CLI::App* selfcheck_cmd =
        app.add_subcommand("selfcheck", "run every library invariant in double precision");

    std::string ev_task = "lowlight", ev_out = "valset";
    int ev_count = 32, ev_size = 64;
    long ev_seed = 777;
    CLI::App* export_cmd = app.add_subcommand("export-valset", "write a fixed validation set");
    export_cmd->add_option("--task", ev_task, "task kind");
    export_cmd->add_option("--count", ev_count, "number of pairs");
    export_cmd->add_option("--size", ev_size, "image size");
    export_cmd->add_option("--seed", ev_seed, "validation seed");
    export_cmd->add_option("--out", ev_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return cmd_train(train_o);
        if (infer_cmd->parsed()) {
            iopts.clip_output = !no_clip;
            iopts.seed = uint64_t(infer_seed);
            return cmd_infer(ckpt, in_pngs, tgt_pngs, task_seed, count, size, iopts, fresh_mask,
                             quantized_metrics, infer_out);
        }
        if (ablate_cmd->parsed()) return cmd_ablate(ablate_kind, ablate_o);
        if (selfcheck_cmd->parsed()) return cmd_selfcheck();
        if (export_cmd->parsed()) return cmd_export_valset(ev_task, ev_count, ev_size, ev_seed, ev_out);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
