#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rfr/sampler.hpp"
#include "rfr/trainer.hpp"

// Experiment configuration: a sectioned key-value text file that doubles as
// the persisted provenance record of every run. Unknown keys are rejected so
// a typo cannot silently fall back to a default.

namespace rfr::exp {

struct Experiment {
    std::string name = "default_lowlight";
    train::TrainManifest manifest;
    sampler::SamplerOptions sampler;
    int sampler_steps = 3;  // mirrored into SamplerOptions
    uint64_t sampler_seed = 2024;
    double cfg_scale = 0.0;
    bool clip_output = true;
    std::vector<std::string> compare_against;  // other experiment names
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}

inline double parse_real(const std::string& v, const std::string& key) {
    try {
        size_t n = 0;
        double d = std::stod(v, &n);
        if (n != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config: bad number for " + key + ": " + v);
    }
}

inline long parse_int(const std::string& v, const std::string& key) {
    try {
        size_t n = 0;
        long d = std::stol(v, &n);
        if (n != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config: bad integer for " + key + ": " + v);
    }
}

}  // namespace detail

/// Applies one `section.key = value` setting. Throws on unknown keys.
inline void apply_setting(Experiment& e, const std::string& section, const std::string& key,
                          const std::string& value) {
    using detail::parse_bool;
    using detail::parse_int;
    using detail::parse_real;
    auto& m = e.manifest;
    const std::string full = section.empty() ? key : section + "." + key;

    if (section.empty()) {
        if (key == "name") {
            e.name = value;
            return;
        }
        if (key == "compare_against") {
            e.compare_against.clear();
            std::stringstream ss(value);
            std::string item;
            while (std::getline(ss, item, ',')) {
                item = detail::trim(item);
                if (!item.empty()) e.compare_against.push_back(item);
            }
            return;
        }
    } else if (section == "task") {
        if (key == "kind") { m.task = synth::task_from_name(value); return; }
        if (key == "crop") { m.crop = int(parse_int(value, full)); return; }
        if (key == "canvas") { m.canvas = int(parse_int(value, full)); return; }
        if (key == "blur_sigma") { m.degrade.blur_sigma = parse_real(value, full); return; }
        if (key == "gamma") { m.degrade.gamma = parse_real(value, full); return; }
        if (key == "noise_sigma") { m.degrade.noise_sigma = parse_real(value, full); return; }
        if (key == "cast_r") { m.degrade.cast_matrix[0] = parse_real(value, full); return; }
        if (key == "cast_g") { m.degrade.cast_matrix[4] = parse_real(value, full); return; }
        if (key == "cast_b") { m.degrade.cast_matrix[8] = parse_real(value, full); return; }
        if (key == "hole_fraction") { m.degrade.hole_fraction = parse_real(value, full); return; }
    } else if (section == "model") {
        if (key == "base_width") { m.base_width = int(parse_int(value, full)); return; }
        if (key == "depth") { m.depth = int(parse_int(value, full)); return; }
        if (key == "parameterization") {
            if (value == "x0_pred") m.parameterization = net::Parameterization::x0_pred;
            else if (value == "v_pred") m.parameterization = net::Parameterization::v_pred;
            else throw std::invalid_argument("config: bad parameterization: " + value);
            return;
        }
        if (key == "time_embedding") { m.time_embedding = parse_bool(value, full); return; }
        if (key == "time_embed_dim") { m.time_embed_dim = int(parse_int(value, full)); return; }
    } else if (section == "train") {
        if (key == "path") {
            if (value == "standard") m.bridge = false;
            else if (value == "bridge") m.bridge = true;
            else throw std::invalid_argument("config: bad path: " + value);
            return;
        }
        if (key == "t_strategy") {
            if (value == "beta") m.t_strategy = flow::TStrategy::beta;
            else if (value == "uniform") m.t_strategy = flow::TStrategy::uniform;
            else if (value == "logit_normal") m.t_strategy = flow::TStrategy::logit_normal;
            else throw std::invalid_argument("config: bad t_strategy: " + value);
            return;
        }
        if (key == "p") { m.p = int(parse_int(value, full)); return; }
        if (key == "t_min") { m.t_min = parse_real(value, full); return; }
        if (key == "logit_mu") { m.logit_mu = parse_real(value, full); return; }
        if (key == "logit_sigma") { m.logit_sigma = parse_real(value, full); return; }
        if (key == "cfg_dropout_prob") { m.cfg_dropout_prob = parse_real(value, full); return; }
        if (key == "composite_loss") { m.composite_loss = parse_bool(value, full); return; }
        if (key == "lambda_grad") { m.lambda_grad = parse_real(value, full); return; }
        if (key == "batch_size") { m.batch_size = int(parse_int(value, full)); return; }
        if (key == "iterations") { m.iterations = parse_int(value, full); return; }
        if (key == "lr_init") { m.lr_init = parse_real(value, full); return; }
        if (key == "lr_min") { m.lr_min = parse_real(value, full); return; }
        if (key == "seed") { m.seed = uint64_t(parse_int(value, full)); return; }
        if (key == "validation_every") { m.validation_every = parse_int(value, full); return; }
        if (key == "checkpoint_every") { m.checkpoint_every = parse_int(value, full); return; }
        if (key == "validation_size") { m.validation_size = int(parse_int(value, full)); return; }
        if (key == "validation_seed") { m.validation_seed = uint64_t(parse_int(value, full)); return; }
        if (key == "val_steps") { m.val_steps = int(parse_int(value, full)); return; }
        if (key == "val_sampler_seed") { m.val_sampler_seed = uint64_t(parse_int(value, full)); return; }
        if (key == "augment") { m.augment = parse_bool(value, full); return; }
        if (key == "threads") { m.threads = int(parse_int(value, full)); return; }
    } else if (section == "sampler") {
        if (key == "steps") { e.sampler_steps = int(parse_int(value, full)); return; }
        if (key == "seed") { e.sampler_seed = uint64_t(parse_int(value, full)); return; }
        if (key == "clip_output") { e.clip_output = parse_bool(value, full); return; }
        if (key == "cfg_scale") { e.cfg_scale = parse_real(value, full); return; }
        if (key == "mask_fresh_noise") { e.sampler.mask_fresh_noise = parse_bool(value, full); return; }
    } else {
        throw std::invalid_argument("config: unknown section [" + section + "]");
    }
    throw std::invalid_argument("config: unknown key: " + full);
}

inline void finalize(Experiment& e) {
    e.sampler.steps_N = e.sampler_steps;
    e.sampler.seed = e.sampler_seed;
    e.sampler.clip_output = e.clip_output;
    e.sampler.cfg_scale = e.cfg_scale;
    e.sampler.parameterization = e.manifest.parameterization;
    e.manifest.validate();
}

inline Experiment parse_config_text(std::istream& in, const std::string& origin) {
    Experiment e;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto where = [&] { return origin + ":" + std::to_string(lineno); };
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument("config: malformed section at " + where());
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected key = value at " + where());
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument("config: empty key or value at " + where());
        apply_setting(e, section, key, value);
    }
    finalize(e);
    return e;
}

inline Experiment parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("config: cannot open " + path);
    return parse_config_text(f, path);
}

/// Serializes the fully resolved experiment; written next to every run's
/// outputs so the run can be reproduced from the artifact alone.
inline std::string serialize(const Experiment& e) {
    const auto& m = e.manifest;
    std::ostringstream o;
    o.precision(17);
    o << "name = " << e.name << "\n";
    if (!e.compare_against.empty()) {
        o << "compare_against = ";
        for (size_t i = 0; i < e.compare_against.size(); ++i)
            o << (i ? "," : "") << e.compare_against[i];
        o << "\n";
    }
    o << "\n[task]\n";
    o << "kind = " << synth::task_name(m.task) << "\n";
    o << "crop = " << m.crop << "\ncanvas = " << m.canvas << "\n";
    o << "blur_sigma = " << m.degrade.blur_sigma << "\ngamma = " << m.degrade.gamma << "\n";
    o << "noise_sigma = " << m.degrade.noise_sigma << "\n";
    o << "cast_r = " << m.degrade.cast_matrix[0] << "\ncast_g = " << m.degrade.cast_matrix[4]
      << "\ncast_b = " << m.degrade.cast_matrix[8] << "\n";
    o << "hole_fraction = " << m.degrade.hole_fraction << "\n";
    o << "\n[model]\n";
    o << "base_width = " << m.base_width << "\ndepth = " << m.depth << "\n";
    o << "parameterization = " << net::parameterization_name(m.parameterization) << "\n";
    o << "time_embedding = " << (m.time_embedding ? "true" : "false") << "\n";
    o << "time_embed_dim = " << m.time_embed_dim << "\n";
    o << "\n[train]\n";
    o << "path = " << (m.bridge ? "bridge" : "standard") << "\n";
    o << "t_strategy = "
      << (m.t_strategy == flow::TStrategy::beta
              ? "beta"
              : m.t_strategy == flow::TStrategy::uniform ? "uniform" : "logit_normal")
      << "\n";
    o << "p = " << m.p << "\nt_min = " << m.t_min << "\n";
    o << "logit_mu = " << m.logit_mu << "\nlogit_sigma = " << m.logit_sigma << "\n";
    o << "cfg_dropout_prob = " << m.cfg_dropout_prob << "\n";
    o << "composite_loss = " << (m.composite_loss ? "true" : "false") << "\n";
    o << "lambda_grad = " << m.lambda_grad << "\n";
    o << "batch_size = " << m.batch_size << "\niterations = " << m.iterations << "\n";
    o << "lr_init = " << m.lr_init << "\nlr_min = " << m.lr_min << "\n";
    o << "seed = " << m.seed << "\n";
    o << "validation_every = " << m.validation_every << "\n";
    o << "checkpoint_every = " << m.checkpoint_every << "\n";
    o << "validation_size = " << m.validation_size << "\n";
    o << "validation_seed = " << m.validation_seed << "\n";
    o << "val_steps = " << m.val_steps << "\n";
    o << "val_sampler_seed = " << m.val_sampler_seed << "\n";
    o << "augment = " << (m.augment ? "true" : "false") << "\n";
    o << "threads = " << m.threads << "\n";
    o << "\n[sampler]\n";
    o << "steps = " << e.sampler_steps << "\nseed = " << e.sampler_seed << "\n";
    o << "clip_output = " << (e.clip_output ? "true" : "false") << "\n";
    o << "cfg_scale = " << e.cfg_scale << "\n";
    o << "mask_fresh_noise = " << (e.sampler.mask_fresh_noise ? "true" : "false") << "\n";
    return o.str();
}

inline std::filesystem::path output_root() {
    if (const char* env = std::getenv("RFR_OUT_ROOT")) return env;
    return "runs";
}

}  // namespace rfr::exp
