#include "rrgs/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <set>

#include "json.hpp"
#include "rrgs/io.hpp"

namespace rrgs {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw InvalidParameterError("unknown config field '" + it.key() + "' in " + where);
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

GroupingMode grouping_mode_from_string(const std::string& s) {
    if (s == "ray") return GroupingMode::Ray;
    if (s == "knn") return GroupingMode::Knn;
    throw InvalidParameterError("unknown grouping mode: " + s);
}

RegularizerMode regularizer_mode_from_string(const std::string& s) {
    if (s == "none") return RegularizerMode::None;
    if (s == "mcr") return RegularizerMode::Mcr;
    if (s == "sr") return RegularizerMode::Sr;
    if (s == "full") return RegularizerMode::Full;
    if (s == "arap") return RegularizerMode::Arap;
    throw InvalidParameterError("unknown regularizer mode: " + s);
}

MotionModelKind motion_model_kind_from_string(const std::string& s) {
    if (s == "table") return MotionModelKind::Table;
    if (s == "basis-polynomial") return MotionModelKind::BasisPolynomial;
    if (s == "basis-fourier") return MotionModelKind::BasisFourier;
    throw InvalidParameterError("unknown motion model: " + s);
}

std::string to_string(GroupingMode m) { return m == GroupingMode::Ray ? "ray" : "knn"; }

std::string to_string(RegularizerMode m) {
    switch (m) {
        case RegularizerMode::None: return "none";
        case RegularizerMode::Mcr: return "mcr";
        case RegularizerMode::Sr: return "sr";
        case RegularizerMode::Full: return "full";
        default: return "arap";
    }
}

std::string to_string(MotionModelKind m) {
    switch (m) {
        case MotionModelKind::Table: return "table";
        case MotionModelKind::BasisPolynomial: return "basis-polynomial";
        default: return "basis-fourier";
    }
}

LossWeights RunConfig::effective_weights() const {
    LossWeights w = weights;
    switch (regularizer) {
        case RegularizerMode::None:
            w.lambda_mcr = 0.0;
            w.lambda_sr = 0.0;
            w.lambda_arap = 0.0;
            break;
        case RegularizerMode::Mcr:
            w.lambda_sr = 0.0;
            w.lambda_arap = 0.0;
            break;
        case RegularizerMode::Sr:
            w.lambda_mcr = 0.0;
            w.lambda_arap = 0.0;
            break;
        case RegularizerMode::Full:
            w.lambda_arap = 0.0;
            break;
        case RegularizerMode::Arap:
            w.lambda_mcr = 0.0;  // ARAP replaces SR and MCR is switched off
            w.lambda_sr = 0.0;
            break;
    }
    return w;
}

SceneSpec load_scene_spec(const std::string& path) {
    const json j = json::parse(read_text_file(path));
    reject_unknown(j,
                   {"name", "gaussian_count", "motion", "timesteps", "camera_path", "seed",
                    "image_width", "image_height"},
                   path);
    SceneSpec s;
    maybe(j, "name", s.name);
    maybe(j, "gaussian_count", s.gaussian_count);
    if (j.contains("motion")) s.motion = motion_kind_from_string(j.at("motion"));
    maybe(j, "timesteps", s.timesteps);
    if (j.contains("camera_path")) s.camera_path = camera_path_from_string(j.at("camera_path"));
    maybe(j, "seed", s.seed);
    maybe(j, "image_width", s.image_width);
    maybe(j, "image_height", s.image_height);
    s.validate();
    return s;
}

RunConfig load_run_config(const std::string& path) {
    const json j = json::parse(read_text_file(path));
    reject_unknown(j,
                   {"scene", "motion_model", "basis_order", "iterations", "learning_rate",
                    "momentum", "grouping", "regularizer", "tau", "knn_k", "pixel_stride", "seed",
                    "output_dir", "holdout_stride", "init_noise", "render_timestep", "weights"},
                   path);
    RunConfig cfg;
    if (!j.contains("scene"))
        throw InvalidParameterError("config " + path + " is missing required field 'scene'");
    cfg.scene_path = j.at("scene").get<std::string>();
    const auto base = std::filesystem::path(path).parent_path();
    const auto scene_file = base / cfg.scene_path;
    cfg.scene = load_scene_spec(scene_file.string());

    if (j.contains("motion_model"))
        cfg.motion_model = motion_model_kind_from_string(j.at("motion_model"));
    maybe(j, "basis_order", cfg.basis_order);
    maybe(j, "iterations", cfg.iterations);
    maybe(j, "learning_rate", cfg.learning_rate);
    maybe(j, "momentum", cfg.momentum);
    if (j.contains("grouping")) cfg.grouping = grouping_mode_from_string(j.at("grouping"));
    if (j.contains("regularizer"))
        cfg.regularizer = regularizer_mode_from_string(j.at("regularizer"));
    maybe(j, "tau", cfg.tau);
    maybe(j, "knn_k", cfg.knn_k);
    maybe(j, "pixel_stride", cfg.pixel_stride);
    maybe(j, "seed", cfg.seed);
    maybe(j, "output_dir", cfg.output_dir);
    maybe(j, "holdout_stride", cfg.holdout_stride);
    maybe(j, "init_noise", cfg.init_noise);
    maybe(j, "render_timestep", cfg.render_timestep);

    if (j.contains("weights")) {
        const json& w = j.at("weights");
        reject_unknown(w,
                       {"lambda_dssim", "lambda_mcr", "lambda_sr", "lambda_arap", "epsilon",
                        "motion_threshold", "huber_delta", "m"},
                       path + ":weights");
        maybe(w, "lambda_dssim", cfg.weights.lambda_dssim);
        maybe(w, "lambda_mcr", cfg.weights.lambda_mcr);
        maybe(w, "lambda_sr", cfg.weights.lambda_sr);
        maybe(w, "lambda_arap", cfg.weights.lambda_arap);
        maybe(w, "epsilon", cfg.weights.epsilon);
        maybe(w, "motion_threshold", cfg.weights.motion_threshold);
        maybe(w, "huber_delta", cfg.weights.huber_delta);
        maybe(w, "m", cfg.weights.temporal_window);
    }

    if (const char* env = std::getenv("RRGS_SEED")) cfg.seed = std::strtoull(env, nullptr, 10);

    if (!(cfg.tau > 0.0 && cfg.tau < 1.0))
        throw InvalidParameterError("config: tau must lie in (0, 1)");
    if (cfg.iterations < 0) throw InvalidParameterError("config: iterations must be >= 0");
    if (cfg.pixel_stride < 1) throw InvalidParameterError("config: pixel_stride must be >= 1");
    return cfg;
}

std::string config_echo_json(const RunConfig& cfg) {
    json w;
    const LossWeights eff = cfg.effective_weights();
    w["lambda_dssim"] = eff.lambda_dssim;
    w["lambda_mcr"] = eff.lambda_mcr;
    w["lambda_sr"] = eff.lambda_sr;
    w["lambda_arap"] = eff.lambda_arap;
    w["epsilon"] = eff.epsilon;
    w["motion_threshold"] = eff.motion_threshold;
    w["huber_delta"] = eff.huber_delta;
    w["m"] = eff.temporal_window;

    json s;
    s["name"] = cfg.scene.name;
    s["gaussian_count"] = cfg.scene.gaussian_count;
    s["motion"] = to_string(cfg.scene.motion);
    s["timesteps"] = cfg.scene.timesteps;
    s["camera_path"] = to_string(cfg.scene.camera_path);
    s["seed"] = cfg.scene.seed;
    s["image_width"] = cfg.scene.image_width;
    s["image_height"] = cfg.scene.image_height;

    json j;
    j["scene"] = cfg.scene_path;
    j["scene_spec"] = s;
    j["motion_model"] = to_string(cfg.motion_model);
    j["basis_order"] = cfg.basis_order;
    j["iterations"] = cfg.iterations;
    j["learning_rate"] = cfg.learning_rate;
    j["momentum"] = cfg.momentum;
    j["grouping"] = to_string(cfg.grouping);
    j["regularizer"] = to_string(cfg.regularizer);
    j["tau"] = cfg.tau;
    j["knn_k"] = cfg.knn_k;
    j["pixel_stride"] = cfg.pixel_stride;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;
    j["holdout_stride"] = cfg.holdout_stride;
    j["init_noise"] = cfg.init_noise;
    j["render_timestep"] = cfg.render_timestep;
    j["weights"] = w;
    return j.dump(2);
}

}  // namespace rrgs
