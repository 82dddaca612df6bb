#include "config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "errors.hpp"

namespace sfv {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key())) {
            throw Error(ErrorCode::format,
                        "unknown config key '" + item.key() + "' in " + where);
        }
    }
}

std::string resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return p;
    std::filesystem::path fp(p);
    if (fp.is_absolute()) return p;
    return (base / fp).string();
}

}  // namespace

void PipelineConfig::validate() const {
    train.validate();
    attribution.validate();
    if (top_k == 0) {
        throw Error(ErrorCode::invalid_argument, "top_k must be at least 1");
    }
    if (!(significance_alpha > 0.0 && significance_alpha <= 1.0)) {
        throw Error(ErrorCode::invalid_argument, "significance_alpha must be in (0, 1]");
    }
    if (input_size && *input_size == 0) {
        throw Error(ErrorCode::invalid_argument, "input_size must be positive");
    }
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::io, "cannot open config '" + path + "'");
    }
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::format, "config '" + path + "' is not valid JSON: " + e.what());
    }
    if (!root.is_object()) {
        throw Error(ErrorCode::format, "config '" + path + "' must be a JSON object");
    }

    check_keys(root,
               {"backbone_weights", "within_manifest", "outside_manifest", "out_dir", "seed",
                "input_size", "top_k", "within_top_k", "significance_alpha", "train",
                "attribution"},
               "top level");

    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    PipelineConfig cfg;
    try {
        if (root.contains("backbone_weights")) {
            cfg.backbone_weights = resolve(base, root["backbone_weights"].get<std::string>());
        }
        if (root.contains("within_manifest")) {
            cfg.within_manifest = resolve(base, root["within_manifest"].get<std::string>());
        }
        if (root.contains("outside_manifest")) {
            cfg.outside_manifest = resolve(base, root["outside_manifest"].get<std::string>());
        }
        if (root.contains("out_dir")) cfg.out_dir = root["out_dir"].get<std::string>();
        if (root.contains("seed")) cfg.seed = root["seed"].get<std::uint64_t>();
        if (root.contains("input_size")) {
            cfg.input_size = root["input_size"].get<std::size_t>();
        }
        if (root.contains("top_k")) cfg.top_k = root["top_k"].get<std::size_t>();
        if (root.contains("within_top_k")) {
            cfg.within_top_k = root["within_top_k"].get<std::size_t>();
        }
        if (root.contains("significance_alpha")) {
            cfg.significance_alpha = root["significance_alpha"].get<double>();
        }

        cfg.train.seed = cfg.seed;
        if (root.contains("train")) {
            const json& t = root["train"];
            check_keys(t,
                       {"learning_rate", "reg_weight", "epochs", "eps_reg", "adam_beta1",
                        "adam_beta2", "adam_eps", "seed"},
                       "train");
            if (t.contains("learning_rate")) cfg.train.learning_rate = t["learning_rate"].get<double>();
            if (t.contains("reg_weight")) cfg.train.reg_weight = t["reg_weight"].get<double>();
            if (t.contains("epochs")) cfg.train.epochs = t["epochs"].get<std::size_t>();
            if (t.contains("eps_reg")) cfg.train.eps_reg = t["eps_reg"].get<double>();
            if (t.contains("adam_beta1")) cfg.train.adam_beta1 = t["adam_beta1"].get<double>();
            if (t.contains("adam_beta2")) cfg.train.adam_beta2 = t["adam_beta2"].get<double>();
            if (t.contains("adam_eps")) cfg.train.adam_eps = t["adam_eps"].get<double>();
            if (t.contains("seed")) cfg.train.seed = t["seed"].get<std::uint64_t>();
        }

        if (root.contains("attribution")) {
            const json& a = root["attribution"];
            check_keys(a, {"method", "ig_steps", "smoothing_sigma", "norm_floor"}, "attribution");
            if (a.contains("method")) {
                const std::string m = a["method"].get<std::string>();
                if (m == "vanilla") {
                    cfg.attribution.method = AttributionMethod::vanilla;
                } else if (m == "integrated_gradients") {
                    cfg.attribution.method = AttributionMethod::integrated_gradients;
                } else {
                    throw Error(ErrorCode::format, "unknown attribution method '" + m +
                                                       "' (expected vanilla or integrated_gradients)");
                }
            }
            if (a.contains("ig_steps")) cfg.attribution.ig_steps = a["ig_steps"].get<std::size_t>();
            if (a.contains("smoothing_sigma")) {
                cfg.attribution.smoothing_sigma = a["smoothing_sigma"].get<double>();
            }
            if (a.contains("norm_floor")) cfg.attribution.norm_floor = a["norm_floor"].get<double>();
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::format, "config '" + path + "': " + e.what());
    }

    cfg.validate();
    return cfg;
}

}  // namespace sfv
