#include "gsgraph/config.hpp"

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <set>

#include "gsgraph/errors.hpp"

namespace gsgraph {

namespace {

using njson = nlohmann::json;

void reject_unknown(const njson& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, val] : j.items()) {
        (void)val;
        if (!known.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

Vec3 vec3_of(const njson& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected an array of 3 numbers");
    return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

}  // namespace

void validate_config(const PipelineConfig& config) {
    if (!(config.extraction.theta > 0.0 && config.extraction.theta < 1.0)) {
        throw ConfigError("extraction.theta must be in (0, 1)");
    }
    if (!(config.correction.mu > 0.0 && config.correction.mu < 1.0)) {
        throw ConfigError("correction.mu must be in (0, 1)");
    }
    if (!(config.correction.adjacency_fraction > 0.0 && config.correction.adjacency_fraction < 1.0)) {
        throw ConfigError("correction.adjacency_fraction must be in (0, 1)");
    }
    if (config.training.iterations < 0) throw ConfigError("training.iterations must be >= 0");
    if (config.training.learning_rate < 0.0) throw ConfigError("training.learning_rate must be >= 0");
    if (config.training.eps_div <= 0.0) throw ConfigError("training.eps_div must be > 0");
    if (config.training.stability_window_fraction <= 0.0 || config.training.stability_window_fraction > 1.0) {
        throw ConfigError("training.stability_window_fraction must be in (0, 1]");
    }
    if (config.clustering.birch_threshold < 0.0 || config.clustering.follow_threshold < 0.0 ||
        config.clustering.split_threshold < 0.0 || config.clustering.w_xyz < 0.0) {
        throw ConfigError("clustering thresholds must be >= 0 (0 = auto)");
    }
    if (config.clustering.birch_branching < 2) throw ConfigError("clustering.birch_branching must be >= 2");
    if (config.clustering.stability_epsilon < 0.0) throw ConfigError("clustering.stability_epsilon must be >= 0 (0 = auto)");
    if (config.association.radius_px <= 0.0) throw ConfigError("association.radius_px must be > 0");
    if (config.association.iou_min < 0.0 || config.association.iou_min > 1.0) {
        throw ConfigError("association.iou_min must be in [0, 1]");
    }
    if (config.grounding_mode != "deterministic" && config.grounding_mode != "llm") {
        throw ConfigError("grounding mode must be 'deterministic' or 'llm'");
    }
    if (config.grounding_mode == "llm" && config.llm.url.empty()) {
        throw ConfigError("grounding mode 'llm' requires an endpoint url");
    }
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    njson j;
    try {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open " + path.string());
        in >> j;
    } catch (const njson::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }

    PipelineConfig config;
    try {
        reject_unknown(j, {"extraction", "training", "clustering", "association", "correction", "grounding",
                           "threads"},
                       "config");
        if (j.contains("extraction")) {
            const auto& je = j.at("extraction");
            reject_unknown(je, {"theta"}, "extraction");
            config.extraction.theta = je.value("theta", config.extraction.theta);
        }
        if (j.contains("training")) {
            const auto& jt = j.at("training");
            reject_unknown(jt,
                           {"learning_rate", "iterations", "lambda_s", "lambda_c", "eps_div", "radius_px",
                            "stability_window_fraction", "feature_dim", "init_seed"},
                           "training");
            config.training.learning_rate = jt.value("learning_rate", config.training.learning_rate);
            config.training.iterations = jt.value("iterations", config.training.iterations);
            config.training.lambda_s = jt.value("lambda_s", config.training.lambda_s);
            config.training.lambda_c = jt.value("lambda_c", config.training.lambda_c);
            config.training.eps_div = jt.value("eps_div", config.training.eps_div);
            config.training.radius_px = jt.value("radius_px", config.training.radius_px);
            config.training.stability_window_fraction =
                jt.value("stability_window_fraction", config.training.stability_window_fraction);
            config.training.feature_dim = jt.value("feature_dim", config.training.feature_dim);
            config.training.init_seed = jt.value("init_seed", config.training.init_seed);
        }
        if (j.contains("clustering")) {
            const auto& jc = j.at("clustering");
            reject_unknown(jc,
                           {"sampler", "control_count", "fpfh_neighbors", "birch_branching", "birch_threshold",
                            "follow_threshold", "split_threshold", "w_xyz", "stability_epsilon"},
                           "clustering");
            if (jc.contains("sampler")) {
                const std::string s = jc.at("sampler").get<std::string>();
                if (s == "fps") config.clustering.sampler = SamplerKind::kFps;
                else if (s == "fpfh") config.clustering.sampler = SamplerKind::kFpfh;
                else throw ConfigError("clustering.sampler must be 'fps' or 'fpfh'");
            }
            config.clustering.control_count = jc.value("control_count", config.clustering.control_count);
            config.clustering.fpfh_neighbors = jc.value("fpfh_neighbors", config.clustering.fpfh_neighbors);
            config.clustering.birch_branching = jc.value("birch_branching", config.clustering.birch_branching);
            config.clustering.birch_threshold = jc.value("birch_threshold", config.clustering.birch_threshold);
            config.clustering.follow_threshold = jc.value("follow_threshold", config.clustering.follow_threshold);
            config.clustering.split_threshold = jc.value("split_threshold", config.clustering.split_threshold);
            config.clustering.w_xyz = jc.value("w_xyz", config.clustering.w_xyz);
            config.clustering.stability_epsilon = jc.value("stability_epsilon", config.clustering.stability_epsilon);
        }
        if (j.contains("association")) {
            const auto& ja = j.at("association");
            reject_unknown(ja, {"radius_px", "iou_min"}, "association");
            config.association.radius_px = ja.value("radius_px", config.association.radius_px);
            config.association.iou_min = ja.value("iou_min", config.association.iou_min);
        }
        if (j.contains("correction")) {
            const auto& jc = j.at("correction");
            reject_unknown(jc,
                           {"mu", "front_axis", "adjacency_fraction", "contact_predicates",
                            "adjacency_predicates", "directional_predicates", "enable"},
                           "correction");
            config.correction.mu = jc.value("mu", config.correction.mu);
            if (jc.contains("front_axis")) {
                config.correction.front_axis = vec3_of(jc.at("front_axis"), "correction.front_axis");
            }
            config.correction.adjacency_fraction =
                jc.value("adjacency_fraction", config.correction.adjacency_fraction);
            if (jc.contains("contact_predicates")) {
                config.correction.contact_predicates.clear();
                for (const auto& p : jc.at("contact_predicates")) {
                    config.correction.contact_predicates.insert(p.get<std::string>());
                }
            }
            if (jc.contains("adjacency_predicates")) {
                config.correction.adjacency_predicates.clear();
                for (const auto& p : jc.at("adjacency_predicates")) {
                    config.correction.adjacency_predicates.insert(p.get<std::string>());
                }
            }
            if (jc.contains("directional_predicates")) {
                for (const auto& [pred, axis] : jc.at("directional_predicates").items()) {
                    config.correction.directional_predicates[pred] =
                        vec3_of(axis, "correction.directional_predicates." + pred);
                }
            }
            config.correction.enable_correction = jc.value("enable", config.correction.enable_correction);
        }
        if (j.contains("grounding")) {
            const auto& jg = j.at("grounding");
            reject_unknown(jg, {"mode", "llm_url", "model", "timeout_ms", "retries"}, "grounding");
            config.grounding_mode = jg.value("mode", config.grounding_mode);
            config.llm.url = jg.value("llm_url", config.llm.url);
            config.llm.model = jg.value("model", config.llm.model);
            config.llm.timeout_ms = jg.value("timeout_ms", config.llm.timeout_ms);
            config.llm.retries = jg.value("retries", config.llm.retries);
        }
        config.threads = j.value("threads", config.threads);
    } catch (const njson::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }

    validate_config(config);
    return config;
}

void apply_env_overrides(PipelineConfig& config) {
    if (const char* v = std::getenv("GSGRAPH_THREADS")) config.threads = static_cast<unsigned>(std::atoi(v));
    if (const char* v = std::getenv("GSGRAPH_LLM_URL")) config.llm.url = v;
    if (const char* v = std::getenv("GSGRAPH_LLM_MODEL")) config.llm.model = v;
    if (const char* v = std::getenv("GSGRAPH_LLM_TIMEOUT_MS")) config.llm.timeout_ms = std::atoi(v);
}

}  // namespace gsgraph
