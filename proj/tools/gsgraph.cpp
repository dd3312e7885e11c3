#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "gsgraph/config.hpp"
#include "gsgraph/errors.hpp"
#include "gsgraph/field.hpp"
#include "gsgraph/graph.hpp"
#include "gsgraph/ground.hpp"
#include "gsgraph/ingest.hpp"
#include "gsgraph/metrics.hpp"
#include "gsgraph/synth.hpp"
#include "gsgraph/util.hpp"

namespace fs = std::filesystem;
using namespace gsgraph;

namespace {

constexpr const char* kVersion = "0.2.0";

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return 2;
    if (dynamic_cast<const ValidationError*>(&e)) return 3;
    if (dynamic_cast<const ConfigError*>(&e)) return 4;
    if (dynamic_cast<const DivergenceError*>(&e)) return 5;
    if (dynamic_cast<const NoCandidateError*>(&e)) return 6;
    if (dynamic_cast<const CategoryAbsentError*>(&e)) return 6;
    if (dynamic_cast<const EndpointError*>(&e)) return 7;
    if (dynamic_cast<const MalformedResponseError*>(&e)) return 7;
    if (dynamic_cast<const InvalidClusterIdError*>(&e)) return 7;
    if (dynamic_cast<const SpecError*>(&e)) return 8;
    return 1;
}

const char* error_name(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
    if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
    if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
    if (dynamic_cast<const DivergenceError*>(&e)) return "DivergenceError";
    if (dynamic_cast<const NoCandidateError*>(&e)) return "NoCandidateError";
    if (dynamic_cast<const CategoryAbsentError*>(&e)) return "CategoryAbsentError";
    if (dynamic_cast<const EndpointError*>(&e)) return "EndpointError";
    if (dynamic_cast<const MalformedResponseError*>(&e)) return "MalformedResponseError";
    if (dynamic_cast<const InvalidClusterIdError*>(&e)) return "InvalidClusterIdError";
    if (dynamic_cast<const SpecError*>(&e)) return "SpecError";
    return "Error";
}

struct CommonOpts {
    std::string config_path;
    unsigned threads = 0;
    bool threads_set = false;
};

PipelineConfig resolve_config(const CommonOpts& opts) {
    PipelineConfig config;
    if (!opts.config_path.empty()) config = load_pipeline_config(opts.config_path);
    apply_env_overrides(config);
    if (opts.threads_set) config.threads = opts.threads;
    validate_config(config);
    set_thread_count(config.threads);
    return config;
}

std::vector<int> stable_indices(const ScenePoints& scene, double epsilon) {
    if (scene.stability.empty()) return {};  // empty = use every point
    return stable_by_scores(scene.stability, epsilon);
}

void write_loss_csv(const fs::path& path, const std::vector<LossSample>& curve) {
    std::ostringstream ss;
    ss << "iteration,smoothing,contrastive,total\n";
    for (const auto& s : curve) {
        ss << s.iteration << "," << s.smoothing << "," << s.contrastive << "," << s.total << "\n";
    }
    atomic_write_file(path, ss.str());
}

int cmd_ingest(const CommonOpts& opts, const std::string& scene_path, const std::string& views_dir, bool check) {
    resolve_config(opts);
    const ScenePoints scene = load_scene(scene_path);
    const std::vector<ViewBundle> bundles = load_views(views_dir);
    if (check) {
        std::cout << "scene: " << scene.size() << " points, feature dim " << scene.feature_dim() << "\n";
        std::cout << "views: " << bundles.size() << "\n";
        for (const auto& b : bundles) {
            std::cout << "  view " << b.view_id << ": " << b.mask_features.size() << " masks, "
                      << b.detections.size() << " detections, " << b.relation_candidates.size()
                      << " relation candidates\n";
        }
    }
    return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& scene_path, const std::string& views_dir, int iters,
              const std::string& out_path, const std::string& csv_path) {
    PipelineConfig config = resolve_config(opts);
    if (iters > 0) config.training.iterations = iters;
    ScenePoints scene = load_scene(scene_path);
    const std::vector<ViewBundle> bundles = load_views(views_dir);
    TrainResult result = train_instance_features(scene, bundles, config.training);
    const auto observed = observed_points(result.scene, bundles, config.training.radius_px);
    const int propagated = propagate_unobserved_features(result.scene, observed);
    save_scene(out_path, result.scene);
    if (!csv_path.empty()) write_loss_csv(csv_path, result.curve);
    std::cout << "trained " << result.scene.size() << " points for " << config.training.iterations
              << " iterations; final loss " << (result.curve.empty() ? 0.0 : result.curve.back().total)
              << "; features propagated to " << propagated << " unobserved points\n";
    return 0;
}

int cmd_cluster(const CommonOpts& opts, const std::string& scene_path, const std::string& out_path) {
    PipelineConfig config = resolve_config(opts);
    ScenePoints scene = load_scene(scene_path);
    const std::vector<int> stable = stable_indices(scene, config.clustering.stability_epsilon);
    const ClusterOutcome outcome = cluster_scene(scene, config.clustering, stable);
    save_labels(out_path, scene.labels);
    std::cout << "clusters: " << outcome.clusters.k << " (control points: " << outcome.control.indices.size()
              << ", birch threshold: " << outcome.resolved.birch_threshold << ")\n";
    return 0;
}

int cmd_build(const CommonOpts& opts, const std::string& scene_path, const std::string& views_dir,
              const std::string& labels_path, const std::string& embeddings_path, const std::string& out_path) {
    PipelineConfig config = resolve_config(opts);
    ScenePoints scene = load_scene(scene_path);
    scene.labels = load_labels(labels_path);
    if (scene.labels.size() != scene.size()) {
        throw ValidationError("labels file length does not match the scene point count");
    }
    const std::vector<ViewBundle> bundles = load_views(views_dir);

    std::unique_ptr<TextEmbedder> embedder;
    if (!embeddings_path.empty()) {
        embedder = std::make_unique<TableEmbedder>(load_embeddings_json(embeddings_path));
    }

    BuildParams params{config.association, config.correction};
    BuildLog log;
    const SceneGraph graph = build_graph(scene, bundles, params, embedder.get(), &log);
    save_graph_json(out_path, graph);
    int kept = 0;
    for (const auto& e : graph.edges) kept += e.verdict == Verdict::kKept ? 1 : 0;
    std::cout << "graph: " << graph.nodes.size() << " nodes, " << graph.edges.size() << " edges (" << kept
              << " kept)";
    if (!log.unmatched_clusters.empty()) std::cout << "; unmatched clusters: " << log.unmatched_clusters.size();
    std::cout << "\n";
    return 0;
}

int cmd_query(const CommonOpts& opts, const std::string& graph_path, const std::string& text,
              const std::string& mode_flag, const std::string& llm_url) {
    PipelineConfig config = resolve_config(opts);
    if (!mode_flag.empty()) config.grounding_mode = mode_flag;
    if (!llm_url.empty()) config.llm.url = llm_url;
    const SceneGraph graph = load_graph_json(graph_path);

    GroundingResult result;
    if (config.grounding_mode == "llm") {
        if (config.llm.url.empty()) throw ConfigError("llm mode requires --llm-url or GSGRAPH_LLM_URL");
        auto transport = make_http_transport(config.llm);
        result = resolve_llm(text, graph, *transport, builtin_prompts(), config.llm.retries);
    } else {
        const std::vector<std::string> categories = extract_categories_deterministic(text, graph);
        GroundingTrace trace;
        const SceneGraph sub = filter_categories(graph, categories, &trace);
        const auto constraints = parse_query_text(text, sub, default_predicate_lexicon());
        if (!constraints) throw NoCandidateError("query names no category present in the graph");
        result = resolve_deterministic(*constraints, sub);
        result.trace.notes.insert(result.trace.notes.begin(), trace.notes.begin(), trace.notes.end());
    }

    nlohmann::ordered_json j;
    j["ranked"] = result.ranked;
    j["trace"]["categories"] = result.trace.categories;
    j["trace"]["subgraph_nodes"] = result.trace.subgraph_nodes;
    j["trace"]["subgraph_edges"] = result.trace.subgraph_edges;
    j["trace"]["notes"] = result.trace.notes;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_synth(const CommonOpts& opts, const std::string& spec_path, int objects, int points, unsigned seed,
              const std::string& out_dir) {
    resolve_config(opts);
    SynthSpec spec;
    if (!spec_path.empty()) {
        spec = load_synth_spec(spec_path);
    } else {
        spec = default_scene_spec(objects, points);
    }
    const SynthOutput output = generate(spec, seed);
    save_synth_output(out_dir, output);
    std::cout << "generated " << output.scene.size() << " points, " << output.bundles.size() << " views, "
              << output.gt.true_relations.size() << " true / " << output.gt.planted_false.size()
              << " planted-false relations, " << output.gt.queries.size() << " queries -> " << out_dir << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& pred_labels, const std::string& gt_dir,
             const std::string& graph_path, const std::string& out_path) {
    resolve_config(opts);
    const GroundTruth gt = load_ground_truth(gt_dir);
    EvalReport report;

    std::vector<int> predicted;
    if (!pred_labels.empty()) {
        predicted = load_labels(pred_labels);
        report.segmentation = evaluate_segmentation(predicted, gt.point_labels);
    }

    if (!graph_path.empty()) {
        const SceneGraph graph = load_graph_json(graph_path);
        if (predicted.empty()) throw ConfigError("relation eval needs --pred labels to map clusters to objects");
        const std::map<int, int> mapping = cluster_to_object(predicted, gt.point_labels);
        std::vector<ObjectRelation> truth, planted;
        for (const auto& r : gt.true_relations) truth.push_back({r.subject, r.predicate, r.object});
        for (const auto& p : gt.planted_false) {
            planted.push_back({p.relation.subject, p.relation.predicate, p.relation.object});
        }
        report.relations = evaluate_relations(graph, mapping, truth, planted);

        if (!gt.queries.empty()) {
            std::map<int, int> object_cluster;  // invert the majority map
            for (const auto& [cluster, object] : mapping) {
                if (!object_cluster.count(object)) object_cluster[object] = cluster;
            }
            std::vector<std::vector<int>> ranked;
            std::vector<int> answers;
            for (const auto& q : gt.queries) {
                if (!object_cluster.count(q.answer_object)) continue;
                try {
                    ranked.push_back(resolve_deterministic(q.constraints, graph).ranked);
                } catch (const NoCandidateError&) {
                    ranked.push_back({});
                }
                answers.push_back(object_cluster.at(q.answer_object));
            }
            report.grounding = evaluate_grounding(ranked, answers);
        }
    }

    const std::string json = eval_report_to_json(report);
    if (out_path.empty()) {
        std::cout << json;
    } else {
        atomic_write_file(out_path, json);
    }
    return 0;
}

int cmd_all(const CommonOpts& opts, const std::string& dir, const std::string& out_path) {
    PipelineConfig config = resolve_config(opts);
    const fs::path base(dir);

    ScenePoints scene = load_scene(base / "scene.bin");
    const std::vector<ViewBundle> bundles = load_views(base / "views");

    TrainResult trained = train_instance_features(scene, bundles, config.training);
    propagate_unobserved_features(trained.scene,
                                  observed_points(trained.scene, bundles, config.training.radius_px));
    save_scene(base / "trained.bin", trained.scene);

    const std::vector<int> stable = stable_by_scores(trained.scene.stability, config.clustering.stability_epsilon);
    ScenePoints work = trained.scene;
    cluster_scene(work, config.clustering, stable);
    save_labels(base / "labels.bin", work.labels);

    std::unique_ptr<TextEmbedder> embedder;
    if (fs::exists(base / "embeddings.json")) {
        embedder = std::make_unique<TableEmbedder>(load_embeddings_json(base / "embeddings.json"));
    }
    BuildParams params{config.association, config.correction};
    const SceneGraph graph = build_graph(work, bundles, params, embedder.get(), nullptr);
    const fs::path out = out_path.empty() ? base / "graph.json" : fs::path(out_path);
    save_graph_json(out, graph);
    std::cout << "pipeline complete: " << graph.nodes.size() << " nodes, " << graph.edges.size() << " edges -> "
              << out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gsgraph: open-vocabulary 3D scene graphs from point scenes and 2D extraction bundles"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CommonOpts common;
    app.add_option("--config", common.config_path, "pipeline config JSON")->envname("GSGRAPH_CONFIG");
    auto* threads_opt = app.add_option("--threads", common.threads, "worker threads (0 = logical cores)");

    std::string scene_path, views_dir, labels_path, out_path, csv_path, embeddings_path;
    std::string graph_path, query_text, mode_flag, llm_url, spec_path, gt_dir, pred_labels;
    int iters = 0, objects = 5, points = 500;
    unsigned seed = 0;
    bool check = true;

    auto* ingest = app.add_subcommand("ingest", "load and validate a scene and its view bundles");
    ingest->add_option("--scene", scene_path)->required();
    ingest->add_option("--views", views_dir)->required();
    ingest->add_flag("--check,!--no-check", check, "print a validation summary");

    auto* train = app.add_subcommand("train", "optimize per-point instance features");
    train->add_option("--scene", scene_path)->required();
    train->add_option("--views", views_dir)->required();
    train->add_option("--iters", iters, "override training.iterations");
    train->add_option("--out", out_path)->required();
    train->add_option("--loss-csv", csv_path, "write the loss curve");

    auto* cluster = app.add_subcommand("cluster", "control-follow clustering of a trained scene");
    cluster->add_option("--scene", scene_path)->required();
    cluster->add_option("--params", common.config_path, "pipeline config JSON (same as --config)");
    cluster->add_option("--out", out_path)->required();

    auto* build = app.add_subcommand("build", "associate clusters with 2D evidence and build the graph");
    build->add_option("--scene", scene_path)->required();
    build->add_option("--views", views_dir)->required();
    build->add_option("--labels", labels_path)->required();
    build->add_option("--embeddings", embeddings_path, "category embedding table for verification");
    build->add_option("--out", out_path)->required();

    auto* query = app.add_subcommand("query", "ground a natural-language query");
    query->add_option("--graph", graph_path)->required();
    query->add_option("--scene", scene_path, "scene file (optional, kept for scripts)");
    query->add_option("--text", query_text)->required();
    query->add_option("--mode", mode_flag, "deterministic | llm");
    query->add_option("--llm-url", llm_url);

    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark scene");
    synth->add_option("--spec", spec_path, "scene spec JSON (omit for the default grid)");
    synth->add_option("--objects", objects, "object count for the default grid");
    synth->add_option("--points", points, "points per object for the default grid");
    synth->add_option("--seed", seed)->required();
    synth->add_option("--out", out_path)->required();

    auto* eval = app.add_subcommand("eval", "evaluate labels / graph / grounding against ground truth");
    eval->add_option("--pred", pred_labels, "predicted labels file");
    eval->add_option("--gt", gt_dir, "synth output directory with gt.json")->required();
    eval->add_option("--graph", graph_path, "graph.json for relation and grounding metrics");
    eval->add_option("--out", out_path, "report path (stdout when omitted)");

    auto* all = app.add_subcommand("all", "train + cluster + build on a synth output directory");
    all->add_option("--dir", gt_dir)->required();
    all->add_option("--out", out_path, "graph path (default <dir>/graph.json)");

    try {
        app.parse(argc, argv);
        common.threads_set = threads_opt->count() > 0;
        if (ingest->parsed()) return cmd_ingest(common, scene_path, views_dir, check);
        if (train->parsed()) return cmd_train(common, scene_path, views_dir, iters, out_path, csv_path);
        if (cluster->parsed()) return cmd_cluster(common, scene_path, out_path);
        if (build->parsed()) return cmd_build(common, scene_path, views_dir, labels_path, embeddings_path, out_path);
        if (query->parsed()) return cmd_query(common, graph_path, query_text, mode_flag, llm_url);
        if (synth->parsed()) return cmd_synth(common, spec_path, objects, points, seed, out_path);
        if (eval->parsed()) return cmd_eval(common, pred_labels, gt_dir, graph_path, out_path);
        if (all->parsed()) return cmd_all(common, gt_dir, out_path);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        nlohmann::ordered_json err;
        err["error"] = error_name(e);
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return exit_code_for(e);
    }
    return 0;
}
