#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gsgraph/types.hpp"

namespace gsgraph {

/// Structured query: a target category, edge constraints against related
/// categories, and an optional nearest/farthest superlative.
struct Superlative {
    enum class Kind { kNearest, kFarthest };
    Kind kind = Kind::kNearest;
    std::string anchor_category;
};

struct QueryConstraints {
    std::string target_category;
    std::vector<std::pair<std::string, std::string>> relations;  // (predicate, related category)
    std::optional<Superlative> superlative;
};

struct GroundingTrace {
    std::vector<std::string> categories;  // extracted in stage one
    int subgraph_nodes = 0;
    int subgraph_edges = 0;
    std::vector<std::string> notes;
};

struct GroundingResult {
    std::vector<int> ranked;  // best first
    GroundingTrace trace;
};

/// Stage-one category extractor interface. The deterministic extractor
/// matches the graph's own category vocabulary as substrings of the query.
std::vector<std::string> extract_categories_deterministic(const std::string& query, const SceneGraph& graph);

/// Sub-graph restricted to the given categories (edges survive only when
/// both endpoints do). Empty category set or no hit falls back to the full
/// graph with a warning note.
SceneGraph filter_categories(const SceneGraph& graph, const std::vector<std::string>& categories,
                             GroundingTrace* trace = nullptr);

/// Deterministic constraint resolver: every target-category node scored by
/// the number of satisfied edge constraints (kept edges only), ranked by
/// score then cluster id; a superlative reorders the top tier by distance
/// to the nearest anchor-category node. Throws NoCandidateError when the
/// sub-graph has no node of the target category.
GroundingResult resolve_deterministic(const QueryConstraints& constraints, const SceneGraph& graph);

/// Parses free text into constraints against the graph's vocabulary and
/// predicate lexicon. Returns nothing when no target category is found.
std::optional<QueryConstraints> parse_query_text(const std::string& query, const SceneGraph& graph,
                                                 const std::vector<std::string>& predicate_lexicon);

std::vector<std::string> default_predicate_lexicon();

// ---- LLM-backed grounding ----

/// Transport for chat-style completions: prompt in, raw text out.
class LlmTransport {
public:
    virtual ~LlmTransport() = default;
    virtual std::string complete(const std::string& prompt) = 0;
};

/// Scripted transport for tests: pops pre-arranged responses in order.
class ScriptedTransport : public LlmTransport {
public:
    explicit ScriptedTransport(std::vector<std::string> responses) : responses_(std::move(responses)) {}
    std::string complete(const std::string& prompt) override;
    const std::vector<std::string>& prompts_seen() const { return prompts_; }

private:
    std::vector<std::string> responses_;
    std::vector<std::string> prompts_;
    std::size_t next_ = 0;
};

struct LlmConfig {
    std::string url;           // e.g. http://host:port/v1/chat/completions
    std::string model = "default";
    int timeout_ms = 30000;
    int retries = 1;           // extra attempts after an invalid id
};

/// HTTP JSON transport speaking the common chat-completions shape,
/// temperature 0.
std::unique_ptr<LlmTransport> make_http_transport(const LlmConfig& config);

/// Prompt templates for the two stages ({query}, {graph}, {bad_id},
/// {valid_ids} placeholders). Loaded from the assets directory when
/// present, otherwise the built-in text is used.
struct PromptTemplates {
    std::string stage1;
    std::string stage2;
    std::string retry;
};

PromptTemplates builtin_prompts();
PromptTemplates load_prompts(const std::string& assets_dir);

/// Serialization of the (sub-)graph handed to stage two: one line per node
/// (id, category, attributes) and one per kept edge.
std::string serialize_graph_for_llm(const SceneGraph& graph);

/// Two-stage flow: stage one extracts categories, stage two answers with a
/// cluster id over the filtered sub-graph. An invalid id triggers one
/// corrective retry per configured attempt, then InvalidClusterIdError.
GroundingResult resolve_llm(const std::string& query, const SceneGraph& graph, LlmTransport& transport,
                            const PromptTemplates& prompts, int retries = 1);

}  // namespace gsgraph
