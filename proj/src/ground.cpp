#include "gsgraph/ground.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <httplib.h>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "gsgraph/errors.hpp"
#include "gsgraph/graph.hpp"
#include "gsgraph/util.hpp"

namespace gsgraph {

namespace {

std::string replace_all(std::string text, const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
        text.replace(pos, key.size(), value);
        pos += value.size();
    }
    return text;
}

}  // namespace

std::vector<std::string> extract_categories_deterministic(const std::string& query, const SceneGraph& graph) {
    const std::string q = to_lower(query);
    std::set<std::string> vocabulary;
    for (const auto& n : graph.nodes) {
        if (!n.category.empty()) vocabulary.insert(n.category);
    }
    std::vector<std::string> out;
    for (const auto& cat : vocabulary) {
        if (q.find(to_lower(cat)) != std::string::npos) out.push_back(cat);
    }
    return out;
}

SceneGraph filter_categories(const SceneGraph& graph, const std::vector<std::string>& categories,
                             GroundingTrace* trace) {
    std::set<std::string> wanted;
    for (const auto& c : categories) wanted.insert(to_lower(c));

    SceneGraph sub;
    for (const auto& n : graph.nodes) {
        if (wanted.count(to_lower(n.category))) sub.nodes.push_back(n);
    }
    if (sub.nodes.empty()) {
        // No category matched: pass the full graph through with a warning.
        if (trace) {
            trace->notes.push_back("no category matched; using the full graph");
            trace->subgraph_nodes = static_cast<int>(graph.nodes.size());
            trace->subgraph_edges = static_cast<int>(graph.edges.size());
        }
        return graph;
    }
    for (const auto& e : graph.edges) {
        if (sub.has_node(e.subject) && sub.has_node(e.object)) sub.edges.push_back(e);
    }
    if (trace) {
        trace->subgraph_nodes = static_cast<int>(sub.nodes.size());
        trace->subgraph_edges = static_cast<int>(sub.edges.size());
    }
    return sub;
}

GroundingResult resolve_deterministic(const QueryConstraints& constraints, const SceneGraph& graph) {
    GroundingResult result;
    result.trace.categories.push_back(constraints.target_category);
    for (const auto& [pred, cat] : constraints.relations) {
        (void)pred;
        result.trace.categories.push_back(cat);
    }
    if (constraints.superlative) result.trace.categories.push_back(constraints.superlative->anchor_category);

    std::vector<const GraphNode*> candidates;
    for (const auto& n : graph.nodes) {
        if (to_lower(n.category) == to_lower(constraints.target_category)) candidates.push_back(&n);
    }
    if (candidates.empty()) {
        throw NoCandidateError("resolve_deterministic: no node of category '" + constraints.target_category + "'");
    }

    auto satisfied = [&](const GraphNode* node) {
        int score = 0;
        for (const auto& [pred, cat] : constraints.relations) {
            bool hit = false;
            for (const auto& e : graph.edges) {
                if (e.verdict != Verdict::kKept) continue;
                if (e.subject != node->cluster_id || e.predicate != pred) continue;
                const GraphNode* other = graph.find_node(e.object);
                if (other && to_lower(other->category) == to_lower(cat)) {
                    hit = true;
                    break;
                }
            }
            if (hit) ++score;
        }
        return score;
    };

    std::vector<std::pair<int, const GraphNode*>> scored;
    scored.reserve(candidates.size());
    for (const GraphNode* n : candidates) scored.emplace_back(satisfied(n), n);
    for (const auto& [score, node] : scored) {
        result.trace.notes.push_back("candidate " + std::to_string(node->cluster_id) + " satisfies " +
                                     std::to_string(score) + "/" + std::to_string(constraints.relations.size()));
    }

    std::map<int, double> anchor_distance;
    if (constraints.superlative) {
        const GraphNode* anchor = nullptr;
        for (const auto& n : graph.nodes) {
            if (to_lower(n.category) == to_lower(constraints.superlative->anchor_category) &&
                (anchor == nullptr || n.cluster_id < anchor->cluster_id)) {
                anchor = &n;
            }
        }
        if (anchor == nullptr) {
            result.trace.notes.push_back("superlative anchor category absent; ignoring superlative");
        } else {
            for (const GraphNode* n : candidates) {
                anchor_distance[n->cluster_id] = (n->centroid - anchor->centroid).norm();
            }
        }
    }
    const bool use_distance = !anchor_distance.empty();
    const bool farthest = constraints.superlative &&
                          constraints.superlative->kind == Superlative::Kind::kFarthest;

    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        if (use_distance) {
            const double da = anchor_distance.at(a.second->cluster_id);
            const double db = anchor_distance.at(b.second->cluster_id);
            if (da != db) return farthest ? da > db : da < db;
        }
        return a.second->cluster_id < b.second->cluster_id;
    });

    for (const auto& [score, node] : scored) {
        (void)score;
        result.ranked.push_back(node->cluster_id);
    }
    result.trace.subgraph_nodes = static_cast<int>(graph.nodes.size());
    result.trace.subgraph_edges = static_cast<int>(graph.edges.size());
    return result;
}

std::vector<std::string> default_predicate_lexicon() {
    return {"in front of", "behind", "left of", "right of", "above", "below",
            "next to", "near", "beside", "on", "in", "under", "made of"};
}

std::optional<QueryConstraints> parse_query_text(const std::string& query, const SceneGraph& graph,
                                                 const std::vector<std::string>& predicate_lexicon) {
    const std::string q = to_lower(query);

    std::vector<std::string> vocabulary;
    {
        std::set<std::string> seen;
        for (const auto& n : graph.nodes) {
            if (!n.category.empty()) seen.insert(to_lower(n.category));
        }
        vocabulary.assign(seen.begin(), seen.end());
        std::sort(vocabulary.begin(), vocabulary.end(),
                  [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
    }

    struct Hit {
        std::size_t pos;
        std::string text;
    };
    std::vector<Hit> cats;
    {
        std::vector<char> taken(q.size(), 0);
        for (const auto& cat : vocabulary) {
            std::size_t pos = 0;
            while ((pos = q.find(cat, pos)) != std::string::npos) {
                bool free = true;
                for (std::size_t i = pos; i < pos + cat.size(); ++i) free = free && !taken[i];
                if (free) {
                    cats.push_back({pos, cat});
                    for (std::size_t i = pos; i < pos + cat.size(); ++i) taken[i] = 1;
                }
                pos += cat.size();
            }
        }
        std::sort(cats.begin(), cats.end(), [](const Hit& a, const Hit& b) { return a.pos < b.pos; });
    }
    if (cats.empty()) return std::nullopt;

    std::vector<std::string> preds = predicate_lexicon;
    std::sort(preds.begin(), preds.end(),
              [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
    std::vector<Hit> pred_hits;
    {
        std::vector<char> taken(q.size(), 0);
        for (const auto& p : preds) {
            const std::string needle = " " + p + " ";
            std::size_t pos = 0;
            while ((pos = q.find(needle, pos)) != std::string::npos) {
                bool free = true;
                for (std::size_t i = pos + 1; i < pos + 1 + p.size(); ++i) free = free && !taken[i];
                if (free) {
                    pred_hits.push_back({pos + 1, p});
                    for (std::size_t i = pos + 1; i < pos + 1 + p.size(); ++i) taken[i] = 1;
                }
                pos += 1;
            }
        }
        std::sort(pred_hits.begin(), pred_hits.end(), [](const Hit& a, const Hit& b) { return a.pos < b.pos; });
    }

    QueryConstraints out;
    out.target_category = cats.front().text;
    for (const auto& ph : pred_hits) {
        for (const auto& ch : cats) {
            if (ch.pos > ph.pos) {
                out.relations.emplace_back(ph.text, ch.text);
                break;
            }
        }
    }

    for (const char* kw : {"nearest", "closest"}) {
        if (q.find(kw) != std::string::npos && cats.size() >= 2) {
            out.superlative = Superlative{Superlative::Kind::kNearest, cats.back().text};
        }
    }
    for (const char* kw : {"farthest", "furthest"}) {
        if (q.find(kw) != std::string::npos && cats.size() >= 2) {
            out.superlative = Superlative{Superlative::Kind::kFarthest, cats.back().text};
        }
    }
    return out;
}

// ---- LLM client ----

std::string ScriptedTransport::complete(const std::string& prompt) {
    prompts_.push_back(prompt);
    if (next_ >= responses_.size()) throw EndpointError("scripted transport: no responses left");
    return responses_[next_++];
}

PromptTemplates builtin_prompts() {
    PromptTemplates p;
    p.stage1 =
        "List every object category mentioned or implied by the following scene query. "
        "Reply with a JSON array of lowercase category names and nothing else.\n"
        "Query: {query}\n";
    p.stage2 =
        "You are given a 3D scene graph. Each node is a Gaussian cluster with an id, a category and "
        "attribute descriptions. Each relation line reads <subject id|predicate|object id>.\n"
        "{graph}\n"
        "Question: {query}\n"
        "Reply with the single Gaussian cluster id of the best matching object and nothing else.\n";
    p.retry =
        "The id {bad_id} is not a valid Gaussian cluster id in this scene. "
        "Valid ids are: {valid_ids}. Reply with one valid cluster id and nothing else.\n";
    return p;
}

PromptTemplates load_prompts(const std::string& assets_dir) {
    PromptTemplates p = builtin_prompts();
    auto try_load = [&](const std::string& name, std::string& dst) {
        std::ifstream in(assets_dir + "/" + name);
        if (!in) return;
        std::ostringstream ss;
        ss << in.rdbuf();
        if (!ss.str().empty()) dst = ss.str();
    };
    try_load("prompt1.txt", p.stage1);
    try_load("prompt2.txt", p.stage2);
    try_load("retry.txt", p.retry);
    return p;
}

std::string serialize_graph_for_llm(const SceneGraph& graph) {
    std::ostringstream ss;
    for (const auto& n : graph.nodes) {
        ss << "Gaussian_id: " << n.cluster_id << " | category: " << n.category << " | attributes: ";
        for (std::size_t i = 0; i < n.attributes.size(); ++i) {
            if (i) ss << "; ";
            ss << n.attributes[i];
        }
        ss << "\n";
    }
    for (const auto& e : graph.edges) {
        if (e.verdict != Verdict::kKept) continue;
        ss << "relation: <" << e.subject << "|" << e.predicate << "|" << e.object << ">\n";
    }
    return ss.str();
}

namespace {

std::vector<std::string> parse_category_response(const std::string& response) {
    std::vector<std::string> out;
    try {
        const auto j = nlohmann::json::parse(response);
        if (j.is_array()) {
            for (const auto& v : j) {
                if (v.is_string()) out.push_back(v.get<std::string>());
            }
            return out;
        }
    } catch (const nlohmann::json::exception&) {
        // fall through to the loose parse
    }
    std::string token;
    auto flush = [&] {
        while (!token.empty() && std::isspace(static_cast<unsigned char>(token.front()))) token.erase(0, 1);
        while (!token.empty() && std::isspace(static_cast<unsigned char>(token.back()))) token.pop_back();
        if (!token.empty()) out.push_back(token);
        token.clear();
    };
    for (char c : response) {
        if (c == ',' || c == '\n') {
            flush();
        } else if (c != '[' && c != ']' && c != '"' && c != '\'') {
            token += c;
        }
    }
    flush();
    return out;
}

std::optional<int> first_integer(const std::string& text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(text[i]))) {
            std::size_t end = i;
            while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
            try {
                return std::stoi(text.substr(i, end - i));
            } catch (const std::exception&) {
                return std::nullopt;
            }
        }
    }
    return std::nullopt;
}

}  // namespace

namespace {

class HttpTransport : public LlmTransport {
public:
    explicit HttpTransport(LlmConfig config) : config_(std::move(config)) {
        const std::string& url = config_.url;
        std::string rest = url;
        if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
        else if (rest.rfind("https://", 0) == 0) throw ConfigError("https endpoints are not supported");
        const std::size_t slash = rest.find('/');
        host_ = slash == std::string::npos ? rest : rest.substr(0, slash);
        path_ = slash == std::string::npos ? "/v1/chat/completions" : rest.substr(slash);
        port_ = 80;
        const std::size_t colon = host_.find(':');
        if (colon != std::string::npos) {
            port_ = std::stoi(host_.substr(colon + 1));
            host_ = host_.substr(0, colon);
        }
        if (host_.empty()) throw ConfigError("llm url has no host: " + url);
    }

    std::string complete(const std::string& prompt) override;

private:
    LlmConfig config_;
    std::string host_;
    std::string path_;
    int port_ = 80;
};

}  // namespace

std::unique_ptr<LlmTransport> make_http_transport(const LlmConfig& config) {
    return std::make_unique<HttpTransport>(config);
}

GroundingResult resolve_llm(const std::string& query, const SceneGraph& graph, LlmTransport& transport,
                            const PromptTemplates& prompts, int retries) {
    GroundingResult result;

    const std::string p1 = replace_all(prompts.stage1, "{query}", query);
    const std::string resp1 = transport.complete(p1);
    result.trace.categories = parse_category_response(resp1);

    const SceneGraph sub = filter_categories(graph, result.trace.categories, &result.trace);

    std::string p2 = replace_all(prompts.stage2, "{graph}", serialize_graph_for_llm(sub));
    p2 = replace_all(p2, "{query}", query);

    std::string valid_ids;
    for (const auto& n : graph.nodes) {
        if (!valid_ids.empty()) valid_ids += ", ";
        valid_ids += std::to_string(n.cluster_id);
    }

    std::string prompt = p2;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        const std::string resp = transport.complete(prompt);
        const std::optional<int> id = first_integer(resp);
        if (id && graph.has_node(*id)) {
            result.ranked = {*id};
            result.trace.notes.push_back("answered on attempt " + std::to_string(attempt + 1));
            return result;
        }
        std::string bad = resp.substr(0, 64);
        std::string r = replace_all(prompts.retry, "{bad_id}", id ? std::to_string(*id) : bad);
        prompt = replace_all(r, "{valid_ids}", valid_ids);
    }
    throw InvalidClusterIdError("resolve_llm: no valid cluster id after " + std::to_string(retries + 1) +
                                " attempts");
}

std::string HttpTransport::complete(const std::string& prompt) {
    httplib::Client client(host_, port_);
    client.set_connection_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);

    nlohmann::json body;
    body["model"] = config_.model;
    body["temperature"] = 0.0;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});

    auto res = client.Post(path_, body.dump(), "application/json");
    if (!res) throw EndpointError("llm endpoint unreachable or timed out: " + host_ + ":" + std::to_string(port_));
    if (res->status != 200) {
        throw EndpointError("llm endpoint returned status " + std::to_string(res->status));
    }
    try {
        const auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw MalformedResponseError(std::string("llm response: ") + e.what());
    }
}

}  // namespace gsgraph
