#include "strata/snapshot.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "strata/error.hpp"

namespace strata {

using nlohmann::json;

namespace {

json forest_to_json(const RandomForest& f) {
    json trees = json::array();
    for (const auto& t : f.trees()) {
        json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
             counts = json::array();
        for (const auto& n : t.nodes()) {
            feature.push_back(n.feature);
            threshold.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            counts.push_back(n.class_counts);
        }
        trees.push_back({{"feature", feature},
                         {"threshold", threshold},
                         {"left", left},
                         {"right", right},
                         {"counts", counts}});
    }
    json j = {{"labels", f.label_names()}, {"n_features", f.n_features()}, {"trees", trees}};
    j["oob_accuracy"] = f.oob_accuracy ? json(*f.oob_accuracy) : json(nullptr);
    return j;
}

RandomForest forest_from_json(const json& j) {
    auto labels = j.at("labels").get<std::vector<std::string>>();
    auto n_features = j.at("n_features").get<std::size_t>();
    std::vector<DecisionTree> trees;
    for (const auto& t : j.at("trees")) {
        const auto& feature = t.at("feature");
        const auto& threshold = t.at("threshold");
        const auto& left = t.at("left");
        const auto& right = t.at("right");
        const auto& counts = t.at("counts");
        const std::size_t n = feature.size();
        if (threshold.size() != n || left.size() != n || right.size() != n || counts.size() != n)
            throw FormatError("snapshot tree arrays have inconsistent lengths");
        std::vector<TreeNode> nodes(n);
        for (std::size_t i = 0; i < n; ++i) {
            nodes[i].feature = feature[i].get<int>();
            nodes[i].threshold = threshold[i].get<double>();
            nodes[i].left = left[i].get<std::int32_t>();
            nodes[i].right = right[i].get<std::int32_t>();
            nodes[i].class_counts = counts[i].get<std::vector<std::uint32_t>>();
        }
        trees.emplace_back(std::move(nodes), n_features, labels.size());
    }
    RandomForest f(std::move(trees), std::move(labels), n_features);
    if (!j.at("oob_accuracy").is_null()) f.oob_accuracy = j.at("oob_accuracy").get<double>();
    return f;
}

}  // namespace

std::vector<std::string> ModelSnapshot::activities() const {
    if (!activity_forest) return {};
    return activity_forest->label_names();
}

std::string serialize_snapshot(const ModelSnapshot& s) {
    json comps = json::array();
    for (std::size_t c = 0; c < s.gmm.k(); ++c) {
        const auto& comp = s.gmm.components[c];
        json jc = {{"weight", comp.weight}, {"mean", comp.mean}, {"variance", comp.variance}};
        const bool labelled = c < s.gmm.component_pattern.size() && s.gmm.component_pattern[c];
        jc["pattern"] = labelled ? json(*s.gmm.component_pattern[c]) : json(nullptr);
        comps.push_back(std::move(jc));
    }
    json j;
    j["schema_version"] = kSnapshotSchemaVersion;
    j["version"] = s.version;
    j["window"] = {{"window_len", s.window.window_len}, {"step", s.window.step}, {"rate_hz", s.window.rate_hz}};
    j["novelty"] = {{"theta_match", s.novelty.theta_match},
                    {"theta_new", s.novelty.theta_new},
                    {"consecutive_n", s.novelty.consecutive_n},
                    {"collect_target", s.novelty.collect_target}};
    j["seq_len"] = s.seq_len;
    j["gmm"] = {{"dim", s.gmm.dim()}, {"components", comps}};
    j["unit_forest"] = forest_to_json(s.unit_forest);
    j["activity_forest"] = s.activity_forest ? forest_to_json(*s.activity_forest) : json(nullptr);
    return j.dump() + "\n";
}

ModelSnapshot deserialize_snapshot(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("snapshot is not valid JSON: ") + e.what());
    }
    try {
        if (!j.is_object() || !j.contains("schema_version")) throw FormatError("snapshot has no schema_version");
        auto schema = j.at("schema_version").get<int>();
        if (schema > kSnapshotSchemaVersion || schema < 1)
            throw CompatibilityError("snapshot schema version " + std::to_string(schema) +
                                     " is not supported (this build reads version " +
                                     std::to_string(kSnapshotSchemaVersion) + ")");
        ModelSnapshot s;
        s.version = j.at("version").get<std::uint64_t>();
        const auto& w = j.at("window");
        s.window.window_len = w.at("window_len").get<std::size_t>();
        s.window.step = w.at("step").get<std::size_t>();
        s.window.rate_hz = w.at("rate_hz").get<double>();
        s.window.validate();
        const auto& nv = j.at("novelty");
        s.novelty.theta_match = nv.at("theta_match").get<double>();
        s.novelty.theta_new = nv.at("theta_new").get<double>();
        s.novelty.consecutive_n = nv.at("consecutive_n").get<std::size_t>();
        s.novelty.collect_target = nv.at("collect_target").get<std::size_t>();
        s.novelty.validate();
        s.seq_len = j.at("seq_len").get<std::size_t>();
        const auto& g = j.at("gmm");
        for (const auto& jc : g.at("components")) {
            GaussianComponent comp;
            comp.weight = jc.at("weight").get<double>();
            comp.mean = jc.at("mean").get<std::vector<double>>();
            comp.variance = jc.at("variance").get<std::vector<double>>();
            s.gmm.components.push_back(std::move(comp));
            s.gmm.component_pattern.push_back(jc.at("pattern").is_null()
                                                  ? std::nullopt
                                                  : std::optional<std::string>(jc.at("pattern").get<std::string>()));
        }
        if (s.gmm.dim() != g.at("dim").get<std::size_t>()) throw FormatError("snapshot GMM dimension mismatch");
        s.gmm.validate();
        s.unit_forest = forest_from_json(j.at("unit_forest"));
        if (!j.at("activity_forest").is_null()) s.activity_forest = forest_from_json(j.at("activity_forest"));
        return s;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed snapshot: ") + e.what());
    } catch (const ArgumentError& e) {
        throw FormatError(std::string("invalid snapshot: ") + e.what());
    }
}

void save_snapshot(const ModelSnapshot& s, const std::filesystem::path& path) {
    auto text = serialize_snapshot(s);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << text;
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

ModelSnapshot load_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open snapshot " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_snapshot(ss.str());
}

}  // namespace strata
