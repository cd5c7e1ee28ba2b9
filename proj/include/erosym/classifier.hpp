#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "erosym/classical.hpp"
#include "erosym/embedding.hpp"
#include "erosym/error.hpp"
#include "erosym/textcnn.hpp"

namespace erosym {

// A named collection of loaded embedding tables, keyed by table id.
class EmbeddingSet {
public:
    const EmbeddingTable& add(EmbeddingTable table) {
        const std::string id = table.id();
        return tables_.emplace(id, std::move(table)).first->second;
    }

    const EmbeddingTable* find(const std::string& id) const {
        const auto it = tables_.find(id);
        return it == tables_.end() ? nullptr : &it->second;
    }

private:
    std::map<std::string, EmbeddingTable> tables_;
};

struct ClassifierMeta {
    Family family = Family::svm;
    std::uint64_t seed = 42;
    GridPoint grid_point;
    std::string embedding_id;
    std::size_t embedding_dim = 0;
};

struct TrainedClassifier {
    std::variant<LinearSvmModel, LogRegModel, BernoulliNbModel, DecisionTreeModel, KnnModel,
                 TextCnnModel>
        model;
    ClassifierMeta meta;
};

// One item to classify: its preprocessed tokens, plus whatever features
// have been prepared per embedding. A voter picks what it needs by its
// embedding id; doc vectors are computed on demand when only the table is
// available.
struct FeatureInput {
    std::vector<std::string> tokens;
    std::map<std::string, DocVector> docvecs;
    const EmbeddingSet* embeddings = nullptr;
};

inline const std::vector<double>& feature_vector(const TrainedClassifier& clf,
                                                 const FeatureInput& in,
                                                 std::vector<double>& scratch) {
    const auto it = in.docvecs.find(clf.meta.embedding_id);
    if (it != in.docvecs.end()) return it->second.values;
    const EmbeddingTable* table =
        in.embeddings ? in.embeddings->find(clf.meta.embedding_id) : nullptr;
    if (!table)
        throw DataError("classifier needs features for embedding \"" + clf.meta.embedding_id +
                        "\" which the input does not provide");
    scratch = doc_vector(in.tokens, *table).values;
    return scratch;
}

inline Label predict(const TrainedClassifier& clf, const FeatureInput& in) {
    if (const auto* cnn = std::get_if<TextCnnModel>(&clf.model)) {
        const EmbeddingTable* table = nullptr;
        if (cnn->config.embedding_mode == EmbeddingMode::pretrained_frozen) {
            table = in.embeddings ? in.embeddings->find(clf.meta.embedding_id) : nullptr;
            if (!table)
                throw DataError("textcnn voter needs embedding table \"" +
                                clf.meta.embedding_id + "\"");
        }
        const CnnInput cin = make_cnn_input(*cnn, in.tokens, table);
        return predict_cnn(*cnn, cin);
    }
    std::vector<double> scratch;
    const auto& x = feature_vector(clf, in, scratch);
    return std::visit(
        [&](const auto& model) -> Label {
            if constexpr (std::is_same_v<std::decay_t<decltype(model)>, TextCnnModel>)
                return Label::violation; // unreachable
            else
                return predict(model, x);
        },
        clf.model);
}

// ---------------------------------------------------------------------------
// JSON model bundles.
// ---------------------------------------------------------------------------

namespace bundle_detail {

inline constexpr const char* kSchema = "erosym-model-v1";

inline nlohmann::json point_to_json(const GridPoint& p) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : p) j[k] = v;
    return j;
}

inline GridPoint point_from_json(const nlohmann::json& j) {
    GridPoint p;
    for (const auto& [k, v] : j.items()) p.emplace_back(k, v.get<double>());
    return p;
}

} // namespace bundle_detail

inline nlohmann::json to_json(const TrainedClassifier& clf) {
    using nlohmann::json;
    json j;
    j["schema"] = bundle_detail::kSchema;
    j["family"] = to_string(clf.meta.family);
    j["seed"] = clf.meta.seed;
    j["grid_point"] = bundle_detail::point_to_json(clf.meta.grid_point);
    j["embedding"] = {{"id", clf.meta.embedding_id}, {"dim", clf.meta.embedding_dim}};

    json p;
    if (const auto* m = std::get_if<LinearSvmModel>(&clf.model)) {
        p["weights"] = m->weights;
        p["bias"] = m->bias;
        p["c"] = m->c;
    } else if (const auto* m = std::get_if<LogRegModel>(&clf.model)) {
        p["weights"] = m->weights;
        p["bias"] = m->bias;
        p["l2"] = m->l2;
    } else if (const auto* m = std::get_if<BernoulliNbModel>(&clf.model)) {
        p["log_prior"] = m->log_prior;
        p["log_p"] = {m->log_p[0], m->log_p[1]};
        p["log_1mp"] = {m->log_1mp[0], m->log_1mp[1]};
        p["threshold"] = m->binarize_threshold;
        p["alpha"] = m->alpha;
    } else if (const auto* m = std::get_if<DecisionTreeModel>(&clf.model)) {
        p["max_depth"] = m->max_depth;
        p["min_samples_leaf"] = m->min_samples_leaf;
        json nodes = json::array();
        for (const auto& n : m->nodes)
            nodes.push_back({{"f", n.feature},
                             {"t", n.threshold},
                             {"l", n.left},
                             {"r", n.right},
                             {"c", n.counts}});
        p["nodes"] = nodes;
    } else if (const auto* m = std::get_if<KnnModel>(&clf.model)) {
        p["k"] = m->k;
        p["metric"] = m->metric == KnnMetric::euclidean ? "euclidean" : "cosine";
        p["x"] = m->stored_x;
        json y = json::array();
        for (Label l : m->stored_y) y.push_back(to_string(l));
        p["y"] = y;
    } else if (const auto* m = std::get_if<TextCnnModel>(&clf.model)) {
        const auto& c = m->config;
        p["config"] = {{"emb_dim", c.emb_dim},
                       {"filter_sizes", c.filter_sizes},
                       {"filters_per_size", c.filters_per_size},
                       {"dropout_p", c.dropout_p},
                       {"learning_rate", c.learning_rate},
                       {"batch_size", c.batch_size},
                       {"max_epochs", c.max_epochs},
                       {"patience", c.patience},
                       {"max_len", c.max_len},
                       {"embedding_mode", to_string(c.embedding_mode)},
                       {"seed", c.seed}};
        p["vocab"] = m->vocab;
        p["embedding"] = m->embedding;
        p["embedding_id"] = m->embedding_id;
        p["kernels"] = m->kernels;
        p["conv_bias"] = m->conv_bias;
        p["fc_w"] = m->fc_w;
        p["fc_b"] = m->fc_b;
    }
    j["params"] = std::move(p);
    return j;
}

inline TrainedClassifier classifier_from_json(const nlohmann::json& j) {
    if (j.value("schema", std::string{}) != bundle_detail::kSchema)
        throw DataError("not an erosym model bundle (schema mismatch)");
    TrainedClassifier clf;
    clf.meta.family = family_from_string(j.at("family").get<std::string>());
    clf.meta.seed = j.value("seed", std::uint64_t{42});
    clf.meta.grid_point = bundle_detail::point_from_json(j.value("grid_point", nlohmann::json::object()));
    clf.meta.embedding_id = j.at("embedding").value("id", std::string{});
    clf.meta.embedding_dim = j.at("embedding").value("dim", std::size_t{0});

    const auto& p = j.at("params");
    switch (clf.meta.family) {
        case Family::svm: {
            LinearSvmModel m;
            m.weights = p.at("weights").get<std::vector<double>>();
            m.bias = p.at("bias").get<double>();
            m.c = p.at("c").get<double>();
            clf.model = std::move(m);
            break;
        }
        case Family::logreg: {
            LogRegModel m;
            m.weights = p.at("weights").get<std::vector<double>>();
            m.bias = p.at("bias").get<double>();
            m.l2 = p.at("l2").get<double>();
            clf.model = std::move(m);
            break;
        }
        case Family::nb: {
            BernoulliNbModel m;
            const auto prior = p.at("log_prior").get<std::vector<double>>();
            m.log_prior = {prior.at(0), prior.at(1)};
            m.log_p = {p.at("log_p").at(0).get<std::vector<double>>(),
                       p.at("log_p").at(1).get<std::vector<double>>()};
            m.log_1mp = {p.at("log_1mp").at(0).get<std::vector<double>>(),
                         p.at("log_1mp").at(1).get<std::vector<double>>()};
            m.binarize_threshold = p.at("threshold").get<double>();
            m.alpha = p.at("alpha").get<double>();
            clf.model = std::move(m);
            break;
        }
        case Family::dt: {
            DecisionTreeModel m;
            m.max_depth = p.at("max_depth").get<int>();
            m.min_samples_leaf = p.at("min_samples_leaf").get<int>();
            for (const auto& nj : p.at("nodes")) {
                DtNode n;
                n.feature = nj.at("f").get<int>();
                n.threshold = nj.at("t").get<double>();
                n.left = nj.at("l").get<int>();
                n.right = nj.at("r").get<int>();
                const auto c = nj.at("c").get<std::vector<std::uint64_t>>();
                n.counts = {c.at(0), c.at(1)};
                m.nodes.push_back(n);
            }
            if (m.nodes.empty()) throw DataError("decision tree bundle has no nodes");
            clf.model = std::move(m);
            break;
        }
        case Family::knn: {
            KnnModel m;
            m.k = p.at("k").get<int>();
            m.metric = p.at("metric").get<std::string>() == "cosine" ? KnnMetric::cosine
                                                                     : KnnMetric::euclidean;
            m.stored_x = p.at("x").get<std::vector<std::vector<double>>>();
            for (const auto& y : p.at("y"))
                m.stored_y.push_back(label_from_string(y.get<std::string>()));
            clf.model = std::move(m);
            break;
        }
        case Family::textcnn: {
            TextCnnModel m;
            const auto& c = p.at("config");
            m.config.emb_dim = c.at("emb_dim").get<std::size_t>();
            m.config.filter_sizes = c.at("filter_sizes").get<std::vector<std::size_t>>();
            m.config.filters_per_size = c.at("filters_per_size").get<std::size_t>();
            m.config.dropout_p = c.at("dropout_p").get<double>();
            m.config.learning_rate = c.at("learning_rate").get<double>();
            m.config.batch_size = c.at("batch_size").get<std::size_t>();
            m.config.max_epochs = c.at("max_epochs").get<int>();
            m.config.patience = c.at("patience").get<int>();
            m.config.max_len = c.at("max_len").get<std::size_t>();
            m.config.embedding_mode =
                embedding_mode_from_string(c.at("embedding_mode").get<std::string>());
            m.config.seed = c.at("seed").get<std::uint64_t>();
            m.vocab = p.at("vocab").get<std::vector<std::string>>();
            for (std::size_t i = 0; i < m.vocab.size(); ++i) m.vocab_index.emplace(m.vocab[i], i);
            m.embedding = p.at("embedding").get<std::vector<double>>();
            m.embedding_id = p.value("embedding_id", std::string{});
            m.kernels = p.at("kernels").get<std::vector<std::vector<double>>>();
            m.conv_bias = p.at("conv_bias").get<std::vector<std::vector<double>>>();
            m.fc_w = p.at("fc_w").get<std::vector<double>>();
            const auto b = p.at("fc_b").get<std::vector<double>>();
            m.fc_b = {b.at(0), b.at(1)};
            clf.model = std::move(m);
            break;
        }
    }
    return clf;
}

inline void save_bundle(const TrainedClassifier& clf, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model bundle: " + path);
    out << to_json(clf).dump(2) << '\n';
}

inline TrainedClassifier load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model bundle: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed model bundle " + path + ": " + e.what());
    }
    return classifier_from_json(j);
}

} // namespace erosym
